#include <doctest.h>

#include <asfl/config.hpp>
#include <asfl/radio.hpp>

#include <cmath>
#include <stdexcept>

using namespace asfl;

namespace {

LinkState make_link(double gain_sq, int rbs, double power_w) {
    LinkState link;
    link.channel.path_loss_linear = gain_sq;
    link.channel.fading_gain_sq = 1.0;
    link.channel.gain_sq = gain_sq;
    link.rb_count = rbs;
    link.tx_power_w = power_w;
    return link;
}

}  // namespace

TEST_CASE("uplink rate reproduces the frozen single-block reference") {
    ScenarioConfig cfg = default_config();
    LinkState link = make_link(1e-12, 1, 1.5);

    // Independent recomputation: B*log2(1 + p*g/(B*N0)) at B=1 MHz, p=1.5 W,
    // g=1e-12, N0 = dBm->W(-173) per Hz.
    const double n0 = 5.011872336272722e-21;
    const double snr = 1.5 * 1e-12 / (1e6 * n0);
    const double expected = 1e6 * std::log2(1.0 + snr);
    CHECK(uplink_rate(link, cfg) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(uplink_rate(link, cfg) == doctest::Approx(8230209.486).epsilon(1e-9));
    // Four-significant-digit rounding used by the worked example.
    CHECK(uplink_rate(link, cfg) == doctest::Approx(8.2305e6).epsilon(1e-3));
}

TEST_CASE("pooled resource blocks scale the uplink rate linearly") {
    // The per-block SNR uses the per-block bandwidth, so k blocks give exactly
    // k times the single-block rate.
    ScenarioConfig cfg = default_config();
    const double r1 = uplink_rate(make_link(3e-13, 1, 0.8), cfg);
    for (int k = 2; k <= 8; ++k) {
        CHECK(uplink_rate(make_link(3e-13, k, 0.8), cfg) ==
              doctest::Approx(k * r1).epsilon(1e-12));
    }
}

TEST_CASE("uplink rate rejects inactive links") {
    ScenarioConfig cfg = default_config();
    CHECK_THROWS_AS(uplink_rate(make_link(1e-12, 0, 1.0), cfg), std::invalid_argument);
    CHECK_THROWS_AS(uplink_rate(make_link(1e-12, 1, 0.0), cfg), std::invalid_argument);
    CHECK_THROWS_AS(uplink_rate(make_link(1e-12, 1, -0.5), cfg), std::invalid_argument);
}

TEST_CASE("downlink rate uses the dedicated band at server power") {
    ScenarioConfig cfg = default_config();
    LinkState link = make_link(1e-12, 0, 0.0);  // decision variables irrelevant downstream

    const double n0 = 5.011872336272722e-21;
    const double expected = 8e6 * std::log2(1.0 + 5.0 * 1e-12 / (8e6 * n0));
    CHECK(downlink_rate(link, cfg) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(downlink_rate(link, cfg) == doctest::Approx(55791084.31).epsilon(1e-9));
}

TEST_CASE("frozen packet error rate matches the waterfall closed form") {
    ScenarioConfig cfg = default_config();
    LinkState link = make_link(1e-12, 1, 1.5);

    const double n0 = 5.011872336272722e-21;
    const double exponent = 1.0 * 1e6 * n0 * 1 / (1.5 * 1e-12);
    const double expected = 1.0 - std::exp(-exponent);
    CHECK(packet_error_rate(link, cfg, ErrorModel::frozen) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(packet_error_rate(link, cfg, ErrorModel::frozen) ==
          doctest::Approx(3.3357e-3).epsilon(1e-4));

    SUBCASE("holding no blocks or no power means certain loss") {
        CHECK(packet_error_rate(make_link(1e-12, 0, 1.5), cfg, ErrorModel::frozen) == 1.0);
        CHECK(packet_error_rate(make_link(1e-12, 1, 0.0), cfg, ErrorModel::frozen) == 1.0);
        CHECK(packet_error_rate(make_link(1e-12, 0, 1.5), cfg, ErrorModel::expectation) == 1.0);
    }

    SUBCASE("error grows with pooled blocks and shrinks with power") {
        double base = packet_error_rate(make_link(1e-12, 2, 1.0), cfg, ErrorModel::frozen);
        CHECK(packet_error_rate(make_link(1e-12, 4, 1.0), cfg, ErrorModel::frozen) > base);
        CHECK(packet_error_rate(make_link(1e-12, 2, 1.4), cfg, ErrorModel::frozen) < base);
        CHECK(packet_error_rate(make_link(2e-12, 2, 1.0), cfg, ErrorModel::frozen) < base);
    }

    SUBCASE("frozen model uses the realized gain, not the mean") {
        LinkState faded = make_link(1e-12, 1, 1.5);
        faded.channel.fading_gain_sq = 0.5;
        faded.channel.gain_sq = 0.5e-12;
        CHECK(packet_error_rate(faded, cfg, ErrorModel::frozen) ==
              doctest::Approx(1.0 - std::exp(-2.0 * exponent)).epsilon(1e-12));
    }
}

TEST_CASE("expected packet error rate averages the waterfall over fading") {
    ScenarioConfig cfg = default_config();
    LinkState link = make_link(4e-13, 3, 1.2);
    link.channel.path_loss_linear = 4e-13;  // expectation keys off the mean gain
    link.channel.fading_gain_sq = 0.123;    // ignored by the expectation model
    link.channel.gain_sq = 4e-13 * 0.123;

    const double c = cfg.waterfall_threshold * cfg.rb_bandwidth_hz *
                     cfg.noise_psd_w_per_hz * 3 / 1.2;
    const double expected = 1.0 - fading_expectation(c, 4e-13);
    CHECK(packet_error_rate(link, cfg, ErrorModel::expectation) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fading expectation matches the Bessel identity") {
    // Reference values of 2*sqrt(rho)*K1(2*sqrt(rho)) computed with 30-digit
    // arithmetic.
    struct Ref {
        double rho;
        double value;
    };
    const Ref refs[] = {
        {1e-6, 0.999986338913191}, {1e-3, 0.993242548631558},
        {1e-2, 0.955194508644094}, {1.0, 0.279731763633045},
        {10.0, 0.00596769303882051}, {1e3, 3.41928375725747e-27},
    };
    for (const Ref& r : refs) {
        CAPTURE(r.rho);
        CHECK(fading_expectation(r.rho, 1.0) == doctest::Approx(r.value).epsilon(1e-10));
        if (r.value > 1e-20) {
            CHECK(fading_expectation_bessel(r.rho, 1.0) ==
                  doctest::Approx(r.value).epsilon(1e-10));
        }
    }

    SUBCASE("quadrature and Bessel paths agree to 1e-8 across the sweep") {
        for (int i = 0; i <= 120; ++i) {
            double rho = std::pow(10.0, -6.0 + 9.0 * i / 120.0);
            double q = fading_expectation(rho, 1.0);
            double b = fading_expectation_bessel(rho, 1.0);
            CAPTURE(rho);
            CHECK(std::abs(q - b) <= 1e-8);
        }
    }

    SUBCASE("expectation depends only on the ratio c / mean") {
        CHECK(fading_expectation(2e-3, 0.5) ==
              doctest::Approx(fading_expectation(4e-3, 1.0)).epsilon(1e-12));
        CHECK(fading_expectation(2e-3, 0.5) ==
              doctest::Approx(0.978476904327727).epsilon(1e-10));
    }

    SUBCASE("boundary behavior") {
        CHECK(fading_expectation(0.0, 1.0) == 1.0);
        CHECK(fading_expectation(1e7, 1.0) == 0.0);  // deep waterfall saturates
        double prev = 1.0;
        for (double rho : {1e-4, 1e-2, 1.0, 100.0}) {
            double v = fading_expectation(rho, 1.0);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("monte carlo estimate of the fading expectation is consistent") {
    double se = 0.0;
    double mc = fading_expectation_mc(1.0, 1.0, 200000, 987, &se);
    CHECK(se > 0.0);
    CHECK(se < 0.002);
    CHECK(std::abs(mc - 0.279731763633045) <= 4.0 * se);

    // Replayable under the same seed.
    double se2 = 0.0;
    CHECK(fading_expectation_mc(1.0, 1.0, 200000, 987, &se2) == mc);
    CHECK(se2 == se);
    CHECK(fading_expectation_mc(1.0, 1.0, 200000, 988, nullptr) != mc);
}
