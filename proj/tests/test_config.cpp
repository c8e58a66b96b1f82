#include <doctest.h>

#include <asfl/config.hpp>
#include <asfl/units.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

using namespace asfl;

namespace {

// Builds a config from an inline JSON patch applied on top of the defaults.
ScenarioConfig patched(const char* patch) {
    return load_config(patch);
}

}  // namespace

TEST_CASE("default scenario matches the documented system constants") {
    ScenarioConfig cfg = default_config();
    CHECK(cfg.n_clients == 10);
    CHECK(cfg.n_rounds == 200);
    CHECK(cfg.n_rbs == 8);
    CHECK(cfg.rb_bandwidth_hz == doctest::Approx(1e6));
    CHECK(cfg.downlink_bandwidth_hz == doctest::Approx(8e6));
    CHECK(cfg.noise_psd_dbm_per_hz == doctest::Approx(-173.0));
    // -173 dBm/Hz converted to linear watts per hertz.
    CHECK(cfg.noise_psd_w_per_hz == doctest::Approx(5.011872336272722e-21).epsilon(1e-14));
    CHECK(cfg.waterfall_threshold == doctest::Approx(1.0));
    CHECK(cfg.max_tx_power_w == doctest::Approx(1.5));
    CHECK(cfg.server_tx_power_w == doctest::Approx(5.0));
    CHECK(cfg.coverage_radius_m == doctest::Approx(500.0));
    CHECK(cfg.fading_enabled);
    CHECK(cfg.server_cpu_hz == doctest::Approx(1e10));
    CHECK(cfg.server_cycles_per_flop == doctest::Approx(1.0 / 32.0));
    CHECK(cfg.client_cycles_per_flop == doctest::Approx(1.0 / 16.0));
    CHECK(cfg.cpu_freq_min_hz == doctest::Approx(1e9));
    CHECK(cfg.cpu_freq_max_hz == doctest::Approx(1.6e9));
    CHECK(cfg.energy_coeff == doctest::Approx(1e-28));
    CHECK(cfg.delay_budget_s == doctest::Approx(20.0));
    CHECK(cfg.energy_budget_j == doctest::Approx(0.5));
    CHECK(cfg.sampling_ratio == doctest::Approx(0.05));
    CHECK(cfg.queue_memory == doctest::Approx(0.5));
    CHECK(cfg.penalty_weight == doctest::Approx(10.0));
    CHECK(cfg.solver_tol_outer == doctest::Approx(0.01));
    CHECK(cfg.solver_tol_power == doctest::Approx(0.01));
    CHECK(cfg.bcd_max_outer == 20);
    CHECK(cfg.power_max_iters == 50);
    CHECK(cfg.rb_exact_budget == 1000000);
    CHECK_FALSE(cfg.random_aux_init);
    CHECK(cfg.objective_mode == ObjectiveMode::consistent);
    CHECK(cfg.layer_widths == std::vector<int>{8, 32, 32, 32, 32, 32, 4});
    CHECK(cfg.dataset_samples == 64000);
    CHECK(cfg.test_samples == 2000);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.learning_rate == doctest::Approx(1e-4));
    CHECK(cfg.dirichlet_alpha == doctest::Approx(10.0));
    CHECK(cfg.mixture_spread == doctest::Approx(1.5));
    CHECK(cfg.mixture_sigma == doctest::Approx(0.6));
    CHECK(cfg.initial_cut == 2);
    CHECK_FALSE(cfg.allow_full_client_cut);
    CHECK_FALSE(cfg.redraw_positions_per_round);
    CHECK(cfg.weight_snapshot_every == 0);
    CHECK(cfg.seeds.env == 1);
    CHECK(cfg.seeds.data == 2);
    CHECK(cfg.seeds.model == 3);
    CHECK(cfg.seeds.sampling == 4);
    CHECK(cfg.samples_per_client() == 6400);
    CHECK(cfg.input_dim() == 8);
    CHECK(cfg.n_classes() == 4);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("layer profile derives sizes, activations and flop counts from widths") {
    LayerProfile prof = profile_from_widths({8, 32, 32, 32, 32, 32, 4}, false);
    REQUIRE(prof.layers() == 6);

    // First layer: 8 -> 32. Weights 8*32 + biases 32, 32 bits per parameter.
    CHECK(prof.size_bits[0] == doctest::Approx(32.0 * (8 * 32 + 32)));
    CHECK(prof.output_bits[0] == doctest::Approx(32.0 * 32));
    CHECK(prof.flops_fp[0] == doctest::Approx(2.0 * 8 * 32));
    CHECK(prof.flops_bp[0] == doctest::Approx(4.0 * 8 * 32));
    // Final layer: 32 -> 4.
    CHECK(prof.size_bits[5] == doctest::Approx(32.0 * (32 * 4 + 4)));
    CHECK(prof.output_bits[5] == doctest::Approx(32.0 * 4));
    CHECK(prof.flops_fp[5] == doctest::Approx(2.0 * 32 * 4));
    CHECK(prof.flops_bp[5] == doctest::Approx(4.0 * 32 * 4));

    // All interior cuts admissible, full-client cut disabled by default.
    for (int i = 0; i + 1 < 6; ++i) CHECK(prof.allowed[i]);
    CHECK_FALSE(prof.allowed[5]);
    LayerProfile full = profile_from_widths({8, 32, 32, 32, 32, 32, 4}, true);
    CHECK(full.allowed[5]);

    SUBCASE("client/server flop split is complementary at every cut") {
        double total_fp = prof.fp_client(6);
        double total_bp = prof.bp_client(6);
        for (int cut = 1; cut <= 6; ++cut) {
            CHECK(prof.fp_client(cut) + prof.fp_server(cut) == doctest::Approx(total_fp));
            CHECK(prof.bp_client(cut) + prof.bp_server(cut) == doctest::Approx(total_bp));
            double manual = 0.0;
            for (int m = 0; m < cut; ++m) manual += prof.flops_fp[m];
            CHECK(prof.fp_client(cut) == doctest::Approx(manual));
        }
    }

    SUBCASE("cut payload sizes follow the layer boundary") {
        // Uplink activation width at the cut is the output of the last client layer.
        CHECK(prof.cut_output_bits(1) == doctest::Approx(prof.output_bits[0]));
        CHECK(prof.cut_output_bits(5) == doctest::Approx(prof.output_bits[4]));
        CHECK(prof.cut_output_bits(6) == doctest::Approx(0.0));
        // Gradient downlink payload matches the first server layer's parameters.
        CHECK(prof.grad_downlink_bits(1) == doctest::Approx(prof.size_bits[1]));
        CHECK(prof.grad_downlink_bits(6) == doctest::Approx(0.0));
    }

    SUBCASE("migration payload is symmetric and vanishes for equal cuts") {
        CHECK(prof.migration_bits(2, 2) == doctest::Approx(0.0));
        CHECK(prof.migration_bits(1, 4) == doctest::Approx(prof.migration_bits(4, 1)));
        double manual = prof.size_bits[1] + prof.size_bits[2] + prof.size_bits[3];
        CHECK(prof.migration_bits(1, 4) == doctest::Approx(manual));
    }
}

TEST_CASE("json round trip reproduces the configuration exactly") {
    ScenarioConfig cfg = patched(R"({
        "n_clients": 7, "n_rbs": 5, "queue_memory": 0.25,
        "objective_mode": "verbatim",
        "layer_widths": [4, 16, 16, 2],
        "dataset_samples": 1400, "test_samples": 140,
        "seeds": {"env": 11, "data": 12, "model": 13, "sampling": 14}
    })");
    std::string dumped = config_to_json(cfg);
    ScenarioConfig back = load_config(dumped);
    CHECK(config_to_json(back) == dumped);
    CHECK(back.n_clients == 7);
    CHECK(back.objective_mode == ObjectiveMode::verbatim);
    CHECK(back.seeds.env == 11);
    CHECK(back.seeds.sampling == 14);
    CHECK(back.profile.layers() == 3);
    CHECK(back.noise_psd_w_per_hz == doctest::Approx(5.011872336272722e-21).epsilon(1e-14));
}

TEST_CASE("load_config accepts inline json or a file path") {
    ScenarioConfig inline_cfg = patched(R"({"n_clients": 4, "dataset_samples": 6400, "test_samples": 400})");
    CHECK(inline_cfg.n_clients == 4);
    CHECK(inline_cfg.samples_per_client() == 1600);

    std::string path = "test_config_tmp.json";
    {
        std::ofstream out(path);
        out << R"({"n_rbs": 3})";
    }
    ScenarioConfig file_cfg = load_config(path);
    CHECK(file_cfg.n_rbs == 3);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_config("no_such_file_here.json"), ConfigError);
    CHECK(load_config("{}").n_clients == default_config().n_clients);
}

TEST_CASE("unknown or malformed configuration input is rejected") {
    CHECK_THROWS_WITH_AS(load_config(R"({"bogus_key": 1})"),
                         doctest::Contains("unknown config key: bogus_key"), ConfigError);
    CHECK_THROWS_AS(load_config(R"({"n_clients": "ten"})"), ConfigError);
    CHECK_THROWS_WITH_AS(load_config(R"({"seeds": {"foo": 9}})"),
                         doctest::Contains("unknown seed stream: foo"), ConfigError);
    CHECK_THROWS_WITH_AS(load_config(R"({"objective_mode": "fancy"})"),
                         doctest::Contains("objective_mode"), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
    auto expect_invalid = [](const char* patch, const char* needle) {
        CAPTURE(patch);
        CHECK_THROWS_WITH_AS(load_config(patch), doctest::Contains(needle), ConfigError);
    };
    expect_invalid(R"({"n_clients": 0})", "n_clients");
    expect_invalid(R"({"sampling_ratio": 0.0})", "sampling_ratio");
    expect_invalid(R"({"sampling_ratio": 1.5})", "sampling_ratio");
    expect_invalid(R"({"queue_memory": 1.5})", "queue_memory");
    expect_invalid(R"({"queue_memory": -0.1})", "queue_memory");
    expect_invalid(R"({"initial_cut": 7})", "initial_cut");
    expect_invalid(R"({"layer_widths": [8]})", "layer_widths");
    expect_invalid(R"({"max_tx_power_w": 0})", "max_tx_power_w");
    expect_invalid(R"({"n_rbs": 0})", "n_rbs");
    expect_invalid(R"({"batch_size": 0})", "batch_size");
}

TEST_CASE("initial_cut must be admissible under the allowed-cut mask") {
    CHECK_THROWS_WITH_AS(patched(R"({"initial_cut": 6})"),
                         doctest::Contains("admissible"), ConfigError);
    ScenarioConfig ok = patched(R"({"initial_cut": 6, "allow_full_client_cut": true})");
    CHECK(ok.initial_cut == 6);
    CHECK(ok.profile.allowed.back());
}

TEST_CASE("command line overrides parse json literals and bare strings") {
    ScenarioConfig cfg = default_config();
    apply_override(cfg, "n_rbs=12");
    CHECK(cfg.n_rbs == 12);
    apply_override(cfg, "queue_memory=0.75");
    CHECK(cfg.queue_memory == doctest::Approx(0.75));
    apply_override(cfg, "seeds.env=99");
    CHECK(cfg.seeds.env == 99);
    CHECK(cfg.seeds.data == 2);  // untouched
    apply_override(cfg, "objective_mode=verbatim");  // bare string accepted
    CHECK(cfg.objective_mode == ObjectiveMode::verbatim);
    apply_override(cfg, "initial_cut=1");
    apply_override(cfg, "layer_widths=[4,8,2]");
    CHECK(cfg.profile.layers() == 2);  // profile re-derived
    CHECK(cfg.layer_widths == std::vector<int>{4, 8, 2});

    CHECK_THROWS_AS(apply_override(cfg, "unknown_thing=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), ConfigError);
}

TEST_CASE("explicit layer profile overrides the derived one") {
    nlohmann::json j = nlohmann::json::parse(config_to_json(default_config()));
    j["layer_widths"] = {4, 8, 2};
    j["initial_cut"] = 1;
    j["profile_size_bits"] = {100.0, 50.0};
    j["profile_output_bits"] = {64.0, 16.0};
    j["profile_flops_fp"] = {10.0, 5.0};
    j["profile_flops_bp"] = {20.0, 10.0};
    j["profile_allowed_cuts"] = {1, 0};
    ScenarioConfig cfg2 = load_config(j.dump());
    CHECK(cfg2.profile.size_bits == std::vector<double>{100.0, 50.0});
    CHECK(cfg2.profile.flops_bp[1] == doctest::Approx(10.0));
    CHECK_FALSE(cfg2.profile.allowed[1]);

    SUBCASE("explicit profile length must match the width chain") {
        nlohmann::json bad = j;
        bad["profile_size_bits"] = {100.0, 50.0, 25.0};
        CHECK_THROWS_WITH_AS(load_config(bad.dump()),
                             doctest::Contains("layer profile"), ConfigError);
    }
}

TEST_CASE("unit conversion helpers are exact at reference points") {
    CHECK(dbm_to_watt(0.0) == doctest::Approx(1e-3));
    CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0));
    CHECK(dbm_to_watt(-173.0) == doctest::Approx(5.011872336272722e-21).epsilon(1e-14));
    CHECK(db_to_linear(0.0) == doctest::Approx(1.0));
    CHECK(db_to_linear(-30.0) == doctest::Approx(1e-3));
    CHECK(watt_to_dbm(dbm_to_watt(-97.5)) == doctest::Approx(-97.5));
}
