#include <doctest.h>

#include <asfl/config.hpp>
#include <asfl/context.hpp>
#include <asfl/harness.hpp>
#include <asfl/lyapunov.hpp>

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace asfl;

namespace {

ScenarioConfig small_cfg() {
    return load_config(R"({
        "layer_widths": [8, 16, 16, 4],
        "n_clients": 2, "dataset_samples": 200, "test_samples": 20,
        "fading_enabled": false
    })");
}

RoundContext make_ctx(const ScenarioConfig& cfg, int prev_cut) {
    std::vector<ClientProfile> clients(2);
    std::vector<ChannelDraw> channels(2);
    for (int i = 0; i < 2; ++i) {
        clients[i].id = i;
        clients[i].n_samples = 100;
        clients[i].cpu_hz = 1.0e9 + 2e8 * i;
        clients[i].distance_m = 120.0 + 60.0 * i;
        channels[i].path_loss_linear = path_loss_linear(clients[i].distance_m);
        channels[i].fading_gain_sq = 1.0;
        channels[i].gain_sq = channels[i].path_loss_linear;
    }
    ModelStats stats;
    stats.by_cut.resize(3);
    for (int cut = 1; cut <= 3; ++cut) {
        ModelCutStats& s = stats.by_cut[cut - 1];
        s.allowed = cfg.profile.allowed[cut - 1];
        s.client_term = 4.0 / cut;  // deeper client side, lower probe spread
        s.server_avg_norm_sq = 1.0 + 0.2 * cut;
        s.server_norm_sq = {1.1 + 0.2 * cut, 1.3 + 0.2 * cut};
        s.server_inner = {0.9, 1.0};
    }
    return RoundContext(cfg, clients, channels, prev_cut, stats);
}

}  // namespace

TEST_CASE("virtual queue update applies decay, slack, and the floor at zero") {
    VirtualQueueState st;
    st.q = {1.0, 5.0};
    st.queue_memory = 0.5;
    st.penalty_weight = 10.0;

    queue_update(st, {-10.0, 1.0});
    REQUIRE(st.q.size() == 2);
    CHECK(st.q[0] == doctest::Approx(0.0));  // 0.5*1 + 0.5*(-10) clamps at zero
    CHECK(st.q[1] == doctest::Approx(3.0));  // 0.5*5 + 0.5*1
    REQUIRE(st.g_history.size() == 1);
    REQUIRE(st.q_history.size() == 1);
    CHECK(st.g_history[0] == std::vector<double>{-10.0, 1.0});
    CHECK(st.q_history[0] == st.q);

    queue_update(st, {4.0, -6.0});
    CHECK(st.q[0] == doctest::Approx(2.0));
    CHECK(st.q[1] == doctest::Approx(0.0));
    CHECK(st.g_history.size() == 2);

    CHECK_THROWS_AS(queue_update(st, {1.0}), std::invalid_argument);
}

TEST_CASE("queue state initializes to zeros with the configured knobs") {
    ScenarioConfig cfg = load_config(R"({"queue_memory": 0.3, "penalty_weight": 2.5})");
    VirtualQueueState st = VirtualQueueState::init(cfg);
    REQUIRE(st.q.size() == 11);  // delay plus ten client energies
    for (double q : st.q) CHECK(q == 0.0);
    CHECK(st.queue_memory == doctest::Approx(0.3));
    CHECK(st.penalty_weight == doctest::Approx(2.5));
    CHECK(st.g_history.empty());
    CHECK(st.q_history.empty());
}

TEST_CASE("drift and drift-plus-penalty reproduce the worked scalar example") {
    // Q = (2), mu = 0.5, g = (4): Q' = 3, drift = (9 - 4)/2 = 2.5;
    // with V = 1 and g_obj = 7 the score is 9.5.
    VirtualQueueState st;
    st.q = {2.0};
    st.queue_memory = 0.5;
    st.penalty_weight = 1.0;

    CHECK(drift_value(st, {4.0}) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(drift_plus_penalty(st, {4.0}, 7.0) == doctest::Approx(9.5).epsilon(1e-15));

    // Scoring must not mutate the state.
    CHECK(st.q[0] == 2.0);
    CHECK(st.g_history.empty());

    SUBCASE("penalty weight scales the objective term only") {
        st.penalty_weight = 10.0;
        CHECK(drift_plus_penalty(st, {4.0}, 7.0) == doctest::Approx(2.5 + 70.0));
    }
}

TEST_CASE("split search scans admissible cuts and matches a hand brute force") {
    ScenarioConfig cfg = small_cfg();
    RoundContext ctx = make_ctx(cfg, 1);
    VirtualQueueState st = VirtualQueueState::init(cfg);
    st.q = {3.0, 0.5, 1.0};
    std::vector<int> rb_counts{4, 4};
    std::vector<double> powers{1.0, 0.8};

    SplitChoice got = solve_split(ctx, st, rb_counts, powers);

    // Independent scan over cuts 1..2 (cut 3 is masked off).
    int best_cut = 0;
    double best_dpp = 0.0;
    int evaluated = 0;
    for (int cut = 1; cut <= 2; ++cut) {
        RoundDecisions dec;
        dec.split.cut = cut;
        dec.split.prev_cut = 1;
        dec.rb_counts = rb_counts;
        dec.tx_power_w = powers;
        DecisionEval ev = ctx.evaluate(dec);
        REQUIRE(ev.structurally_feasible);
        double dpp = drift_plus_penalty(st, ev.g, ev.g_obj(cfg.objective_mode));
        ++evaluated;
        if (best_cut == 0 || dpp < best_dpp) {
            best_cut = cut;
            best_dpp = dpp;
        }
    }
    CHECK(got.cut == best_cut);
    CHECK(got.dpp == doctest::Approx(best_dpp).epsilon(1e-12));
    CHECK(got.evaluated == evaluated);
    CHECK(got.any_feasible);

    SUBCASE("shrink candidates are skipped when a client holds no blocks") {
        // From prev_cut 3 every admissible cut is a shrink; with client 0
        // sidelined no candidate is evaluable.
        RoundContext stuck = make_ctx(cfg, 3);
        std::vector<int> sidelined{0, 4};
        CHECK_THROWS_AS(solve_split(stuck, st, sidelined, powers), std::runtime_error);
    }

    SUBCASE("full brute-force cross-check over random profiles") {
        OracleOutcome oc = oracle_split(4, 10, 20250823);
        for (const std::string& line : oc.lines) CAPTURE(line);
        CHECK(oc.pass);
    }
}

TEST_CASE("stability report recomputes envelopes, queue bounds and averages") {
    ScenarioConfig cfg = load_config(R"({
        "n_clients": 2, "dataset_samples": 200, "test_samples": 20,
        "queue_memory": 0.5
    })");
    VirtualQueueState st = VirtualQueueState::init(cfg);
    EnvelopeTracker env;

    RoundCosts costs;
    costs.t_total = 30.0;
    costs.e_total = {1.0, 0.4};
    env.observe(costs);
    costs.t_total = 12.0;
    costs.e_total = {0.2, 0.9};
    env.observe(costs);
    CHECK(env.t_max == doctest::Approx(30.0));
    CHECK(env.e_max == doctest::Approx(1.0));

    queue_update(st, {10.0, 0.5, -0.1});
    queue_update(st, {-8.0, 0.2, 0.3});
    queue_update(st, {2.0, -0.4, 0.1});

    StabilityReport rep = stability_check(st, cfg, env);
    CHECK(rep.rounds == 3);
    CHECK(rep.t_max_observed == doctest::Approx(30.0));
    CHECK(rep.t_max == doctest::Approx(31.5));  // 5% inflation
    CHECK(rep.e_max == doctest::Approx(1.05));

    // G1 = max(gamma^2, (t_max - gamma)^2) with gamma = 20 -> 400.
    CHECK(rep.g1 == doctest::Approx(400.0));
    // G2 = max(delta^2, (e_max - delta)^2) with delta = 0.5 -> 0.3025.
    CHECK(rep.g2 == doctest::Approx(0.3025));

    CHECK(rep.delay_queue.bound == doctest::Approx(20.0));
    double worst_q0 = 0.0;
    for (const auto& q : st.q_history) worst_q0 = std::max(worst_q0, q[0]);
    CHECK(rep.delay_queue.worst_observed == doctest::Approx(worst_q0));
    CHECK(rep.delay_queue.ok);

    CHECK(rep.energy_queues.bound == doctest::Approx(std::sqrt(0.3025)));
    CHECK(rep.energy_queues.ok);

    // Time averages: mean slack vs (1 + 1/((1-mu)R)) * sqrt(G).
    const double factor = 1.0 + 1.0 / ((1.0 - 0.5) * 3.0);
    CHECK(rep.delay_average.average == doctest::Approx((10.0 - 8.0 + 2.0) / 3.0));
    CHECK(rep.delay_average.bound == doctest::Approx(factor * 20.0));
    CHECK(rep.delay_average.ok);
    const double worst_energy_mean =
        std::max((0.5 + 0.2 - 0.4) / 3.0, (-0.1 + 0.3 + 0.1) / 3.0);
    CHECK(rep.energy_average.average == doctest::Approx(worst_energy_mean));
    CHECK(rep.energy_average.ok);

    CHECK_FALSE(rep.time_average_skipped);
    // Drift-bound constant (1 - mu)^2 (G1 + N G2) / 2.
    CHECK(rep.drift_bound_w == doctest::Approx(0.25 * (400.0 + 2.0 * 0.3025) / 2.0));
    CHECK(rep.all_ok);

    SUBCASE("queue overshoot beyond the envelope bound is flagged") {
        EnvelopeTracker tiny;
        RoundCosts small;
        small.t_total = 1.0;
        small.e_total = {0.01, 0.01};
        tiny.observe(small);
        VirtualQueueState hot = VirtualQueueState::init(cfg);
        for (int r = 0; r < 8; ++r) queue_update(hot, {120.0, 0.0, 0.0});
        StabilityReport bad = stability_check(hot, cfg, tiny);
        CHECK_FALSE(bad.delay_queue.ok);
        CHECK_FALSE(bad.all_ok);
    }

    SUBCASE("memory one disables the diverging time-average bound") {
        ScenarioConfig frozen = load_config(R"({
            "n_clients": 2, "dataset_samples": 200, "test_samples": 20,
            "queue_memory": 1.0
        })");
        VirtualQueueState still = VirtualQueueState::init(frozen);
        queue_update(still, {1.0, 0.0, 0.0});
        StabilityReport rep2 = stability_check(still, frozen, env);
        CHECK(rep2.time_average_skipped);
        CHECK_FALSE(rep2.skip_reason.empty());
    }
}

TEST_CASE("stability report serializes to parseable json") {
    ScenarioConfig cfg = load_config(R"({"n_clients": 2, "dataset_samples": 200, "test_samples": 20})");
    VirtualQueueState st = VirtualQueueState::init(cfg);
    EnvelopeTracker env;
    RoundCosts costs;
    costs.t_total = 5.0;
    costs.e_total = {0.1, 0.2};
    env.observe(costs);
    queue_update(st, {1.0, 0.1, 0.2});

    StabilityReport rep = stability_check(st, cfg, env);
    nlohmann::json j = nlohmann::json::parse(stability_report_to_json(rep));
    CHECK(j["rounds"] == 1);
    CHECK(j["all_ok"] == rep.all_ok);
    CHECK(j["g1"].get<double>() == doctest::Approx(rep.g1));
    CHECK(j["delay_queue"]["bound"].get<double>() == doctest::Approx(rep.delay_queue.bound));
    CHECK(j["energy_queues"]["ok"] == rep.energy_queues.ok);
    CHECK(j["delay_average"]["bound"].get<double>() == doctest::Approx(rep.delay_average.bound));
    CHECK(j.contains("drift_bound_w"));
}
