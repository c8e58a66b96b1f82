#include <doctest.h>

#include <asfl/config.hpp>
#include <asfl/coordinator.hpp>
#include <asfl/harness.hpp>
#include <asfl/rb_solver.hpp>
#include <asfl/rng.hpp>
#include <asfl/scenario.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace asfl;

namespace {

RoundContext fresh_ctx(SimState& st, int round) {
    Environment env = draw_environment(st.cfg, round);
    ModelStats stats = compute_model_stats(st.model, st.cfg, st.sample_weights, round);
    return RoundContext(st.cfg, std::move(env.clients), std::move(env.channels), st.prev_cut,
                        std::move(stats));
}

}  // namespace

TEST_CASE("policy names parse and print as inverses") {
    const char* names[] = {"asfl", "max-power", "rand-power", "rand-rb", "fixed-split-2"};
    for (const char* n : names) {
        CAPTURE(n);
        CHECK(BaselinePolicy::parse(n).name() == n);
    }
    CHECK(BaselinePolicy::parse("asfl").kind == PolicyKind::asfl);
    CHECK(BaselinePolicy::parse("max-power").kind == PolicyKind::max_power);
    CHECK(BaselinePolicy::parse("rand-power").kind == PolicyKind::rand_power);
    CHECK(BaselinePolicy::parse("rand-rb").kind == PolicyKind::rand_rb);
    BaselinePolicy fs = BaselinePolicy::parse("fixed-split-4");
    CHECK(fs.kind == PolicyKind::fixed_split);
    CHECK(fs.fixed_cut == 4);

    for (const char* bad : {"bogus", "fixed-split-", "fixed-split-abc", "fixed-split-0",
                            "fixed-split--3", "ASFL", ""}) {
        CAPTURE(bad);
        CHECK_THROWS_WITH_AS(BaselinePolicy::parse(bad),
                             doctest::Contains("unknown baseline"), std::invalid_argument);
    }
}

TEST_CASE("simulation state initializes from the config") {
    ScenarioConfig cfg = make_toy_config();
    SimState st = SimState::init(cfg, BaselinePolicy{});

    CHECK(st.prev_cut == cfg.initial_cut);
    CHECK(st.model.cut() == cfg.initial_cut);
    CHECK(st.model.n_clients() == cfg.n_clients);
    CHECK(st.train_data.size() == cfg.dataset_samples);
    CHECK(st.test_data.size() == cfg.test_samples);
    CHECK(st.train_data.input_dim == cfg.input_dim());
    CHECK(st.train_data.n_classes == cfg.n_classes());
    REQUIRE(st.partitions.size() == static_cast<std::size_t>(cfg.n_clients));
    for (const auto& part : st.partitions)
        CHECK(part.size() == static_cast<std::size_t>(cfg.samples_per_client()));
    CHECK(st.sample_weights ==
          std::vector<double>(cfg.n_clients, double(cfg.samples_per_client())));
    CHECK(st.queues.q == std::vector<double>(cfg.n_clients + 1, 0.0));
    CHECK(st.records.empty());
    CHECK_FALSE(st.have_last_decisions);

    SUBCASE("a fixed split must sit on an admissible boundary") {
        // cut 3 is the full-client boundary of the 3-layer toy model and is
        // disallowed by default; cut 9 does not exist.
        CHECK_THROWS_WITH_AS(SimState::init(cfg, BaselinePolicy::parse("fixed-split-3")),
                             doctest::Contains("allowed boundary"), std::invalid_argument);
        CHECK_THROWS_AS(SimState::init(cfg, BaselinePolicy::parse("fixed-split-9")),
                        std::invalid_argument);
    }
}

TEST_CASE("one solver round is a pure function of its inputs") {
    ScenarioConfig cfg = make_toy_config();
    SimState st = SimState::init(cfg, BaselinePolicy{});
    RoundContext ctx = fresh_ctx(st, 0);

    BcdOutcome a = run_bcd_round(ctx, st.queues, st.policy, 0);
    BcdOutcome b = run_bcd_round(ctx, st.queues, st.policy, 0);
    CHECK(a.decisions.split.cut == b.decisions.split.cut);
    CHECK(a.decisions.rb_counts == b.decisions.rb_counts);
    CHECK(a.decisions.tx_power_w == b.decisions.tx_power_w);  // bit-exact
    CHECK(a.iterations == b.iterations);
    CHECK(a.converged == b.converged);
    CHECK(a.decisions.split.prev_cut == st.prev_cut);
    CHECK(a.iterations >= 1);
}

TEST_CASE("baselines pin exactly their own decision block") {
    ScenarioConfig cfg = make_toy_config();
    SimState st = SimState::init(cfg, BaselinePolicy{});
    RoundContext ctx = fresh_ctx(st, 3);
    const int n = cfg.n_clients;

    SUBCASE("max-power transmits at the cap") {
        BcdOutcome out = run_bcd_round(ctx, st.queues, BaselinePolicy::parse("max-power"), 3);
        CHECK(out.decisions.tx_power_w == std::vector<double>(n, cfg.max_tx_power_w));
    }
    SUBCASE("rand-power draws its powers from the per-round environment stream") {
        BcdOutcome out = run_bcd_round(ctx, st.queues, BaselinePolicy::parse("rand-power"), 3);
        std::mt19937_64 rng = make_stream(cfg.seeds.env, "baseline", 3, 0);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            const double expect = cfg.max_tx_power_w * (1.0 - uni(rng));
            CHECK(out.decisions.tx_power_w[i] == expect);
            CHECK(out.decisions.tx_power_w[i] > 0.0);
            CHECK(out.decisions.tx_power_w[i] <= cfg.max_tx_power_w);
        }
    }
    SUBCASE("rand-rb draws its block grant from the same stream family") {
        BcdOutcome out = run_bcd_round(ctx, st.queues, BaselinePolicy::parse("rand-rb"), 3);
        std::mt19937_64 rng = make_stream(cfg.seeds.env, "baseline", 3, 0);
        CHECK(out.decisions.rb_counts == uniform_count_vector(n, cfg.n_rbs, rng));
    }
    SUBCASE("fixed-split keeps the pinned boundary") {
        BcdOutcome out = run_bcd_round(ctx, st.queues, BaselinePolicy::parse("fixed-split-2"), 3);
        CHECK(out.decisions.split.cut == 2);
    }
}

TEST_CASE("executing a round applies decisions, trains and rolls the queues") {
    ScenarioConfig cfg = load_config(R"({
        "n_clients": 2, "n_rbs": 2, "layer_widths": [8, 16, 16, 4],
        "dataset_samples": 1280, "test_samples": 256, "initial_cut": 2})");
    SimState st = SimState::init(cfg, BaselinePolicy{});
    REQUIRE(st.prev_cut == 2);

    SUBCASE("infeasible decisions fall back and are flagged") {
        RoundContext ctx = fresh_ctx(st, 0);
        BcdOutcome bad;
        bad.decisions.split = SplitDecision{1, 2};  // shrink
        bad.decisions.rb_counts = {0, 2};           // ...with a silent client
        bad.decisions.tx_power_w = {1.0, 1.0};

        RoundRecord& rec = execute_round(st, ctx, bad, 0);
        CHECK(rec.reused_previous);
        // No previous round to reuse: the no-migration default takes over.
        CHECK(rec.decisions.split.cut == 2);
        CHECK(rec.decisions.split.prev_cut == 2);
        CHECK(rec.decisions.rb_counts == std::vector<int>{1, 1});
        CHECK(rec.decisions.tx_power_w == std::vector<double>(2, cfg.max_tx_power_w));
        CHECK(rec.participation == std::vector<char>{1, 1});
        CHECK(st.model.cut() == 2);
        CHECK(st.prev_cut == 2);
        CHECK(st.have_last_decisions);

        // Queues start at zero, so one update leaves max((1-mu) * g, 0).
        REQUIRE(rec.g.size() == st.queues.q.size());
        for (std::size_t j = 0; j < rec.g.size(); ++j) {
            const double expect = std::max((1.0 - cfg.queue_memory) * rec.g[j], 0.0);
            CHECK(st.queues.q[j] == doctest::Approx(expect).epsilon(1e-12));
        }
        CHECK(rec.queues == st.queues.q);

        SUBCASE("with history, the previous round's decisions are reused") {
            RoundContext ctx1 = fresh_ctx(st, 1);
            BcdOutcome bad1;
            bad1.decisions.split = SplitDecision{1, 2};
            bad1.decisions.rb_counts = {0, 2};
            bad1.decisions.tx_power_w = {1.0, 1.0};
            RoundRecord& rec1 = execute_round(st, ctx1, bad1, 1);
            CHECK(rec1.reused_previous);
            CHECK(rec1.decisions.split.cut == 2);
            CHECK(rec1.decisions.rb_counts == rec.decisions.rb_counts);
            CHECK(rec1.decisions.tx_power_w == rec.decisions.tx_power_w);
        }
    }

    SUBCASE("a feasible shrink migrates the model boundary") {
        RoundContext ctx = fresh_ctx(st, 0);
        BcdOutcome bcd;
        bcd.decisions.split = SplitDecision{1, 2};
        bcd.decisions.rb_counts = {1, 1};
        bcd.decisions.tx_power_w = {1.0, 0.8};
        RoundRecord& rec = execute_round(st, ctx, bcd, 0);
        CHECK_FALSE(rec.reused_previous);
        CHECK(st.model.cut() == 1);
        CHECK(st.prev_cut == 1);
        CHECK(rec.decisions.split.prev_cut == 2);
        CHECK(rec.costs.e_migration[0] > 0.0);
    }

    SUBCASE("participation needs a block grant and positive power") {
        RoundContext ctx = fresh_ctx(st, 0);
        BcdOutcome bcd;
        bcd.decisions.split = SplitDecision{2, 2};
        bcd.decisions.rb_counts = {2, 0};
        bcd.decisions.tx_power_w = {0.7, 1.2};
        RoundRecord& rec = execute_round(st, ctx, bcd, 0);
        CHECK(rec.participation == std::vector<char>{1, 0});
        CHECK(rec.costs.e_total[1] == 0.0);
        CHECK(rec.costs.per_error[1] == 1.0);

        RoundContext ctx1 = fresh_ctx(st, 1);
        BcdOutcome bcd1;
        bcd1.decisions.split = SplitDecision{2, 2};
        bcd1.decisions.rb_counts = {1, 1};
        bcd1.decisions.tx_power_w = {0.5, 0.0};
        RoundRecord& rec1 = execute_round(st, ctx1, bcd1, 1);
        CHECK(rec1.participation == std::vector<char>{1, 0});
    }
}

TEST_CASE("full rounds replay bit-identically across runs") {
    ScenarioConfig cfg = make_toy_config();
    for (const char* pname : {"asfl", "rand-power"}) {
        CAPTURE(pname);
        BaselinePolicy policy = BaselinePolicy::parse(pname);
        SimState a = SimState::init(cfg, policy);
        SimState b = SimState::init(cfg, policy);
        for (int r = 0; r < 3; ++r) {
            RoundRecord& ra = run_round(a, r);
            RoundRecord& rb = run_round(b, r);
            CHECK(ra.decisions.split.cut == rb.decisions.split.cut);
            CHECK(ra.decisions.rb_counts == rb.decisions.rb_counts);
            CHECK(ra.decisions.tx_power_w == rb.decisions.tx_power_w);
            CHECK(ra.g_obj_consistent == rb.g_obj_consistent);
            CHECK(ra.queues == rb.queues);
            CHECK(ra.train_loss == rb.train_loss);
            CHECK(ra.participation == rb.participation);
        }
        CHECK(a.records.size() == 3);
    }
}

TEST_CASE("the alternating solver roughly matches a joint brute force") {
    OracleOutcome oc = oracle_joint(2, 80, 0.05, 20260823);
    for (const std::string& line : oc.lines) CAPTURE(line);
    CHECK(oc.pass);
}
