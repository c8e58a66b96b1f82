#include <doctest.h>

#include <asfl/config.hpp>
#include <asfl/rng.hpp>
#include <asfl/scenario.hpp>
#include <asfl/units.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace asfl;

TEST_CASE("derived random streams are deterministic and isolated by key") {
    auto a1 = make_stream(42, "alpha", 3, 7);
    auto a2 = make_stream(42, "alpha", 3, 7);
    CHECK(a1() == a2());
    CHECK(a1() == a2());

    // Any change to seed, tag or subscripts produces a different stream.
    auto base = make_stream(42, "alpha", 3, 7);
    auto diff_seed = make_stream(43, "alpha", 3, 7);
    auto diff_tag = make_stream(42, "beta", 3, 7);
    auto diff_a = make_stream(42, "alpha", 4, 7);
    auto diff_b = make_stream(42, "alpha", 3, 8);
    std::uint64_t v = base();
    CHECK(v != diff_seed());
    CHECK(v != diff_tag());
    CHECK(v != diff_a());
    CHECK(v != diff_b());
}

TEST_CASE("path loss follows the log-distance law with a 1 m clamp") {
    CHECK(path_loss_linear(1.0) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(path_loss_linear(0.5) == doctest::Approx(path_loss_linear(1.0)));
    CHECK(path_loss_linear(10.0) == doctest::Approx(db_to_linear(-70.0)).epsilon(1e-12));
    CHECK(path_loss_linear(100.0) == doctest::Approx(db_to_linear(-110.0)).epsilon(1e-12));
    // Strictly decreasing beyond the clamp.
    CHECK(path_loss_linear(200.0) > path_loss_linear(300.0));
}

TEST_CASE("environment draws are deterministic and respect configured ranges") {
    ScenarioConfig cfg = default_config();
    Environment e1 = draw_environment(cfg, 0);
    Environment e2 = draw_environment(cfg, 0);
    REQUIRE(e1.clients.size() == 10);
    REQUIRE(e1.channels.size() == 10);

    for (std::size_t i = 0; i < e1.clients.size(); ++i) {
        const ClientProfile& c = e1.clients[i];
        CHECK(c.id == static_cast<int>(i));
        CHECK(c.n_samples == cfg.samples_per_client());
        CHECK(c.cpu_hz >= cfg.cpu_freq_min_hz);
        CHECK(c.cpu_hz <= cfg.cpu_freq_max_hz);
        CHECK(c.distance_m >= 0.0);
        CHECK(c.distance_m <= cfg.coverage_radius_m);
        // Bit-identical across calls.
        CHECK(c.cpu_hz == e2.clients[i].cpu_hz);
        CHECK(c.distance_m == e2.clients[i].distance_m);
        // Channel mean gain matches the client's distance.
        CHECK(e1.channels[i].path_loss_linear ==
              doctest::Approx(path_loss_linear(c.distance_m)).epsilon(1e-12));
        CHECK(e1.channels[i].gain_sq ==
              doctest::Approx(e1.channels[i].path_loss_linear * e1.channels[i].fading_gain_sq)
                  .epsilon(1e-12));
        CHECK(e1.channels[i].fading_gain_sq == e2.channels[i].fading_gain_sq);
        CHECK(e1.channels[i].fading_gain_sq > 0.0);
    }
}

TEST_CASE("fading is redrawn per round while the static environment persists") {
    ScenarioConfig cfg = default_config();
    Environment r0 = draw_environment(cfg, 0);
    Environment r1 = draw_environment(cfg, 1);

    bool any_fading_changed = false;
    for (std::size_t i = 0; i < r0.clients.size(); ++i) {
        CHECK(r0.clients[i].distance_m == r1.clients[i].distance_m);
        CHECK(r0.clients[i].cpu_hz == r1.clients[i].cpu_hz);
        if (r0.channels[i].fading_gain_sq != r1.channels[i].fading_gain_sq)
            any_fading_changed = true;
    }
    CHECK(any_fading_changed);

    SUBCASE("disabling fading pins the multiplier to one") {
        ScenarioConfig flat = load_config(R"({"fading_enabled": false})");
        Environment e = draw_environment(flat, 5);
        for (const ChannelDraw& ch : e.channels) {
            CHECK(ch.fading_gain_sq == 1.0);
            CHECK(ch.gain_sq == doctest::Approx(ch.path_loss_linear).epsilon(1e-15));
        }
    }

    SUBCASE("position redraw mode moves clients between rounds") {
        ScenarioConfig moving = load_config(R"({"redraw_positions_per_round": true})");
        Environment m0 = draw_environment(moving, 0);
        Environment m1 = draw_environment(moving, 1);
        bool any_moved = false;
        for (std::size_t i = 0; i < m0.clients.size(); ++i)
            if (m0.clients[i].distance_m != m1.clients[i].distance_m) any_moved = true;
        CHECK(any_moved);
    }

    SUBCASE("environment depends on the env seed only") {
        ScenarioConfig other = default_config();
        other.seeds.data = 777;  // unrelated stream
        Environment e = draw_environment(other, 0);
        for (std::size_t i = 0; i < e.clients.size(); ++i) {
            CHECK(e.clients[i].distance_m == r0.clients[i].distance_m);
            CHECK(e.channels[i].fading_gain_sq == r0.channels[i].fading_gain_sq);
        }
        other.seeds = default_config().seeds;
        other.seeds.env = 777;
        Environment d = draw_environment(other, 0);
        bool differs = false;
        for (std::size_t i = 0; i < d.clients.size(); ++i)
            if (d.clients[i].distance_m != r0.clients[i].distance_m) differs = true;
        CHECK(differs);
    }
}

TEST_CASE("synthetic dataset has balanced labels and class-aligned means") {
    ScenarioConfig cfg = default_config();
    const int count = 4000;
    Dataset ds = make_synthetic_dataset(cfg, count, "train");
    REQUIRE(ds.size() == count);
    CHECK(ds.input_dim == 8);
    CHECK(ds.n_classes == 4);
    CHECK(ds.x.size() == static_cast<std::size_t>(count * 8));

    std::vector<int> class_counts(4, 0);
    for (int i = 0; i < count; ++i) {
        CHECK(ds.y[i] == i % 4);  // round-robin labels, exactly balanced
        ++class_counts[ds.y[i]];
    }
    for (int c = 0; c < 4; ++c) CHECK(class_counts[c] == count / 4);

    // Feature j carries the class mean iff j mod n_classes == label.
    for (int c = 0; c < 4; ++c) {
        double on = 0.0, off = 0.0;
        int n_on = 0, n_off = 0;
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < 8; ++j) {
                if (ds.y[i] == c && j % 4 == c) {
                    on += ds.x[i * 8 + j];
                    ++n_on;
                } else if (ds.y[i] == c) {
                    off += ds.x[i * 8 + j];
                    ++n_off;
                }
            }
        }
        CHECK(on / n_on == doctest::Approx(cfg.mixture_spread).epsilon(0.08));
        CHECK(std::abs(off / n_off) < 0.1);
    }

    SUBCASE("draws are deterministic per tag and diverge across tags") {
        Dataset again = make_synthetic_dataset(cfg, count, "train");
        CHECK(again.x == ds.x);
        CHECK(again.y == ds.y);
        Dataset test = make_synthetic_dataset(cfg, count, "test");
        CHECK(test.x != ds.x);
    }

    SUBCASE("data stream is isolated from the env seed") {
        ScenarioConfig other = default_config();
        other.seeds.env = 555;
        Dataset same = make_synthetic_dataset(other, count, "train");
        CHECK(same.x == ds.x);
        other.seeds = default_config().seeds;
        other.seeds.data = 555;
        Dataset moved = make_synthetic_dataset(other, count, "train");
        CHECK(moved.x != ds.x);
    }
}

TEST_CASE("partition hands every client exactly its quota of distinct samples") {
    ScenarioConfig cfg = load_config(R"({
        "n_clients": 5, "dataset_samples": 1000, "test_samples": 100
    })");
    Dataset ds = make_synthetic_dataset(cfg, cfg.dataset_samples, "train");
    auto parts = partition_data(cfg, ds);
    REQUIRE(parts.size() == 5);

    std::set<int> seen;
    for (const auto& part : parts) {
        CHECK(static_cast<int>(part.size()) == cfg.samples_per_client());
        for (int idx : part) {
            CHECK(idx >= 0);
            CHECK(idx < ds.size());
            CHECK(seen.insert(idx).second);  // no index assigned twice
        }
    }

    SUBCASE("partition is deterministic in the data seed") {
        auto again = partition_data(cfg, ds);
        CHECK(again == parts);
        auto shifted = partition_indices(ds, 5, cfg.samples_per_client(),
                                         cfg.dirichlet_alpha, cfg.seeds.data + 1);
        CHECK(shifted != parts);
    }

    SUBCASE("skewed concentration still fills the quota exactly") {
        auto skewed = partition_indices(ds, 5, 200, 0.05, 99);
        std::set<int> all;
        for (const auto& part : skewed) {
            CHECK(part.size() == 200);
            all.insert(part.begin(), part.end());
        }
        CHECK(all.size() == 1000);
    }

    SUBCASE("undersized dataset is rejected") {
        CHECK_THROWS_WITH_AS(partition_indices(ds, 5, 300, 10.0, 1),
                             doctest::Contains("partition"), ConfigError);
    }
}

TEST_CASE("minibatch draws are in-pool, distinct and replayable") {
    ScenarioConfig cfg = load_config(R"({
        "n_clients": 4, "dataset_samples": 800, "test_samples": 80, "batch_size": 32
    })");
    std::vector<int> pool;
    for (int i = 100; i < 300; ++i) pool.push_back(i);

    std::vector<int> b = draw_batch(cfg, pool, 3, 1);
    REQUIRE(b.size() == 32);
    std::set<int> uniq(b.begin(), b.end());
    CHECK(uniq.size() == b.size());
    for (int idx : b) {
        CHECK(idx >= 100);
        CHECK(idx < 300);
    }

    CHECK(draw_batch(cfg, pool, 3, 1) == b);
    CHECK(draw_batch(cfg, pool, 4, 1) != b);
    CHECK(draw_batch(cfg, pool, 3, 2) != b);

    SUBCASE("small pools are consumed whole") {
        std::vector<int> tiny{5, 6, 7};
        std::vector<int> all = draw_batch(cfg, tiny, 0, 0);
        std::sort(all.begin(), all.end());
        CHECK(all == tiny);
    }
}
