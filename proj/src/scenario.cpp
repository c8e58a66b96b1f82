#include "asfl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asfl/units.hpp"

namespace asfl {

double path_loss_linear(double distance_m) {
  const double d = std::max(distance_m, 1.0);
  return db_to_linear(-30.0 - 40.0 * std::log10(d));
}

Environment draw_environment(const ScenarioConfig& cfg, int round) {
  Environment env;
  env.clients.resize(cfg.n_clients);
  env.channels.resize(cfg.n_clients);

  const std::uint64_t pos_key = cfg.redraw_positions_per_round ? round : 0;
  auto static_rng = make_stream(cfg.seeds.env, "static", 0, 0);
  auto pos_rng = make_stream(cfg.seeds.env, "positions", pos_key, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> freq(cfg.cpu_freq_min_hz, cfg.cpu_freq_max_hz);

  const int d_n = cfg.samples_per_client();
  for (int n = 0; n < cfg.n_clients; ++n) {
    ClientProfile& c = env.clients[n];
    c.id = n;
    c.n_samples = d_n;
    c.cpu_hz = freq(static_rng);
    // uniform over the coverage disk
    const double r = cfg.coverage_radius_m * std::sqrt(unit(pos_rng));
    unit(pos_rng);  // angle; irrelevant to path loss but kept for a full position draw
    c.distance_m = r;

    ChannelDraw& ch = env.channels[n];
    ch.path_loss_linear = path_loss_linear(c.distance_m);
    if (cfg.fading_enabled) {
      auto fade_rng = make_stream(cfg.seeds.env, "fading", static_cast<std::uint64_t>(round), n);
      std::exponential_distribution<double> exp1(1.0);
      ch.fading_gain_sq = exp1(fade_rng);
    } else {
      ch.fading_gain_sq = 1.0;
    }
    ch.gain_sq = ch.path_loss_linear * ch.fading_gain_sq;
  }
  return env;
}

Dataset make_synthetic_dataset(const ScenarioConfig& cfg, int count, const char* tag) {
  Dataset ds;
  ds.input_dim = cfg.input_dim();
  ds.n_classes = cfg.n_classes();
  ds.x.resize(static_cast<std::size_t>(count) * ds.input_dim);
  ds.y.resize(count);

  auto rng = make_stream(cfg.seeds.data, tag, 0, 0);
  std::normal_distribution<double> noise(0.0, cfg.mixture_sigma);
  for (int i = 0; i < count; ++i) {
    const int c = i % ds.n_classes;
    ds.y[i] = c;
    double* row = ds.x.data() + static_cast<std::size_t>(i) * ds.input_dim;
    for (int j = 0; j < ds.input_dim; ++j) {
      const double mean = (j % ds.n_classes == c) ? cfg.mixture_spread : 0.0;
      row[j] = mean + noise(rng);
    }
  }
  return ds;
}

std::vector<std::vector<int>> partition_indices(const Dataset& ds, int n_clients,
                                                int per_client, double alpha,
                                                std::uint64_t data_seed) {
  const int total_needed = n_clients * per_client;
  if (ds.size() < total_needed)
    throw ConfigError("partition: dataset smaller than n_clients * samples_per_client");

  std::vector<std::vector<int>> by_class(ds.n_classes);
  for (int i = 0; i < ds.size(); ++i) by_class[ds.y[i]].push_back(i);

  auto rng = make_stream(data_seed, "partition", 0, 0);
  std::gamma_distribution<double> gamma(alpha, 1.0);

  std::vector<std::vector<int>> pools(n_clients);
  for (int c = 0; c < ds.n_classes; ++c) {
    const int class_size = static_cast<int>(by_class[c].size());
    std::vector<double> prop(n_clients);
    double sum = 0;
    for (int n = 0; n < n_clients; ++n) {
      prop[n] = gamma(rng);
      sum += prop[n];
    }
    for (double& p : prop) p /= sum;

    // largest-remainder rounding of class_size * prop
    std::vector<int> take(n_clients);
    std::vector<std::pair<double, int>> rem(n_clients);
    int assigned = 0;
    for (int n = 0; n < n_clients; ++n) {
      const double exact = prop[n] * class_size;
      take[n] = static_cast<int>(std::floor(exact));
      assigned += take[n];
      rem[n] = {exact - take[n], n};
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int i = 0; assigned < class_size; ++i, ++assigned) take[rem[i].second]++;

    int cursor = 0;
    for (int n = 0; n < n_clients; ++n)
      for (int t = 0; t < take[n]; ++t) pools[n].push_back(by_class[c][cursor++]);
  }

  // Equalize pools to exactly per_client samples: surplus clients shed their
  // highest indices into a spare list, deficit clients refill from it in id
  // order. Leftover spares are dropped.
  std::vector<int> spare;
  for (int n = 0; n < n_clients; ++n) {
    std::sort(pools[n].begin(), pools[n].end());
    while (static_cast<int>(pools[n].size()) > per_client) {
      spare.push_back(pools[n].back());
      pools[n].pop_back();
    }
  }
  std::sort(spare.begin(), spare.end());
  std::size_t spare_cursor = 0;
  for (int n = 0; n < n_clients; ++n) {
    while (static_cast<int>(pools[n].size()) < per_client) {
      if (spare_cursor >= spare.size())
        throw ConfigError("partition: internal accounting error");
      pools[n].push_back(spare[spare_cursor++]);
    }
    std::sort(pools[n].begin(), pools[n].end());
  }
  return pools;
}

std::vector<std::vector<int>> partition_data(const ScenarioConfig& cfg, const Dataset& ds) {
  return partition_indices(ds, cfg.n_clients, cfg.samples_per_client(),
                           cfg.dirichlet_alpha, cfg.seeds.data);
}

std::vector<int> draw_batch(const ScenarioConfig& cfg, const std::vector<int>& pool,
                            int round, int client) {
  auto rng = make_stream(cfg.seeds.data, "batch", static_cast<std::uint64_t>(round), client);
  const int pool_size = static_cast<int>(pool.size());
  const int take = std::min(cfg.batch_size, pool_size);
  // partial Fisher-Yates over a copy of the pool
  std::vector<int> idx(pool);
  std::vector<int> out(take);
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<int> pick(i, pool_size - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out[i] = idx[i];
  }
  return out;
}

}  // namespace asfl
