#include "asfl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "asfl/rng.hpp"

#ifndef ASFL_BUILD_ID
#define ASFL_BUILD_ID "unknown"
#endif

namespace asfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << content;
  if (!os) throw std::runtime_error("short write on " + path);
}

std::string fmt(const char* pattern, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

std::vector<int> admissible_cuts(const ScenarioConfig& cfg) {
  std::vector<int> cuts;
  for (int cut = 1; cut <= cfg.profile.layers(); ++cut)
    if (cfg.profile.allowed[static_cast<std::size_t>(cut) - 1]) cuts.push_back(cut);
  return cuts;
}

int pick_from(const std::vector<int>& options, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

double pick_g_obj(const RunSummary& s, ObjectiveMode mode) {
  return mode == ObjectiveMode::verbatim ? s.mean_g_obj_verbatim : s.mean_g_obj_consistent;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace

RunResult run_simulation(const ScenarioConfig& cfg, const BaselinePolicy& policy,
                         const std::string& out_dir) {
  SimState state = SimState::init(cfg, policy);
  const bool io = !out_dir.empty();
  const std::string started = iso8601_utc_now();
  std::ofstream csv;
  if (io) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/manifest.json",
               manifest_json(cfg, policy, ASFL_BUILD_ID, started, "", out_dir));
    csv.open(out_dir + "/metrics.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/metrics.csv");
    csv << metrics_header(cfg.n_clients) << '\n';
  }

  for (int round = 1; round <= cfg.n_rounds; ++round) {
    const RoundRecord& rec = run_round(state, round);
    if (io) {
      csv << metrics_row(rec, cfg.n_clients);
      if (cfg.weight_snapshot_every > 0 && round % cfg.weight_snapshot_every == 0) {
        char name[48];
        std::snprintf(name, sizeof name, "weights_round_%06d.bin", round);
        write_weight_snapshot(state.model, round, out_dir + "/" + name);
      }
    }
  }

  RunResult res;
  res.stability = stability_check(state.queues, cfg, state.envelope);
  if (io) {
    csv.close();
    write_file(out_dir + "/stability.json", stability_report_to_json(res.stability));
    write_file(out_dir + "/manifest.json",
               manifest_json(cfg, policy, ASFL_BUILD_ID, started, iso8601_utc_now(), out_dir));
  }

  RunSummary& s = res.summary;
  s.policy = policy.name();
  s.rounds = cfg.n_rounds;
  s.final_accuracy = state.model.average_model_accuracy(state.test_data, state.sample_weights);
  for (const RoundRecord& rec : state.records) {
    s.total_delay_s += rec.costs.t_total;
    for (double e : rec.costs.e_total) s.total_energy_j += e;
    s.cum_g_obj_verbatim += rec.g_obj_verbatim;
    s.cum_g_obj_consistent += rec.g_obj_consistent;
    double viol = 0;
    for (double gv : rec.g) viol += std::max(gv, 0.0);
    s.mean_violation += viol;
    if (rec.reused_previous) ++s.reused_rounds;
    if (rec.descent_violated) ++s.descent_violations;
  }
  if (!state.records.empty()) {
    const double r = static_cast<double>(state.records.size());
    s.mean_g_obj_verbatim = s.cum_g_obj_verbatim / r;
    s.mean_g_obj_consistent = s.cum_g_obj_consistent / r;
    s.mean_violation /= r;
  }
  res.records = std::move(state.records);
  return res;
}

int thread_pool_width(int tasks) {
  if (tasks < 1) return 1;
  int width = 0;
  if (const char* env = std::getenv("ASFL_BENCH_THREADS")) width = std::atoi(env);
  if (width <= 0) width = static_cast<int>(std::thread::hardware_concurrency());
  if (width <= 0) width = 1;
  return std::min(width, tasks);
}

int cmd_simulate(const ScenarioConfig& cfg, const BaselinePolicy& policy,
                 const std::string& out_dir) {
  const RunResult res = run_simulation(cfg, policy, out_dir);
  const RunSummary& s = res.summary;
  std::printf("policy: %s\n", s.policy.c_str());
  std::printf("rounds: %d\n", s.rounds);
  std::printf("final_accuracy: %.6f\n", s.final_accuracy);
  std::printf("total_expected_delay_s: %.6f\n", s.total_delay_s);
  std::printf("total_expected_energy_j: %.6f\n", s.total_energy_j);
  std::printf("mean_g_obj_consistent: %.9g\n", s.mean_g_obj_consistent);
  std::printf("mean_g_obj_verbatim: %.9g\n", s.mean_g_obj_verbatim);
  std::printf("mean_violation: %.9g\n", s.mean_violation);
  std::printf("reused_rounds: %d\n", s.reused_rounds);
  std::printf("descent_violations: %d\n", s.descent_violations);
  std::printf("stability_all_ok: %s\n", res.stability.all_ok ? "true" : "false");
  if (!out_dir.empty()) std::printf("out_dir: %s\n", out_dir.c_str());
  return 0;
}

namespace {

void apply_sweep_param(ScenarioConfig& cfg, const std::string& param, double value) {
  if (param == "mu") {
    cfg.queue_memory = value;
  } else if (param == "v") {
    cfg.penalty_weight = value;
  } else if (param == "rho") {
    cfg.coverage_radius_m = value;
  } else if (param == "n_clients" || param == "k") {
    const long long iv = std::llround(value);
    if (std::abs(value - static_cast<double>(iv)) > 1e-9)
      throw std::invalid_argument("sweep: " + param + " values must be integers");
    (param == "k" ? cfg.n_rbs : cfg.n_clients) = static_cast<int>(iv);
  } else {
    throw std::invalid_argument("unknown sweep parameter: " + param +
                                " (expected mu|v|rho|n_clients|k)");
  }
}

}  // namespace

int cmd_sweep(const ScenarioConfig& base, const BaselinePolicy& policy, const std::string& param,
              const std::vector<double>& values, int repeats, const std::string& out_dir) {
  if (values.empty()) throw std::invalid_argument("sweep: empty value list");
  if (repeats < 1) throw std::invalid_argument("sweep: repeats must be >= 1");

  struct Task {
    int cell;
    int rep;
  };
  std::vector<Task> tasks;
  for (int c = 0; c < static_cast<int>(values.size()); ++c)
    for (int j = 0; j < repeats; ++j) tasks.push_back({c, j});

  std::filesystem::create_directories(out_dir);
  std::vector<RunSummary> sums(tasks.size());
  std::vector<std::string> errors(tasks.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task task = tasks[t];
      try {
        ScenarioConfig cfg = base;
        apply_sweep_param(cfg, param, values[static_cast<std::size_t>(task.cell)]);
        const std::uint64_t shift = 4ull * static_cast<std::uint64_t>(task.rep);
        cfg.seeds.env += shift;
        cfg.seeds.data += shift;
        cfg.seeds.model += shift;
        cfg.seeds.sampling += shift;
        cfg.validate();
        const std::string dir = out_dir + "/" + param + "=" +
                                fmt("%g", values[static_cast<std::size_t>(task.cell)]) + "/rep" +
                                std::to_string(task.rep);
        sums[t] = run_simulation(cfg, policy, dir).summary;
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };

  const int width = thread_pool_width(static_cast<int>(tasks.size()));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(width));
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!errors[t].empty()) {
      std::fprintf(stderr, "error: sweep cell %s=%g rep%d: %s\n", param.c_str(),
                   values[static_cast<std::size_t>(tasks[t].cell)], tasks[t].rep,
                   errors[t].c_str());
      return 1;
    }
  }

  std::ofstream summary(out_dir + "/summary.csv", std::ios::binary | std::ios::trunc);
  if (!summary) throw std::runtime_error("cannot write " + out_dir + "/summary.csv");
  summary << "param,value,repeats,final_accuracy_mean,final_accuracy_stderr,"
             "total_delay_s_mean,total_delay_s_stderr,total_energy_j_mean,"
             "total_energy_j_stderr,g_obj_mean,g_obj_stderr,violation_mean,violation_stderr\n";
  for (std::size_t c = 0; c < values.size(); ++c) {
    std::vector<double> acc, delay, energy, gobj, viol;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].cell != static_cast<int>(c)) continue;
      acc.push_back(sums[t].final_accuracy);
      delay.push_back(sums[t].total_delay_s);
      energy.push_back(sums[t].total_energy_j);
      gobj.push_back(pick_g_obj(sums[t], base.objective_mode));
      viol.push_back(sums[t].mean_violation);
    }
    summary << param << ',' << format_g17(values[c]) << ',' << repeats;
    for (const std::vector<double>* v : {&acc, &delay, &energy, &gobj, &viol})
      summary << ',' << format_g17(mean_of(*v)) << ',' << format_g17(stderr_of(*v));
    summary << '\n';
    std::printf("%s=%-8g g_obj %.6g +- %.2g  violation %.6g +- %.2g  accuracy %.4f +- %.2g\n",
                param.c_str(), values[c], mean_of(gobj), stderr_of(gobj), mean_of(viol),
                stderr_of(viol), mean_of(acc), stderr_of(acc));
  }
  std::printf("wrote %s/summary.csv\n", out_dir.c_str());
  return 0;
}

int cmd_check(const std::string& run_dir) {
  const nlohmann::json manifest = nlohmann::json::parse(read_file(run_dir + "/manifest.json"));
  const ScenarioConfig cfg = load_config(manifest.at("config").dump());
  const BaselinePolicy policy = BaselinePolicy::parse(manifest.at("policy").get<std::string>());

  const std::string recheck = run_dir + "/recheck";
  run_simulation(cfg, policy, recheck);

  const bool metrics_same =
      read_file(run_dir + "/metrics.csv") == read_file(recheck + "/metrics.csv");
  const bool stability_same =
      read_file(run_dir + "/stability.json") == read_file(recheck + "/stability.json");
  std::printf("metrics.csv: %s\n", metrics_same ? "identical" : "DIFFERS");
  std::printf("stability.json: %s\n", stability_same ? "identical" : "DIFFERS");
  std::printf("recheck outputs kept in %s\n", recheck.c_str());
  return metrics_same && stability_same ? 0 : 1;
}

// ---------------------------------------------------------------------------
// oracle checks
// ---------------------------------------------------------------------------

OracleOutcome oracle_fading(int grid_points, double rho_lo, double rho_hi, double quad_tol,
                            int mc_points, long long mc_trials, std::uint64_t seed) {
  OracleOutcome out;
  double worst = 0, worst_rho = rho_lo;
  for (int i = 0; i < grid_points; ++i) {
    const double f = grid_points == 1 ? 0.0 : static_cast<double>(i) / (grid_points - 1);
    const double rho = std::exp(std::log(rho_lo) + f * (std::log(rho_hi) - std::log(rho_lo)));
    const double quad = fading_expectation(rho, 1.0);
    const double bessel = fading_expectation_bessel(rho, 1.0);
    const double diff = std::abs(quad - bessel);
    if (diff > worst) {
      worst = diff;
      worst_rho = rho;
    }
  }
  const bool quad_ok = worst <= quad_tol;
  out.lines.push_back(fmt(
      "quadrature vs Bessel: worst |diff| %.3e at rho %.3e over %d log-spaced points (tol %.0e)",
      worst, worst_rho, grid_points, quad_tol));

  std::mt19937_64 rng = make_stream(seed, "fading-mc-points", 0, 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double lg_lo = std::log10(rho_lo), lg_hi = std::log10(rho_hi);
  int breaches = 0;
  double worst_z = 0;
  for (int i = 0; i < mc_points; ++i) {
    const double rho = std::pow(10.0, lg_lo + (lg_hi - lg_lo) * uni(rng));
    const std::uint64_t mc_seed = rng();
    double se = 0;
    const double mc = fading_expectation_mc(rho, 1.0, mc_trials, mc_seed, &se);
    for (double v : {fading_expectation(rho, 1.0), fading_expectation_bessel(rho, 1.0)}) {
      const double dev = std::abs(v - mc);
      const double z = se > 0 ? dev / se : (dev == 0 ? 0.0 : kInf);
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ++breaches;
    }
  }
  const bool mc_ok = breaches == 0;
  out.lines.push_back(
      fmt("quadrature and Bessel vs Monte Carlo (%lld draws): worst |z| %.2f over %d points, "
          "%d comparison(s) beyond 3 s.e.",
          mc_trials, worst_z, mc_points, breaches));
  out.pass = quad_ok && mc_ok;
  return out;
}

OracleOutcome oracle_frozen_per(long long trials, std::uint64_t seed) {
  OracleOutcome out;
  ScenarioConfig cfg = default_config();
  cfg.fading_enabled = false;
  cfg.seeds.env = seed;
  const Environment env = draw_environment(cfg, 1);
  std::mt19937_64 rng = make_stream(seed, "per-mc", 0, 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst_z = 0;
  bool pass = true;
  for (int i = 0; i < cfg.n_clients; ++i) {
    const int k = 1 + i % cfg.n_rbs;
    const double p = cfg.max_tx_power_w * (i + 1) / cfg.n_clients;
    const LinkState link{env.channels[i], k, p};
    const double s = packet_error_rate(link, cfg, ErrorModel::frozen);
    long long fails = 0;
    for (long long t = 0; t < trials; ++t)
      if (uni(rng) < s) ++fails;
    const double est = static_cast<double>(fails) / static_cast<double>(trials);
    const double se = std::sqrt(std::max(est * (1.0 - est), 0.0) / static_cast<double>(trials));
    const double dev = std::abs(est - s);
    const double z = se > 0 ? dev / se : (dev == 0 ? 0.0 : kInf);
    worst_z = std::max(worst_z, z);
    if (z > 3.0) pass = false;
    out.lines.push_back(fmt("client %d (k=%d, p=%.3f): closed form %.6e, simulated %.6e, z=%.2f",
                            i, k, p, s, est, z));
  }
  out.lines.push_back(fmt("worst |z| %.2f over %d clients (%lld trials each)", worst_z,
                          cfg.n_clients, trials));
  out.pass = pass;
  return out;
}

OracleOutcome oracle_cost_consistency(int scenarios, long long trials, std::uint64_t seed) {
  OracleOutcome out;
  long long comparisons = 0, beyond3 = 0;
  double worst_z = 0;
  int worst_scenario = -1;

  for (int sc = 0; sc < scenarios; ++sc) {
    ScenarioConfig cfg = default_config();
    cfg.fading_enabled = false;
    cfg.seeds.env = seed + 1000003ull * static_cast<std::uint64_t>(sc + 1);
    std::mt19937_64 rng = make_stream(seed, "cost-mc", static_cast<std::uint64_t>(sc), 0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const Environment env = draw_environment(cfg, 1);
    const int n = cfg.n_clients;

    const std::vector<int> cuts = admissible_cuts(cfg);
    const int cut = pick_from(cuts, rng);
    std::vector<int> prev_options;
    for (int c : cuts)
      if (c <= cut) prev_options.push_back(c);
    const int prev = pick_from(prev_options, rng);

    RoundDecisions dec;
    dec.split = SplitDecision{cut, prev};
    dec.rb_counts = uniform_count_vector(n, cfg.n_rbs, rng);
    dec.tx_power_w.resize(static_cast<std::size_t>(n));
    for (double& p : dec.tx_power_w) p = cfg.max_tx_power_w * (1.0 - uni(rng));

    const RoundCosts costs = round_costs(cfg, env.clients, env.channels, dec, ErrorModel::frozen);

    // realized-process constants, derived from the raw quantities
    const LayerProfile& prof = cfg.profile;
    const double t_unit = cfg.server_cycles_per_flop *
                          (prof.fp_server(cut) + prof.bp_server(cut)) / cfg.server_cpu_hz;
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    std::vector<double> ok_prob(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tail_delay(static_cast<std::size_t>(n), 0.0);
    std::vector<double> bp_energy(static_cast<std::size_t>(n), 0.0);
    std::vector<double> e_const(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      active[static_cast<std::size_t>(i)] =
          (dec.rb_counts[static_cast<std::size_t>(i)] >= 1 &&
           dec.tx_power_w[static_cast<std::size_t>(i)] > 0)
              ? 1
              : 0;
      if (!active[static_cast<std::size_t>(i)]) continue;
      ok_prob[static_cast<std::size_t>(i)] = 1.0 - costs.per_error[static_cast<std::size_t>(i)];
      const ClientProfile& cl = env.clients[static_cast<std::size_t>(i)];
      const LinkState link{env.channels[static_cast<std::size_t>(i)],
                           dec.rb_counts[static_cast<std::size_t>(i)],
                           dec.tx_power_w[static_cast<std::size_t>(i)]};
      const double d = cl.n_samples;
      tail_delay[static_cast<std::size_t>(i)] =
          d * prof.grad_downlink_bits(cut) / downlink_rate(link, cfg) +
          cfg.client_cycles_per_flop * prof.bp_client(cut) * d / cl.cpu_hz;
      bp_energy[static_cast<std::size_t>(i)] = d * prof.bp_client(cut) * cfg.energy_coeff *
                                               cfg.client_cycles_per_flop * cl.cpu_hz * cl.cpu_hz;
      e_const[static_cast<std::size_t>(i)] = costs.e_total[static_cast<std::size_t>(i)] -
                                             costs.e_backward[static_cast<std::size_t>(i)];
    }

    std::vector<double> sum_t(static_cast<std::size_t>(n), 0.0),
        sq_t(static_cast<std::size_t>(n), 0.0), sum_e(static_cast<std::size_t>(n), 0.0),
        sq_e(static_cast<std::size_t>(n), 0.0);
    std::vector<char> beta(static_cast<std::size_t>(n), 0);
    for (long long t = 0; t < trials; ++t) {
      double delivered = 0;
      for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        beta[ui] = active[ui] && uni(rng) < ok_prob[ui] ? 1 : 0;
        if (beta[ui]) delivered += env.clients[ui].n_samples;
      }
      const double t_server = t_unit * delivered;
      for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        if (!active[ui]) continue;
        const double t3 = t_server + (beta[ui] ? tail_delay[ui] : 0.0);
        const double e = e_const[ui] + (beta[ui] ? bp_energy[ui] : 0.0);
        sum_t[ui] += t3;
        sq_t[ui] += t3 * t3;
        sum_e[ui] += e;
        sq_e[ui] += e * e;
      }
    }

    auto check = [&](double sum, double sq, double expect) {
      const double nt = static_cast<double>(trials);
      const double mean = sum / nt;
      double var = std::max(sq / nt - mean * mean, 0.0);
      if (trials > 1) var *= nt / (nt - 1.0);
      const double se = std::sqrt(var / nt);
      const double dev = std::abs(mean - expect);
      const double z = se > 0 ? dev / se : (dev == 0 ? 0.0 : kInf);
      ++comparisons;
      if (z > 3.0) ++beyond3;
      if (z > worst_z) {
        worst_z = z;
        worst_scenario = sc;
      }
      return z;
    };
    for (int i = 0; i < n; ++i) {
      const std::size_t ui = static_cast<std::size_t>(i);
      if (!active[ui]) continue;
      check(sum_t[ui], sq_t[ui], costs.per_client_stage3[ui]);
      check(sum_e[ui], sq_e[ui], costs.e_total[ui]);
    }
  }

  const long long allowed = (comparisons * 5 + 999) / 1000;  // ceil(0.5%)
  out.lines.push_back(
      fmt("%lld per-client comparisons over %d scenarios (%lld trials each)", comparisons,
          scenarios, trials));
  out.lines.push_back(fmt(
      "%lld comparison(s) beyond 3 s.e. (chance rate 0.27%%; allowed %lld), worst |z| %.2f "
      "(scenario %d)",
      beyond3, allowed, worst_z, worst_scenario));
  out.pass = beyond3 <= allowed && worst_z < 5.0;
  return out;
}

OracleOutcome oracle_rb(int n_clients, int n_rbs, int profiles, std::uint64_t seed) {
  OracleOutcome out;
  ScenarioConfig cfg = default_config();
  cfg.n_clients = n_clients;
  cfg.n_rbs = n_rbs;
  cfg.dataset_samples = 6400 * n_clients;
  cfg.validate();
  const SplitModel model(cfg.layer_widths, n_clients, cfg.initial_cut, cfg.seeds.model);
  const std::vector<double> weights(static_cast<std::size_t>(n_clients),
                                    static_cast<double>(cfg.samples_per_client()));
  std::mt19937_64 rng = make_stream(seed, "rb-oracle", static_cast<std::uint64_t>(n_clients),
                                    static_cast<std::uint64_t>(n_rbs));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::vector<int> cuts = admissible_cuts(cfg);

  int mismatches = 0, skipped = 0;
  for (int t = 0; t < profiles; ++t) {
    cfg.seeds.env = seed + 7919ull * static_cast<std::uint64_t>(t + 1);
    Environment env = draw_environment(cfg, t + 1);
    ModelStats stats = compute_model_stats(model, cfg, weights, t + 1);
    const int cut = pick_from(cuts, rng);
    const int prev = pick_from(cuts, rng);
    std::vector<double> powers(static_cast<std::size_t>(n_clients));
    for (double& p : powers)
      p = uni(rng) < 0.15 ? 0.0 : cfg.max_tx_power_w * (1.0 - uni(rng));
    const RoundContext ctx(cfg, std::move(env.clients), std::move(env.channels), prev,
                           std::move(stats));
    const SplitDecision split{cut, prev};
    const RbAssignment a = solve_rb(ctx, split, powers);
    const RbAssignment b = solve_rb_matrix_oracle(ctx, split, powers);
    if (!a.structurally_solved || !b.structurally_solved) {
      if (a.structurally_solved != b.structurally_solved) {
        ++mismatches;
        out.lines.push_back(fmt("profile %d: structural-solvability flags disagree", t));
      } else {
        ++skipped;
      }
      continue;
    }
    if (a.counts != b.counts) {
      ++mismatches;
      std::string la = "solver [", lb = "oracle [";
      for (int v : a.counts) la += std::to_string(v) + " ";
      for (int v : b.counts) lb += std::to_string(v) + " ";
      out.lines.push_back(fmt("profile %d: counts differ: %s] vs %s]", t, la.c_str(), lb.c_str()));
    } else if (a.g_obj != b.g_obj && !(std::isnan(a.g_obj) && std::isnan(b.g_obj))) {
      ++mismatches;
      out.lines.push_back(fmt("profile %d: equal counts but g_obj %.17g vs %.17g", t, a.g_obj,
                              b.g_obj));
    }
  }
  out.lines.push_back(fmt("N=%d K=%d: %d profiles, %d mismatch(es), %d structurally infeasible",
                          n_clients, n_rbs, profiles, mismatches, skipped));
  out.pass = mismatches == 0;
  return out;
}

OracleOutcome oracle_split(int layers, int profiles, std::uint64_t seed) {
  if (layers < 2) throw std::invalid_argument("oracle split: need at least 2 layers");
  OracleOutcome out;
  ScenarioConfig cfg = default_config();
  std::vector<int> widths;
  widths.push_back(8);
  for (int i = 1; i < layers; ++i) widths.push_back(32);
  widths.push_back(4);
  cfg.layer_widths = widths;
  cfg.profile = profile_from_widths(widths, cfg.allow_full_client_cut);
  cfg.initial_cut = 1;
  cfg.validate();
  const SplitModel model(widths, cfg.n_clients, cfg.initial_cut, cfg.seeds.model);
  const std::vector<double> weights(static_cast<std::size_t>(cfg.n_clients),
                                    static_cast<double>(cfg.samples_per_client()));
  std::mt19937_64 rng = make_stream(seed, "split-oracle", static_cast<std::uint64_t>(layers), 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::vector<int> cuts = admissible_cuts(cfg);

  int mismatches = 0;
  for (int t = 0; t < profiles; ++t) {
    cfg.seeds.env = seed + 104729ull * static_cast<std::uint64_t>(t + 1);
    Environment env = draw_environment(cfg, t + 1);
    ModelStats stats = compute_model_stats(model, cfg, weights, t + 1);
    const int prev = pick_from(cuts, rng);
    std::vector<int> counts = uniform_count_vector(cfg.n_clients, cfg.n_rbs, rng);
    std::vector<double> powers(static_cast<std::size_t>(cfg.n_clients));
    for (double& p : powers)
      p = uni(rng) < 0.15 ? 0.0 : cfg.max_tx_power_w * (1.0 - uni(rng));
    VirtualQueueState qs = VirtualQueueState::init(cfg);
    for (double& q : qs.q) q = 5.0 * uni(rng);
    const RoundContext ctx(cfg, std::move(env.clients), std::move(env.channels), prev,
                           std::move(stats));

    const SplitChoice got = solve_split(ctx, qs, counts, powers);

    int best_cut = -1;
    double best = kInf;
    for (int cut : cuts) {
      RoundDecisions dec;
      dec.split = SplitDecision{cut, prev};
      dec.rb_counts = counts;
      dec.tx_power_w = powers;
      const DecisionEval ev = ctx.evaluate(dec);
      if (!ev.structurally_feasible) continue;
      double now = 0, nxt = 0;
      for (std::size_t i = 0; i < qs.q.size(); ++i) {
        const double qn =
            std::max(qs.queue_memory * qs.q[i] + (1.0 - qs.queue_memory) * ev.g[i], 0.0);
        now += qs.q[i] * qs.q[i];
        nxt += qn * qn;
      }
      const double dpp = 0.5 * (nxt - now) + cfg.penalty_weight * ev.g_obj(cfg.objective_mode);
      if (best_cut < 0 || dpp < best) {
        best = dpp;
        best_cut = cut;
      }
    }

    if (best_cut != got.cut ||
        std::abs(best - got.dpp) > 1e-9 * std::max(1.0, std::abs(best))) {
      ++mismatches;
      out.lines.push_back(fmt("profile %d: solver cut %d (dpp %.17g) vs brute force cut %d "
                              "(dpp %.17g)",
                              t, got.cut, got.dpp, best_cut, best));
    }
  }
  out.lines.push_back(
      fmt("%d layers: %d profiles, %d mismatch(es)", layers, profiles, mismatches));
  out.pass = mismatches == 0;
  return out;
}

OracleOutcome oracle_power(int instances, int resolution, std::uint64_t seed) {
  OracleOutcome out;
  ScenarioConfig cfg = default_config();
  cfg.random_aux_init = true;  // diversify the sub-budget splits across instances
  std::mt19937_64 rng = make_stream(seed, "power-oracle", 0, 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::vector<int> cuts = admissible_cuts(cfg);
  const int n = cfg.n_clients;
  const int m = cfg.profile.layers();

  int evaluated = 0, attempts = 0, skipped = 0, gap_fail = 0, branch_fail = 0;
  int branch_counts[3] = {0, 0, 0};
  double worst_gap_steps = 0;
  while (evaluated < instances && attempts < 50 * instances) {
    ++attempts;
    cfg.seeds.env = seed + 15485863ull * static_cast<std::uint64_t>(attempts);
    Environment env = draw_environment(cfg, attempts);

    // synthetic server-side geometry so the linear coefficient spans both signs
    ModelStats stats;
    stats.by_cut.resize(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) {
      ModelCutStats& s = stats.by_cut[static_cast<std::size_t>(c)];
      s.allowed = cfg.profile.allowed[static_cast<std::size_t>(c)] != 0;
      if (!s.allowed) continue;
      s.client_term = uni(rng);
      s.server_avg_norm_sq = 0.5 + 1.5 * uni(rng);
      s.server_norm_sq.resize(static_cast<std::size_t>(n));
      s.server_inner.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double own = 0.5 + 1.5 * uni(rng);
        s.server_norm_sq[static_cast<std::size_t>(i)] = own;
        const double corr = 2.0 * uni(rng) - 1.0;
        s.server_inner[static_cast<std::size_t>(i)] =
            corr * std::sqrt(s.server_avg_norm_sq * own);
      }
    }

    const int cut = pick_from(cuts, rng);
    const int prev = pick_from(cuts, rng);
    const int client = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.n_rbs));
    const RoundContext ctx(cfg, std::move(env.clients), std::move(env.channels), prev,
                           std::move(stats));
    const SplitDecision split{cut, prev};
    const AuxBudgets aux = init_aux_budgets(ctx, cut, attempts);
    const PowerInterval iv = power_bounds(ctx, split, client, k, aux);
    if (iv.empty || !(iv.hi - iv.lo > 1e-15)) {
      ++skipped;
      continue;
    }
    ++evaluated;

    const OmegaCoefficients om = omega_coefficients(ctx, cut, client, k, cfg.objective_mode);
    const PowerChoice choice = closed_form_power(iv, om.omega2, om.omega3);
    ++branch_counts[static_cast<int>(choice.branch)];

    const double step = (iv.hi - iv.lo) / resolution;
    double best_p = iv.lo, best_v = surrogate_value(om.omega2, om.omega3, iv.lo);
    for (int i = 1; i <= resolution; ++i) {
      const double p = iv.lo + step * i;
      const double v = surrogate_value(om.omega2, om.omega3, p);
      if (v < best_v) {
        best_v = v;
        best_p = p;
      }
    }
    const double vc = surrogate_value(om.omega2, om.omega3, choice.p);
    const double gap = std::abs(choice.p - best_p);
    const bool flat_equal = vc <= best_v + 1e-15 * (1.0 + std::abs(best_v));
    if (gap <= step + 1e-12) worst_gap_steps = std::max(worst_gap_steps, gap / step);
    if (!(gap <= step + 1e-12 || flat_equal)) {
      ++gap_fail;
      if (gap_fail <= 5)
        out.lines.push_back(
            fmt("instance %d: closed form p=%.6g vs grid argmin %.6g (step %.3g, "
                "surrogate %.17g vs %.17g)",
                evaluated, choice.p, best_p, step, vc, best_v));
    }

    PowerBranch expected = PowerBranch::otherwise;
    if (om.omega2 > 0 && om.omega3 < 0) {
      const double ratio = -om.omega3 / (2.0 * om.omega2);
      if (ratio > 1.0) {
        const double pstar = 1.0 / std::log(ratio);
        expected = pstar < iv.lo
                       ? PowerBranch::c1_lower
                       : (pstar <= iv.hi ? PowerBranch::c2_critical : PowerBranch::otherwise);
      }
    }
    if (choice.branch != expected) {
      ++branch_fail;
      if (branch_fail <= 5)
        out.lines.push_back(fmt("instance %d: branch label %d, analytic conditions say %d",
                                evaluated, static_cast<int>(choice.branch),
                                static_cast<int>(expected)));
    }
  }

  out.lines.push_back(
      fmt("%d instances (%d attempts, %d empty/degenerate intervals skipped), grid %d points",
          evaluated, attempts, skipped, resolution));
  out.lines.push_back(fmt("branch counts: lower-clamp %d, critical %d, otherwise %d",
                          branch_counts[0], branch_counts[1], branch_counts[2]));
  out.lines.push_back(fmt("argmin gap: worst %.3f grid steps, %d beyond one step; "
                          "branch mismatches %d",
                          worst_gap_steps, gap_fail, branch_fail));
  out.pass = evaluated == instances && gap_fail == 0 && branch_fail == 0;
  return out;
}

ScenarioConfig make_toy_config() {
  ScenarioConfig cfg = default_config();
  cfg.n_clients = 2;
  cfg.n_rbs = 2;
  cfg.layer_widths = {8, 16, 16, 4};
  cfg.profile = profile_from_widths(cfg.layer_widths, cfg.allow_full_client_cut);
  cfg.dataset_samples = 1280;
  cfg.test_samples = 256;
  cfg.initial_cut = 1;
  cfg.n_rounds = 50;
  cfg.validate();
  return cfg;
}

OracleOutcome oracle_joint(int instances, int power_grid, double rel_tol, std::uint64_t seed) {
  OracleOutcome out;
  int fails = 0;
  double worst_rel = 0;
  for (int t = 0; t < instances; ++t) {
    ScenarioConfig cfg = make_toy_config();
    const std::uint64_t s = seed + 4ull * static_cast<std::uint64_t>(t);
    cfg.seeds = SeedPack{s, s + 1, s + 2, s + 3};
    const BaselinePolicy policy;  // full solver
    SimState state = SimState::init(cfg, policy);
    Environment env = draw_environment(cfg, 1);
    ModelStats stats = compute_model_stats(state.model, cfg, state.sample_weights, 1);
    const RoundContext ctx(cfg, std::move(env.clients), std::move(env.channels), state.prev_cut,
                           std::move(stats));
    const BcdOutcome bcd = run_bcd_round(ctx, state.queues, policy, 1);
    const DecisionEval got = ctx.evaluate(bcd.decisions);
    if (!got.structurally_feasible) {
      ++fails;
      out.lines.push_back(fmt("instance %d: solver returned structurally infeasible decisions",
                              t));
      continue;
    }
    const double g_bcd = got.g_obj(cfg.objective_mode);

    double best = kInf;
    const double pmax = cfg.max_tx_power_w;
    for (int cut : admissible_cuts(cfg)) {
      for (int k0 = 0; k0 <= cfg.n_rbs; ++k0) {
        for (int k1 = 0; k1 + k0 <= cfg.n_rbs; ++k1) {
          const int lo0 = k0 >= 1 ? 1 : power_grid;  // idle client: power is irrelevant
          const int lo1 = k1 >= 1 ? 1 : power_grid;
          for (int i0 = lo0; i0 <= power_grid; ++i0) {
            for (int i1 = lo1; i1 <= power_grid; ++i1) {
              RoundDecisions dec;
              dec.split = SplitDecision{cut, state.prev_cut};
              dec.rb_counts = {k0, k1};
              dec.tx_power_w = {pmax * i0 / power_grid, pmax * i1 / power_grid};
              const DecisionEval ev = ctx.evaluate(dec);
              if (!ev.structurally_feasible) continue;
              best = std::min(best, ev.g_obj(cfg.objective_mode));
            }
          }
        }
      }
    }

    const double rel = std::abs(g_bcd - best) / std::max(std::abs(best), 1e-12);
    worst_rel = std::max(worst_rel, rel);
    if (rel > rel_tol) ++fails;
    out.lines.push_back(fmt("instance %2d: solver %.9g, joint brute force %.9g, rel gap %.3e%s",
                            t, g_bcd, best, rel, rel > rel_tol ? "  <-- over tolerance" : ""));
  }
  out.lines.push_back(fmt("%d instances, worst relative gap %.3e (tol %.0e), %d over", instances,
                          worst_rel, rel_tol, fails));
  out.pass = fails == 0;
  return out;
}

}  // namespace asfl
