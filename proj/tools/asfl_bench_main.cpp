// asfl-bench: co-simulation driver for adaptive split federated learning over
// a shared wireless uplink. Subcommands: simulate, sweep, oracle, check,
// solve-round.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asfl/harness.hpp"

namespace {

struct CommonOpts {
  std::string config = "default";
  std::vector<std::string> sets;
  long long seed = -1;
  int rounds = -1;
  std::string baseline = "asfl";
  std::string objective_mode;
  std::string fading;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config,
                  "Config source: JSON file path, inline JSON, or 'default'");
  cmd->add_option("--set", o.sets,
                  "Override one config key as key=value (repeatable; value is JSON)");
  cmd->add_option("--seed", o.seed,
                  "Base seed S; sets env=S, data=S+1, model=S+2, sampling=S+3");
  cmd->add_option("--rounds", o.rounds, "Round count (overrides the config)");
  cmd->add_option("--baseline", o.baseline,
                  "asfl | fixed-split-<cut> | max-power | rand-power | rand-rb");
  cmd->add_option("--objective-mode", o.objective_mode, "verbatim | consistent")
      ->check(CLI::IsMember({"verbatim", "consistent"}));
  cmd->add_option("--fading", o.fading, "on (expectation model) | frozen (realized gains)")
      ->check(CLI::IsMember({"on", "frozen"}));
}

asfl::ScenarioConfig build_config(const CommonOpts& o) {
  asfl::ScenarioConfig cfg =
      o.config == "default" ? asfl::default_config() : asfl::load_config(o.config);
  for (const std::string& s : o.sets) asfl::apply_override(cfg, s);
  if (o.seed >= 0) {
    const auto s = static_cast<std::uint64_t>(o.seed);
    cfg.seeds.env = s;
    cfg.seeds.data = s + 1;
    cfg.seeds.model = s + 2;
    cfg.seeds.sampling = s + 3;
  }
  if (o.rounds >= 0) cfg.n_rounds = o.rounds;
  if (!o.objective_mode.empty())
    cfg.objective_mode = o.objective_mode == "verbatim"
                             ? asfl::ObjectiveMode::verbatim
                             : asfl::ObjectiveMode::consistent;
  if (!o.fading.empty()) cfg.fading_enabled = o.fading == "on";
  cfg.validate();
  return cfg;
}

int print_oracle(const asfl::OracleOutcome& outcome) {
  for (const std::string& line : outcome.lines) std::printf("%s\n", line.c_str());
  std::printf("%s\n", outcome.pass ? "PASS" : "FAIL");
  return outcome.pass ? 0 : 1;
}

int cmd_solve_round(const asfl::ScenarioConfig& cfg, const asfl::BaselinePolicy& policy,
                    int round) {
  using namespace asfl;
  SimState state = SimState::init(cfg, policy);
  for (int r = 1; r < round; ++r) run_round(state, r);

  Environment env = draw_environment(cfg, round);
  ModelStats stats = compute_model_stats(state.model, cfg, state.sample_weights, round);
  const RoundContext ctx(cfg, std::move(env.clients), std::move(env.channels), state.prev_cut,
                         std::move(stats));
  const BcdOutcome bcd = run_bcd_round(ctx, state.queues, policy, round);
  const DecisionEval ev = ctx.evaluate(bcd.decisions);

  std::printf("round %d, policy %s, previous cut %d\n", round, policy.name().c_str(),
              state.prev_cut);
  std::printf("outer iterations %d (%s)\n", bcd.iterations,
              bcd.converged ? "converged" : "cap reached");
  std::printf("chosen cut %d\n", bcd.decisions.split.cut);
  std::printf("client   k        p_w          per          e_total_j\n");
  for (int i = 0; i < cfg.n_clients; ++i)
    std::printf("%5d  %3d  %11.6g  %11.6g  %11.6g\n", i, bcd.decisions.rb_counts[i],
                bcd.decisions.tx_power_w[i], ev.costs.per_error[i], ev.costs.e_total[i]);
  std::printf("delays: stage1 %.6g  stage2 %.6g  stage3 %.6g  total %.6g\n", ev.costs.t_stage1,
              ev.costs.t_stage2, ev.costs.t_stage3, ev.costs.t_total);
  std::printf("objective: verbatim %.9g, consistent %.9g\n", ev.g_obj_verbatim,
              ev.g_obj_consistent);

  std::printf("\nper-cut drift-plus-penalty at the final RB counts and powers:\n");
  std::printf("  cut  feasible          dpp        g_obj\n");
  for (int cut = 1; cut <= cfg.profile.layers(); ++cut) {
    if (!cfg.profile.allowed[static_cast<std::size_t>(cut) - 1]) continue;
    RoundDecisions dec = bcd.decisions;
    dec.split.cut = cut;
    const DecisionEval evc = ctx.evaluate(dec);
    if (!evc.structurally_feasible) {
      std::printf("  %3d  no        (shrink needs every client on the uplink)\n", cut);
      continue;
    }
    const double dpp =
        drift_plus_penalty(state.queues, evc.g, evc.g_obj(cfg.objective_mode));
    std::printf("  %3d  yes  %12.6g  %12.6g%s\n", cut, dpp, evc.g_obj(cfg.objective_mode),
                cut == bcd.decisions.split.cut ? "  <- chosen" : "");
  }

  std::printf("\ntop RB count vectors at the chosen cut:\n");
  std::vector<RbCandidate> top;
  solve_rb(ctx, bcd.decisions.split, bcd.decisions.tx_power_w, &top, 5);
  for (std::size_t c = 0; c < top.size(); ++c) {
    std::string counts;
    for (int v : top[c].counts) counts += std::to_string(v) + " ";
    std::printf("  #%zu [ %s] g_obj %.9g, worst violation %.6g\n", c + 1, counts.c_str(),
                top[c].g_obj, top[c].max_violation);
  }

  std::printf("\nper-client power step at the chosen cut and counts:\n");
  const AuxBudgets aux = init_aux_budgets(ctx, bcd.decisions.split.cut, round);
  std::printf("  client        lo          hi  branch       final p\n");
  for (int i = 0; i < cfg.n_clients; ++i) {
    if (bcd.decisions.rb_counts[i] < 1) {
      std::printf("  %6d  (no RB: keeps incoming power %.6g)\n", i,
                  bcd.decisions.tx_power_w[i]);
      continue;
    }
    const PowerInterval iv =
        power_bounds(ctx, bcd.decisions.split, i, bcd.decisions.rb_counts[i], aux);
    const char* branch = "n/a";
    if (!iv.empty) {
      const OmegaCoefficients om = omega_coefficients(
          ctx, bcd.decisions.split.cut, i, bcd.decisions.rb_counts[i], cfg.objective_mode);
      const PowerChoice choice = closed_form_power(iv, om.omega2, om.omega3);
      branch = choice.branch == PowerBranch::c1_lower
                   ? "lower"
                   : (choice.branch == PowerBranch::c2_critical ? "critical" : "otherwise");
    }
    std::printf("  %6d  %10.6g  %10.6g  %-9s  %10.6g%s\n", i, iv.lo, iv.hi, branch,
                bcd.decisions.tx_power_w[i], iv.empty ? "  (empty interval: grid fallback)" : "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asfl-bench: adaptive split federated learning co-simulation"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  std::string sim_out = "run";
  CLI::App* sim = app.add_subcommand("simulate", "Run one policy and export metrics");
  add_common(sim, sim_opts);
  sim->add_option("--out", sim_out, "Output directory");

  CommonOpts sweep_opts;
  std::string sweep_out = "sweep";
  std::string sweep_param;
  std::vector<double> sweep_values;
  int sweep_repeats = 5;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a parameter sweep with repeats");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", sweep_param, "mu | v | rho | n_clients | k")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--repeats", sweep_repeats, "Repeats per value (seeds shift by 4 each)");
  sweep->add_option("--out", sweep_out, "Output directory");

  CommonOpts oracle_opts;
  std::string oracle_which;
  long long oracle_trials = -1;
  int oracle_points = 200, oracle_mc_points = 20, oracle_instances = -1;
  int oracle_resolution = 10000, oracle_n = 3, oracle_k = 4, oracle_layers = 4;
  int oracle_profiles = 50, oracle_power_grid = 200;
  double oracle_rel_tol = 0.05;
  CLI::App* oracle = app.add_subcommand("oracle", "Differential checks against brute force");
  add_common(oracle, oracle_opts);
  oracle->add_option("which", oracle_which, "per | cost | rb | split | power | joint")
      ->required()
      ->check(CLI::IsMember({"per", "cost", "rb", "split", "power", "joint"}));
  oracle->add_option("--trials", oracle_trials, "Monte Carlo draws per estimate");
  oracle->add_option("--points", oracle_points, "per: quadrature-vs-Bessel grid points");
  oracle->add_option("--mc-points", oracle_mc_points, "per: Monte Carlo comparison points");
  oracle->add_option("--instances", oracle_instances,
                     "cost/power/joint: number of random instances");
  oracle->add_option("--resolution", oracle_resolution, "power: surrogate grid resolution");
  oracle->add_option("--n", oracle_n, "rb: client count");
  oracle->add_option("--k", oracle_k, "rb: resource block count");
  oracle->add_option("--layers", oracle_layers, "split: model layer count");
  oracle->add_option("--profiles", oracle_profiles, "rb/split: random profiles");
  oracle->add_option("--power-grid", oracle_power_grid, "joint: per-client power grid points");
  oracle->add_option("--rel-tol", oracle_rel_tol, "joint: relative objective tolerance");

  std::string check_dir;
  CLI::App* check = app.add_subcommand("check", "Re-run a finished run from its manifest");
  check->add_option("run_dir", check_dir, "Run directory containing manifest.json")->required();

  CommonOpts solve_opts;
  int solve_round_idx = 1;
  CLI::App* solve = app.add_subcommand("solve-round", "Show one round's solver diagnostics");
  add_common(solve, solve_opts);
  solve->add_option("--round", solve_round_idx, "Round to solve (earlier rounds are replayed)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const asfl::ScenarioConfig cfg = build_config(sim_opts);
      return asfl::cmd_simulate(cfg, asfl::BaselinePolicy::parse(sim_opts.baseline), sim_out);
    }
    if (sweep->parsed()) {
      const asfl::ScenarioConfig cfg = build_config(sweep_opts);
      return asfl::cmd_sweep(cfg, asfl::BaselinePolicy::parse(sweep_opts.baseline), sweep_param,
                             sweep_values, sweep_repeats, sweep_out);
    }
    if (oracle->parsed()) {
      const std::uint64_t seed =
          oracle_opts.seed >= 0 ? static_cast<std::uint64_t>(oracle_opts.seed) : 1234ull;
      asfl::OracleOutcome outcome;
      if (oracle_which == "per") {
        if (oracle_opts.fading == "frozen") {
          outcome = asfl::oracle_frozen_per(oracle_trials > 0 ? oracle_trials : 100000, seed);
        } else {
          outcome = asfl::oracle_fading(oracle_points, 1e-6, 1e3, 1e-8, oracle_mc_points,
                                        oracle_trials > 0 ? oracle_trials : 1000000, seed);
        }
      } else if (oracle_which == "cost") {
        outcome = asfl::oracle_cost_consistency(oracle_instances > 0 ? oracle_instances : 100,
                                                oracle_trials > 0 ? oracle_trials : 100000,
                                                seed);
      } else if (oracle_which == "rb") {
        outcome = asfl::oracle_rb(oracle_n, oracle_k, oracle_profiles, seed);
      } else if (oracle_which == "split") {
        outcome = asfl::oracle_split(oracle_layers, oracle_profiles, seed);
      } else if (oracle_which == "power") {
        outcome = asfl::oracle_power(oracle_instances > 0 ? oracle_instances : 1000,
                                     oracle_resolution, seed);
      } else {
        outcome = asfl::oracle_joint(oracle_instances > 0 ? oracle_instances : 20,
                                     oracle_power_grid, oracle_rel_tol, seed);
      }
      return print_oracle(outcome);
    }
    if (check->parsed()) return asfl::cmd_check(check_dir);
    if (solve->parsed()) {
      const asfl::ScenarioConfig cfg = build_config(solve_opts);
      if (solve_round_idx < 1 || solve_round_idx > cfg.n_rounds)
        throw std::invalid_argument("--round out of [1, n_rounds]");
      return cmd_solve_round(cfg, asfl::BaselinePolicy::parse(solve_opts.baseline),
                             solve_round_idx);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
