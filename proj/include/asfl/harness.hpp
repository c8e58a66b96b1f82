#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asfl/coordinator.hpp"
#include "asfl/metrics.hpp"

namespace asfl {

struct RunSummary {
  std::string policy;
  int rounds = 0;
  double final_accuracy = 0;       // sample-weighted average model on the test set
  double total_delay_s = 0;        // sum of expected per-round delays
  double total_energy_j = 0;       // sum over rounds and clients of expected energy
  double mean_g_obj_verbatim = 0;  // per-round mean of the decision-time objective
  double mean_g_obj_consistent = 0;
  double cum_g_obj_verbatim = 0;
  double cum_g_obj_consistent = 0;
  double mean_violation = 0;  // per-round mean of the positive constraint slack mass
  int reused_rounds = 0;      // rounds that fell back to earlier decisions
  int descent_violations = 0;
};

struct RunResult {
  RunSummary summary;
  std::vector<RoundRecord> records;
  StabilityReport stability;
};

// Full simulation of cfg.n_rounds rounds under one policy. With a non-empty
// out_dir, writes manifest.json (once before round 1, again at completion),
// metrics.csv, stability.json, and optional weight snapshots there.
RunResult run_simulation(const ScenarioConfig& cfg, const BaselinePolicy& policy,
                         const std::string& out_dir = std::string());

// Worker count for parallel experiment batches: ASFL_BENCH_THREADS when set,
// otherwise the hardware thread count; never more than `tasks` or less than 1.
int thread_pool_width(int tasks);

// ---- CLI drivers (each returns a process exit code) ----

int cmd_simulate(const ScenarioConfig& cfg, const BaselinePolicy& policy,
                 const std::string& out_dir);

// param in {mu, v, rho, n_clients, k}. Runs |values| x repeats simulations
// (repeat j shifts every seed by 4*j, so repeats are paired across cells) and
// writes <out>/summary.csv with mean and standard-error columns per cell.
int cmd_sweep(const ScenarioConfig& base, const BaselinePolicy& policy, const std::string& param,
              const std::vector<double>& values, int repeats, const std::string& out_dir);

// Re-runs a finished run from its manifest alone and byte-compares
// metrics.csv and stability.json. Exit 0 iff identical.
int cmd_check(const std::string& run_dir);

// ---- oracle checks, shared by `asfl-bench oracle` and the acceptance suite ----

struct OracleOutcome {
  std::vector<std::string> lines;  // human-readable findings
  bool pass = false;
};

// Fading expectation: quadrature vs Bessel on grid_points log-spaced rho in
// [rho_lo, rho_hi] (tolerance quad_tol), then quadrature and Bessel vs Monte
// Carlo (mc_trials draws) within 3 standard errors at mc_points random rho.
OracleOutcome oracle_fading(int grid_points, double rho_lo, double rho_hi, double quad_tol,
                            int mc_points, long long mc_trials, std::uint64_t seed);

// Frozen-channel packet error rate vs a Bernoulli Monte Carlo, per client.
OracleOutcome oracle_frozen_per(long long trials, std::uint64_t seed);

// Expected stage-3 delay and per-client energy vs a Bernoulli simulation of
// the delivery outcomes on random frozen-channel scenarios. Individual
// comparisons use 3 standard errors; across the whole batch at most 0.5% of
// comparisons may exceed that (chance rate 0.27%) and none may reach 5.
OracleOutcome oracle_cost_consistency(int scenarios, long long trials, std::uint64_t seed);

// solve_rb vs the per-RB matrix enumeration on random instances at the given
// population / RB sizes.
OracleOutcome oracle_rb(int n_clients, int n_rbs, int profiles, std::uint64_t seed);

// solve_split vs an independent brute force over the admissible cuts on a
// model with `layers` layers.
OracleOutcome oracle_split(int layers, int profiles, std::uint64_t seed);

// closed_form_power vs a surrogate-objective grid (argmin within one grid
// step, or equal surrogate value on flat stretches), plus branch labels vs
// an independent recomputation of the analytic branch conditions.
OracleOutcome oracle_power(int instances, int resolution, std::uint64_t seed);

// run_bcd_round vs joint brute force (cut x counts x per-client power grid)
// on toy two-client instances; relative objective gap must stay within
// rel_tol on every instance.
OracleOutcome oracle_joint(int instances, int power_grid, double rel_tol, std::uint64_t seed);

// Toy scenario used by the joint oracle: 3 layers, 2 clients, 2 RBs, small
// synthetic task.
ScenarioConfig make_toy_config();

}  // namespace asfl
