#pragma once

#include <vector>

#include "asfl/context.hpp"

namespace asfl {

// Per-stage sub-budgets the power iteration alternates against: the round's
// delay budget split across the three stages, and the energy budget (net of
// the power-independent forward-pass energy) split across migration, upload,
// and expected backward-pass components.
struct AuxBudgets {
  double gamma1 = 0, gamma2 = 0, gamma3 = 0;  // seconds
  double delta1 = 0, delta2 = 0, delta3 = 0;  // joules
};

// Deterministic split: each stage receives a third of its budget pool. The
// randomized variant (uniform normalized shares, env stream) sits behind
// cfg.random_aux_init for reproducibility experiments.
AuxBudgets init_aux_budgets(const RoundContext& ctx, int cut, int round);

// Feasible power interval for one client from the six bound expressions. A
// bound whose algebra degenerates (non-positive or sub-unity log argument, a
// budget no power can meet, or a constraint that cannot bind because its
// payload is zero or never binds below P^max) is inactive: it contributes
// nothing to the clipped interval.
//
// The migration- and upload-energy caps (c4, c5) are enforced as the exact
// roots of the underlying energy constraints (bisection on the monotone
// energy-vs-power curve). The classical two-term low-SNR expansions of these
// caps are kept in taylor_c4/taylor_c5 for diagnostics: at the default
// operating point (per-RB SNR well above 1) the expanded forms undershoot the
// true caps by up to ~20x, which would pin transmit power far below every
// budget the caps exist to protect.
struct PowerInterval {
  double bound[6] = {0, 0, 0, 0, 0, 0};  // c1..c6 effective values where defined
  bool active[6] = {false, false, false, false, false, false};
  double taylor_c4 = 0, taylor_c5 = 0;  // two-term expanded caps (diagnostic)
  bool taylor_c4_defined = false, taylor_c5_defined = false;
  double lo = 0;
  double hi = 0;
  bool empty = false;
};

PowerInterval power_bounds(const RoundContext& ctx, const SplitDecision& split, int client,
                           int rb_count, const AuxBudgets& aux);

struct OmegaCoefficients {
  double omega1_printed = 0;  // per-client stage-3 constant as printed (per-sample downlink)
  double omega1_exact = 0;    // same constant with the full downlink payload
  double omega2 = 0;          // quadratic surrogate coefficient
  double omega3 = 0;          // linear surrogate coefficient
  double error_floor = 0;     // E[exp(-alpha B N0 k / |h|^2)]
};

OmegaCoefficients omega_coefficients(const RoundContext& ctx, int cut, int client,
                                     int rb_count, ObjectiveMode mode);

enum class PowerBranch { c1_lower, c2_critical, otherwise };

struct PowerChoice {
  double p = 0;
  PowerBranch branch = PowerBranch::otherwise;
  bool omega2_degenerate = false;  // omega2 <= 0: no curvature, upper bound returned
  bool log_degenerate = false;     // -omega3/(2*omega2) <= 1: critical point undefined
};

// Closed-form minimizer over [iv.lo, iv.hi] of the surrogate
//   f(p) = omega2 * exp(2/p) + omega3 * exp(1/p),
// whose critical point is 1/ln(-omega3 / (2*omega2)).
PowerChoice closed_form_power(const PowerInterval& iv, double omega2, double omega3);

// f above, factored as exp(1/p) * (omega2 * exp(1/p) + omega3) so large 1/p
// saturates to +-inf instead of producing inf - inf.
double surrogate_value(double omega2, double omega3, double p);

struct PowerIterationReport {
  std::vector<double> p;
  AuxBudgets aux;  // after the final refresh
  int iterations = 0;
  bool converged = false;
  double g_obj = 0;  // configured-mode objective at the returned powers
  std::vector<PowerBranch> branch;   // last-iterate branch (solved clients)
  std::vector<char> solved;          // client held >= 1 RB and was optimized
  std::vector<char> empty_fallback;  // grid fallback engaged on the last iterate
  std::vector<char> degenerate;      // omega2/log degeneracy on the last iterate
  int energy_audit_violations = 0;  // migration/upload energies found above
                                    // the sub-budgets their caps were built
                                    // from (fallback or infeasible-cap cases)
};

// Alternates closed-form powers with a budget refresh until the objective
// change drops below cfg.solver_tol_power or cfg.power_max_iters is hit. The
// refresh scales the realized per-stage maxima at the current powers onto the
// round pool (equal thirds if nothing was realized), so the per-stage budgets
// always sum to the round budget: unused slack flows back to the busy stages
// instead of ratcheting the budgets down from the initial equal split, and
// overspent stages are pulled back under the pool so the caps keep enforcing
// the true per-round budget. Clients without RBs keep their incoming power.
PowerIterationReport iterate_power(const RoundContext& ctx, const SplitDecision& split,
                                   const std::vector<int>& rb_counts,
                                   const std::vector<double>& p_init, int round);

// Dense grid plus one local refinement over [lo, hi], minimizing the exact
// per-client objective contribution; flat stretches resolve to the smallest
// power. resolution >= 100.
double power_grid_oracle(const RoundContext& ctx, int cut, int client, int rb_count,
                         double lo, double hi, int resolution, ObjectiveMode mode);

}  // namespace asfl
