#pragma once

#include <string>
#include <vector>

#include "asfl/context.hpp"

namespace asfl {

// Virtual queues tracking the delay constraint (index 0) and each client's
// energy constraint (1..N). Update rule per round:
//   Q <- max(mu * Q + (1 - mu) * g, 0)
struct VirtualQueueState {
  std::vector<double> q;       // length N+1, starts at zero
  double queue_memory = 0.5;   // mu
  double penalty_weight = 10;  // V
  std::vector<std::vector<double>> g_history;  // slack vector per round
  std::vector<std::vector<double>> q_history;  // queues after each update

  static VirtualQueueState init(const ScenarioConfig& cfg);
};

void queue_update(VirtualQueueState& state, const std::vector<double>& g);

// One-step Lyapunov drift if slacks g were realized now: half the change of
// the squared queue norm.
double drift_value(const VirtualQueueState& state, const std::vector<double>& g);

double drift_plus_penalty(const VirtualQueueState& state, const std::vector<double>& g,
                          double g_obj);

struct SplitChoice {
  int cut = 1;
  double dpp = 0;            // drift-plus-penalty at the chosen cut
  double g_obj = 0;          // objective component, in the configured mode
  int evaluated = 0;         // admissible cuts scored
  bool any_feasible = false;
};

// Exhaustive scan of the admissible cuts at fixed RB counts and powers;
// structurally impossible migrations are skipped; ties break to the smallest
// cut. Throws std::runtime_error when no cut is evaluable.
SplitChoice solve_split(const RoundContext& ctx, const VirtualQueueState& state,
                        const std::vector<int>& rb_counts,
                        const std::vector<double>& tx_power_w);

struct QueueBoundCheck {
  double bound = 0;
  double worst_observed = 0;
  bool ok = true;
};

struct TimeAverageCheck {
  double average = 0;
  double bound = 0;
  bool ok = true;
};

// Post-run stability summary. Envelopes G1/G2 come from the observed
// candidate maxima inflated by 5%; the drift-bound constant is reported for
// context only (its additive optimality-gap counterpart depends on an unknown
// problem constant, so no gap assertion is possible).
struct StabilityReport {
  int rounds = 0;
  double t_max_observed = 0, e_max_observed = 0;
  double t_max = 0, e_max = 0;  // inflated envelopes
  double g1 = 0, g2 = 0;
  QueueBoundCheck delay_queue;    // Q_0 vs sqrt(G1)
  QueueBoundCheck energy_queues;  // Q_1..Q_N vs sqrt(G2)
  TimeAverageCheck delay_average;    // mean g_0 vs (1 + 1/((1-mu)R)) sqrt(G1)
  TimeAverageCheck energy_average;   // worst client mean g_n vs the G2 analog
  bool time_average_skipped = false;
  std::string skip_reason;
  double drift_bound_w = 0;
  bool all_ok = true;
};

StabilityReport stability_check(const VirtualQueueState& state, const ScenarioConfig& cfg,
                                const EnvelopeTracker& envelope);

std::string stability_report_to_json(const StabilityReport& rep);

}  // namespace asfl
