#pragma once

#include <string>
#include <vector>

#include "asfl/context.hpp"
#include "asfl/lyapunov.hpp"
#include "asfl/power_solver.hpp"
#include "asfl/rb_solver.hpp"

namespace asfl {

enum class PolicyKind { asfl, fixed_split, max_power, rand_power, rand_rb };

// One experiment arm: the full alternating solver, or a baseline that pins a
// block (fixed cut / maximum or random power / random RB counts) and
// optimizes the rest.
struct BaselinePolicy {
  PolicyKind kind = PolicyKind::asfl;
  int fixed_cut = 2;  // fixed_split only

  // "asfl", "fixed-split-<cut>", "max-power", "rand-power", "rand-rb"
  static BaselinePolicy parse(const std::string& name);
  std::string name() const;
};

struct RoundRecord {
  int round = 0;
  RoundDecisions decisions;
  RoundCosts costs;
  std::vector<double> g;  // expected constraint slacks driving the queues
  double g_obj_verbatim = 0;
  double g_obj_consistent = 0;
  std::vector<double> queues;       // after this round's update
  std::vector<char> participation;  // scheduled: holds an RB and positive power
  int bcd_iters = 0;
  bool bcd_converged = false;
  bool descent_violated = false;  // objective rose across an outer iteration
  bool reused_previous = false;   // round was infeasible; previous decisions kept
  bool rb_exact = true;
  bool rb_structural_fallback = false;
  bool power_converged = true;
  int power_fallbacks = 0;  // clients solved by the empty-interval grid
  double train_loss = 0;
  double train_accuracy = 0;
  int train_participants = 0;
  double split_seconds = 0, rb_seconds = 0, power_seconds = 0;
};

struct SimState {
  ScenarioConfig cfg;
  BaselinePolicy policy;
  Dataset train_data;
  Dataset test_data;
  std::vector<std::vector<int>> partitions;
  std::vector<double> sample_weights;
  SplitModel model;
  VirtualQueueState queues;
  EnvelopeTracker envelope;
  int prev_cut = 1;
  RoundDecisions last_decisions;
  bool have_last_decisions = false;
  std::vector<RoundRecord> records;

  static SimState init(const ScenarioConfig& cfg, const BaselinePolicy& policy);
};

struct BcdOutcome {
  RoundDecisions decisions;
  int iterations = 0;
  bool converged = false;
  bool descent_violated = false;
  bool rb_exact = true;
  bool rb_structural_fallback = false;
  bool power_converged = true;
  int power_fallbacks = 0;
  double split_seconds = 0, rb_seconds = 0, power_seconds = 0;
};

// Alternates [split -> RB -> power] from a deterministic starting point
// (carry the previous cut, round-robin RBs, maximum power) until the
// objective settles or the outer cap is reached. Baselines pin their block.
BcdOutcome run_bcd_round(const RoundContext& ctx, const VirtualQueueState& queues,
                         const BaselinePolicy& policy, int round);

// Applies the decisions: migrates the boundary, realizes delivery outcomes,
// trains one round, updates the virtual queues, and appends a RoundRecord.
RoundRecord& execute_round(SimState& state, const RoundContext& ctx,
                           const BcdOutcome& bcd, int round);

// Full round: environment draw, model stats, BCD, execution. Infeasible
// decisions fall back to the previous round's (flagged).
RoundRecord& run_round(SimState& state, int round);

}  // namespace asfl
