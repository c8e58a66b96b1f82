#pragma once

#include <vector>

#include "asfl/cost.hpp"
#include "asfl/learner.hpp"
#include "asfl/objective.hpp"

namespace asfl {

// Model geometry reduced per candidate cut, computed once per round so the
// solvers can evaluate thousands of candidate decisions without touching the
// weights again.
struct ModelCutStats {
  bool allowed = false;
  double client_term = 0;  // mean probe discrepancy at this cut
  double server_avg_norm_sq = 0;
  std::vector<double> server_norm_sq;
  std::vector<double> server_inner;
};

struct ModelStats {
  std::vector<ModelCutStats> by_cut;  // index cut-1
  const ModelCutStats& at(int cut) const { return by_cut[cut - 1]; }
};

ModelStats compute_model_stats(const SplitModel& model, const ScenarioConfig& cfg,
                               const std::vector<double>& sample_weights, int round);

// Running per-run maxima of executed round delay and per-client energy, used
// to size the queue-stability envelopes. Only decisions that were actually
// applied feed this; scoring a candidate must not widen the envelope.
struct EnvelopeTracker {
  double t_max = 0;
  double e_max = 0;
  void observe(const RoundCosts& costs) {
    if (costs.t_total > t_max) t_max = costs.t_total;
    for (double e : costs.e_total)
      if (e > e_max) e_max = e;
  }
};

struct DecisionEval {
  RoundCosts costs;
  std::vector<double> g;  // slack vector, g[0] delay then per-client energy
  double g_obj_verbatim = 0;
  double g_obj_consistent = 0;
  bool structurally_feasible = true;
  bool within_budgets = true;

  double g_obj(ObjectiveMode mode) const {
    return mode == ObjectiveMode::verbatim ? g_obj_verbatim : g_obj_consistent;
  }
};

// All round-frozen state one decision evaluation needs.
class RoundContext {
 public:
  RoundContext(const ScenarioConfig& cfg, std::vector<ClientProfile> clients,
               std::vector<ChannelDraw> channels, int prev_cut, ModelStats stats);

  const ScenarioConfig& cfg() const { return *cfg_; }
  const std::vector<ClientProfile>& clients() const { return clients_; }
  const std::vector<ChannelDraw>& channels() const { return channels_; }
  int n_clients() const { return static_cast<int>(clients_.size()); }
  int prev_cut() const { return prev_cut_; }
  ErrorModel error_model() const;
  const ModelStats& stats() const { return stats_; }

  // Packet error for one client under a candidate grant; rb_count = 0 or
  // p <= 0 yields 1.
  double per_error(int client, int rb_count, double tx_power_w) const;

  // E[exp(-threshold * B * N0 * k / |h|^2)] for the client, under the active
  // error model (expectation over fading, or the frozen realized gain).
  double error_floor(int client, int rb_count) const;

  DecisionEval evaluate(const RoundDecisions& dec) const;

 private:
  const ScenarioConfig* cfg_;
  std::vector<ClientProfile> clients_;
  std::vector<ChannelDraw> channels_;
  int prev_cut_;
  ModelStats stats_;
  mutable std::vector<double> error_floor_cache_;  // (n_rbs+1) per client, NaN = unset
};

}  // namespace asfl
