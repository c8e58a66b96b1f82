#include "asfl/context.hpp"

#include <cmath>
#include <limits>

#include "asfl/rng.hpp"

namespace asfl {

ModelStats compute_model_stats(const SplitModel& model, const ScenarioConfig& cfg,
                               const std::vector<double>& sample_weights, int round) {
  const int m = model.layer_count();
  const int n = model.n_clients();
  double wsum = 0;
  for (double w : sample_weights) wsum += w;

  ModelStats stats;
  stats.by_cut.resize(m);
  std::vector<double> flat, avg;
  for (int cut = 1; cut <= m; ++cut) {
    ModelCutStats& s = stats.by_cut[cut - 1];
    if (!cfg.profile.allowed[cut - 1]) continue;
    s.allowed = true;

    ObjectiveInputs probe_in;
    probe_in.sampling_ratio = cfg.sampling_ratio;
    ProbeSet probe = sample_discrepancy_probe(model, cut, cfg.sampling_ratio,
                                              cfg.seeds.sampling, round);
    probe_in.probes = std::move(probe.per_client);
    probe_in.probe_average = std::move(probe.average);
    s.client_term = client_discrepancy_term(probe_in);

    s.server_norm_sq.assign(n, 0.0);
    s.server_inner.assign(n, 0.0);
    avg.clear();
    std::vector<std::vector<double>> server(n);
    for (int c = 0; c < n; ++c) {
      model.flatten(c, cut, m, server[c]);
      if (avg.empty()) avg.assign(server[c].size(), 0.0);
      const double wgt = sample_weights[c] / wsum;
      for (std::size_t i = 0; i < server[c].size(); ++i) avg[i] += wgt * server[c][i];
    }
    for (std::size_t i = 0; i < avg.size(); ++i) s.server_avg_norm_sq += avg[i] * avg[i];
    for (int c = 0; c < n; ++c) {
      for (std::size_t i = 0; i < avg.size(); ++i) {
        s.server_norm_sq[c] += server[c][i] * server[c][i];
        s.server_inner[c] += avg[i] * server[c][i];
      }
    }
  }
  return stats;
}

RoundContext::RoundContext(const ScenarioConfig& cfg, std::vector<ClientProfile> clients,
                           std::vector<ChannelDraw> channels, int prev_cut, ModelStats stats)
    : cfg_(&cfg),
      clients_(std::move(clients)),
      channels_(std::move(channels)),
      prev_cut_(prev_cut),
      stats_(std::move(stats)) {
  error_floor_cache_.assign(
      static_cast<std::size_t>(n_clients()) * (cfg_->n_rbs + 1),
      std::numeric_limits<double>::quiet_NaN());
}

ErrorModel RoundContext::error_model() const {
  return cfg_->fading_enabled ? ErrorModel::expectation : ErrorModel::frozen;
}

double RoundContext::per_error(int client, int rb_count, double tx_power_w) const {
  LinkState link{channels_[client], rb_count, tx_power_w};
  return packet_error_rate(link, *cfg_, error_model());
}

double RoundContext::error_floor(int client, int rb_count) const {
  const std::size_t slot = static_cast<std::size_t>(client) * (cfg_->n_rbs + 1) + rb_count;
  if (rb_count <= cfg_->n_rbs && !std::isnan(error_floor_cache_[slot]))
    return error_floor_cache_[slot];
  const double c = cfg_->waterfall_threshold * cfg_->rb_bandwidth_hz *
                   cfg_->noise_psd_w_per_hz * rb_count;
  double value;
  if (error_model() == ErrorModel::expectation) {
    value = fading_expectation(c, channels_[client].path_loss_linear);
  } else {
    const double gain = channels_[client].gain_sq;
    value = gain > 0 ? std::exp(-c / gain) : 0.0;
  }
  if (rb_count <= cfg_->n_rbs) error_floor_cache_[slot] = value;
  return value;
}

DecisionEval RoundContext::evaluate(const RoundDecisions& dec) const {
  DecisionEval ev;
  ev.costs = round_costs(*cfg_, clients_, channels_, dec, error_model());
  if (!ev.costs.feasible) {
    ev.structurally_feasible = false;
    ev.within_budgets = false;
    return ev;
  }
  ev.g = constraint_values(*cfg_, ev.costs);
  ev.within_budgets = true;
  for (double v : ev.g)
    if (v > 0) ev.within_budgets = false;

  const ModelCutStats& s = stats_.at(dec.split.cut);
  ev.g_obj_verbatim = g_objective_from_terms(s.client_term, s.server_norm_sq, s.server_inner,
                                             s.server_avg_norm_sq, ev.costs.per_error,
                                             ObjectiveMode::verbatim);
  ev.g_obj_consistent = g_objective_from_terms(s.client_term, s.server_norm_sq, s.server_inner,
                                               s.server_avg_norm_sq, ev.costs.per_error,
                                               ObjectiveMode::consistent);
  return ev;
}

}  // namespace asfl
