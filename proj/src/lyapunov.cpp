#include "asfl/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace asfl {

VirtualQueueState VirtualQueueState::init(const ScenarioConfig& cfg) {
  VirtualQueueState s;
  s.q.assign(static_cast<size_t>(cfg.n_clients) + 1, 0.0);
  s.queue_memory = cfg.queue_memory;
  s.penalty_weight = cfg.penalty_weight;
  return s;
}

void queue_update(VirtualQueueState& state, const std::vector<double>& g) {
  if (g.size() != state.q.size())
    throw std::invalid_argument("queue_update: slack vector size mismatch");
  for (size_t i = 0; i < state.q.size(); ++i) {
    double next = state.queue_memory * state.q[i] + (1.0 - state.queue_memory) * g[i];
    state.q[i] = std::max(next, 0.0);
  }
  state.g_history.push_back(g);
  state.q_history.push_back(state.q);
}

static std::vector<double> next_queues(const VirtualQueueState& state,
                                       const std::vector<double>& g) {
  std::vector<double> out(state.q.size());
  for (size_t i = 0; i < state.q.size(); ++i)
    out[i] = std::max(state.queue_memory * state.q[i] + (1.0 - state.queue_memory) * g[i], 0.0);
  return out;
}

double drift_value(const VirtualQueueState& state, const std::vector<double>& g) {
  if (g.size() != state.q.size())
    throw std::invalid_argument("drift_value: slack vector size mismatch");
  double now = 0, next = 0;
  std::vector<double> qn = next_queues(state, g);
  for (size_t i = 0; i < state.q.size(); ++i) {
    now += state.q[i] * state.q[i];
    next += qn[i] * qn[i];
  }
  return 0.5 * (next - now);
}

double drift_plus_penalty(const VirtualQueueState& state, const std::vector<double>& g,
                          double g_obj) {
  return drift_value(state, g) + state.penalty_weight * g_obj;
}

SplitChoice solve_split(const RoundContext& ctx, const VirtualQueueState& state,
                        const std::vector<int>& rb_counts,
                        const std::vector<double>& tx_power_w) {
  const ScenarioConfig& cfg = ctx.cfg();
  SplitChoice best;
  bool have = false;
  for (int cut = 1; cut <= cfg.profile.layers(); ++cut) {
    if (!cfg.profile.allowed[static_cast<size_t>(cut) - 1]) continue;
    RoundDecisions dec;
    dec.split.prev_cut = ctx.prev_cut();
    dec.split.cut = cut;
    dec.rb_counts = rb_counts;
    dec.tx_power_w = tx_power_w;
    DecisionEval ev = ctx.evaluate(dec);
    if (!ev.structurally_feasible) continue;
    double dpp = drift_plus_penalty(state, ev.g, ev.g_obj(cfg.objective_mode));
    best.evaluated++;
    // strict improvement only: equal scores keep the earlier (smaller) cut
    if (!have || dpp < best.dpp) {
      best.cut = cut;
      best.dpp = dpp;
      best.g_obj = ev.g_obj(cfg.objective_mode);
      best.any_feasible = true;
      have = true;
    }
  }
  if (!have)
    throw std::runtime_error("solve_split: no admissible cut is evaluable for this round");
  return best;
}

StabilityReport stability_check(const VirtualQueueState& state, const ScenarioConfig& cfg,
                                const EnvelopeTracker& envelope) {
  StabilityReport rep;
  rep.rounds = static_cast<int>(state.g_history.size());
  rep.t_max_observed = envelope.t_max;
  rep.e_max_observed = envelope.e_max;
  rep.t_max = envelope.t_max * 1.05;
  rep.e_max = envelope.e_max * 1.05;
  const double gamma = cfg.delay_budget_s;
  const double delta = cfg.energy_budget_j;
  rep.g1 = std::max(gamma * gamma, (rep.t_max - gamma) * (rep.t_max - gamma));
  rep.g2 = std::max(delta * delta, (rep.e_max - delta) * (rep.e_max - delta));

  const double q0_bound = std::sqrt(rep.g1);
  const double qn_bound = std::sqrt(rep.g2);
  rep.delay_queue.bound = q0_bound;
  rep.energy_queues.bound = qn_bound;
  for (const auto& q : state.q_history) {
    rep.delay_queue.worst_observed = std::max(rep.delay_queue.worst_observed, q[0]);
    for (size_t i = 1; i < q.size(); ++i)
      rep.energy_queues.worst_observed = std::max(rep.energy_queues.worst_observed, q[i]);
  }
  rep.delay_queue.ok = rep.delay_queue.worst_observed <= q0_bound + 1e-12;
  rep.energy_queues.ok = rep.energy_queues.worst_observed <= qn_bound + 1e-12;

  const int rounds = rep.rounds;
  if (cfg.queue_memory >= 1.0) {
    rep.time_average_skipped = true;
    rep.skip_reason = "time-average bound diverges at queue_memory = 1";
  } else if (rounds == 0) {
    rep.time_average_skipped = true;
    rep.skip_reason = "no rounds recorded";
  } else {
    const double slack_factor = 1.0 + 1.0 / ((1.0 - cfg.queue_memory) * rounds);
    rep.delay_average.bound = slack_factor * std::sqrt(rep.g1);
    rep.energy_average.bound = slack_factor * std::sqrt(rep.g2);
    double sum0 = 0;
    std::vector<double> sums(state.q.size() - 1, 0.0);
    for (const auto& g : state.g_history) {
      sum0 += g[0];
      for (size_t i = 1; i < g.size(); ++i) sums[i - 1] += g[i];
    }
    rep.delay_average.average = sum0 / rounds;
    double worst = -1e300;
    for (double s : sums) worst = std::max(worst, s / rounds);
    rep.energy_average.average = worst;
    rep.delay_average.ok = rep.delay_average.average <= rep.delay_average.bound + 1e-12;
    rep.energy_average.ok = rep.energy_average.average <= rep.energy_average.bound + 1e-12;
  }

  rep.drift_bound_w =
      0.5 * (rep.g1 + cfg.n_clients * rep.g2) * (1.0 - cfg.queue_memory) * (1.0 - cfg.queue_memory);

  rep.all_ok = rep.delay_queue.ok && rep.energy_queues.ok &&
               (rep.time_average_skipped || (rep.delay_average.ok && rep.energy_average.ok));
  return rep;
}

std::string stability_report_to_json(const StabilityReport& rep) {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "{\n";
  os << "  \"rounds\": " << rep.rounds << ",\n";
  os << "  \"t_max_observed\": " << rep.t_max_observed << ",\n";
  os << "  \"e_max_observed\": " << rep.e_max_observed << ",\n";
  os << "  \"t_max_envelope\": " << rep.t_max << ",\n";
  os << "  \"e_max_envelope\": " << rep.e_max << ",\n";
  os << "  \"g1\": " << rep.g1 << ",\n";
  os << "  \"g2\": " << rep.g2 << ",\n";
  os << "  \"delay_queue\": {\"bound\": " << rep.delay_queue.bound
     << ", \"worst_observed\": " << rep.delay_queue.worst_observed
     << ", \"ok\": " << b(rep.delay_queue.ok) << "},\n";
  os << "  \"energy_queues\": {\"bound\": " << rep.energy_queues.bound
     << ", \"worst_observed\": " << rep.energy_queues.worst_observed
     << ", \"ok\": " << b(rep.energy_queues.ok) << "},\n";
  if (rep.time_average_skipped) {
    os << "  \"time_average_skipped\": true,\n";
    os << "  \"skip_reason\": \"" << rep.skip_reason << "\",\n";
  } else {
    os << "  \"time_average_skipped\": false,\n";
    os << "  \"delay_average\": {\"average\": " << rep.delay_average.average
       << ", \"bound\": " << rep.delay_average.bound << ", \"ok\": " << b(rep.delay_average.ok)
       << "},\n";
    os << "  \"energy_average\": {\"average\": " << rep.energy_average.average
       << ", \"bound\": " << rep.energy_average.bound << ", \"ok\": " << b(rep.energy_average.ok)
       << "},\n";
  }
  os << "  \"drift_bound_w\": " << rep.drift_bound_w << ",\n";
  os << "  \"all_ok\": " << b(rep.all_ok) << "\n";
  os << "}\n";
  return os.str();
}

}  // namespace asfl
