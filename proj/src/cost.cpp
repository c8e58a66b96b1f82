#include "asfl/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asfl {

RoundCosts round_costs(const ScenarioConfig& cfg, const std::vector<ClientProfile>& clients,
                       const std::vector<ChannelDraw>& channels, const RoundDecisions& dec,
                       ErrorModel model) {
  const int n = static_cast<int>(clients.size());
  if (static_cast<int>(channels.size()) != n ||
      static_cast<int>(dec.rb_counts.size()) != n ||
      static_cast<int>(dec.tx_power_w.size()) != n)
    throw std::invalid_argument("round_costs: per-client arrays must share one length");
  const LayerProfile& prof = cfg.profile;
  const int cut = dec.split.cut;
  const int prev = dec.split.prev_cut;
  if (cut < 1 || cut > prof.layers() || prev < 1 || prev > prof.layers())
    throw std::invalid_argument("round_costs: cut out of [1, layers]");

  RoundCosts out;
  out.per_client_stage1.assign(n, 0.0);
  out.per_client_stage2.assign(n, 0.0);
  out.per_client_stage3.assign(n, 0.0);
  out.e_migration.assign(n, 0.0);
  out.e_forward.assign(n, 0.0);
  out.e_upload.assign(n, 0.0);
  out.e_backward.assign(n, 0.0);
  out.e_total.assign(n, 0.0);
  out.per_error.assign(n, 1.0);

  std::vector<char> active(n, 0);
  for (int i = 0; i < n; ++i)
    active[i] = (dec.rb_counts[i] >= 1 && dec.tx_power_w[i] > 0) ? 1 : 0;

  if (cut < prev) {
    for (int i = 0; i < n; ++i) {
      if (!active[i]) {
        // no uplink available for the layers this client must hand back
        out.feasible = false;
        return out;
      }
    }
  }

  std::vector<LinkState> links(n);
  for (int i = 0; i < n; ++i)
    links[i] = LinkState{channels[i], dec.rb_counts[i], dec.tx_power_w[i]};

  for (int i = 0; i < n; ++i)
    if (active[i]) out.per_error[i] = packet_error_rate(links[i], cfg, model);

  // stage 1: boundary migration
  const double mig_bits = prof.migration_bits(prev, cut);
  if (cut > prev) {
    for (int i = 0; i < n; ++i)
      out.per_client_stage1[i] = mig_bits / downlink_rate(links[i], cfg);
  } else if (cut < prev) {
    for (int i = 0; i < n; ++i) {
      const double rate = uplink_rate(links[i], cfg);
      out.per_client_stage1[i] = mig_bits / rate;
      out.e_migration[i] = mig_bits * dec.tx_power_w[i] / rate;
    }
  }
  out.t_stage1 = 0;
  for (int i = 0; i < n; ++i) out.t_stage1 = std::max(out.t_stage1, out.per_client_stage1[i]);

  // stage 2: client forward pass plus smashed-data upload
  const double fp_c = prof.fp_client(cut);
  const double q_cut = prof.cut_output_bits(cut);
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const double d_i = clients[i].n_samples;
    const double t_fp = cfg.client_cycles_per_flop * fp_c * d_i / clients[i].cpu_hz;
    const double t_up = d_i * q_cut / uplink_rate(links[i], cfg);
    out.per_client_stage2[i] = t_fp + t_up;
    out.t_stage2 = std::max(out.t_stage2, out.per_client_stage2[i]);
    out.e_upload[i] = dec.tx_power_w[i] * t_up;
  }

  // stage 3 (expected): server-side forward/backward over every delivered
  // batch, then per-client gradient downlink and client backward pass, each
  // discounted by the delivery probability.
  double delivered_samples = 0;
  for (int i = 0; i < n; ++i)
    delivered_samples += (1.0 - out.per_error[i]) * clients[i].n_samples;
  const double t_server =
      cfg.server_cycles_per_flop * (prof.fp_server(cut) + prof.bp_server(cut)) *
      delivered_samples / cfg.server_cpu_hz;
  const double grad_bits = prof.grad_downlink_bits(cut);
  const double bp_c = prof.bp_client(cut);
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const double d_i = clients[i].n_samples;
    const double ok = 1.0 - out.per_error[i];
    const double t_dn = ok * d_i * grad_bits / downlink_rate(links[i], cfg);
    const double t_bp = cfg.client_cycles_per_flop * ok * bp_c * d_i / clients[i].cpu_hz;
    out.per_client_stage3[i] = t_server + t_dn + t_bp;
    out.t_stage3 = std::max(out.t_stage3, out.per_client_stage3[i]);
  }

  out.t_total = out.t_stage1 + out.t_stage2 + out.t_stage3;

  for (int i = 0; i < n; ++i) {
    if (!active[i]) {
      out.e_migration[i] = 0;  // non-participants skip the round entirely
      continue;
    }
    const double d_i = clients[i].n_samples;
    const double f_sq = clients[i].cpu_hz * clients[i].cpu_hz;
    out.e_forward[i] = d_i * fp_c * cfg.energy_coeff * cfg.client_cycles_per_flop * f_sq;
    out.e_backward[i] = (1.0 - out.per_error[i]) * d_i * bp_c * cfg.energy_coeff *
                        cfg.client_cycles_per_flop * f_sq;
    out.e_total[i] =
        out.e_migration[i] + out.e_forward[i] + out.e_upload[i] + out.e_backward[i];
  }
  return out;
}

std::vector<double> constraint_values(const ScenarioConfig& cfg, const RoundCosts& costs) {
  std::vector<double> g;
  g.reserve(costs.e_total.size() + 1);
  g.push_back(costs.t_total - cfg.delay_budget_s);
  for (double e : costs.e_total) g.push_back(e - cfg.energy_budget_j);
  return g;
}

}  // namespace asfl
