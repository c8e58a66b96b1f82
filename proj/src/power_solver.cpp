#include "asfl/power_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "asfl/rng.hpp"

namespace asfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kFallbackGridResolution = 200;

double max_forward_energy(const RoundContext& ctx, int cut) {
  const ScenarioConfig& cfg = ctx.cfg();
  const double fp_c = cfg.profile.fp_client(cut);
  double worst = 0;
  for (const ClientProfile& c : ctx.clients()) {
    const double f_sq = c.cpu_hz * c.cpu_hz;
    worst = std::max(worst, c.n_samples * fp_c * cfg.energy_coeff *
                                cfg.client_cycles_per_flop * f_sq);
  }
  return worst;
}

// Signed migration payload: positive when the boundary shrinks (clients hand
// layers back over the uplink), negative when it grows.
double signed_migration_bits(const LayerProfile& prof, int prev_cut, int cut) {
  const double bits = prof.migration_bits(prev_cut, cut);
  if (cut < prev_cut) return bits;
  if (cut > prev_cut) return -bits;
  return 0.0;
}

// Exact per-client expected energy at the candidate power, matching the cost
// model's per-client terms (used by the empty-interval fallback).
double client_round_energy(const RoundContext& ctx, const SplitDecision& split, int client,
                           int rb_count, double p) {
  if (rb_count < 1 || p <= 0) return 0.0;
  const ScenarioConfig& cfg = ctx.cfg();
  const LayerProfile& prof = cfg.profile;
  const ClientProfile& cl = ctx.clients()[client];
  const int cut = split.cut;
  LinkState link{ctx.channels()[client], rb_count, p};
  const double per = packet_error_rate(link, cfg, ctx.error_model());
  const double rate = uplink_rate(link, cfg);
  const double d = cl.n_samples;
  const double f_sq = cl.cpu_hz * cl.cpu_hz;
  double e = 0;
  if (cut < split.prev_cut) e += prof.migration_bits(split.prev_cut, cut) * p / rate;
  e += d * prof.fp_client(cut) * cfg.energy_coeff * cfg.client_cycles_per_flop * f_sq;
  e += p * (d * prof.cut_output_bits(cut) / rate);
  e += (1.0 - per) * d * prof.bp_client(cut) * cfg.energy_coeff *
       cfg.client_cycles_per_flop * f_sq;
  return e;
}

// Uplink airtime the client adds to stages 1-2 at the candidate power (the
// slowest-client terms the round delay is built from); used by the fallback's
// deadline check so minimum-violation powers cannot drift toward zero rate.
double client_uplink_delay(const RoundContext& ctx, const SplitDecision& split, int client,
                           int rb_count, double p) {
  if (rb_count < 1 || p <= 0) return 0.0;
  const ScenarioConfig& cfg = ctx.cfg();
  const LayerProfile& prof = cfg.profile;
  const double rate = uplink_rate(LinkState{ctx.channels()[client], rb_count, p}, cfg);
  double t = 0;
  if (split.cut < split.prev_cut)
    t += prof.migration_bits(split.prev_cut, split.cut) / rate;
  t += ctx.clients()[client].n_samples * prof.cut_output_bits(split.cut) / rate;
  return t;
}

double client_penalty_term(const RoundContext& ctx, int cut, int client, double per,
                           ObjectiveMode mode) {
  const ModelCutStats& s = ctx.stats().at(cut);
  const double ok = 1.0 - per;
  if (mode == ObjectiveMode::verbatim) return ok * ok * s.server_avg_norm_sq;
  return s.server_avg_norm_sq - 2.0 * ok * s.server_inner[client] +
         ok * ok * s.server_norm_sq[client];
}

struct EnergyCap {
  bool active = false;
  bool infeasible = false;  // even the p -> 0 energy floor exceeds the budget
  double cap = 0;
};

// Largest power whose uplink transmission energy bits*p/rate(p) stays within
// the budget. The energy is strictly increasing in p with infimum
// bits*N0*ln2/(k*gain) as p -> 0, so the cap is a plain bisection root.
// Inactive when the constraint never binds below the power cap; infeasible
// when no power at all can meet the budget (the interval is then empty and
// the caller falls back to the minimum-violation grid).
EnergyCap exact_energy_cap(double bits, double k, double gain, double budget,
                           const ScenarioConfig& cfg) {
  EnergyCap out;
  if (bits <= 0.0) return out;
  const double b = cfg.rb_bandwidth_hz;
  const double n0 = cfg.noise_psd_w_per_hz;
  auto energy = [&](double p) {
    return bits * p / (k * b * std::log2(1.0 + p * gain / (b * n0)));
  };
  if (budget <= bits * n0 * std::log(2.0) / (k * gain)) {
    out.infeasible = true;
    return out;
  }
  if (energy(cfg.max_tx_power_w) <= budget) return out;
  double lo = 0.0, hi = cfg.max_tx_power_w;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (energy(mid) <= budget ? lo : hi) = mid;
  }
  out.active = true;
  out.cap = lo;
  return out;
}

}  // namespace

AuxBudgets init_aux_budgets(const RoundContext& ctx, int cut, int round) {
  const ScenarioConfig& cfg = ctx.cfg();
  AuxBudgets aux;
  const double delta_pool = std::max(cfg.energy_budget_j - max_forward_energy(ctx, cut), 0.0);
  if (!cfg.random_aux_init) {
    aux.gamma1 = aux.gamma2 = aux.gamma3 = cfg.delay_budget_s / 3.0;
    aux.delta1 = aux.delta2 = aux.delta3 = delta_pool / 3.0;
    return aux;
  }
  std::mt19937_64 rng = make_stream(cfg.seeds.env, "aux", static_cast<uint64_t>(round), 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double gshare[3], dshare[3], gsum = 0, dsum = 0;
  for (double& v : gshare) {
    v = uni(rng);
    gsum += v;
  }
  for (double& v : dshare) {
    v = uni(rng);
    dsum += v;
  }
  aux.gamma1 = cfg.delay_budget_s * gshare[0] / gsum;
  aux.gamma2 = cfg.delay_budget_s * gshare[1] / gsum;
  aux.gamma3 = cfg.delay_budget_s * gshare[2] / gsum;
  aux.delta1 = delta_pool * dshare[0] / dsum;
  aux.delta2 = delta_pool * dshare[1] / dsum;
  aux.delta3 = delta_pool * dshare[2] / dsum;
  return aux;
}

PowerInterval power_bounds(const RoundContext& ctx, const SplitDecision& split, int client,
                           int rb_count, const AuxBudgets& aux) {
  if (rb_count < 1) throw std::invalid_argument("power_bounds: client holds no RB");
  const ScenarioConfig& cfg = ctx.cfg();
  const LayerProfile& prof = cfg.profile;
  const ClientProfile& cl = ctx.clients()[client];
  const int cut = split.cut;
  const double gain = ctx.channels()[client].gain_sq;
  const double b = cfg.rb_bandwidth_hz;
  const double n0 = cfg.noise_psd_w_per_hz;
  const double k = rb_count;
  const double d = cl.n_samples;
  const double ln2 = std::log(2.0);

  PowerInterval iv;

  // lower bound from the stage-1 migration deadline
  const double mig = signed_migration_bits(prof, split.prev_cut, cut);
  if (mig == 0.0) {
    iv.bound[0] = 0.0;
  } else {
    const double expo = mig / (aux.gamma1 * b * k);
    iv.bound[0] = b * n0 * (std::exp2(expo) - 1.0) / gain;
  }
  iv.active[0] = true;

  // lower bound from the stage-2 deadline; the denominator carries the
  // bandwidth factor exactly as printed, so it routinely flips negative and
  // deactivates the bound (the true stage-2 constraint is still enforced by
  // the cost model downstream)
  const double q_cut = prof.cut_output_bits(cut);
  if (q_cut == 0.0) {
    iv.bound[1] = 0.0;
  } else {
    const double denom =
        (aux.gamma2 * cl.cpu_hz - cfg.client_cycles_per_flop * d * b * prof.fp_client(cut)) * k;
    const double expo = cl.cpu_hz * q_cut / denom;
    iv.bound[1] = b * n0 * (std::exp2(expo) - 1.0) / gain;
  }
  iv.active[1] = true;

  const double e0 = ctx.error_floor(client, rb_count);
  OmegaCoefficients om = omega_coefficients(ctx, cut, client, rb_count, cfg.objective_mode);

  // upper bound from the expected stage-3 deadline
  if (e0 > 0.0 && om.omega1_printed > 0.0) {
    const double arg = (om.omega1_printed - aux.gamma3) / (om.omega1_printed * e0);
    if (arg > 1.0) {
      iv.bound[2] = 1.0 / std::log(arg);
      iv.active[2] = true;
    }
  }

  // upper bound from the migration energy budget: exact root of the monotone
  // energy curve; the two-term low-SNR expansion of the same cap is recorded
  // for diagnostics only (see PowerInterval)
  bool cap_infeasible = false;
  if (mig > 0.0) {
    if (aux.delta1 > 0.0) {
      iv.taylor_c4 =
          2.0 * b * n0 / gain * (1.0 - mig * n0 * ln2 / (aux.delta1 * k * gain));
      iv.taylor_c4_defined = true;
    }
    const EnergyCap cap = exact_energy_cap(mig, k, gain, aux.delta1, cfg);
    if (cap.active) {
      iv.bound[3] = cap.cap;
      iv.active[3] = true;
    }
    cap_infeasible |= cap.infeasible;
  }

  // upper bound from the upload energy budget, same exact treatment
  if (d * q_cut > 0.0) {
    if (aux.delta2 > 0.0) {
      iv.taylor_c5 =
          2.0 * b * n0 / gain * (1.0 - d * n0 * ln2 * q_cut / (aux.delta2 * k * gain));
      iv.taylor_c5_defined = true;
    }
    const EnergyCap cap = exact_energy_cap(d * q_cut, k, gain, aux.delta2, cfg);
    if (cap.active) {
      iv.bound[4] = cap.cap;
      iv.active[4] = true;
    }
    cap_infeasible |= cap.infeasible;
  }

  // upper bound from the expected backward-pass energy budget
  const double bp_energy = d * prof.bp_client(cut) * cfg.energy_coeff *
                           cfg.client_cycles_per_flop * cl.cpu_hz * cl.cpu_hz;
  if (bp_energy > 0.0 && e0 > 0.0) {
    const double arg = (bp_energy * k - aux.delta3) / (e0 * bp_energy);
    if (arg > 1.0) {
      iv.bound[5] = 1.0 / std::log(arg);
      iv.active[5] = true;
    }
  }

  iv.lo = std::max({0.0, iv.bound[0], iv.bound[1]});
  iv.hi = cfg.max_tx_power_w;
  for (int i = 2; i < 6; ++i)
    if (iv.active[i]) iv.hi = std::min(iv.hi, iv.bound[i]);
  // An energy budget no power can meet leaves no feasible interval at all;
  // reporting it empty routes the client to the minimum-violation fallback
  // instead of silently dropping the constraint.
  iv.empty = !(iv.lo <= iv.hi) || cap_infeasible;
  return iv;
}

OmegaCoefficients omega_coefficients(const RoundContext& ctx, int cut, int client,
                                     int rb_count, ObjectiveMode mode) {
  const ScenarioConfig& cfg = ctx.cfg();
  const LayerProfile& prof = cfg.profile;
  const ClientProfile& cl = ctx.clients()[client];
  const double d = cl.n_samples;

  OmegaCoefficients om;
  const double server = cfg.server_cycles_per_flop * d *
                        (prof.fp_server(cut) + prof.bp_server(cut)) / cfg.server_cpu_hz;
  const double client_bp =
      cfg.client_cycles_per_flop * d * prof.bp_client(cut) / cl.cpu_hz;
  const double dn_rate = downlink_rate(LinkState{ctx.channels()[client], 0, 0.0}, cfg);
  const double grad_bits = prof.grad_downlink_bits(cut);
  om.omega1_printed = server + client_bp + grad_bits / dn_rate;
  om.omega1_exact = server + client_bp + d * grad_bits / dn_rate;

  const double e0 = ctx.error_floor(client, rb_count);
  om.error_floor = e0;
  const ModelCutStats& s = ctx.stats().at(cut);
  if (mode == ObjectiveMode::verbatim) {
    om.omega2 = e0 * e0 * s.server_avg_norm_sq;
    om.omega3 = 0.0;
  } else {
    om.omega2 = e0 * e0 * s.server_norm_sq[client];
    om.omega3 = -2.0 * e0 * s.server_inner[client];
  }
  return om;
}

double surrogate_value(double omega2, double omega3, double p) {
  if (p <= 0) return kInf;
  const double x = std::exp(1.0 / p);
  if (!std::isfinite(x)) {
    if (omega2 > 0) return kInf;
    if (omega2 < 0) return -kInf;
    return omega3 > 0 ? kInf : (omega3 < 0 ? -kInf : 0.0);
  }
  return x * (omega2 * x + omega3);
}

PowerChoice closed_form_power(const PowerInterval& iv, double omega2, double omega3) {
  PowerChoice out;
  if (omega2 <= 0.0) {
    out.p = iv.hi;
    out.branch = PowerBranch::otherwise;
    out.omega2_degenerate = true;
    return out;
  }
  if (omega3 < 0.0) {
    const double ratio = -omega3 / (2.0 * omega2);
    if (ratio > 1.0) {
      const double critical = 1.0 / std::log(ratio);
      if (critical < iv.lo) {
        out.p = iv.lo;
        out.branch = PowerBranch::c1_lower;
      } else if (critical <= iv.hi) {
        out.p = critical;
        out.branch = PowerBranch::c2_critical;
      } else {
        out.p = iv.hi;
        out.branch = PowerBranch::otherwise;
      }
      return out;
    }
    out.log_degenerate = true;
  }
  out.p = iv.hi;
  out.branch = PowerBranch::otherwise;
  return out;
}

double power_grid_oracle(const RoundContext& ctx, int cut, int client, int rb_count,
                         double lo, double hi, int resolution, ObjectiveMode mode) {
  if (resolution < 100) throw std::invalid_argument("power_grid_oracle: resolution < 100");
  if (!(lo <= hi)) throw std::invalid_argument("power_grid_oracle: empty interval");

  auto sweep = [&](double a, double b) {
    double best_p = a, best_v = kInf;
    for (int i = 0; i <= resolution; ++i) {
      const double p = a + (b - a) * i / resolution;
      const double v = client_penalty_term(ctx, cut, client,
                                           ctx.per_error(client, rb_count, p), mode);
      if (v < best_v) {
        best_v = v;
        best_p = p;
      }
    }
    return best_p;
  };

  const double coarse = sweep(lo, hi);
  const double step = (hi - lo) / resolution;
  if (step <= 0) return coarse;
  return sweep(std::max(lo, coarse - step), std::min(hi, coarse + step));
}

PowerIterationReport iterate_power(const RoundContext& ctx, const SplitDecision& split,
                                   const std::vector<int>& rb_counts,
                                   const std::vector<double>& p_init, int round) {
  const ScenarioConfig& cfg = ctx.cfg();
  const int n = ctx.n_clients();
  if (static_cast<int>(rb_counts.size()) != n || static_cast<int>(p_init.size()) != n)
    throw std::invalid_argument("iterate_power: per-client arrays must share one length");

  PowerIterationReport rep;
  rep.p = p_init;
  rep.branch.assign(n, PowerBranch::otherwise);
  rep.solved.assign(n, 0);
  rep.empty_fallback.assign(n, 0);
  rep.degenerate.assign(n, 0);
  for (int i = 0; i < n; ++i) rep.solved[i] = rb_counts[i] >= 1 ? 1 : 0;

  AuxBudgets aux = init_aux_budgets(ctx, split.cut, round);

  auto evaluate_now = [&](const std::vector<double>& p) {
    RoundDecisions dec;
    dec.split = split;
    dec.rb_counts = rb_counts;
    dec.tx_power_w = p;
    return ctx.evaluate(dec);
  };

  DecisionEval ev = evaluate_now(rep.p);
  if (!ev.structurally_feasible) return rep;  // nothing solvable at these counts
  double g_prev = ev.g_obj(cfg.objective_mode);
  rep.g_obj = g_prev;

  for (int iter = 1; iter <= cfg.power_max_iters; ++iter) {
    rep.iterations = iter;
    for (int i = 0; i < n; ++i) {
      if (!rep.solved[i]) continue;
      rep.empty_fallback[i] = 0;
      rep.degenerate[i] = 0;
      PowerInterval iv = power_bounds(ctx, split, i, rb_counts[i], aux);
      if (iv.empty) {
        // No power satisfies the derived interval: sweep the grid for the
        // best budget-respecting power, or failing that the power with the
        // smallest relative violation across the energy and deadline budgets
        // (energy alone would send p toward zero and the airtime to hours).
        rep.empty_fallback[i] = 1;
        double best_p = cfg.max_tx_power_w, best_obj = kInf;
        double best_viol_p = cfg.max_tx_power_w, best_viol = kInf;
        bool any_ok = false;
        for (int gpt = 1; gpt <= kFallbackGridResolution; ++gpt) {
          const double p = cfg.max_tx_power_w * gpt / kFallbackGridResolution;
          const double obj = client_penalty_term(
              ctx, split.cut, i, ctx.per_error(i, rb_counts[i], p), cfg.objective_mode);
          const double energy = client_round_energy(ctx, split, i, rb_counts[i], p);
          const double airtime = client_uplink_delay(ctx, split, i, rb_counts[i], p);
          if (energy <= cfg.energy_budget_j && airtime <= cfg.delay_budget_s) {
            if (!any_ok || obj < best_obj) {
              any_ok = true;
              best_obj = obj;
              best_p = p;
            }
          } else if (!any_ok) {
            const double viol =
                std::max((energy - cfg.energy_budget_j) / cfg.energy_budget_j,
                         (airtime - cfg.delay_budget_s) / cfg.delay_budget_s);
            if (viol < best_viol) {
              best_viol = viol;
              best_viol_p = p;
            }
          }
        }
        rep.p[i] = any_ok ? best_p : best_viol_p;
        continue;
      }
      OmegaCoefficients om = omega_coefficients(ctx, split.cut, i, rb_counts[i],
                                                cfg.objective_mode);
      PowerChoice choice = closed_form_power(iv, om.omega2, om.omega3);
      rep.branch[i] = choice.branch;
      rep.degenerate[i] = (choice.omega2_degenerate || choice.log_degenerate) ? 1 : 0;
      rep.p[i] = choice.p;
    }

    ev = evaluate_now(rep.p);
    const double g_now = ev.g_obj(cfg.objective_mode);
    rep.g_obj = g_now;

    // energy audit: true migration/upload energies at the chosen powers vs
    // the sub-budgets the caps were derived from (a violation is possible
    // only when a cap was infeasible at every power or the interval
    // collapsed to the grid fallback)
    for (int i = 0; i < n; ++i) {
      if (!rep.solved[i]) continue;
      if (ev.costs.e_migration[i] > aux.delta1 + 1e-15) ++rep.energy_audit_violations;
      if (ev.costs.e_upload[i] > aux.delta2 + 1e-15) ++rep.energy_audit_violations;
    }

    // refresh: take the realized per-client maxima as stage shares, then
    // scale them onto the round pool (equal thirds when nothing was
    // realized). Scaling up returns unused slack to the busy stages instead
    // of ratcheting the budgets down from the initial equal split; scaling
    // down pulls overspent stages back so the caps keep enforcing the true
    // per-round budget rather than ratifying whatever the last powers spent.
    AuxBudgets next{};
    for (int i = 0; i < n; ++i) {
      next.gamma1 = std::max(next.gamma1, ev.costs.per_client_stage1[i]);
      next.gamma2 = std::max(next.gamma2, ev.costs.per_client_stage2[i]);
      OmegaCoefficients om = omega_coefficients(ctx, split.cut, i,
                                                std::max(rb_counts[i], 1),
                                                cfg.objective_mode);
      next.gamma3 =
          std::max(next.gamma3, om.omega1_exact * (1.0 - ev.costs.per_error[i]));
      next.delta1 = std::max(next.delta1, ev.costs.e_migration[i]);
      next.delta2 = std::max(next.delta2, ev.costs.e_upload[i]);
      next.delta3 = std::max(next.delta3, ev.costs.e_backward[i]);
    }
    auto redistribute = [](double pool, double& s1, double& s2, double& s3) {
      const double used = s1 + s2 + s3;
      if (used <= 0.0) {
        s1 = s2 = s3 = pool / 3.0;
        return;
      }
      const double scale = pool / used;
      s1 *= scale;
      s2 *= scale;
      s3 *= scale;
    };
    redistribute(cfg.delay_budget_s, next.gamma1, next.gamma2, next.gamma3);
    redistribute(std::max(cfg.energy_budget_j - max_forward_energy(ctx, split.cut), 0.0),
                 next.delta1, next.delta2, next.delta3);
    aux = next;

    // The first pass runs under the provisional equal-thirds budgets; only
    // after the first refresh re-anchors them to realized costs is "no
    // objective change" evidence of a fixed point rather than of caps that
    // happened to sit at the incoming powers.
    if (iter > 1 && std::abs(g_now - g_prev) <= cfg.solver_tol_power) {
      rep.converged = true;
      break;
    }
    g_prev = g_now;
  }
  rep.aux = aux;
  return rep;
}

}  // namespace asfl
