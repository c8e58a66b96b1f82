#include "asfl/rb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asfl {

namespace {

// Per-(client, count) cost pieces, precomputed once per solve so each of the
// C(K+N, N) candidates assembles in O(N). Every row replicates the exact
// expression order of round_costs so a table-scored candidate is bit-identical
// to the full cost path.
struct CandidateTables {
  int n = 0;
  int kmax = 0;
  bool grow = false, shrink = false;
  double t1_grow = 0;       // grow migration is a broadcast: count-independent
  double server_scale = 0;  // cycles/flop times per-sample server flops
  double server_cpu_hz = 0;
  double delay_budget = 0, energy_budget = 0;
  std::vector<char> power_positive;
  std::vector<double> t_fp;       // per client, stage-2 compute
  std::vector<double> e_forward;  // per client
  // per (client, count >= 1), index i * (kmax + 1) + k
  std::vector<double> per_error;
  std::vector<double> shrink_stage1;
  std::vector<double> e_migration;
  std::vector<double> t_up;
  std::vector<double> e_upload;
  std::vector<double> delivered;
  std::vector<double> t_dn;
  std::vector<double> t_bp;
  std::vector<double> e_backward;

  std::size_t at(int i, int k) const {
    return static_cast<std::size_t>(i) * (kmax + 1) + k;
  }
};

CandidateTables build_tables(const RoundContext& ctx, const SplitDecision& split,
                             const std::vector<double>& p) {
  const ScenarioConfig& cfg = ctx.cfg();
  const LayerProfile& prof = cfg.profile;
  const std::vector<ClientProfile>& clients = ctx.clients();
  const std::vector<ChannelDraw>& channels = ctx.channels();
  const int cut = split.cut;

  CandidateTables t;
  t.n = ctx.n_clients();
  t.kmax = cfg.n_rbs;
  t.grow = cut > split.prev_cut;
  t.shrink = cut < split.prev_cut;
  t.server_scale =
      cfg.server_cycles_per_flop * (prof.fp_server(cut) + prof.bp_server(cut));
  t.server_cpu_hz = cfg.server_cpu_hz;
  t.delay_budget = cfg.delay_budget_s;
  t.energy_budget = cfg.energy_budget_j;

  const double mig_bits = prof.migration_bits(split.prev_cut, cut);
  const double fp_c = prof.fp_client(cut);
  const double q_cut = prof.cut_output_bits(cut);
  const double grad_bits = prof.grad_downlink_bits(cut);
  const double bp_c = prof.bp_client(cut);

  const std::size_t slots = static_cast<std::size_t>(t.n) * (t.kmax + 1);
  t.power_positive.assign(t.n, 0);
  t.t_fp.assign(t.n, 0.0);
  t.e_forward.assign(t.n, 0.0);
  t.per_error.assign(slots, 1.0);
  t.shrink_stage1.assign(slots, 0.0);
  t.e_migration.assign(slots, 0.0);
  t.t_up.assign(slots, 0.0);
  t.e_upload.assign(slots, 0.0);
  t.delivered.assign(slots, 0.0);
  t.t_dn.assign(slots, 0.0);
  t.t_bp.assign(slots, 0.0);
  t.e_backward.assign(slots, 0.0);

  for (int i = 0; i < t.n; ++i) {
    t.power_positive[i] = p[i] > 0 ? 1 : 0;
    const double d_i = clients[i].n_samples;
    const double f_sq = clients[i].cpu_hz * clients[i].cpu_hz;
    const double dn_rate = downlink_rate(LinkState{channels[i], 0, 0.0}, cfg);
    if (t.grow)
      t.t1_grow = std::max(t.t1_grow, mig_bits / dn_rate);
    if (!t.power_positive[i]) continue;
    t.t_fp[i] = cfg.client_cycles_per_flop * fp_c * d_i / clients[i].cpu_hz;
    t.e_forward[i] = d_i * fp_c * cfg.energy_coeff * cfg.client_cycles_per_flop * f_sq;
    for (int k = 1; k <= t.kmax; ++k) {
      const std::size_t s = t.at(i, k);
      LinkState link{channels[i], k, p[i]};
      const double per = packet_error_rate(link, cfg, ctx.error_model());
      const double rate = uplink_rate(link, cfg);
      const double ok = 1.0 - per;
      t.per_error[s] = per;
      if (t.shrink) {
        t.shrink_stage1[s] = mig_bits / rate;
        t.e_migration[s] = mig_bits * p[i] / rate;
      }
      t.t_up[s] = d_i * q_cut / rate;
      t.e_upload[s] = p[i] * t.t_up[s];
      t.delivered[s] = ok * clients[i].n_samples;
      t.t_dn[s] = ok * d_i * grad_bits / dn_rate;
      t.t_bp[s] = cfg.client_cycles_per_flop * ok * bp_c * d_i / clients[i].cpu_hz;
      t.e_backward[s] = ok * d_i * bp_c * cfg.energy_coeff *
                        cfg.client_cycles_per_flop * f_sq;
    }
  }
  return t;
}

struct CandidateScore {
  bool structural = false;
  bool within = false;
  double g_obj = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
};

CandidateScore score_counts(const CandidateTables& t, const ModelCutStats& stats,
                            ObjectiveMode mode, const std::vector<int>& counts,
                            std::vector<double>& per_error_scratch) {
  CandidateScore sc;
  if (t.shrink) {
    for (int i = 0; i < t.n; ++i)
      if (counts[i] < 1 || !t.power_positive[i]) return sc;
  }
  sc.structural = true;

  double t_stage1 = 0, t_stage2 = 0, t_stage3 = 0;
  double delivered = 0;
  for (int i = 0; i < t.n; ++i) {
    const bool active = counts[i] >= 1 && t.power_positive[i];
    const std::size_t s = t.at(i, active ? counts[i] : 0);
    per_error_scratch[i] = active ? t.per_error[s] : 1.0;
    if (t.shrink) t_stage1 = std::max(t_stage1, t.shrink_stage1[s]);
    if (active) {
      t_stage2 = std::max(t_stage2, t.t_fp[i] + t.t_up[s]);
      delivered += t.delivered[s];
    }
  }
  if (t.grow) t_stage1 = t.t1_grow;
  const double t_server = t.server_scale * delivered / t.server_cpu_hz;
  for (int i = 0; i < t.n; ++i) {
    if (!(counts[i] >= 1 && t.power_positive[i])) continue;
    const std::size_t s = t.at(i, counts[i]);
    t_stage3 = std::max(t_stage3, t_server + t.t_dn[s] + t.t_bp[s]);
  }
  const double t_total = t_stage1 + t_stage2 + t_stage3;

  sc.worst_slack = t_total - t.delay_budget;
  for (int i = 0; i < t.n; ++i) {
    double e_total = 0;
    if (counts[i] >= 1 && t.power_positive[i]) {
      const std::size_t s = t.at(i, counts[i]);
      e_total = t.e_migration[s] + t.e_forward[i] + t.e_upload[s] + t.e_backward[s];
    }
    sc.worst_slack = std::max(sc.worst_slack, e_total - t.energy_budget);
  }
  sc.within = sc.worst_slack <= 0;
  sc.g_obj = g_objective_from_terms(stats.client_term, stats.server_norm_sq,
                                    stats.server_inner, stats.server_avg_norm_sq,
                                    per_error_scratch, mode);
  return sc;
}

// Candidates rank by: structurally possible first, then within budgets, then
// objective (within) or worst violation (not). Lower is better.
bool better(const CandidateScore& a, const CandidateScore& b) {
  if (a.structural != b.structural) return a.structural;
  if (!a.structural) return false;
  if (a.within != b.within) return a.within;
  if (a.within) return a.g_obj < b.g_obj;
  return a.worst_slack < b.worst_slack;
}

bool strictly_better_or_lex(const CandidateScore& a, const std::vector<int>& a_counts,
                            const CandidateScore& b, const std::vector<int>& b_counts) {
  if (better(a, b)) return true;
  if (better(b, a)) return false;
  return a_counts < b_counts;
}

std::vector<int> coverage_fallback_counts(int n, int kmax) {
  std::vector<int> counts(n, 0);
  for (int i = 0; i < n && i < kmax; ++i) counts[i] = 1;
  return counts;
}

void maybe_record_top(std::vector<RbCandidate>* top, int top_k,
                      const std::vector<int>& counts, const CandidateScore& sc) {
  if (!top || !sc.structural) return;
  RbCandidate cand;
  cand.counts = counts;
  cand.g_obj = sc.g_obj;
  cand.max_violation = std::max(sc.worst_slack, 0.0);
  cand.within_budgets = sc.within;
  auto pos = std::find_if(top->begin(), top->end(), [&](const RbCandidate& other) {
    if (cand.within_budgets != other.within_budgets) return cand.within_budgets;
    if (cand.within_budgets) return cand.g_obj < other.g_obj;
    return cand.max_violation < other.max_violation;
  });
  top->insert(pos, std::move(cand));
  if (static_cast<int>(top->size()) > top_k) top->pop_back();
}

}  // namespace

unsigned long long count_vector_space(int n_clients, int n_rbs) {
  // C(n_rbs + n_clients, n_clients) by Pascal rows, saturating on overflow
  const unsigned long long cap = std::numeric_limits<unsigned long long>::max() / 2;
  std::vector<unsigned long long> row(static_cast<std::size_t>(n_rbs) + 1, 1);
  for (int i = 1; i <= n_clients; ++i)
    for (int j = 1; j <= n_rbs; ++j)
      row[j] = std::min(cap, row[j] + row[j - 1]);
  return row[n_rbs];
}

RbAssignment solve_rb(const RoundContext& ctx, const SplitDecision& split,
                      const std::vector<double>& tx_power_w,
                      std::vector<RbCandidate>* top, int top_k) {
  const ScenarioConfig& cfg = ctx.cfg();
  const int n = ctx.n_clients();
  const int kmax = cfg.n_rbs;
  if (static_cast<int>(tx_power_w.size()) != n)
    throw std::invalid_argument("solve_rb: power vector size mismatch");

  CandidateTables tables = build_tables(ctx, split, tx_power_w);
  const ModelCutStats& stats = ctx.stats().at(split.cut);

  RbAssignment out;
  std::vector<double> scratch(n, 1.0);
  std::vector<int> counts(n, 0);
  CandidateScore best;
  std::vector<int> best_counts;
  bool have = false;

  auto consider = [&](const std::vector<int>& cand) {
    CandidateScore sc = score_counts(tables, stats, cfg.objective_mode, cand, scratch);
    ++out.candidates;
    if (!sc.structural) return;
    maybe_record_top(top, top_k, cand, sc);
    if (!have || better(sc, best)) {
      best = sc;
      best_counts = cand;
      have = true;
    }
  };

  const bool exact =
      static_cast<double>(count_vector_space(n, kmax)) <= cfg.rb_exact_budget;
  out.exact = exact;
  if (exact) {
    const int floor_k = tables.shrink ? 1 : 0;
    auto rec = [&](auto&& self, int i, int remaining) -> void {
      if (i == n) {
        consider(counts);
        return;
      }
      const int rest_floor = (n - i - 1) * floor_k;
      for (int k = floor_k; k <= remaining - rest_floor; ++k) {
        counts[i] = k;
        self(self, i + 1, remaining - k);
      }
      counts[i] = 0;
    };
    bool shrink_possible = true;
    if (tables.shrink) {
      if (n > kmax) shrink_possible = false;
      for (int i = 0; i < n; ++i)
        if (!tables.power_positive[i]) shrink_possible = false;
    }
    if (shrink_possible) rec(rec, 0, kmax);
  } else {
    // greedy: add one RB at a time wherever it helps most
    std::vector<int> current(n, 0);
    CandidateScore cur_sc = score_counts(tables, stats, cfg.objective_mode, current, scratch);
    ++out.candidates;
    if (cur_sc.structural) {
      best = cur_sc;
      best_counts = current;
      have = true;
    }
    for (int step = 0; step < kmax; ++step) {
      int best_i = -1;
      CandidateScore step_best;
      for (int i = 0; i < n; ++i) {
        current[i] += 1;
        CandidateScore sc = score_counts(tables, stats, cfg.objective_mode, current, scratch);
        ++out.candidates;
        current[i] -= 1;
        if (sc.structural && (best_i < 0 || better(sc, step_best))) {
          step_best = sc;
          best_i = i;
        }
      }
      if (best_i < 0) break;
      current[best_i] += 1;
      if (!have || better(step_best, best)) {
        best = step_best;
        best_counts = current;
        have = true;
      }
    }
  }

  if (!have) {
    out.counts = coverage_fallback_counts(n, kmax);
    out.structurally_solved = false;
    out.within_budgets = false;
    out.g_obj = std::numeric_limits<double>::quiet_NaN();
    out.max_violation = std::numeric_limits<double>::infinity();
    return out;
  }
  out.counts = best_counts;
  out.within_budgets = best.within;
  out.g_obj = best.g_obj;
  out.max_violation = std::max(best.worst_slack, 0.0);
  return out;
}

std::vector<std::vector<int>> expand_to_matrix(const std::vector<int>& counts, int n_rbs) {
  const int n = static_cast<int>(counts.size());
  std::vector<std::vector<int>> u(n, std::vector<int>(n_rbs, 0));
  int next = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < counts[i]; ++k) {
      if (next >= n_rbs) throw std::invalid_argument("expand_to_matrix: counts exceed RBs");
      u[i][next++] = 1;
    }
  }
  return u;
}

std::vector<int> uniform_count_vector(int n_clients, int n_rbs, std::mt19937_64& rng) {
  const unsigned long long total = count_vector_space(n_clients, n_rbs);
  std::uniform_int_distribution<unsigned long long> pick(0, total - 1);
  unsigned long long rank = pick(rng);
  std::vector<int> counts(n_clients, 0);
  int remaining = n_rbs;
  for (int i = 0; i < n_clients; ++i) {
    for (int v = 0; v <= remaining; ++v) {
      const unsigned long long block = count_vector_space(n_clients - i - 1, remaining - v);
      if (rank < block) {
        counts[i] = v;
        remaining -= v;
        break;
      }
      rank -= block;
    }
  }
  return counts;
}

RbAssignment solve_rb_matrix_oracle(const RoundContext& ctx, const SplitDecision& split,
                                    const std::vector<double>& tx_power_w) {
  const ScenarioConfig& cfg = ctx.cfg();
  const int n = ctx.n_clients();
  const int kmax = cfg.n_rbs;

  RbAssignment out;
  CandidateScore best;
  std::vector<int> best_counts;
  bool have = false;

  // each RB independently goes to a client or stays idle: (n+1)^kmax matrices
  std::vector<int> owner(kmax, 0);  // 0 = idle, 1..n = client index + 1
  while (true) {
    std::vector<int> counts(n, 0);
    for (int k = 0; k < kmax; ++k)
      if (owner[k] > 0) counts[owner[k] - 1] += 1;

    RoundDecisions dec;
    dec.split = split;
    dec.rb_counts = counts;
    dec.tx_power_w = tx_power_w;
    DecisionEval ev = ctx.evaluate(dec);
    ++out.candidates;
    if (ev.structurally_feasible) {
      CandidateScore sc;
      sc.structural = true;
      sc.within = ev.within_budgets;
      sc.g_obj = ev.g_obj(cfg.objective_mode);
      sc.worst_slack = -std::numeric_limits<double>::infinity();
      for (double g : ev.g) sc.worst_slack = std::max(sc.worst_slack, g);
      if (!have || strictly_better_or_lex(sc, counts, best, best_counts)) {
        best = sc;
        best_counts = counts;
        have = true;
      }
    }

    int pos = kmax - 1;
    while (pos >= 0 && owner[pos] == n) owner[pos--] = 0;
    if (pos < 0) break;
    owner[pos] += 1;
  }

  if (!have) {
    out.counts = coverage_fallback_counts(n, kmax);
    out.structurally_solved = false;
    out.within_budgets = false;
    out.g_obj = std::numeric_limits<double>::quiet_NaN();
    out.max_violation = std::numeric_limits<double>::infinity();
    return out;
  }
  out.counts = best_counts;
  out.within_budgets = best.within;
  out.g_obj = best.g_obj;
  out.max_violation = std::max(best.worst_slack, 0.0);
  return out;
}

}  // namespace asfl
