#pragma once

#include <random>
#include <vector>

#include "asfl/context.hpp"

namespace asfl {

// Outcome of the RB subproblem at fixed cut and powers. The solver works in
// count space: every rate, error, delay, and energy term depends on the
// allocation matrix only through each client's RB count (all RBs carry the
// same bandwidth), so enumerating count vectors with sum <= K is exhaustive
// over distinct outcomes.
struct RbAssignment {
  std::vector<int> counts;
  bool within_budgets = false;  // chosen candidate satisfies the delay/energy budgets
  bool structurally_solved = true;  // false when every candidate was structurally
                                    // impossible (shrink with unavoidable k=0)
  bool exact = true;                // exhaustive enumeration (vs greedy fallback)
  double g_obj = 0;                 // objective of the chosen candidate
  double max_violation = 0;         // max positive constraint slack of the choice
  long long candidates = 0;         // count vectors scored
};

struct RbCandidate {
  std::vector<int> counts;
  double g_obj = 0;
  double max_violation = 0;
  bool within_budgets = false;
};

// Enumerates count vectors lexicographically; returns the within-budget
// g_obj minimizer, else the candidate minimizing the worst constraint
// violation. Ties keep the lexicographically smallest counts. Falls back to
// greedy single-RB additions when C(K+N, N) exceeds cfg.rb_exact_budget.
// `top`, when non-null, receives the best candidates (at most `top_k`).
RbAssignment solve_rb(const RoundContext& ctx, const SplitDecision& split,
                      const std::vector<double>& tx_power_w,
                      std::vector<RbCandidate>* top = nullptr, int top_k = 5);

// Canonical allocation matrix: client 0 takes the first counts[0] RBs, client
// 1 the next block, and so on. rows = clients, columns = RBs.
std::vector<std::vector<int>> expand_to_matrix(const std::vector<int>& counts, int n_rbs);

// Number of count vectors with n_clients entries summing to at most n_rbs.
unsigned long long count_vector_space(int n_clients, int n_rbs);

// Uniform draw over that space by lexicographic unranking.
std::vector<int> uniform_count_vector(int n_clients, int n_rbs, std::mt19937_64& rng);

// Differential-test oracle: enumerates every per-RB assignment (each RB goes
// to one client or stays idle), reduces to counts, and scores through the
// full cost path. Exponential in K; test instances only.
RbAssignment solve_rb_matrix_oracle(const RoundContext& ctx, const SplitDecision& split,
                                    const std::vector<double>& tx_power_w);

}  // namespace asfl
