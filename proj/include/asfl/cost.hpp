#pragma once

#include <vector>

#include "asfl/radio.hpp"

namespace asfl {

// Boundary placement for the round: layers 1..cut run on clients, the rest on
// the server. prev_cut is last round's boundary and determines migration
// direction (grow -> broadcast new layers downlink, shrink -> clients upload
// the released layers).
struct SplitDecision {
  int cut = 1;
  int prev_cut = 1;
};

struct RoundDecisions {
  SplitDecision split;
  std::vector<int> rb_counts;       // per client; 0 means the client sits the round out
  std::vector<double> tx_power_w;  // per client
};

struct RoundCosts {
  bool feasible = true;  // false only for structurally impossible decisions
                         // (a shrink migration with an RB-less client)
  double t_stage1 = 0;   // migration
  double t_stage2 = 0;   // client forward + activation upload
  double t_stage3 = 0;   // expected server forward/backward + gradient downlink + client backward
  double t_total = 0;
  std::vector<double> per_client_stage1;
  std::vector<double> per_client_stage2;
  std::vector<double> per_client_stage3;  // expected, for participants
  std::vector<double> e_migration;
  std::vector<double> e_forward;
  std::vector<double> e_upload;
  std::vector<double> e_backward;  // expected
  std::vector<double> e_total;     // expected per client
  std::vector<double> per_error;   // packet error used by the expectations
};

// A client participates in stages 2-3 only with at least one RB and positive
// power; non-participants contribute zero delay and energy there and their
// packet error is pinned to 1. Stage-1 migration touches every client: a
// growing boundary is broadcast to all, a shrinking one requires every client
// to upload (infeasible if any client lacks RBs).
RoundCosts round_costs(const ScenarioConfig& cfg, const std::vector<ClientProfile>& clients,
                       const std::vector<ChannelDraw>& channels, const RoundDecisions& dec,
                       ErrorModel model);

// Constraint slacks driving the virtual queues: g[0] = t_total - delay budget,
// g[1..N] = per-client expected energy - energy budget.
std::vector<double> constraint_values(const ScenarioConfig& cfg, const RoundCosts& costs);

}  // namespace asfl
