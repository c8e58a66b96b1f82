#pragma once

#include <vector>

#include "asfl/config.hpp"

namespace asfl {

// Everything the round objective needs, already reduced to scalars per client.
struct ObjectiveInputs {
  double sampling_ratio = 0.05;
  // probed client-side weights: one vector per client plus their average
  std::vector<std::vector<double>> probes;
  std::vector<double> probe_average;
  // server-side geometry at the candidate cut
  double server_avg_norm_sq = 0;            // ||avg over clients||^2
  std::vector<double> server_norm_sq;       // ||client n's server copy||^2
  std::vector<double> server_inner;         // <avg, client n's server copy>
  std::vector<double> per_error;            // packet error per client
};

// Mean over clients of the probe discrepancy term (1/ratio)*||avg - probe_n||^2.
double client_discrepancy_term(const ObjectiveInputs& in);

// Per-client server-side penalty as a function of the delivery probability
// ok = 1 - per_error.
double server_penalty(const ObjectiveInputs& in, int client, ObjectiveMode mode);

// Round objective: mean over clients of probe discrepancy + server penalty.
double g_objective(const ObjectiveInputs& in, ObjectiveMode mode);

// Fast path used by the solvers: same formula with the probe term already
// collapsed to a scalar.
double g_objective_from_terms(double client_term, const std::vector<double>& server_norm_sq,
                              const std::vector<double>& server_inner,
                              double server_avg_norm_sq,
                              const std::vector<double>& per_error, ObjectiveMode mode);

}  // namespace asfl
