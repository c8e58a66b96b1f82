#include "asfl/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace asfl {

double client_discrepancy_term(const ObjectiveInputs& in) {
  const int n = static_cast<int>(in.probes.size());
  if (n == 0) return 0.0;
  double sum = 0;
  for (int c = 0; c < n; ++c) {
    double d = 0;
    for (std::size_t i = 0; i < in.probe_average.size(); ++i) {
      const double diff = in.probe_average[i] - in.probes[c][i];
      d += diff * diff;
    }
    sum += d / in.sampling_ratio;
  }
  return sum / n;
}

namespace {

double penalty(double ok, double norm_sq, double inner, double avg_norm_sq,
               ObjectiveMode mode) {
  if (mode == ObjectiveMode::verbatim) return ok * ok * avg_norm_sq;
  // || avg - ok * copy_n ||^2 expanded
  return avg_norm_sq - 2.0 * ok * inner + ok * ok * norm_sq;
}

}  // namespace

double server_penalty(const ObjectiveInputs& in, int client, ObjectiveMode mode) {
  const double ok = 1.0 - in.per_error[client];
  return penalty(ok, in.server_norm_sq[client], in.server_inner[client],
                 in.server_avg_norm_sq, mode);
}

double g_objective(const ObjectiveInputs& in, ObjectiveMode mode) {
  const int n = static_cast<int>(in.per_error.size());
  if (n == 0) throw std::invalid_argument("g_objective: no clients");
  double sum = 0;
  for (int c = 0; c < n; ++c) sum += server_penalty(in, c, mode);
  return client_discrepancy_term(in) + sum / n;
}

double g_objective_from_terms(double client_term, const std::vector<double>& server_norm_sq,
                              const std::vector<double>& server_inner,
                              double server_avg_norm_sq,
                              const std::vector<double>& per_error, ObjectiveMode mode) {
  const int n = static_cast<int>(per_error.size());
  double sum = 0;
  for (int c = 0; c < n; ++c)
    sum += penalty(1.0 - per_error[c], server_norm_sq[c], server_inner[c],
                   server_avg_norm_sq, mode);
  return client_term + sum / n;
}

}  // namespace asfl
