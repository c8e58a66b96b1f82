#pragma once

#include <cstdint>

#include "asfl/config.hpp"
#include "asfl/scenario.hpp"

namespace asfl {

// Per-client radio state for one round: the channel realization plus the
// decision variables that shape the links.
struct LinkState {
  ChannelDraw channel;
  int rb_count = 0;     // uplink resource blocks granted this round
  double tx_power_w = 0;
};

enum class ErrorModel {
  frozen,      // use the realized |h|^2 deterministically
  expectation  // average over unit-mean exponential fading at the drawn path loss
};

// Uplink rate over rb_count pooled resource blocks (bits/s):
//   k * B * log2(1 + p * |h|^2 / (B * N0)).
// Requires rb_count >= 1 and tx_power_w > 0.
double uplink_rate(const LinkState& link, const ScenarioConfig& cfg);

// Broadcast downlink rate (bits/s) over the dedicated band at the server's
// fixed transmit power.
double downlink_rate(const LinkState& link, const ScenarioConfig& cfg);

// E[exp(-c / X)] for X ~ Exponential with mean `mean` (c >= 0, mean > 0).
// Default path: adaptive quadrature. Equals 2*sqrt(rho)*K1(2*sqrt(rho)) with
// rho = c / mean.
double fading_expectation(double c, double mean);

// Same expectation via the Bessel identity (cross-check path).
double fading_expectation_bessel(double c, double mean);

// Same expectation by Monte Carlo; returns the estimate and fills the
// standard error of the mean if stderr_out is non-null.
double fading_expectation_mc(double c, double mean, std::int64_t draws,
                             std::uint64_t seed, double* stderr_out);

// Packet error probability for a client upload.
//   frozen:      1 - exp(-alpha * B * N0 * k / (p * |h|^2))
//   expectation: E over fading of the same expression at the drawn path loss
// rb_count = 0 or tx_power_w <= 0 means nothing can be delivered: returns 1.
double packet_error_rate(const LinkState& link, const ScenarioConfig& cfg, ErrorModel model);

}  // namespace asfl
