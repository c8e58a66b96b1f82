#include "asfl/radio.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "asfl/rng.hpp"

namespace asfl {

double uplink_rate(const LinkState& link, const ScenarioConfig& cfg) {
  if (link.rb_count < 1) throw std::invalid_argument("uplink_rate: rb_count out of [1, inf)");
  if (!(link.tx_power_w > 0))
    throw std::invalid_argument("uplink_rate: tx_power_w out of (0, inf)");
  const double b = cfg.rb_bandwidth_hz;
  const double snr = link.tx_power_w * link.channel.gain_sq / (b * cfg.noise_psd_w_per_hz);
  return link.rb_count * b * std::log2(1.0 + snr);
}

double downlink_rate(const LinkState& link, const ScenarioConfig& cfg) {
  const double b = cfg.downlink_bandwidth_hz;
  const double snr =
      cfg.server_tx_power_w * link.channel.gain_sq / (b * cfg.noise_psd_w_per_hz);
  return b * std::log2(1.0 + snr);
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton iteration
// on the Legendre recurrence.
struct GaussRule {
  std::vector<double> x, w;
  explicit GaussRule(int n) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / pp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
  }
};

const GaussRule& rule24() {
  static const GaussRule r(24);
  return r;
}
const GaussRule& rule48() {
  static const GaussRule r(48);
  return r;
}

// Integrand of E[exp(-rho/U)] for U ~ Exp(1) after mapping u = t/(1-t):
//   f(t) = exp(-rho*(1-t)/t - t/(1-t)) / (1-t)^2 on (0, 1).
inline double mapped_integrand(double rho, double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double om = 1.0 - t;
  const double e = -rho * om / t - t / om;
  if (e < -745.0) return 0.0;
  return std::exp(e) / (om * om);
}

double panel(double rho, double a, double b, const GaussRule& r) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0;
  for (std::size_t i = 0; i < r.x.size(); ++i)
    s += r.w[i] * mapped_integrand(rho, mid + half * r.x[i]);
  return s * half;
}

// Adaptive bisection: each panel is accepted when the 24- and 48-node
// Gauss-Legendre estimates agree; small rho produces a boundary layer near
// t = 0 which the subdivision resolves.
double adaptive(double rho, double a, double b, double tol, int depth) {
  const double coarse = panel(rho, a, b, rule24());
  const double fine = panel(rho, a, b, rule48());
  if (std::abs(fine - coarse) <= tol || depth >= 48) return fine;
  const double mid = 0.5 * (a + b);
  return adaptive(rho, a, mid, 0.5 * tol, depth + 1) +
         adaptive(rho, mid, b, 0.5 * tol, depth + 1);
}

}  // namespace

double fading_expectation(double c, double mean) {
  if (!(mean > 0)) throw std::invalid_argument("fading_expectation: mean out of (0, inf)");
  if (c < 0) throw std::invalid_argument("fading_expectation: c out of [0, inf)");
  if (c == 0.0) return 1.0;
  const double rho = c / mean;
  if (rho > 1e5) return 0.0;  // below double underflow for exp(-2*sqrt(rho))
  return adaptive(rho, 0.0, 1.0, 1e-12, 0);
}

double fading_expectation_bessel(double c, double mean) {
  if (!(mean > 0))
    throw std::invalid_argument("fading_expectation_bessel: mean out of (0, inf)");
  if (c < 0) throw std::invalid_argument("fading_expectation_bessel: c out of [0, inf)");
  if (c == 0.0) return 1.0;
  const double z = 2.0 * std::sqrt(c / mean);
  if (z > 1400.0) return 0.0;
  return z * std::cyl_bessel_k(1.0, z);
}

double fading_expectation_mc(double c, double mean, std::int64_t draws,
                             std::uint64_t seed, double* stderr_out) {
  auto rng = make_stream(seed, "fading-mc", 0, 0);
  std::exponential_distribution<double> dist(1.0 / mean);
  double sum = 0, sum_sq = 0;
  for (std::int64_t i = 0; i < draws; ++i) {
    const double x = dist(rng);
    const double v = x > 0 ? std::exp(-c / x) : 0.0;
    sum += v;
    sum_sq += v * v;
  }
  const double m = sum / draws;
  if (stderr_out) {
    const double var = std::max(0.0, sum_sq / draws - m * m);
    *stderr_out = std::sqrt(var / draws);
  }
  return m;
}

double packet_error_rate(const LinkState& link, const ScenarioConfig& cfg, ErrorModel model) {
  if (link.rb_count < 1 || !(link.tx_power_w > 0)) return 1.0;
  const double c = cfg.waterfall_threshold * cfg.rb_bandwidth_hz * cfg.noise_psd_w_per_hz *
                   link.rb_count / link.tx_power_w;
  if (model == ErrorModel::frozen) {
    if (!(link.channel.gain_sq > 0)) return 1.0;
    return 1.0 - std::exp(-c / link.channel.gain_sq);
  }
  return 1.0 - fading_expectation(c, link.channel.path_loss_linear);
}

}  // namespace asfl
