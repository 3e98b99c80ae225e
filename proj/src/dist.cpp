#include "bfactor/dist.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bfactor {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be positive, got " +
                                std::to_string(value));
  }
}

// Marsaglia & Tsang (2000) for shape >= 1: d = shape - 1/3, c = 1/sqrt(9d),
// accept x ~ N(0,1) with v = (1+cx)^3 when log(u) < x^2/2 + d - dv + d log v.
double gamma_unit_rate(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.next_normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.next_open();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double sample_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  if (shape < 1.0) {
    // Boost trick: Gamma(s) = Gamma(s+1) * U^(1/s).
    double g = gamma_unit_rate(shape + 1.0, rng);
    double u = rng.next_open();
    return g * std::pow(u, 1.0 / shape) / rate;
  }
  return gamma_unit_rate(shape, rng) / rate;
}

double sample_inverse_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "inverse-gamma shape");
  require_positive(rate, "inverse-gamma rate");
  return 1.0 / sample_gamma(shape, rate, rng);
}

double sample_inverse_gaussian(double mean, double shape, RngStream& rng) {
  require_positive(mean, "inverse-Gaussian mean");
  require_positive(shape, "inverse-Gaussian shape");
  // Michael, Schucany & Haas root transform. The smaller root is computed in
  // the cancellation-free form x- = mean (s - mv) / (s + mv) with
  // s = sqrt((mv)^2 + 4*shape*mv), which stays strictly positive.
  const double y = rng.next_normal();
  const double mv = mean * (y * y);
  const double s = std::sqrt(mv * mv + 4.0 * shape * mv);
  const double x_minus = mean * (s - mv) / (s + mv);
  if (mv == 0.0) return mean;  // y == 0 in floating point
  const double u = rng.next_double();
  if (u <= mean / (mean + x_minus)) return x_minus;
  return mean * mean / x_minus;
}

double sample_exponential(double rate, RngStream& rng) {
  require_positive(rate, "exponential rate");
  return -std::log(rng.next_open()) / rate;
}

// Both psi functions shift upward to x >= 6 by recurrence and then use the
// Bernoulli-number asymptotic series through x^-14.
double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma requires x > 0");
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 -
                                                      inv2 * (1.0 / 12.0)))))));
  return r + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("trigamma requires x > 0");
  double r = 0.0;
  while (x < 6.0) {
    r += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      1.0 +
      inv * 0.5 +
      inv2 * (1.0 / 6.0 -
              inv2 * (1.0 / 30.0 -
                      inv2 * (1.0 / 42.0 -
                              inv2 * (1.0 / 30.0 -
                                      inv2 * (5.0 / 66.0 -
                                              inv2 * (691.0 / 2730.0 -
                                                      inv2 * (7.0 / 6.0)))))));
  return r + inv * series;
}

}  // namespace bfactor
