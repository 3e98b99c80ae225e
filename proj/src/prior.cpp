#include "bfactor/prior.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bfactor/dist.hpp"

namespace bfactor {

void Hyperparams::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be positive");
    }
  };
  check(a, "a");
  check(c1, "c1");
  check(c2, "c2");
  check(b, "b");
  check(a_sigma, "a_sigma");
  check(b_sigma, "b_sigma");
  if (K < 1) throw std::invalid_argument("K must be at least 1");
}

std::pair<double, double> lambda_prior_params(int k, const Hyperparams& h) {
  if (k < 1) throw std::invalid_argument("column index k must be >= 1");
  const double kd = static_cast<double>(k);
  return {h.a + std::pow(kd, h.c1), h.b / std::pow(kd, h.c2)};
}

double log_density_B(double b_val, double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive");
  }
  return 2.0 * std::log(lambda) - std::log(4.0) -
         lambda * std::sqrt(std::fabs(b_val));
}

double sample_B_direct(double lambda, RngStream& rng) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive");
  }
  const double y = sample_gamma(2.0, lambda, rng);
  const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
  return sign * y * y;
}

HierDraw sample_B_hierarchical(double lambda, RngStream& rng) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive");
  }
  HierDraw d;
  d.v = sample_gamma(1.5, 0.25, rng);
  d.tau2 = sample_exponential(1.0 / (2.0 * d.v * d.v), rng);
  const double sd = std::sqrt(d.tau2) / (lambda * lambda);
  d.B = sd * rng.next_normal();
  return d;
}

TruncationBound truncation_bound(int K, int p, double eps,
                                 const Hyperparams& h) {
  if (K < 1 || p < 1) throw std::invalid_argument("K and p must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double s = h.c1 + h.c2;
  if (!(4.0 * s - 1.0 > 0.0)) {
    throw std::invalid_argument("truncation bound requires c1 + c2 > 1/4");
  }
  TruncationBound out;
  out.H = 480.0 * s / (4.0 * s - 1.0);
  out.bound = 2.0 * out.H * p / (eps * std::pow(K + 1.0, 4.0 * s));
  out.K_min = std::pow(4.0 * out.H / (3.0 * eps), 1.0 / (4.0 * s)) - 1.0;
  return out;
}

McEstimate shrinkage_prob_mc(int k, double eps, long n_draws,
                             const Hyperparams& h, RngStream& rng) {
  if (n_draws < 1000) throw std::invalid_argument("need at least 10^3 draws");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be non-negative");
  const auto [shape, rate] = lambda_prior_params(k, h);
  long hits = 0;
  for (long i = 0; i < n_draws; ++i) {
    const double lambda = sample_gamma(shape, rate, rng);
    const double b_draw = sample_B_direct(lambda, rng);
    if (std::fabs(b_draw) <= eps) ++hits;
  }
  McEstimate est;
  est.estimate = static_cast<double>(hits) / static_cast<double>(n_draws);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) /
                            static_cast<double>(n_draws));
  return est;
}

}  // namespace bfactor
