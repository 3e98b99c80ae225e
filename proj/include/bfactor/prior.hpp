#ifndef BFACTOR_PRIOR_HPP
#define BFACTOR_PRIOR_HPP

#include <utility>

#include "bfactor/rng.hpp"

namespace bfactor {

// Prior constants for the half-power shrinkage prior on loadings and the
// inverse-gamma prior on idiosyncratic variances, plus the truncation level.
struct Hyperparams {
  double a = 15.0;       // column shape offset
  double c1 = 2.3;       // shape growth exponent
  double c2 = 0.7;       // rate decay exponent
  double b = 1.0;        // rate numerator
  double a_sigma = 1.0;  // inverse-gamma shape for sigma^2
  double b_sigma = 1.0;  // inverse-gamma rate for sigma^2
  int K = 50;            // truncation level

  // Throws std::invalid_argument if any constant is out of domain.
  void validate() const;

  // Condition under which the infinite loading matrix is almost surely
  // well defined; a = 15, c1 = 2.3, c2 = 0.7 satisfies it. Construction with
  // an invalid combination is allowed but should be surfaced to the user.
  bool theory_valid() const { return a >= 4.0 && c1 + c2 > 0.25; }
};

// (shape, rate) of the column-k global shrinkage parameter lambda_k:
// shape = a + k^c1, rate = b / k^c2. k is 1-based.
std::pair<double, double> lambda_prior_params(int k, const Hyperparams& h);

// log of pi(B | lambda) = (lambda^2 / 4) exp(-lambda |B|^(1/2)).
double log_density_B(double b_val, double lambda);

// Exact draw from pi(B | lambda): |B|^(1/2) ~ Gamma(2, lambda) and the sign
// is symmetric, so B = +/- Y^2 with Y ~ Gamma(2, lambda).
double sample_B_direct(double lambda, RngStream& rng);

// One draw from the three-level Gaussian-mixture representation:
// v ~ Gamma(3/2, 1/4), tau2 | v ~ Exp(rate 1/(2 v^2)),
// B | tau2 ~ N(0, tau2 / lambda^4).
struct HierDraw {
  double B;
  double tau2;
  double v;
};
HierDraw sample_B_hierarchical(double lambda, RngStream& rng);

// Tail bound for truncating the loading matrix at K columns:
// H = 480 (c1+c2) / (4 (c1+c2) - 1),
// bound = 2 H p / (eps (K+1)^(4(c1+c2))), valid for K > K_min with
// K_min = (4H / (3 eps))^(1/(4(c1+c2))) - 1.
struct TruncationBound {
  double H;
  double bound;
  double K_min;
};
TruncationBound truncation_bound(int K, int p, double eps,
                                 const Hyperparams& h);

// Monte Carlo estimate of P(|B_jk| <= eps) under the marginal column-k prior,
// drawn by composing lambda_prior_params -> gamma -> direct sampler.
struct McEstimate {
  double estimate;
  double std_error;
};
McEstimate shrinkage_prob_mc(int k, double eps, long n_draws,
                             const Hyperparams& h, RngStream& rng);

}  // namespace bfactor

#endif  // BFACTOR_PRIOR_HPP
