#ifndef BFACTOR_GIBBS_HPP
#define BFACTOR_GIBBS_HPP

#include <cstdint>
#include <vector>

#include "bfactor/dataset.hpp"
#include "bfactor/linalg.hpp"
#include "bfactor/prior.hpp"
#include "bfactor/rng.hpp"

namespace bfactor::gibbs {

struct GibbsConfig {
  long n_iter = 10000;
  long n_burn = 5000;
  long thin = 1;
  std::uint64_t seed = 0;
  int threads = 0;            // <1: BFACTOR_THREADS env, then hardware
  double abs_floor = 1e-30;   // |B| clamp in the local-scale step
  bool store_latents = false;  // also store eta, tau2, v draws

  void validate() const;
};

// Full latent state. eta is stored K x n (factors in rows).
struct GibbsState {
  Matrix B;       // p x K loadings
  Matrix eta;     // K x n factor scores
  Vector sigma2;  // p idiosyncratic variances
  Vector lambda;  // K column shrinkage parameters
  Matrix tau2;    // p x K local scales
  Matrix v;       // p x K auxiliary local scales
};

// Post-burn-in thinned draws, stored contiguously per variable (draw-major,
// column-major within a draw) so whole-chain reductions can map the buffer.
struct GibbsChain {
  long n_iter = 0;
  long n_burn = 0;
  long thin = 1;
  std::uint64_t seed = 0;
  Index p = 0, K = 0, n = 0;

  std::vector<double> draws_B;       // [draw][p*K]
  std::vector<double> draws_sigma2;  // [draw][p]
  std::vector<double> draws_lambda;  // [draw][K]
  std::vector<double> draws_eta;     // [draw][K*n] when stored
  std::vector<double> draws_tau2;    // [draw][p*K] when stored
  std::vector<double> draws_v;       // [draw][p*K] when stored

  long n_draws() const {
    return static_cast<long>(draws_sigma2.size()) / static_cast<long>(p);
  }
  Eigen::Map<const Matrix> draw_B(long s) const {
    return {draws_B.data() + static_cast<std::size_t>(s) *
                                 static_cast<std::size_t>(p * K),
            p, K};
  }
  Eigen::Map<const Vector> draw_sigma2(long s) const {
    return {draws_sigma2.data() +
                static_cast<std::size_t>(s) * static_cast<std::size_t>(p),
            p};
  }
  Eigen::Map<const Vector> draw_lambda(long s) const {
    return {draws_lambda.data() +
                static_cast<std::size_t>(s) * static_cast<std::size_t>(K),
            K};
  }
};

// RNG stream blocks; one stream per parallel work item, keyed by
// (seed, sweep, block, item index).
enum class Block : std::uint64_t {
  init = 0,
  sigma = 1,
  loadings = 2,
  factors = 3,
  lambda = 4,
  tau = 5,
};

inline RngStream item_stream(std::uint64_t seed, std::uint64_t sweep, Block b,
                             std::uint64_t index) {
  return RngStream::keyed(seed, sweep, static_cast<std::uint64_t>(b), index);
}

// One sweep of the blocked sampler, exposed step by step. X is n x p.

// sigma_j^2 ~ InvGamma(a_sigma + n/2, b_sigma + ||X_.j' - B_j. eta||^2 / 2).
Vector step_sigma(const Matrix& X, const Matrix& B, const Matrix& eta,
                  const Hyperparams& h, std::uint64_t seed, std::uint64_t sweep,
                  int threads);

// Row conditionals B_j. ~ N((eta eta'/s_j^2 + diag(l^4/tau_j^2))^-1 eta X_.j
// / s_j^2, same inverse); the precision is assembled and factored per row.
Matrix step_B_rows(const Matrix& X, const Matrix& eta, const Matrix& tau2,
                   const Vector& sigma2, const Vector& lambda,
                   std::uint64_t seed, std::uint64_t sweep, int threads);

// eta_i ~ N((I + B' Om^-1 B)^-1 B' Om^-1 x_i, (I + B' Om^-1 B)^-1); the
// shared precision is factored once.
Matrix step_eta(const Matrix& X, const Matrix& B, const Vector& sigma2,
                std::uint64_t seed, std::uint64_t sweep, int threads);

// lambda_k ~ Gamma(2p + a + k^c1, sum_j |B_jk|^(1/2) + b/k^c2).
Vector step_lambda(const Matrix& B, const Hyperparams& h, std::uint64_t seed,
                   std::uint64_t sweep, int threads);

// Local scales: 1/v ~ InvGaussian(1/(2 lambda |B|^(1/2)), 1/2), then
// 1/tau^2 ~ InvGaussian(1/(lambda^2 v |B|), 1/v^2). |B| is clamped below at
// abs_floor before forming the means.
void step_tau(const Matrix& B, const Vector& lambda, double abs_floor,
              std::uint64_t seed, std::uint64_t sweep, int threads,
              Matrix& v_out, Matrix& tau2_out);

// Overdispersed but numerically safe start: B ~ N(0, 0.25) entrywise,
// sigma^2 = 1, eta from its conditional, lambda from the prior, (v, tau2)
// from one local-scale pass.
GibbsState init_state(const Dataset& d, const Hyperparams& h,
                      const GibbsConfig& cfg);

// Runs n_iter sweeps in the order sigma -> B -> (eta, lambda, tau) and stores
// post-burn-in thinned draws. Numeric failures abort with the sweep index.
GibbsChain run_chain(const Dataset& d, const Hyperparams& h,
                     const GibbsConfig& cfg);

}  // namespace bfactor::gibbs

#endif  // BFACTOR_GIBBS_HPP
