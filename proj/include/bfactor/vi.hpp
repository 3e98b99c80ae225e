#ifndef BFACTOR_VI_HPP
#define BFACTOR_VI_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "bfactor/dataset.hpp"
#include "bfactor/linalg.hpp"
#include "bfactor/prior.hpp"
#include "bfactor/rng.hpp"

namespace bfactor::vi {

struct VIConfig {
  int T1 = 20;             // natural-gradient steps per outer iteration
  int T2 = 5;              // mirror-descent steps per outer iteration
  double rho0 = 0.1;       // step size rho_t = rho0 / (1 + decay * t)
  double decay = 0.01;     // t counts inner steps across the whole run
  int mc_samples = 16;     // Monte Carlo size for the dof gradient
  double tol = 1e-6;       // relative change threshold on the monitor
  int max_outer = 500;
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

// Mean-field posterior: row loadings q_j(B_j.) are K-variate t distributions
// with location mu_j, scale inverse Lambda_j and dof nu_j > 2; q_j(sigma_j^2)
// is inverse-gamma; factors share covariance Phi with means w.
struct VIState {
  Matrix mu;                   // p x K locations
  std::vector<Matrix> Lambda;  // p of K x K SPD scale inverses
  Vector nu;                   // p degrees of freedom, > 2
  Vector sig_shape;            // p inverse-gamma shapes
  Vector sig_rate;             // p inverse-gamma rates
  Matrix w;                    // K x n factor means
  Matrix Phi;                  // K x K factor covariance
  Vector c;                    // p, E[1/sigma_j^2] = sig_shape/sig_rate

  Index p() const { return mu.rows(); }
  Index K() const { return mu.cols(); }
  Index n() const { return w.cols(); }

  // Row covariance Cov(B_j.) = nu_j/(nu_j - 2) * Lambda_j^-1.
  Matrix row_cov(Index j) const;
};

// Per-row inverses of Lambda, shared by the update steps within one outer
// iteration. refresh() throws NumericError if any Lambda_j is not SPD.
struct RowCovCache {
  std::vector<Matrix> inv;
  Vector logdet;
  void refresh(const VIState& s, int threads);
};

struct VIDiagnostics {
  std::vector<double> objective;  // monitored objective per outer iteration
  int outer_iters = 0;
  bool converged = false;
  bool spd_ok = false;  // all Lambda_j/Phi factorizations succeeded
  double min_nu = std::numeric_limits<double>::infinity();
};

struct VIResult {
  VIState state;
  VIDiagnostics diag;
};

// Local quadratic weight E[lambda_k^4 / tau_jk^2] at B* = mu_prev:
// (p + a/2 + k^c1/2) / (max(|mu_jk|^(3/2), 1e-9) (sum_j |mu_jk|^(1/2) + b/k^c2)).
// k is 1-based; mm_weights returns the full p x K matrix.
double mm_weight(const Matrix& mu_prev, Index j, int k, const Hyperparams& h);
Matrix mm_weights(const Matrix& mu_prev, const Hyperparams& h);

// Closed-form coordinate updates (Phi, w) and (sig_shape, sig_rate, c).
void update_q_eta(VIState& s, const Matrix& X,
                  const RowCovCache* cache = nullptr, int threads = 1);
void update_q_sigma(VIState& s, const Matrix& X, const Hyperparams& h,
                    const RowCovCache* cache = nullptr, int threads = 1);

// One natural-gradient step on every (mu_j, Lambda_j) with weights W frozen.
void natgrad_step_mu_lambda(VIState& s, const Matrix& X, const Matrix& W,
                            double rho, int threads = 1);

// Euclidean gradients of the surrogate for row j (Bonnet/Price form).
Vector surrogate_grad_mu(const VIState& s, const Matrix& X, const Matrix& W,
                         Index j);
Matrix surrogate_grad_lambda(const VIState& s, const Matrix& X,
                             const Matrix& W, Index j);

// Surrogate objective: the q(B)-dependent part of the bound with the prior
// term replaced by its local quadratic minorant (additive constant omitted)
// plus the t-entropy. surrogate_objective recomputes W from mu_prev.
double surrogate_core(const VIState& s, const Matrix& X, const Matrix& W,
                      const RowCovCache* cache = nullptr);
double surrogate_objective(const VIState& s, const Matrix& X,
                           const Matrix& mu_prev, const Hyperparams& h);

// Entropy of the K-variate t with scale inverse Lambda and dof nu:
// -log|Lambda|/2 + h(nu). mvt_entropy_remainder returns h(nu) alone.
double entropy_mvt(const Matrix& Lambda, double nu);
double mvt_entropy_remainder(double nu, int K);

// Cubic shape transform T_o(z) = (o/2 + 2/3)(1 + z/sqrt(4.5 o + 6))^3;
// T_o(z) ~ Gamma((o+2)/2, 1) when z has the accept-reject density below.
double gamma_cubic_transform(double o, double z);

// Accept-reject sampler for the transform variable z: proposes z ~ N(0,1),
// rejects z <= -sqrt(4.5 o + 6), accepts when log u < z^2/2 + d - dV + d log V
// with V = (1 + z/sqrt(9 d))^3 and d = o/2 + 2/3. If proposals is non-null it
// accumulates the total number of proposals made.
double sample_q_z(double o, RngStream& rng, long* proposals = nullptr);

// Gradient of the bound with respect to o_j = nu_j - 2: closed-form trace and
// digamma terms plus a Monte Carlo estimate (pathwise + score) of the
// local-quadratic prior term with weights W frozen.
double grad_o(const VIState& s, const Matrix& X, Index j, const Matrix& W,
              int mc_samples, RngStream& rng,
              const RowCovCache* cache = nullptr);

// Exponentiated-gradient update o <- o * exp(rho * grad), elementwise, with
// the exponent clamped to +/-20.
Vector mirror_step_o(const Vector& o, const Vector& grad, double rho);

// Closed-form log of the column-k marginal prior (lambda integrated out),
// evaluated at a column of loadings. k is 1-based.
double log_marginal_prior_column(const Vector& b_col, int k,
                                 const Hyperparams& h);

// Monitored objective: the full computable lower bound. The prior term is
// the local quadratic bound with its tangent constant restored at B* =
// mu_star (the point W was localized at), which keeps values comparable
// across weight re-localizations; plus the q(eta)/q(sigma^2) terms.
double elbo_monitor(const VIState& s, const Matrix& X, const Matrix& W,
                    const Matrix& mu_star, const Hyperparams& h,
                    const RowCovCache* cache = nullptr);

// Full optimization loop. Aborts with NumericError if the monitored
// objective decreases beyond the Monte Carlo band for 10 consecutive outer
// iterations.
VIResult run_vi(const Dataset& d, const Hyperparams& h, const VIConfig& cfg);

}  // namespace bfactor::vi

#endif  // BFACTOR_VI_HPP
