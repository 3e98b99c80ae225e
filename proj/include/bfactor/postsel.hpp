#ifndef BFACTOR_POSTSEL_HPP
#define BFACTOR_POSTSEL_HPP

#include <optional>
#include <span>
#include <string>

#include "bfactor/gibbs.hpp"
#include "bfactor/linalg.hpp"
#include "bfactor/vi.hpp"

namespace bfactor::postsel {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SelectionReport {
  Mask support_mask;          // p x K
  int K_hat = 0;              // columns with at least one selected entry
  Matrix Sigma_hat;           // p x p
  std::optional<double> fdr;  // require truth
  std::optional<double> fnr;
  std::optional<double> frob;
  double level = 0.95;
  double threshold = 1e-4;
  bool include_diagonal = false;
};

// Entry (j,k) is a signal iff the central credible interval of the stored
// B_jk draws at the given level excludes zero (empirical quantiles with
// linear interpolation). Requires at least 100 stored draws.
Mask select_support_gibbs(const gibbs::GibbsChain& chain, double level,
                          int threads = 0);

// Same rule for the variational posterior: the marginal of q_j(B_jk) is a
// univariate t with location mu_jk, scale sqrt((Lambda_j^-1)_kk), dof nu_j.
Mask select_support_vi(const vi::VIState& state, double level);

// Number of mask columns containing at least one true entry.
int effective_rank(const Mask& mask);

// Gibbs: average of B B' + diag(sigma^2) over stored draws.
Matrix covariance_estimate(const gibbs::GibbsChain& chain, int threads = 0);

// VI: E[B B' + Omega]; off-diagonal mu_j . mu_l, diagonal adds the row
// covariance trace and E[sigma_j^2] = rate / (shape - 1) (requires shape > 1).
Matrix covariance_estimate(const vi::VIState& state);

// Declared-nonzero = |Sigma_hat| >= threshold, compared against exact
// nonzeros of Sigma_true. fdr = FP / max(declared, 1);
// fnr = FN / max(actual positives, 1). Diagonal excluded unless requested;
// off-diagonal entries are counted once (upper triangle).
std::pair<double, double> sparsity_metrics(const Matrix& Sigma_hat,
                                           const Matrix& Sigma_true,
                                           double threshold,
                                           bool include_diagonal = false);

double frobenius_distance(const Matrix& A, const Matrix& B);

// Effective sample size N / (1 + 2 sum rho_t) with the autocovariance sum
// truncated by the initial monotone positive sequence rule. A constant chain
// reports N with the degenerate flag; the estimate is capped at 10 N.
struct EssResult {
  double ess = 0.0;
  bool degenerate = false;
};
EssResult ess(std::span<const double> draws);

// Per-entry ESS of the stored loading draws, as a p x K matrix.
Matrix ess_matrix(const gibbs::GibbsChain& chain, int threads = 0);

// Student-t quantile (inverse CDF) for nu > 0, via the incomplete beta
// function and bisection.
double student_t_quantile(double prob, double nu);

// 8-bit grayscale heatmap, row-major, linear ramp over [min, max].
void write_png_heatmap(const std::string& path, const Matrix& values);

}  // namespace bfactor::postsel

#endif  // BFACTOR_POSTSEL_HPP
