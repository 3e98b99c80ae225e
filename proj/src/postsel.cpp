#include "bfactor/postsel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bfactor/parallel.hpp"

namespace bfactor::postsel {

namespace {

// Type-7 empirical quantile (linear interpolation between order statistics)
// on a sorted copy.
double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = prob * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - std::floor(h);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Regularized incomplete beta I_x(a, b) by continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double x, double nu) {
  const double ib = inc_beta(0.5 * nu, 0.5, nu / (nu + x * x));
  return x > 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

}  // namespace

double student_t_quantile(double prob, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::invalid_argument("prob must be in (0, 1)");
  }
  if (prob == 0.5) return 0.0;
  // Bisection on a bracket grown geometrically; the CDF is monotone.
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, nu) > prob) lo *= 2.0;
  while (student_t_cdf(hi, nu) < prob) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, nu) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * (1.0 + std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

Mask select_support_gibbs(const gibbs::GibbsChain& chain, double level,
                          int threads) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("level must be in (0, 1)");
  }
  const long draws = chain.n_draws();
  if (draws < 100) {
    throw std::invalid_argument(
        "support selection needs at least 100 stored draws, have " +
        std::to_string(draws));
  }
  const Index p = chain.p;
  const Index K = chain.K;
  const std::size_t entries = static_cast<std::size_t>(p * K);
  const double lo_prob = 0.5 * (1.0 - level);
  const double hi_prob = 1.0 - lo_prob;
  Mask mask(p, K);
  parallel_for(static_cast<std::int64_t>(entries), threads,
               [&](std::int64_t lo, std::int64_t hi) {
                 std::vector<double> buf(static_cast<std::size_t>(draws));
                 for (std::int64_t e = lo; e < hi; ++e) {
                   for (long s = 0; s < draws; ++s) {
                     buf[static_cast<std::size_t>(s)] =
                         chain.draws_B[static_cast<std::size_t>(s) * entries +
                                       static_cast<std::size_t>(e)];
                   }
                   std::sort(buf.begin(), buf.end());
                   const double ql = quantile_sorted(buf, lo_prob);
                   const double qh = quantile_sorted(buf, hi_prob);
                   mask.data()[e] = (ql > 0.0) || (qh < 0.0);
                 }
               });
  return mask;
}

Mask select_support_vi(const vi::VIState& state, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("level must be in (0, 1)");
  }
  const Index p = state.p();
  const Index K = state.K();
  Mask mask(p, K);
  for (Index j = 0; j < p; ++j) {
    const Matrix inv = SpdFactor(state.Lambda[static_cast<std::size_t>(j)])
                           .inverse();
    const double tq =
        student_t_quantile(1.0 - 0.5 * (1.0 - level), state.nu(j));
    for (Index k = 0; k < K; ++k) {
      const double half_width = tq * std::sqrt(inv(k, k));
      mask(j, k) = std::fabs(state.mu(j, k)) > half_width;
    }
  }
  return mask;
}

int effective_rank(const Mask& mask) {
  int count = 0;
  for (Index k = 0; k < mask.cols(); ++k) {
    if (mask.col(k).any()) ++count;
  }
  return count;
}

Matrix covariance_estimate(const gibbs::GibbsChain& chain, int threads) {
  const Index p = chain.p;
  const Index K = chain.K;
  const long draws = chain.n_draws();
  if (draws < 1) throw std::invalid_argument("chain holds no draws");
  // Stacked draws form a p x (S K) matrix; the average of B B' is then a
  // single rank update, parallelized over row blocks.
  Eigen::Map<const Matrix> stacked(chain.draws_B.data(), p,
                                   static_cast<Index>(draws) * K);
  Matrix sigma(p, p);
  parallel_for(p, threads, [&](std::int64_t lo, std::int64_t hi) {
    sigma.middleRows(lo, hi - lo).noalias() =
        stacked.middleRows(lo, hi - lo) * stacked.transpose();
  });
  sigma /= static_cast<double>(draws);
  Eigen::Map<const Matrix> sig_draws(chain.draws_sigma2.data(), p,
                                     static_cast<Index>(draws));
  sigma.diagonal() += sig_draws.rowwise().mean();
  return sigma;
}

Matrix covariance_estimate(const vi::VIState& state) {
  const Index p = state.p();
  Matrix sigma = state.mu * state.mu.transpose();
  for (Index j = 0; j < p; ++j) {
    if (!(state.sig_shape(j) > 1.0)) {
      throw NumericError("E[sigma^2] undefined: shape <= 1", j);
    }
    const Matrix inv =
        SpdFactor(state.Lambda[static_cast<std::size_t>(j)]).inverse();
    const double f = state.nu(j) / (state.nu(j) - 2.0);
    sigma(j, j) += f * inv.trace() +
                   state.sig_rate(j) / (state.sig_shape(j) - 1.0);
  }
  return sigma;
}

std::pair<double, double> sparsity_metrics(const Matrix& Sigma_hat,
                                           const Matrix& Sigma_true,
                                           double threshold,
                                           bool include_diagonal) {
  if (Sigma_hat.rows() != Sigma_true.rows() ||
      Sigma_hat.cols() != Sigma_true.cols()) {
    throw std::invalid_argument("covariance shape mismatch");
  }
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("threshold must be positive");
  }
  long declared = 0, false_pos = 0, actual_pos = 0, false_neg = 0;
  const Index p = Sigma_hat.rows();
  for (Index j = 0; j < p; ++j) {
    for (Index l = include_diagonal ? j : j + 1; l < p; ++l) {
      const bool est_nz = std::fabs(Sigma_hat(j, l)) >= threshold;
      const bool true_nz = Sigma_true(j, l) != 0.0;
      declared += est_nz;
      actual_pos += true_nz;
      false_pos += est_nz && !true_nz;
      false_neg += !est_nz && true_nz;
    }
  }
  const double fdr = static_cast<double>(false_pos) /
                     static_cast<double>(std::max<long>(declared, 1));
  const double fnr = static_cast<double>(false_neg) /
                     static_cast<double>(std::max<long>(actual_pos, 1));
  return {fdr, fnr};
}

double frobenius_distance(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw std::invalid_argument("shape mismatch");
  }
  return (A - B).norm();
}

EssResult ess(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 100) throw std::invalid_argument("need at least 100 draws");
  const double nd = static_cast<double>(n);
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= nd;
  auto gamma_at = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) {
      acc += (draws[t] - mean) * (draws[t + lag] - mean);
    }
    return acc / nd;
  };
  const double g0 = gamma_at(0);
  if (g0 <= 0.0) return {nd, true};

  // Geyer: pair sums Gamma_m = gamma(2m) + gamma(2m+1) kept while positive,
  // then forced monotone non-increasing.
  double pair_sum_total = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = gamma_at(2 * m) + gamma_at(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    pair_sum_total += pair;
    prev_pair = pair;
  }
  const double asym_var = std::max(-g0 + 2.0 * pair_sum_total, 0.0);
  if (asym_var <= 0.0) return {10.0 * nd, false};  // antithetic chain
  const double out = std::min(nd * g0 / asym_var, 10.0 * nd);
  return {out, false};
}

Matrix ess_matrix(const gibbs::GibbsChain& chain, int threads) {
  const Index p = chain.p;
  const Index K = chain.K;
  const long draws = chain.n_draws();
  const std::size_t entries = static_cast<std::size_t>(p * K);
  Matrix out(p, K);
  parallel_for(static_cast<std::int64_t>(entries), threads,
               [&](std::int64_t lo, std::int64_t hi) {
                 std::vector<double> buf(static_cast<std::size_t>(draws));
                 for (std::int64_t e = lo; e < hi; ++e) {
                   for (long s = 0; s < draws; ++s) {
                     buf[static_cast<std::size_t>(s)] =
                         chain.draws_B[static_cast<std::size_t>(s) * entries +
                                       static_cast<std::size_t>(e)];
                   }
                   out.data()[e] = ess(buf).ess;
                 }
               });
  return out;
}

}  // namespace bfactor::postsel
