#include "bfactor/gibbs.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "bfactor/dist.hpp"
#include "bfactor/parallel.hpp"

namespace bfactor::gibbs {

void GibbsConfig::validate() const {
  if (n_iter < 1) throw std::invalid_argument("n_iter must be >= 1");
  if (n_burn < 0 || n_burn >= n_iter) {
    throw std::invalid_argument("need 0 <= n_burn < n_iter");
  }
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (!(abs_floor > 0.0)) {
    throw std::invalid_argument("abs_floor must be positive");
  }
}

Vector step_sigma(const Matrix& X, const Matrix& B, const Matrix& eta,
                  const Hyperparams& h, std::uint64_t seed, std::uint64_t sweep,
                  int threads) {
  const Index n = X.rows();
  const Index p = X.cols();
  const double shape = h.a_sigma + 0.5 * static_cast<double>(n);
  Vector sigma2(p);
  parallel_for(p, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t j = lo; j < hi; ++j) {
      const double rss =
          (X.col(j) - eta.transpose() * B.row(j).transpose()).squaredNorm();
      if (!std::isfinite(rss)) {
        throw NumericError("non-finite residual in sigma step", j);
      }
      auto rng = item_stream(seed, sweep, Block::sigma,
                             static_cast<std::uint64_t>(j));
      sigma2(j) = sample_inverse_gamma(shape, h.b_sigma + 0.5 * rss, rng);
    }
  });
  return sigma2;
}

Matrix step_B_rows(const Matrix& X, const Matrix& eta, const Matrix& tau2,
                   const Vector& sigma2, const Vector& lambda,
                   std::uint64_t seed, std::uint64_t sweep, int threads) {
  const Index p = X.cols();
  const Index K = eta.rows();
  const Matrix gram = eta * eta.transpose();  // shared across rows
  const Vector lambda4 = lambda.array().pow(4.0).matrix();
  Matrix B(p, K);
  parallel_for(p, threads, [&](std::int64_t lo, std::int64_t hi) {
    Matrix precision(K, K);
    Vector z(K);
    for (std::int64_t j = lo; j < hi; ++j) {
      precision = gram / sigma2(j);
      precision.diagonal() +=
          (lambda4.array() / tau2.row(j).transpose().array()).matrix();
      try {
        SpdFactor chol(precision);
        const Vector rhs = eta * X.col(j) / sigma2(j);
        auto rng = item_stream(seed, sweep, Block::loadings,
                               static_cast<std::uint64_t>(j));
        for (Index k = 0; k < K; ++k) z(k) = rng.next_normal();
        B.row(j) = (chol.solve(rhs) + chol.solve_lt(z)).transpose();
      } catch (const NumericError&) {
        throw NumericError("loading-row precision not SPD", j);
      }
    }
  });
  return B;
}

Matrix step_eta(const Matrix& X, const Matrix& B, const Vector& sigma2,
                std::uint64_t seed, std::uint64_t sweep, int threads) {
  const Index n = X.rows();
  const Index K = B.cols();
  const Matrix Bw = sigma2.cwiseInverse().asDiagonal() * B;  // Om^-1 B
  Matrix precision = B.transpose() * Bw;
  precision.diagonal().array() += 1.0;
  const SpdFactor chol(precision);
  Matrix eta(K, n);
  parallel_for(n, threads, [&](std::int64_t lo, std::int64_t hi) {
    Vector z(K);
    for (std::int64_t i = lo; i < hi; ++i) {
      const Vector rhs = Bw.transpose() * X.row(i).transpose();
      auto rng = item_stream(seed, sweep, Block::factors,
                             static_cast<std::uint64_t>(i));
      for (Index k = 0; k < K; ++k) z(k) = rng.next_normal();
      eta.col(i) = chol.solve(rhs) + chol.solve_lt(z);
    }
  });
  return eta;
}

Vector step_lambda(const Matrix& B, const Hyperparams& h, std::uint64_t seed,
                   std::uint64_t sweep, int threads) {
  const Index p = B.rows();
  const Index K = B.cols();
  Vector lambda(K);
  parallel_for(K, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t k = lo; k < hi; ++k) {
      const auto [prior_shape, prior_rate] =
          lambda_prior_params(static_cast<int>(k) + 1, h);
      const double shape = 2.0 * static_cast<double>(p) + prior_shape;
      const double rate =
          B.col(k).array().abs().sqrt().sum() + prior_rate;
      auto rng = item_stream(seed, sweep, Block::lambda,
                             static_cast<std::uint64_t>(k));
      lambda(k) = sample_gamma(shape, rate, rng);
    }
  });
  return lambda;
}

void step_tau(const Matrix& B, const Vector& lambda, double abs_floor,
              std::uint64_t seed, std::uint64_t sweep, int threads,
              Matrix& v_out, Matrix& tau2_out) {
  const Index p = B.rows();
  const Index K = B.cols();
  v_out.resize(p, K);
  tau2_out.resize(p, K);
  parallel_for(p, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t j = lo; j < hi; ++j) {
      auto rng =
          item_stream(seed, sweep, Block::tau, static_cast<std::uint64_t>(j));
      for (Index k = 0; k < K; ++k) {
        const double ab = std::max(std::fabs(B(j, k)), abs_floor);
        const double lam = lambda(k);
        const double inv_v = sample_inverse_gaussian(
            1.0 / (2.0 * lam * std::sqrt(ab)), 0.5, rng);
        const double v = 1.0 / inv_v;
        const double inv_tau2 = sample_inverse_gaussian(
            1.0 / (lam * lam * v * ab), 1.0 / (v * v), rng);
        v_out(j, k) = v;
        tau2_out(j, k) = 1.0 / inv_tau2;
      }
    }
  });
}

GibbsState init_state(const Dataset& d, const Hyperparams& h,
                      const GibbsConfig& cfg) {
  const Index p = d.p();
  const Index K = h.K;
  GibbsState s;
  s.B.resize(p, K);
  parallel_for(p, cfg.threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t j = lo; j < hi; ++j) {
      auto rng = item_stream(cfg.seed, 0, Block::init,
                             static_cast<std::uint64_t>(j));
      for (Index k = 0; k < K; ++k) s.B(j, k) = 0.5 * rng.next_normal();
    }
  });
  s.sigma2 = Vector::Ones(p);
  s.eta = step_eta(d.X, s.B, s.sigma2, cfg.seed, 0, cfg.threads);
  s.lambda.resize(K);
  {
    auto rng = item_stream(cfg.seed, 0, Block::init,
                           static_cast<std::uint64_t>(p) + 1);
    for (Index k = 0; k < K; ++k) {
      const auto [shape, rate] = lambda_prior_params(static_cast<int>(k) + 1, h);
      s.lambda(k) = sample_gamma(shape, rate, rng);
    }
  }
  step_tau(s.B, s.lambda, cfg.abs_floor, cfg.seed, 0, cfg.threads, s.v,
           s.tau2);
  return s;
}

namespace {

void append(std::vector<double>& store, const double* data, std::size_t m) {
  store.insert(store.end(), data, data + m);
}

#ifndef NDEBUG
void check_state(const GibbsState& s, long sweep) {
  auto positive = [](const auto& a) {
    return a.allFinite() && (a.array() > 0.0).all();
  };
  assert(s.B.allFinite() && s.eta.allFinite());
  assert(positive(s.sigma2) && positive(s.lambda));
  assert(positive(s.tau2) && positive(s.v));
  (void)sweep;
}
#endif

}  // namespace

GibbsChain run_chain(const Dataset& d, const Hyperparams& h,
                     const GibbsConfig& cfg) {
  h.validate();
  cfg.validate();
  const Index p = d.p();
  const Index n = d.n();
  const Index K = h.K;

  GibbsChain chain;
  chain.n_iter = cfg.n_iter;
  chain.n_burn = cfg.n_burn;
  chain.thin = cfg.thin;
  chain.seed = cfg.seed;
  chain.p = p;
  chain.K = K;
  chain.n = n;
  const long stored = (cfg.n_iter - cfg.n_burn) / cfg.thin;
  chain.draws_B.reserve(static_cast<std::size_t>(stored) *
                        static_cast<std::size_t>(p * K));
  chain.draws_sigma2.reserve(static_cast<std::size_t>(stored) *
                             static_cast<std::size_t>(p));
  chain.draws_lambda.reserve(static_cast<std::size_t>(stored) *
                             static_cast<std::size_t>(K));

  GibbsState s = init_state(d, h, cfg);
  for (long sweep = 1; sweep <= cfg.n_iter; ++sweep) {
    try {
      const auto sw = static_cast<std::uint64_t>(sweep);
      s.sigma2 = step_sigma(d.X, s.B, s.eta, h, cfg.seed, sw, cfg.threads);
      s.B = step_B_rows(d.X, s.eta, s.tau2, s.sigma2, s.lambda, cfg.seed, sw,
                        cfg.threads);
      s.eta = step_eta(d.X, s.B, s.sigma2, cfg.seed, sw, cfg.threads);
      s.lambda = step_lambda(s.B, h, cfg.seed, sw, cfg.threads);
      step_tau(s.B, s.lambda, cfg.abs_floor, cfg.seed, sw, cfg.threads, s.v,
               s.tau2);
    } catch (const NumericError& e) {
      throw NumericError(std::string("sweep failed: ") + e.what(), sweep);
    }
#ifndef NDEBUG
    check_state(s, sweep);
#endif
    if (sweep > cfg.n_burn && (sweep - cfg.n_burn) % cfg.thin == 0) {
      append(chain.draws_B, s.B.data(), static_cast<std::size_t>(p * K));
      append(chain.draws_sigma2, s.sigma2.data(),
             static_cast<std::size_t>(p));
      append(chain.draws_lambda, s.lambda.data(),
             static_cast<std::size_t>(K));
      if (cfg.store_latents) {
        append(chain.draws_eta, s.eta.data(), static_cast<std::size_t>(K * n));
        append(chain.draws_tau2, s.tau2.data(),
               static_cast<std::size_t>(p * K));
        append(chain.draws_v, s.v.data(), static_cast<std::size_t>(p * K));
      }
    }
  }
  return chain;
}

}  // namespace bfactor::gibbs
