#include "bfactor/datagen.hpp"

#include <stdexcept>

#include "bfactor/parallel.hpp"
#include "bfactor/rng.hpp"

namespace bfactor::datagen {

namespace {

constexpr std::uint64_t kBlockLoadings = 200;
constexpr std::uint64_t kBlockNoiseVar = 201;
constexpr std::uint64_t kBlockRows = 202;

// X = H B0' + E with standard normal factor scores; row i gets its own
// stream so generation is reproducible regardless of threading.
Matrix draw_observations(const Matrix& B0, const Vector& omega0,
                         Index n, std::uint64_t seed) {
  const Index p = B0.rows();
  const Index K0 = B0.cols();
  const Vector noise_sd = omega0.array().sqrt();
  Matrix X(n, p);
  parallel_for(n, 0, [&](std::int64_t lo, std::int64_t hi) {
    Vector eta(K0);
    for (std::int64_t i = lo; i < hi; ++i) {
      auto rng = RngStream::keyed(seed, 0, kBlockRows,
                                  static_cast<std::uint64_t>(i));
      for (Index k = 0; k < K0; ++k) eta(k) = rng.next_normal();
      X.row(i) = (B0 * eta).transpose();
      for (Index j = 0; j < p; ++j) {
        X(i, j) += noise_sd(j) * rng.next_normal();
      }
    }
  });
  return X;
}

}  // namespace

Example1 synth_example1(std::uint64_t seed) {
  constexpr Index n = 100;
  constexpr Index p = 1956;
  constexpr Index K0 = 5;
  constexpr Index block = 500;   // nonzero rows per factor
  constexpr Index stride = 364;  // 500 - 136 overlap

  Example1 out;
  out.B0 = Matrix::Zero(p, K0);
  for (Index k = 0; k < K0; ++k) {
    out.B0.block(k * stride, k, block, 1).setOnes();
  }
  out.Sigma0 = out.B0 * out.B0.transpose();
  out.Sigma0.diagonal().array() += 1.0;
  out.data.X = draw_observations(out.B0, Vector::Ones(p), n, seed);
  return out;
}

Example2 synth_example2(Index n, Index p, std::uint64_t seed) {
  if (n < 1 || p < 1) throw std::invalid_argument("need n, p >= 1");
  constexpr Index K0 = 5;
  Example2 out;
  out.B0.resize(p, K0);
  {
    auto rng = RngStream::keyed(seed, 0, kBlockLoadings, 0);
    for (Index j = 0; j < p; ++j) {
      for (Index k = 0; k < K0; ++k) {
        out.B0(j, k) = rng.next_double() < 2.0 / 3.0 ? 0.0 : rng.next_double();
      }
    }
  }
  out.omega0.resize(p);
  {
    auto rng = RngStream::keyed(seed, 0, kBlockNoiseVar, 0);
    for (Index j = 0; j < p; ++j) {
      out.omega0(j) = 0.1 + 0.9 * rng.next_double();
    }
  }
  out.Sigma0 = out.B0 * out.B0.transpose();
  out.Sigma0.diagonal() += out.omega0;
  out.data.X = draw_observations(out.B0, out.omega0, n, seed);
  return out;
}

}  // namespace bfactor::datagen
