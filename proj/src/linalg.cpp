#include "bfactor/linalg.hpp"

#include <cmath>

namespace bfactor {

namespace {

// Unblocked Cholesky used only to locate the failing pivot for the error
// message after Eigen's factorization reports a failure.
long failing_pivot(const Matrix& A) {
  const Index n = A.rows();
  Matrix L = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    double d = A(k, k) - L.row(k).head(k).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return static_cast<long>(k);
    L(k, k) = std::sqrt(d);
    for (Index i = k + 1; i < n; ++i) {
      double s = A(i, k) - L.row(i).head(k).dot(L.row(k).head(k));
      L(i, k) = s / L(k, k);
    }
  }
  return static_cast<long>(n - 1);
}

}  // namespace

SpdFactor::SpdFactor(const Matrix& A) : llt_(A) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("SpdFactor requires a square matrix");
  }
  if (llt_.info() != Eigen::Success) {
    throw NumericError("matrix is not positive definite", failing_pivot(A));
  }
}

double SpdFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix SpdFactor::inverse() const {
  return llt_.solve(Matrix::Identity(llt_.rows(), llt_.rows()));
}

Matrix spd_solve(const Matrix& A, const Matrix& B) {
  return SpdFactor(A).solve(B);
}

Matrix spd_factor(const Matrix& A) { return SpdFactor(A).lower_copy(); }

}  // namespace bfactor
