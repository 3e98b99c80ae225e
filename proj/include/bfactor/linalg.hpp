#ifndef BFACTOR_LINALG_HPP
#define BFACTOR_LINALG_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bfactor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Numeric failures carry the offending index (pivot, row, or iteration).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Throws NumericError naming the failing pivot if A is not SPD.
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& A);

  Matrix lower_copy() const { return llt_.matrixL(); }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& B) const { return llt_.solve(B); }
  void solve_in_place(Eigen::Ref<Matrix> B) const { llt_.solveInPlace(B); }

  // Solves L^T x = z; maps standard normals to N(0, A^-1) draws when A is a
  // precision matrix.
  Vector solve_lt(const Vector& z) const {
    Vector x = z;
    llt_.matrixU().solveInPlace(x);
    return x;
  }

  double log_det() const;   // log |A|
  Matrix inverse() const;

 private:
  Eigen::LLT<Matrix> llt_;
};

// X with A X = B for SPD A.
Matrix spd_solve(const Matrix& A, const Matrix& B);

// Convenience wrapper returning the lower factor L with L L^T = A.
Matrix spd_factor(const Matrix& A);

}  // namespace bfactor

#endif  // BFACTOR_LINALG_HPP
