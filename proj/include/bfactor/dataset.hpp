#ifndef BFACTOR_DATASET_HPP
#define BFACTOR_DATASET_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

#include "bfactor/linalg.hpp"

namespace bfactor {

// Observation matrix with rows as observations plus the transforms that were
// applied to it. Immutable after construction.
struct Dataset {
  Matrix X;  // n x p
  bool centered = false;
  bool scaled = false;
  Vector column_means;  // recorded when centering was applied
  Vector column_sds;    // recorded when scaling was applied

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

// CSV ingestion failure with the 1-based file location of the offending cell.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, std::size_t row, std::size_t col)
      : std::runtime_error(what + " at row " + std::to_string(row) +
                           ", column " + std::to_string(col)),
        row_(row),
        col_(col) {}
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_, col_;
};

// Reads a rectangular comma-separated numeric matrix. A non-numeric first row
// is treated as a header and skipped. Ragged rows, non-numeric or non-finite
// cells, and empty files raise IngestError with the file location.
Dataset load_matrix(const std::string& path);

// Writes a matrix as CSV with 17 significant digits so that a save/load
// round trip is bitwise exact on finite doubles.
void save_matrix_csv(const std::string& path, const Matrix& X);

// Returns a transformed copy; recorded means/sds use the n-1 denominator for
// the standard deviation. Scaling a zero-variance column raises
// std::invalid_argument naming the column.
Dataset standardize(const Dataset& d, bool center, bool scale);

}  // namespace bfactor

#endif  // BFACTOR_DATASET_HPP
