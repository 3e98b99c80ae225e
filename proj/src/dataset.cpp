#include "bfactor/dataset.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace bfactor {

namespace {

// Splits a CSV line; no quoting support, '.' decimal separator.
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Dataset load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open file '" + path + "'", 0, 0);

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t file_row = 0;
  std::size_t width = 0;
  bool first_content_row = true;

  while (std::getline(in, line)) {
    ++file_row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);

    if (first_content_row) {
      // Header detection: a first row with any non-numeric cell is skipped.
      double tmp;
      bool all_numeric = true;
      for (const auto& f : fields) {
        if (!parse_double(f, tmp)) {
          all_numeric = false;
          break;
        }
      }
      first_content_row = false;
      width = fields.size();
      if (!all_numeric) continue;
    }

    if (fields.size() != width) {
      throw IngestError("ragged row: expected " + std::to_string(width) +
                            " fields, got " + std::to_string(fields.size()),
                        file_row, fields.size());
    }
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      double v;
      if (!parse_double(fields[c], v)) {
        throw IngestError("non-numeric cell '" + trim(fields[c]) + "'",
                          file_row, c + 1);
      }
      if (!std::isfinite(v)) {
        throw IngestError("non-finite cell", file_row, c + 1);
      }
      values[c] = v;
    }
    rows.push_back(std::move(values));
  }

  if (rows.empty()) throw IngestError("no data rows in '" + path + "'", 0, 0);

  Dataset d;
  d.X.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      d.X(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return d;
}

void save_matrix_csv(const std::string& path, const Matrix& X) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[48];
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", X(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Dataset standardize(const Dataset& d, bool center, bool scale) {
  const Index n = d.n();
  const Index p = d.p();
  if (n < 2 && scale) {
    throw std::invalid_argument("scaling needs at least two rows");
  }
  Dataset out;
  out.X = d.X;
  out.centered = d.centered || center;
  out.scaled = d.scaled || scale;
  out.column_means = Vector::Zero(p);
  out.column_sds = Vector::Ones(p);

  if (center || scale) {
    const Vector means = out.X.colwise().mean();
    for (Index j = 0; j < p; ++j) {
      if (center) {
        out.X.col(j).array() -= means(j);
        out.column_means(j) = means(j);
      }
      if (scale) {
        // Sample SD about the column mean, n-1 denominator.
        const double mu = center ? 0.0 : means(j);
        const double ss = (out.X.col(j).array() - mu).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sd > 0.0)) {
          throw std::invalid_argument("column " + std::to_string(j + 1) +
                                      " has zero variance; cannot scale");
        }
        out.X.col(j) /= sd;
        out.column_sds(j) = sd;
      }
    }
  }
  return out;
}

}  // namespace bfactor
