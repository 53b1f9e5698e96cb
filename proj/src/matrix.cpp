#include "mrot/matrix.hpp"

#include <cmath>

#include "mrot/errors.hpp"

namespace mrot {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DataError("matrix storage has " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(rows * cols));
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Matrix out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw DataError("ragged rows: row " + std::to_string(i) + " has " +
                      std::to_string(rows[i].size()) + " entries, expected " +
                      std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = rows[i][j];
  }
  return out;
}

Matrix Matrix::transposed() const {
  Matrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = row(indices[r]);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < cols_; ++j) dst[j] = src[j];
  }
  return out;
}

bool Matrix::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace mrot
