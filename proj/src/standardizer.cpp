#include "mrot/standardizer.hpp"

#include <cmath>
#include <string>

#include "mrot/errors.hpp"

namespace mrot {

Standardizer Standardizer::fit(const Matrix& x) {
  if (x.rows() == 0) throw DataError("cannot standardize an empty matrix");
  const std::size_t n = x.rows(), d = x.cols();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = x(i, j) - mean;
      var += diff * diff;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    s.mean[j] = mean;
    s.scale[j] = sd > 1e-12 * (1.0 + std::abs(mean)) ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != dim()) {
    throw DataError("feature dimension mismatch: got " + std::to_string(x.cols()) +
                    " columns, expected " + std::to_string(dim()));
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale[j];
  return out;
}

}  // namespace mrot
