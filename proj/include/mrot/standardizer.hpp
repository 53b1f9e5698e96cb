#pragma once

#include <vector>

#include "mrot/matrix.hpp"

namespace mrot {

/// Per-column affine map to zero mean and unit (population) variance.
/// Constant columns keep scale 1 so they map to zero.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x);
  static Standardizer identity(std::size_t dim);

  Matrix apply(const Matrix& x) const;
  std::size_t dim() const noexcept { return mean.size(); }

  bool operator==(const Standardizer&) const = default;
};

}  // namespace mrot
