#include <cmath>

#include "mrot/simd/kernels.hpp"

namespace mrot::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k];
  return acc;
}

double max_scalar(const double* a, std::size_t n) {
  double m = a[0];
  for (std::size_t k = 1; k < n; ++k) m = a[k] > m ? a[k] : m;
  return m;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void squared_distances_scalar(const double* x, const double* points, std::size_t m,
                              std::size_t d, double* out) {
  for (std::size_t j = 0; j < m; ++j) out[j] = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double xc = x[c];
    const double* col = points + c * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double diff = col[j] - xc;
      out[j] += diff * diff;
    }
  }
}

void exp_scaled_scalar(const double* in, double scale, std::size_t n, double* out) {
  for (std::size_t k = 0; k < n; ++k) out[k] = std::exp(scale * in[k]);
}

void gibbs_row_scalar(const double* cost, const double* g, double offset, double inv_eps,
                      std::size_t n, double* out) {
  for (std::size_t k = 0; k < n; ++k) out[k] = std::exp((offset + g[k] - cost[k]) * inv_eps);
}

}  // namespace

namespace detail {
const KernelTable scalar_table{
    Backend::Scalar,  dot_scalar,        sum_scalar,       max_scalar, axpy_scalar,
    squared_distances_scalar, exp_scaled_scalar, gibbs_row_scalar,
};
}  // namespace detail

}  // namespace mrot::simd
