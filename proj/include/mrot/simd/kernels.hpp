#pragma once

// Data-parallel inner loops used by the cost builders, the Sinkhorn solver
// and the RBF regressor. Every kernel has a scalar reference implementation
// and, on x86-64, an AVX2+FMA variant. The variant is picked once at run time
// from CPUID; tests can force either backend and compare them.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mrot::simd {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b) noexcept;

struct KernelTable {
  Backend backend;

  /// sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// sum_k a[k]
  double (*sum)(const double* a, std::size_t n);

  /// max_k a[k]; n must be >= 1
  double (*max)(const double* a, std::size_t n);

  /// y[k] += alpha * x[k]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// out[j] = sum_c (points[c*m + j] - x[c])^2 for j < m.
  /// `points` is stored feature-major (d rows of length m).
  void (*squared_distances)(const double* x, const double* points, std::size_t m, std::size_t d,
                            double* out);

  /// out[j] = exp(scale * in[j])
  void (*exp_scaled)(const double* in, double scale, std::size_t n, double* out);

  /// out[j] = exp((offset + g[j] - cost[j]) * inv_eps); the stabilized
  /// Gibbs-kernel row.
  void (*gibbs_row)(const double* cost, const double* g, double offset, double inv_eps,
                    std::size_t n, double* out);
};

/// The table selected for this process (best supported backend unless
/// overridden with force_backend).
const KernelTable& kernels() noexcept;

/// Table for a specific backend; throws if the CPU or build lacks it.
const KernelTable& kernels_for(Backend b);

bool backend_supported(Backend b) noexcept;

/// Backends usable on this machine, scalar first.
std::vector<Backend> supported_backends();

/// Overrides the process-wide selection. Not thread-safe with respect to
/// concurrent solver calls; intended for tests and the CLI.
void force_backend(Backend b);

namespace detail {
extern const KernelTable scalar_table;
extern const KernelTable avx2_table;  // defined only in x86-64 builds
}  // namespace detail

}  // namespace mrot::simd
