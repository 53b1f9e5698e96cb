// AVX2 + FMA variants of the kernels in kernels_scalar.cpp. This file is
// compiled with -mavx2 -mfma and must only be entered after a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "mrot/simd/kernels.hpp"

namespace mrot::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, swapped));
}

// 2^k for integral k in [-1022, 1023] held in a double lane.
inline __m256d pow2_int(__m256d k) {
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
  __m256d biased = _mm256_add_pd(_mm256_add_pd(k, _mm256_set1_pd(1023.0)), magic);
  __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
  return _mm256_castsi256_pd(bits);
}

// exp(x) with Cody-Waite reduction x = n ln2 + r, |r| <= ln2/2, a degree-13
// Taylor polynomial for e^r and a two-step 2^n scaling so results in the
// subnormal range are formed with a single rounding. Error is within a few
// ulp of std::exp over the full double range.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi_limit = _mm256_set1_pd(709.782712893384);
  const __m256d lo_limit = _mm256_set1_pd(-745.1332191019412);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(0.69314718055994528623);
  const __m256d ln2_lo = _mm256_set1_pd(2.3190468138462995584e-17);

  __m256d xc = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-746.0)), _mm256_set1_pd(710.0));
  __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, xc);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);  // 1/13!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
  __m256d n2 = _mm256_sub_pd(n, n1);
  __m256d result = _mm256_mul_pd(_mm256_mul_pd(p, pow2_int(n1)), pow2_int(n2));

  result = _mm256_blendv_pd(result, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
                            _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ));
  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ));
  result = _mm256_blendv_pd(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return result;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + k));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + k + 4));
  }
  for (; k + 4 <= n; k += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + k));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += a[k];
  return acc;
}

double max_avx2(const double* a, std::size_t n) {
  if (n < 4) {
    double m = a[0];
    for (std::size_t k = 1; k < n; ++k) m = a[k] > m ? a[k] : m;
    return m;
  }
  __m256d m = _mm256_loadu_pd(a);
  std::size_t k = 4;
  for (; k + 4 <= n; k += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(a + k));
  double out = hmax(m);
  for (; k < n; ++k) out = a[k] > out ? a[k] : out;
  return out;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

void squared_distances_avx2(const double* x, const double* points, std::size_t m,
                            std::size_t d, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t c = 0; c < d; ++c) {
      __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(points + c * m + j), _mm256_set1_pd(x[c]));
      acc = _mm256_fmadd_pd(diff, diff, acc);
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = points[c * m + j] - x[c];
      acc += diff * diff;
    }
    out[j] = acc;
  }
}

void exp_scaled_avx2(const double* in, double scale, std::size_t n, double* out) {
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4)
    _mm256_storeu_pd(out + k, exp_pd(_mm256_mul_pd(vs, _mm256_loadu_pd(in + k))));
  for (; k < n; ++k) out[k] = std::exp(scale * in[k]);
}

void gibbs_row_avx2(const double* cost, const double* g, double offset, double inv_eps,
                    std::size_t n, double* out) {
  const __m256d voff = _mm256_set1_pd(offset);
  const __m256d vinv = _mm256_set1_pd(inv_eps);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d arg = _mm256_sub_pd(_mm256_add_pd(voff, _mm256_loadu_pd(g + k)), _mm256_loadu_pd(cost + k));
    _mm256_storeu_pd(out + k, exp_pd(_mm256_mul_pd(arg, vinv)));
  }
  for (; k < n; ++k) out[k] = std::exp((offset + g[k] - cost[k]) * inv_eps);
}

}  // namespace

namespace detail {
const KernelTable avx2_table{
    Backend::Avx2,  dot_avx2,        sum_avx2,       max_avx2, axpy_avx2,
    squared_distances_avx2, exp_scaled_avx2, gibbs_row_avx2,
};
}  // namespace detail

}  // namespace mrot::simd
