#include <atomic>
#include <string>

#include "mrot/errors.hpp"
#include "mrot/simd/kernels.hpp"

namespace mrot::simd {
namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(MROT_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* detect() noexcept {
#if defined(MROT_HAVE_AVX2_TU)
  if (cpu_has_avx2_fma()) return &detail::avx2_table;
#endif
  return &detail::scalar_table;
}

std::atomic<const KernelTable*>& selected() noexcept {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return cpu_has_avx2_fma();
  }
  return false;
}

std::vector<Backend> supported_backends() {
  std::vector<Backend> out{Backend::Scalar};
  if (backend_supported(Backend::Avx2)) out.push_back(Backend::Avx2);
  return out;
}

const KernelTable& kernels() noexcept { return *selected().load(std::memory_order_acquire); }

const KernelTable& kernels_for(Backend b) {
  if (!backend_supported(b)) {
    throw Error("SIMD backend '" + std::string(backend_name(b)) + "' is not available on this CPU/build");
  }
#if defined(MROT_HAVE_AVX2_TU)
  if (b == Backend::Avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

void force_backend(Backend b) { selected().store(&kernels_for(b), std::memory_order_release); }

}  // namespace mrot::simd
