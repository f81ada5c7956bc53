#include "rpf/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace rpf::simd {
namespace {

constexpr KernelTable kScalar{Backend::Scalar,  scalar::dot,  scalar::squared_distance,
                              scalar::axpy,     scalar::gemv, scalar::gemv_transposed};

#if defined(RPF_HAVE_AVX2)
constexpr KernelTable kAvx2{Backend::Avx2, avx2::dot,  avx2::squared_distance,
                            avx2::axpy,    avx2::gemv, avx2::gemv_transposed};
#endif

#if defined(RPF_HAVE_NEON)
constexpr KernelTable kNeon{Backend::Neon, neon::dot,  neon::squared_distance,
                            neon::axpy,    neon::gemv, neon::gemv_transposed};
#endif

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(RPF_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(RPF_HAVE_NEON)
      return true;  // mandatory on AArch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("RPF_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return &kScalar;
  }
  if (cpu_supports(Backend::Avx2)) return &table(Backend::Avx2);
  if (cpu_supports(Backend::Neon)) return &table(Backend::Neon);
  return &kScalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{initial_table()};
  return current;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (cpu_supports(b)) out.push_back(b);
  }
  return out;
}

const KernelTable& table(Backend b) {
  if (!cpu_supports(b)) {
    throw std::runtime_error("SIMD backend not available: " + std::string(backend_name(b)));
  }
  switch (b) {
    case Backend::Scalar:
      return kScalar;
#if defined(RPF_HAVE_AVX2)
    case Backend::Avx2:
      return kAvx2;
#endif
#if defined(RPF_HAVE_NEON)
    case Backend::Neon:
      return kNeon;
#endif
    default:
      break;
  }
  throw std::runtime_error("SIMD backend not compiled: " + std::string(backend_name(b)));
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Backend b) { slot().store(&table(b), std::memory_order_release); }

}  // namespace rpf::simd
