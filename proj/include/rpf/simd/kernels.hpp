#pragma once

// Dense double-precision kernels behind the projection, QR and mixture code.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2+FMA
// on x86-64, NEON on AArch64) are compiled when the toolchain supports them and
// selected once at startup from the CPU feature set. RPF_SIMD=scalar in the
// environment forces the reference path.
//
// The variants differ only in summation order and FMA contraction, so results
// agree to a few ulps of the sum of absolute terms, not bitwise. On a fixed
// machine and backend every kernel is deterministic.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace rpf::simd {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b);

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y = A^T x, A row-major rows x cols, y has length cols
  void (*gemv_transposed)(const double* a, std::size_t rows, std::size_t cols, const double* x,
                          double* y);
};

/// Backends compiled into this build and supported by the running CPU.
std::vector<Backend> available_backends();

/// Kernel table for a specific backend. Throws if it is unavailable.
const KernelTable& table(Backend b);

/// Currently selected kernel table.
const KernelTable& active();

/// Override the selection (tests and benchmarking). Throws if unavailable.
void set_active(Backend b);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_transposed(const double* a, std::size_t rows, std::size_t cols, const double* x,
                     double* y);
}  // namespace scalar

#if defined(RPF_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_transposed(const double* a, std::size_t rows, std::size_t cols, const double* x,
                     double* y);
}  // namespace avx2
#endif

#if defined(RPF_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_transposed(const double* a, std::size_t rows, std::size_t cols, const double* x,
                     double* y);
}  // namespace neon
#endif

// Span conveniences over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace rpf::simd
