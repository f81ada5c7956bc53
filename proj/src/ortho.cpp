#include "rpf/ortho.hpp"

#include "rpf/error.hpp"
#include "rpf/rng.hpp"
#include "rpf/simd/kernels.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rpf {
namespace {

// Householder factorization of a column-major D x D matrix. On return the
// reflector vectors (with implicit unit leading entry) live below the
// diagonal, the diagonal holds R_jj, and tau holds the reflector scalars,
// so that H_j = I - tau_j v_j v_j^T and G = H_0 H_1 ... H_{D-1} R.
struct Householder {
  Eigen::MatrixXd packed;
  std::vector<double> tau;
};

Householder factorize(std::size_t n, Seed seed) {
  Rng rng(seed);
  Householder h;
  h.packed.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      h.packed(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.normal();
    }
  }
  h.tau.assign(n, 0.0);

  const auto& k = simd::active();
  double* a = h.packed.data();
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) {
    double* col = a + j * n;
    const std::size_t len = n - j;
    const double alpha = col[j];
    const double tail_sq = len > 1 ? k.dot(col + j + 1, col + j + 1, len - 1) : 0.0;
    if (tail_sq == 0.0) {
      h.tau[j] = 0.0;  // already upper triangular in this column
      continue;
    }
    const double norm = std::sqrt(alpha * alpha + tail_sq);
    const double beta = alpha >= 0.0 ? -norm : norm;
    const double tau = (beta - alpha) / beta;
    const double inv = 1.0 / (alpha - beta);

    v[0] = 1.0;
    for (std::size_t i = 1; i < len; ++i) v[i] = col[j + i] * inv;

    // Apply H_j to the trailing columns.
    for (std::size_t c = j + 1; c < n; ++c) {
      double* target = a + c * n + j;
      const double w = k.dot(v.data(), target, len);
      k.axpy(-tau * w, v.data(), target, len);
    }
    col[j] = beta;
    for (std::size_t i = 1; i < len; ++i) col[j + i] = v[i];
    h.tau[j] = tau;
  }
  return h;
}

// Row `row` of Q = H_0 ... H_{n-1}, written into out (length n), with the
// Haar sign correction applied.
void q_row(const Householder& h, std::size_t row, double* out) {
  const auto n = static_cast<std::size_t>(h.packed.rows());
  const auto& k = simd::active();
  const double* a = h.packed.data();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i == row ? 1.0 : 0.0;
  // e_row^T H_0 H_1 ... : each H_j is symmetric so r <- r - tau (r . v) v^T.
  for (std::size_t j = 0; j < n; ++j) {
    if (h.tau[j] == 0.0) continue;
    const std::size_t len = n - j;
    v[0] = 1.0;
    for (std::size_t i = 1; i < len; ++i) v[i] = a[j * n + j + i];
    const double w = k.dot(out + j, v.data(), len);
    k.axpy(-h.tau[j] * w, v.data(), out + j, len);
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (a[c * n + c] < 0.0) out[c] = -out[c];
  }
}

void check_dims(std::size_t ambient_dim, std::size_t latent_dim) {
  if (ambient_dim == 0) throw DimensionError("invalid dimension: ambient dimension D must be >= 1");
  if (latent_dim == 0 || latent_dim > ambient_dim) {
    throw DimensionError("invalid dimension: latent dimension d=" + std::to_string(latent_dim) +
                         " must satisfy 1 <= d <= D=" + std::to_string(ambient_dim));
  }
}

}  // namespace

SemiOrthogonal::SemiOrthogonal(Matrix rows, Seed seed, double tolerance)
    : rows_(std::move(rows)), seed_(seed) {
  check_dims(static_cast<std::size_t>(rows_.cols()), static_cast<std::size_t>(rows_.rows()));
  if (!rows_.allFinite()) throw ModelError("semi-orthogonal basis has non-finite entries");
  const double err = orthogonality_error();
  if (!(err <= tolerance)) {
    throw ModelError("basis rows are not orthonormal: max |V V^T - I| = " + std::to_string(err));
  }
}

double SemiOrthogonal::orthogonality_error() const {
  const Eigen::MatrixXd gram = rows_ * rows_.transpose();
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

Matrix sample_haar_orthogonal(std::size_t ambient_dim, Seed seed) {
  check_dims(ambient_dim, ambient_dim);
  const Householder h = factorize(ambient_dim, seed);
  const auto n = static_cast<Eigen::Index>(ambient_dim);
  Matrix q(n, n);
  for (Eigen::Index r = 0; r < n; ++r) q_row(h, static_cast<std::size_t>(r), q.data() + r * n);
  return q;
}

SemiOrthogonal sample_haar_semi_orthogonal(std::size_t ambient_dim, std::size_t latent_dim,
                                           Seed seed) {
  check_dims(ambient_dim, latent_dim);
  const Householder h = factorize(ambient_dim, seed);
  const auto n = static_cast<Eigen::Index>(ambient_dim);
  Matrix v(static_cast<Eigen::Index>(latent_dim), n);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    q_row(h, static_cast<std::size_t>(r), v.data() + r * n);
  }
  return SemiOrthogonal(std::move(v), seed);
}

}  // namespace rpf
