#pragma once

#include "rpf/types.hpp"

#include <cstddef>

namespace rpf {

/// d x D matrix with orthonormal rows (V V^T = I_d), plus the seed it was drawn from.
class SemiOrthogonal {
 public:
  /// Wraps existing rows. Throws DimensionError unless 1 <= d <= D, and
  /// ModelError if the rows are not orthonormal to within `tolerance`.
  SemiOrthogonal(Matrix rows, Seed seed, double tolerance = 1e-8);

  const Matrix& rows() const { return rows_; }
  std::size_t latent_dim() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t ambient_dim() const { return static_cast<std::size_t>(rows_.cols()); }
  Seed seed() const { return seed_; }

  /// max |(V V^T - I)_{ij}|
  double orthogonality_error() const;

 private:
  Matrix rows_;
  Seed seed_;
};

/// Haar-distributed D x D orthogonal matrix.
///
/// Householder QR of a D x D standard Gaussian matrix G = QR, with column j
/// of Q multiplied by sign(R_jj) (sign(0) = +1) so that Q is exactly Haar.
/// Gaussian entries are drawn row-major from Rng(seed).
Matrix sample_haar_orthogonal(std::size_t ambient_dim, Seed seed);

/// First d rows of sample_haar_orthogonal(D, seed), computed without forming
/// the full Q.
SemiOrthogonal sample_haar_semi_orthogonal(std::size_t ambient_dim, std::size_t latent_dim,
                                           Seed seed);

}  // namespace rpf
