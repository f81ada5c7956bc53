#pragma once

#include "rpf/ortho.hpp"
#include "rpf/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpf {

enum class ProjectionMode { RpfJl, RpfIso, Pca };

std::string_view mode_name(ProjectionMode mode);
/// Accepts "RPF_JL", "RPF_ISO", "PCA" (case-insensitive, '-' or '_').
ProjectionMode parse_mode(std::string_view name);

/// Injective linear layer z = s V (x - c).
///
/// V is d x D with orthonormal rows. For RPF_JL the scale is sqrt(D/d) so
/// squared norms are unbiased in expectation over the Haar draw; RPF_ISO and
/// PCA use s = 1. RPF layers have zero center; PCA layers carry the training
/// mean. Immutable after construction.
class ProjectionLayer {
 public:
  /// Reassembles a layer from stored parts, re-checking every invariant.
  ProjectionLayer(SemiOrthogonal basis, ProjectionMode mode, Vector center, double scale,
                  std::optional<Seed> seed);

  const SemiOrthogonal& basis() const { return basis_; }
  ProjectionMode mode() const { return mode_; }
  const Vector& center() const { return center_; }
  double scale() const { return scale_; }
  /// Haar seed for RPF layers; empty for layers fitted from data.
  const std::optional<Seed>& seed() const { return seed_; }

  std::size_t ambient_dim() const { return basis_.ambient_dim(); }
  std::size_t latent_dim() const { return basis_.latent_dim(); }

 private:
  SemiOrthogonal basis_;
  ProjectionMode mode_;
  Vector center_;
  double scale_;
  std::optional<Seed> seed_;
};

/// mode must be RpfJl or RpfIso.
ProjectionLayer make_rpf_layer(SemiOrthogonal basis, ProjectionMode mode);

/// PCA layer from the top-d right singular vectors of the centered data.
/// Rows are ordered by descending singular value and signed so that the
/// largest-magnitude entry (lowest index on ties) is positive.
/// Throws RankDeficiencyError if the centered data has rank < d.
ProjectionLayer fit_pca_layer(const Matrix& data, std::size_t latent_dim);

Vector encode(const ProjectionLayer& layer, std::span<const double> x);
/// Row-wise encode; row i of the result equals encode(layer, row i) exactly.
Matrix encode_batch(const ProjectionLayer& layer, const Matrix& data);

/// Pseudo-inverse decoder x = V^T z / s + c.
Vector decode(const ProjectionLayer& layer, std::span<const double> z);
Matrix decode_batch(const ProjectionLayer& layer, const Matrix& codes);

/// d log s: (d/2) log(D/d) for RPF_JL, 0 otherwise. Same for every input point.
double log_volume_correction(const ProjectionLayer& layer);

/// || (I - V^T V)(x - c) ||, distance from x to the model's affine subspace.
double residual_norm(const ProjectionLayer& layer, std::span<const double> x);

struct DistortionReport {
  std::vector<double> ratios;  // ||W(xi - xj)|| / ||xi - xj||
  double mean_ratio = 0.0;
  double max_epsilon = 0.0;  // max |ratio^2 - 1|
  std::size_t pair_count = 0;
};

/// Empirical pairwise-distance distortion of the layer's linear map on `data`.
/// Pairs are drawn uniformly (i != j) from Rng(seed); zero-distance pairs are
/// skipped and redrawn, up to 100 * pair_count draws in total.
/// Throws DataError if no pair with nonzero distance is found.
DistortionReport jl_distortion(const ProjectionLayer& layer, const Matrix& data,
                               std::size_t pair_count, Seed seed);

}  // namespace rpf
