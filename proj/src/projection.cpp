#include "rpf/projection.hpp"

#include "rpf/error.hpp"
#include "rpf/rng.hpp"
#include "rpf/simd/kernels.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace rpf {
namespace {

void require_length(std::span<const double> v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    throw DimensionError(std::string("dimension mismatch: ") + what + " has length " +
                         std::to_string(v.size()) + ", expected " + std::to_string(expected));
  }
}

double expected_scale(ProjectionMode mode, std::size_t ambient, std::size_t latent) {
  if (mode == ProjectionMode::RpfJl) {
    return std::sqrt(static_cast<double>(ambient) / static_cast<double>(latent));
  }
  return 1.0;
}

}  // namespace

std::string_view mode_name(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::RpfJl:
      return "RPF_JL";
    case ProjectionMode::RpfIso:
      return "RPF_ISO";
    case ProjectionMode::Pca:
      return "PCA";
  }
  return "?";
}

ProjectionMode parse_mode(std::string_view name) {
  std::string key;
  for (char ch : name) key.push_back(ch == '-' ? '_' : static_cast<char>(std::toupper(ch)));
  if (key == "RPF_JL" || key == "JL") return ProjectionMode::RpfJl;
  if (key == "RPF_ISO" || key == "ISO") return ProjectionMode::RpfIso;
  if (key == "PCA") return ProjectionMode::Pca;
  throw Error("unknown projection mode '" + std::string(name) + "' (expected RPF_JL, RPF_ISO or PCA)");
}

ProjectionLayer::ProjectionLayer(SemiOrthogonal basis, ProjectionMode mode, Vector center,
                                 double scale, std::optional<Seed> seed)
    : basis_(std::move(basis)),
      mode_(mode),
      center_(std::move(center)),
      scale_(scale),
      seed_(seed) {
  if (static_cast<std::size_t>(center_.size()) != ambient_dim()) {
    throw DimensionError("dimension mismatch: center has length " + std::to_string(center_.size()) +
                         ", expected " + std::to_string(ambient_dim()));
  }
  if (!center_.allFinite()) throw ModelError("layer center has non-finite entries");
  const double expected = expected_scale(mode_, ambient_dim(), latent_dim());
  if (!(std::abs(scale_ - expected) <= 1e-12 * expected)) {
    throw ModelError("layer scale " + std::to_string(scale_) + " does not match mode " +
                     std::string(mode_name(mode_)) + " (expected " + std::to_string(expected) + ")");
  }
  if (mode_ != ProjectionMode::Pca && !center_.isZero(0.0)) {
    throw ModelError("random projection layers must have a zero center");
  }
}

ProjectionLayer make_rpf_layer(SemiOrthogonal basis, ProjectionMode mode) {
  if (mode == ProjectionMode::Pca) throw Error("make_rpf_layer: PCA layers are fitted from data");
  const Seed seed = basis.seed();
  const double scale = expected_scale(mode, basis.ambient_dim(), basis.latent_dim());
  Vector center = Vector::Zero(static_cast<Eigen::Index>(basis.ambient_dim()));
  return ProjectionLayer(std::move(basis), mode, std::move(center), scale, seed);
}

ProjectionLayer fit_pca_layer(const Matrix& data, std::size_t latent_dim) {
  const auto n = data.rows();
  const auto dim = static_cast<std::size_t>(data.cols());
  if (n < 2) throw DataError("PCA needs at least 2 rows, got " + std::to_string(n));
  if (latent_dim == 0 || latent_dim > dim) {
    throw DimensionError("invalid dimension: latent dimension d=" + std::to_string(latent_dim) +
                         " must satisfy 1 <= d <= D=" + std::to_string(dim));
  }
  if (!data.allFinite()) throw DataError("PCA input has non-finite entries");

  Vector mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();

  const double tol = sv.size() > 0 ? sv(0) * static_cast<double>(std::max<Eigen::Index>(n, sv.size())) *
                                         std::numeric_limits<double>::epsilon()
                                   : 0.0;
  long rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  if (rank < static_cast<long>(latent_dim)) {
    throw RankDeficiencyError(rank, static_cast<long>(latent_dim));
  }

  Matrix rows(static_cast<Eigen::Index>(latent_dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Vector direction = svd.matrixV().col(r);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < direction.size(); ++i) {
      if (std::abs(direction(i)) > std::abs(direction(arg))) arg = i;
    }
    if (direction(arg) < 0.0) direction = -direction;
    rows.row(r) = direction.transpose();
  }
  SemiOrthogonal basis(std::move(rows), 0);
  return ProjectionLayer(std::move(basis), ProjectionMode::Pca, std::move(mean), 1.0, std::nullopt);
}

Vector encode(const ProjectionLayer& layer, std::span<const double> x) {
  require_length(x, layer.ambient_dim(), "input point");
  const auto dim = layer.ambient_dim();
  const auto latent = layer.latent_dim();
  Vector shifted(static_cast<Eigen::Index>(dim));
  const double* c = layer.center().data();
  for (std::size_t i = 0; i < dim; ++i) shifted(static_cast<Eigen::Index>(i)) = x[i] - c[i];
  Vector z(static_cast<Eigen::Index>(latent));
  simd::active().gemv(layer.basis().rows().data(), latent, dim, shifted.data(), z.data());
  z *= layer.scale();
  return z;
}

Matrix encode_batch(const ProjectionLayer& layer, const Matrix& data) {
  if (static_cast<std::size_t>(data.cols()) != layer.ambient_dim()) {
    throw DimensionError("dimension mismatch: data has " + std::to_string(data.cols()) +
                         " columns, layer expects " + std::to_string(layer.ambient_dim()));
  }
  Matrix out(data.rows(), static_cast<Eigen::Index>(layer.latent_dim()));
  for (Eigen::Index r = 0; r < data.rows(); ++r) out.row(r) = encode(layer, row_span(data, r)).transpose();
  return out;
}

Vector decode(const ProjectionLayer& layer, std::span<const double> z) {
  require_length(z, layer.latent_dim(), "latent code");
  Vector x(static_cast<Eigen::Index>(layer.ambient_dim()));
  simd::active().gemv_transposed(layer.basis().rows().data(), layer.latent_dim(),
                                 layer.ambient_dim(), z.data(), x.data());
  x /= layer.scale();
  x += layer.center();
  return x;
}

Matrix decode_batch(const ProjectionLayer& layer, const Matrix& codes) {
  if (static_cast<std::size_t>(codes.cols()) != layer.latent_dim()) {
    throw DimensionError("dimension mismatch: codes have " + std::to_string(codes.cols()) +
                         " columns, layer expects " + std::to_string(layer.latent_dim()));
  }
  Matrix out(codes.rows(), static_cast<Eigen::Index>(layer.ambient_dim()));
  for (Eigen::Index r = 0; r < codes.rows(); ++r) out.row(r) = decode(layer, row_span(codes, r)).transpose();
  return out;
}

double log_volume_correction(const ProjectionLayer& layer) {
  if (layer.mode() != ProjectionMode::RpfJl) return 0.0;
  const auto d = static_cast<double>(layer.latent_dim());
  const auto dim = static_cast<double>(layer.ambient_dim());
  return 0.5 * d * std::log(dim / d);
}

double residual_norm(const ProjectionLayer& layer, std::span<const double> x) {
  require_length(x, layer.ambient_dim(), "input point");
  const auto& v = layer.basis().rows();
  Vector shifted(static_cast<Eigen::Index>(layer.ambient_dim()));
  for (Eigen::Index i = 0; i < shifted.size(); ++i) shifted(i) = x[static_cast<std::size_t>(i)] - layer.center()(i);
  Vector coeffs(v.rows());
  simd::active().gemv(v.data(), layer.latent_dim(), layer.ambient_dim(), shifted.data(), coeffs.data());
  Vector on_plane(shifted.size());
  simd::active().gemv_transposed(v.data(), layer.latent_dim(), layer.ambient_dim(), coeffs.data(),
                                 on_plane.data());
  return (shifted - on_plane).norm();
}

DistortionReport jl_distortion(const ProjectionLayer& layer, const Matrix& data,
                               std::size_t pair_count, Seed seed) {
  if (static_cast<std::size_t>(data.cols()) != layer.ambient_dim()) {
    throw DimensionError("dimension mismatch: data has " + std::to_string(data.cols()) +
                         " columns, layer expects " + std::to_string(layer.ambient_dim()));
  }
  if (pair_count == 0) throw Error("jl_distortion: pair_count must be >= 1");
  const auto n = static_cast<std::size_t>(data.rows());
  bool any_distinct = false;
  for (Eigen::Index r = 1; r < data.rows() && !any_distinct; ++r) {
    any_distinct = data.row(r) != data.row(0);
  }
  if (n < 2 || !any_distinct) throw DataError("jl_distortion: no valid pairs (need >= 2 distinct rows)");

  const auto& k = simd::active();
  const auto dim = layer.ambient_dim();
  const auto latent = layer.latent_dim();
  const double* v = layer.basis().rows().data();
  Rng rng(seed);
  DistortionReport report;
  report.ratios.reserve(pair_count);
  std::vector<double> diff(dim);
  std::vector<double> projected(latent);
  const std::size_t max_draws = 100 * pair_count;
  for (std::size_t draw = 0; draw < max_draws && report.ratios.size() < pair_count; ++draw) {
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    const double* xi = data.data() + i * dim;
    const double* xj = data.data() + j * dim;
    const double dist_sq = k.squared_distance(xi, xj, dim);
    if (dist_sq == 0.0) continue;
    for (std::size_t c = 0; c < dim; ++c) diff[c] = xi[c] - xj[c];
    k.gemv(v, latent, dim, diff.data(), projected.data());
    const double proj_sq = k.dot(projected.data(), projected.data(), latent);
    report.ratios.push_back(layer.scale() * std::sqrt(proj_sq / dist_sq));
  }
  if (report.ratios.empty()) throw DataError("jl_distortion: no valid pairs found");

  report.pair_count = report.ratios.size();
  double sum = 0.0;
  for (double r : report.ratios) {
    sum += r;
    report.max_epsilon = std::max(report.max_epsilon, std::abs(r * r - 1.0));
  }
  report.mean_ratio = sum / static_cast<double>(report.pair_count);
  return report;
}

}  // namespace rpf
