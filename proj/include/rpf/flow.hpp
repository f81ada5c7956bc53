#pragma once

#include "rpf/gmm.hpp"
#include "rpf/projection.hpp"
#include "rpf/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rpf {

struct FlowMetadata {
  Seed seed = 0;
  std::string dataset_fingerprint;
};

/// Projection layer followed by a mixture density on the latent codes.
///
///   log p(x) = log p_Z(s V (x - c)) + d log s
///
/// Points off the model subspace are scored by their projection; the
/// distance to the subspace is available separately via residual().
class FlowModel {
 public:
  /// Throws DimensionError if the layer's latent dimension differs from the mixture's.
  FlowModel(ProjectionLayer layer, GmmParams latent, FlowMetadata metadata = {});

  const ProjectionLayer& layer() const { return layer_; }
  const GmmParams& latent() const { return latent_; }
  const FlowMetadata& metadata() const { return metadata_; }
  std::size_t ambient_dim() const { return layer_.ambient_dim(); }
  std::size_t latent_dim() const { return layer_.latent_dim(); }

  double residual(std::span<const double> x) const { return residual_norm(layer_, x); }

 private:
  ProjectionLayer layer_;
  GmmParams latent_;
  FlowMetadata metadata_;
};

double flow_log_likelihood(const FlowModel& model, std::span<const double> x);

/// Row-wise flow_log_likelihood; each entry is bitwise equal to the scalar call.
/// Rows are split across `threads` workers (0 = hardware concurrency).
std::vector<double> flow_log_likelihood_batch(const FlowModel& model, const Matrix& data,
                                              unsigned threads = 1);

/// decode(gmm_sample(latent, n, seed)): points on the model's affine subspace.
Matrix flow_sample(const FlowModel& model, std::size_t n, Seed seed);

/// Fits a flow: encode the training rows with `layer`, then EM on the codes.
FlowModel fit_flow(ProjectionLayer layer, const Matrix& train, std::size_t components,
                   const EmConfig& em, FlowMetadata metadata = {});

/// Single JSON document; doubles are written in shortest round-trip form.
void save_model(const FlowModel& model, const std::filesystem::path& path);
std::string model_to_json(const FlowModel& model);

/// Parses and validates a model file. Throws ModelError naming the offending
/// field for malformed JSON or violated invariants.
FlowModel load_model(const std::filesystem::path& path);
FlowModel model_from_json(const std::string& text);

}  // namespace rpf
