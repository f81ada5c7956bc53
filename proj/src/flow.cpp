#include "rpf/flow.hpp"

#include "rpf/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

namespace rpf {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ModelError("model file: '" + path + "' must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ModelError("model file: missing field '" + path + "." + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ModelError("model file: field '" + path + "' must be a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw ModelError("model file: field '" + path + "' must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

Vector read_vector(const json& j, std::size_t expected, const std::string& path) {
  if (!j.is_array() || j.size() != expected) {
    throw ModelError("model file: field '" + path + "' must be an array of length " + std::to_string(expected));
  }
  Vector v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path);
  return v;
}

Eigen::MatrixXd read_matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& path) {
  if (!j.is_array() || j.size() != rows) {
    throw ModelError("model file: field '" + path + "' must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    m.row(static_cast<Eigen::Index>(r)) = read_vector(j[r], cols, path + "[" + std::to_string(r) + "]").transpose();
  }
  return m;
}

}  // namespace

FlowModel::FlowModel(ProjectionLayer layer, GmmParams latent, FlowMetadata metadata)
    : layer_(std::move(layer)), latent_(std::move(latent)), metadata_(std::move(metadata)) {
  if (layer_.latent_dim() != latent_.dim()) {
    throw DimensionError("dimension mismatch: layer latent dimension " + std::to_string(layer_.latent_dim()) +
                         " differs from mixture dimension " + std::to_string(latent_.dim()));
  }
}

double flow_log_likelihood(const FlowModel& model, std::span<const double> x) {
  const Vector z = encode(model.layer(), x);
  return gmm_logpdf(model.latent(), as_span(z)) + log_volume_correction(model.layer());
}

std::vector<double> flow_log_likelihood_batch(const FlowModel& model, const Matrix& data, unsigned threads) {
  if (static_cast<std::size_t>(data.cols()) != model.ambient_dim()) {
    throw DimensionError("dimension mismatch: data has " + std::to_string(data.cols()) + " columns, model expects " +
                         std::to_string(model.ambient_dim()));
  }
  const auto n = static_cast<std::size_t>(data.rows());
  std::vector<double> out(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n / 256, 1)));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = flow_log_likelihood(model, row_span(data, static_cast<Eigen::Index>(i)));
    }
  };
  if (threads <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back(work, begin, end);
  }
  pool.clear();  // join before `out` is returned
  return out;
}

Matrix flow_sample(const FlowModel& model, std::size_t n, Seed seed) {
  return decode_batch(model.layer(), gmm_sample(model.latent(), n, seed));
}

FlowModel fit_flow(ProjectionLayer layer, const Matrix& train, std::size_t components, const EmConfig& em,
                   FlowMetadata metadata) {
  const Matrix codes = encode_batch(layer, train);
  GmmFit fit = gmm_fit(codes, components, em);
  return FlowModel(std::move(layer), std::move(fit.params), std::move(metadata));
}

std::string model_to_json(const FlowModel& model) {
  const auto& layer = model.layer();
  const auto& gmm = model.latent();
  json covs = json::array();
  json means = json::array();
  for (std::size_t k = 0; k < gmm.components(); ++k) {
    covs.push_back(matrix_json(gmm.covariances()[k]));
    means.push_back(vector_json(gmm.means()[k]));
  }
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["mode"] = std::string(mode_name(layer.mode()));
  doc["D"] = layer.ambient_dim();
  doc["d"] = layer.latent_dim();
  doc["center"] = vector_json(layer.center());
  doc["V"] = matrix_json(layer.basis().rows());
  doc["scale"] = layer.scale();
  doc["gmm"] = {{"weights", vector_json(gmm.weights())},
                {"means", std::move(means)},
                {"covariances", std::move(covs)},
                {"covariance_type", std::string(covariance_type_name(gmm.covariance_type()))}};
  doc["metadata"] = {{"seed", model.metadata().seed},
                     {"projection_seed", layer.seed() ? json(*layer.seed()) : json(nullptr)},
                     {"dataset_fingerprint", model.metadata().dataset_fingerprint}};
  return doc.dump(2);
}

void save_model(const FlowModel& model, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ModelError("cannot write model file '" + path.string() + "'");
    out << model_to_json(model) << '\n';
    if (!out) throw ModelError("failed writing model file '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

FlowModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("malformed model JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ModelError("model file: top level must be an object");
  const auto version = count(field(doc, "format_version", "model"), "format_version");
  if (version != kFormatVersion) {
    throw ModelError("model file: unsupported format_version " + std::to_string(version));
  }
  const json& mode_field = field(doc, "mode", "model");
  if (!mode_field.is_string()) throw ModelError("model file: field 'mode' must be a string");
  ProjectionMode mode;
  try {
    mode = parse_mode(mode_field.get<std::string>());
  } catch (const Error& e) {
    throw ModelError(std::string("model file: field 'mode': ") + e.what());
  }
  const std::size_t ambient = count(field(doc, "D", "model"), "D");
  const std::size_t latent = count(field(doc, "d", "model"), "d");
  if (latent == 0 || latent > ambient) {
    throw ModelError("model file: fields 'd'/'D' must satisfy 1 <= d <= D");
  }
  Vector center = read_vector(field(doc, "center", "model"), ambient, "center");
  Matrix basis = read_matrix(field(doc, "V", "model"), latent, ambient, "V");
  const double scale = number(field(doc, "scale", "model"), "scale");

  const json& meta = field(doc, "metadata", "model");
  FlowMetadata metadata;
  metadata.seed = count(field(meta, "seed", "metadata"), "metadata.seed");
  const json& fp = field(meta, "dataset_fingerprint", "metadata");
  if (!fp.is_string()) throw ModelError("model file: field 'metadata.dataset_fingerprint' must be a string");
  metadata.dataset_fingerprint = fp.get<std::string>();
  std::optional<Seed> projection_seed;
  if (const json& ps = field(meta, "projection_seed", "metadata"); !ps.is_null()) {
    projection_seed = count(ps, "metadata.projection_seed");
  }

  const json& g = field(doc, "gmm", "model");
  const json& weights_field = field(g, "weights", "gmm");
  if (!weights_field.is_array() || weights_field.empty()) {
    throw ModelError("model file: field 'gmm.weights' must be a non-empty array");
  }
  const std::size_t k = weights_field.size();
  Vector weights = read_vector(weights_field, k, "gmm.weights");
  const json& means_field = field(g, "means", "gmm");
  const json& covs_field = field(g, "covariances", "gmm");
  if (!means_field.is_array() || means_field.size() != k) {
    throw ModelError("model file: field 'gmm.means' must have one entry per weight");
  }
  if (!covs_field.is_array() || covs_field.size() != k) {
    throw ModelError("model file: field 'gmm.covariances' must have one entry per weight");
  }
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t i = 0; i < k; ++i) {
    means.push_back(read_vector(means_field[i], latent, "gmm.means[" + std::to_string(i) + "]"));
    covs.push_back(read_matrix(covs_field[i], latent, latent, "gmm.covariances[" + std::to_string(i) + "]"));
  }
  const json& type_field = field(g, "covariance_type", "gmm");
  if (!type_field.is_string()) throw ModelError("model file: field 'gmm.covariance_type' must be a string");
  CovarianceType type;
  try {
    type = parse_covariance_type(type_field.get<std::string>());
  } catch (const Error& e) {
    throw ModelError(std::string("model file: field 'gmm.covariance_type': ") + e.what());
  }

  std::optional<ProjectionLayer> layer;
  try {
    SemiOrthogonal rows(std::move(basis), projection_seed.value_or(0));
    layer.emplace(std::move(rows), mode, std::move(center), scale, projection_seed);
  } catch (const Error& e) {
    throw ModelError(std::string("model file: fields 'V'/'center'/'scale': ") + e.what());
  }
  GmmParams params(std::move(weights), std::move(means), std::move(covs), type);
  return FlowModel(std::move(*layer), std::move(params), std::move(metadata));
}

FlowModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace rpf
