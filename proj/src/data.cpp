#include "rpf/data.hpp"

#include "rpf/error.hpp"
#include "rpf/rng.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace rpf {
namespace {

constexpr double kPi = std::numbers::pi;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t line, std::size_t column) {
  if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = trim(cell.substr(1, cell.size() - 2));
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataError("CSV parse error at row " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": cannot parse '" + std::string(cell) + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw DataError("CSV parse error at row " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": non-finite value '" + std::string(cell) + "'");
  }
  return value;
}

std::uint64_t fnv1a(std::uint64_t hash, const void* bytes, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Dataset generated(std::string name, Matrix values, std::vector<double> color) {
  Dataset ds = make_dataset(std::move(name), std::move(values));
  ds.color = std::move(color);
  return ds;
}

}  // namespace

std::string_view split_name(SplitLabel label) {
  switch (label) {
    case SplitLabel::Train:
      return "train";
    case SplitLabel::Val:
      return "val";
    case SplitLabel::Test:
      return "test";
  }
  return "?";
}

std::size_t Dataset::count(SplitLabel label) const {
  std::size_t n = 0;
  for (SplitLabel s : split) n += s == label ? 1 : 0;
  return n;
}

Matrix Dataset::rows(SplitLabel label) const {
  Matrix out(static_cast<Eigen::Index>(count(label)), values.cols());
  Eigen::Index next = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == label) out.row(next++) = values.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

Dataset make_dataset(std::string name, Matrix values) {
  if (values.rows() == 0 || values.cols() == 0) throw DataError("dataset '" + name + "' is empty");
  if (!values.allFinite()) throw DataError("dataset '" + name + "' has non-finite entries");
  Dataset ds;
  ds.name = std::move(name);
  ds.split.assign(static_cast<std::size_t>(values.rows()), SplitLabel::Train);
  ds.values = std::move(values);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");

  std::vector<double> cells;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_fields(view);
    if (rows == 0) {
      cols = fields.size();
    } else if (fields.size() != cols) {
      throw DataError("CSV ragged row at row " + std::to_string(line_no) + ": " + std::to_string(fields.size()) +
                      " columns, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) cells.push_back(parse_cell(fields[c], line_no, c + 1));
    ++rows;
  }
  if (rows == 0) throw DataError("CSV file '" + path.string() + "' contains no data rows");

  Matrix values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::memcpy(values.data(), cells.data(), cells.size() * sizeof(double));
  return make_dataset(path.stem().string(), std::move(values));
}

void save_csv(const Dataset& ds, const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file '" + path.string() + "'");
  out << std::setprecision(17);
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
  }
  for (Eigen::Index r = 0; r < ds.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.values.cols(); ++c) out << (c ? "," : "") << ds.values(r, c);
    out << '\n';
  }
  if (!out) throw DataError("failed writing CSV file '" + path.string() + "'");
}

void save_metadata(const Dataset& ds, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["name"] = ds.name;
  meta["rows"] = ds.size();
  meta["cols"] = ds.dim();
  meta["color"] = ds.color;
  meta["labels"] = ds.labels;
  meta["standardized"] = ds.standardization.applied;
  if (ds.standardization.applied) {
    meta["standardization"] = {
        {"mean", std::vector<double>(ds.standardization.mean.begin(), ds.standardization.mean.end())},
        {"scale", std::vector<double>(ds.standardization.scale.begin(), ds.standardization.scale.end())}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metadata file '" + path.string() + "'");
  out << meta.dump(2) << '\n';
}

Dataset standardize(const Dataset& ds) {
  const Matrix train = ds.rows(SplitLabel::Train);
  if (train.rows() == 0) throw DataError("standardize: train split is empty");
  const auto dim = ds.values.cols();
  Vector mean = train.colwise().mean().transpose();
  Vector scale = Vector::Ones(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const bool constant = (train.col(c).array() == train(0, c)).all();
    if (constant) continue;
    const double var = (train.col(c).array() - mean(c)).square().mean();
    if (var > 0.0) scale(c) = std::sqrt(var);
  }

  Dataset out = ds;
  for (Eigen::Index c = 0; c < dim; ++c) {
    out.values.col(c) = (ds.values.col(c).array() - mean(c)) / scale(c);
  }
  if (ds.standardization.applied) {
    // raw -> (raw - m1)/s1 -> ((raw - m1)/s1 - m2)/s2 = (raw - (m1 + s1 m2)) / (s1 s2)
    const auto& prev = ds.standardization;
    out.standardization.mean = prev.mean.array() + prev.scale.array() * mean.array();
    out.standardization.scale = prev.scale.array() * scale.array();
  } else {
    out.standardization.mean = std::move(mean);
    out.standardization.scale = std::move(scale);
  }
  out.standardization.applied = true;
  return out;
}

Dataset split_dataset(const Dataset& ds, const std::array<double, 3>& fractions, Seed seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw DataError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("split fractions must sum to 1, got " + std::to_string(total));

  const std::size_t n = ds.size();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (counts[i] == 0) {
      throw DataError("split '" + std::string(split_name(static_cast<SplitLabel>(i))) + "' is empty for N=" +
                      std::to_string(n));
    }
  }

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  Dataset out = ds;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const SplitLabel label = pos < counts[0]                ? SplitLabel::Train
                             : pos < counts[0] + counts[1] ? SplitLabel::Val
                                                           : SplitLabel::Test;
    out.split[perm[pos]] = label;
  }
  return out;
}

Dataset cap_split(const Dataset& ds, SplitLabel label, std::size_t max_rows) {
  if (ds.count(label) <= max_rows) return ds;
  std::vector<Eigen::Index> keep;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.split[i] == label && seen++ >= max_rows) continue;
    keep.push_back(static_cast<Eigen::Index>(i));
  }
  Dataset out;
  out.name = ds.name;
  out.standardization = ds.standardization;
  out.values.resize(static_cast<Eigen::Index>(keep.size()), ds.values.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto src = keep[r];
    out.values.row(static_cast<Eigen::Index>(r)) = ds.values.row(src);
    out.split.push_back(ds.split[static_cast<std::size_t>(src)]);
    if (!ds.color.empty()) out.color.push_back(ds.color[static_cast<std::size_t>(src)]);
    if (!ds.labels.empty()) out.labels.push_back(ds.labels[static_cast<std::size_t>(src)]);
  }
  return out;
}

std::string fingerprint(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t shape[2] = {ds.size(), ds.dim()};
  h = fnv1a(h, shape, sizeof(shape));
  const unsigned char applied = ds.standardization.applied ? 1 : 0;
  h = fnv1a(h, &applied, 1);
  if (ds.standardization.applied) {
    h = fnv1a(h, ds.standardization.mean.data(), sizeof(double) * static_cast<std::size_t>(ds.standardization.mean.size()));
    h = fnv1a(h, ds.standardization.scale.data(), sizeof(double) * static_cast<std::size_t>(ds.standardization.scale.size()));
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Dataset gen_swiss_roll(std::size_t n, double noise, Seed seed) {
  if (n == 0) throw DataError("gen_swiss_roll: n must be >= 1");
  if (!(noise >= 0.0)) throw DataError("gen_swiss_roll: noise must be >= 0");
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 3);
  std::vector<double> color(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double t = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
    const double h = 21.0 * rng.uniform();
    x(i, 0) = t * std::cos(t) + noise * rng.normal();
    x(i, 1) = h + noise * rng.normal();
    x(i, 2) = t * std::sin(t) + noise * rng.normal();
    color[static_cast<std::size_t>(i)] = t;
  }
  return generated("swiss_roll", std::move(x), std::move(color));
}

Dataset gen_s_curve(std::size_t n, double noise, Seed seed) {
  if (n == 0) throw DataError("gen_s_curve: n must be >= 1");
  if (!(noise >= 0.0)) throw DataError("gen_s_curve: noise must be >= 0");
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 3);
  std::vector<double> color(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double t = 3.0 * kPi * (rng.uniform() - 0.5);
    const double h = 2.0 * rng.uniform();
    const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    x(i, 0) = std::sin(t) + noise * rng.normal();
    x(i, 1) = h + noise * rng.normal();
    x(i, 2) = sign * (std::cos(t) - 1.0) + noise * rng.normal();
    color[static_cast<std::size_t>(i)] = t;
  }
  return generated("s_curve", std::move(x), std::move(color));
}

Dataset gen_blobs(std::size_t n, const std::vector<Vector>& centers, double stddev, Seed seed) {
  if (n == 0) throw DataError("gen_blobs: n must be >= 1");
  if (centers.empty()) throw DataError("gen_blobs: need at least one center");
  if (!(stddev > 0.0)) throw DataError("gen_blobs: stddev must be > 0");
  const auto dim = centers.front().size();
  for (const auto& c : centers) {
    if (c.size() != dim) throw DimensionError("gen_blobs: centers have inconsistent dimensions");
  }
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), dim);
  std::vector<double> color(n);
  std::vector<int> labels(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const std::size_t k = rng.below(centers.size());
    for (Eigen::Index c = 0; c < dim; ++c) x(i, c) = centers[k](c) + stddev * rng.normal();
    labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
    color[static_cast<std::size_t>(i)] = static_cast<double>(k);
  }
  Dataset ds = generated("blobs", std::move(x), std::move(color));
  ds.labels = std::move(labels);
  return ds;
}

Dataset gen_gaussian(std::size_t n, std::size_t dim, Seed seed) {
  if (n == 0 || dim == 0) throw DataError("gen_gaussian: n and dim must be >= 1");
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = rng.normal();
  }
  return make_dataset("gaussian", std::move(x));
}

Dataset gen_manifold6(std::size_t n, double noise, Seed seed) {
  if (n == 0) throw DataError("gen_manifold6: n must be >= 1");
  if (!(noise >= 0.0)) throw DataError("gen_manifold6: noise must be >= 0");
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 6);
  std::vector<double> color(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double t = 2.0 * kPi * rng.uniform();
    const double s = 2.0 * rng.uniform() - 1.0;
    const double radius = 1.0 + 0.5 * s * std::cos(0.5 * t);
    const double clean[6] = {
        radius * std::cos(t),
        radius * std::sin(t),
        0.5 * s * std::sin(0.5 * t),
        std::sin(2.0 * t),
        s * s - 1.0 / 3.0,
        s * std::cos(3.0 * t),
    };
    for (Eigen::Index c = 0; c < 6; ++c) x(i, c) = clean[c] + noise * rng.normal();
    color[static_cast<std::size_t>(i)] = t;
  }
  return generated("manifold6", std::move(x), std::move(color));
}

}  // namespace rpf
