#include "rpf/bench.hpp"

#include "rpf/config.hpp"
#include "rpf/error.hpp"
#include "rpf/ortho.hpp"
#include "rpf/simd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace rpf {
namespace {

using nlohmann::json;

std::string hash_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void reject_unknown(const json& table, const std::string& name, std::initializer_list<std::string_view> allowed) {
  if (!table.is_object()) throw ConfigError("config: [" + name + "] must be a table");
  for (const auto& [key, value] : table.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + name + "." + key + "'");
    }
  }
}

template <typename T>
T get(const json& table, const char* key, const std::string& section, T fallback) {
  const auto it = table.find(key);
  if (it == table.end()) return fallback;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, Seed> || std::is_same_v<T, unsigned>) {
      if (!it->is_number_integer() || it->template get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError("");
    }
    return it->template get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config: '" + section + "." + key + "' has the wrong type");
  }
}

json em_json(const EmConfig& em) {
  return {{"max_iters", em.max_iters},
          {"rel_tol", em.rel_tol},
          {"restarts", em.restarts},
          {"covariance_type", std::string(covariance_type_name(em.covariance_type))},
          {"covariance_floor", em.covariance_floor}};
}

std::string settings_fingerprint(Seed seed, const Dataset& ds, const ExperimentConfig& config) {
  json j{{"split_seed", seed},
         {"fractions", config.fractions},
         {"standardization", fingerprint(ds)},
         {"d", config.latent_dim},
         {"K", config.components},
         {"em", em_json(config.em)}};
  return hash_hex(j.dump());
}

double sample_std(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const DimensionError& e) {
    throw DimensionError(context + e.what());
  } catch (const ModelError& e) {
    throw ModelError(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const Error& e) {
    throw Error(context + e.what());
  }
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "csv") {
    Dataset ds = load_csv(spec.path, spec.header);
    return ds;
  }
  if (spec.kind != "generator") throw ConfigError("config: dataset.kind must be 'csv' or 'generator'");
  if (spec.generator == "swiss_roll") return gen_swiss_roll(spec.n, spec.noise, spec.seed);
  if (spec.generator == "s_curve") return gen_s_curve(spec.n, spec.noise, spec.seed);
  if (spec.generator == "manifold6") return gen_manifold6(spec.n, spec.noise, spec.seed);
  if (spec.generator == "gaussian") return gen_gaussian(spec.n, spec.dim, spec.seed);
  if (spec.generator == "blobs") {
    std::vector<Vector> centers;
    for (const auto& c : spec.centers) centers.push_back(Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())));
    if (centers.empty()) {
      centers = {Vector::Constant(3, -5.0), Vector::Constant(3, 5.0)};
    }
    return gen_blobs(spec.n, centers, spec.stddev, spec.seed);
  }
  throw ConfigError("config: unknown generator '" + spec.generator + "'");
}

void ExperimentConfig::validate() const {
  if (latent_dim == 0) throw ConfigError("config: model.d must be >= 1");
  if (components == 0) throw ConfigError("config: model.K must be >= 1");
  if (modes.empty()) throw ConfigError("config: model.modes must not be empty");
  if (seeds.empty()) throw ConfigError("config: experiment.seeds must not be empty");
  if (std::set<Seed>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("config: experiment.seeds must be distinct");
  }
  if (std::set<ProjectionMode>(modes.begin(), modes.end()).size() != modes.size()) {
    throw ConfigError("config: model.modes must be distinct");
  }
  try {
    em.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json ExperimentConfig::to_json() const {
  json ds{{"kind", dataset.kind},         {"generator", dataset.generator}, {"path", dataset.path.string()},
          {"header", dataset.header},     {"n", dataset.n},                 {"noise", dataset.noise},
          {"stddev", dataset.stddev},     {"centers", dataset.centers},     {"dim", dataset.dim},
          {"seed", dataset.seed}};
  ds["max_train_rows"] = dataset.max_train_rows ? json(*dataset.max_train_rows) : json(nullptr);
  json mode_names = json::array();
  for (auto m : modes) mode_names.push_back(std::string(mode_name(m)));
  return {{"dataset", std::move(ds)},
          {"model", {{"d", latent_dim}, {"K", components}, {"modes", std::move(mode_names)}}},
          {"em", em_json(em)},
          {"experiment", {{"seeds", seeds}, {"fractions", fractions}, {"out", out_dir.string()}, {"threads", threads}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  reject_unknown(j, "root", {"dataset", "model", "em", "experiment"});
  ExperimentConfig c;
  const json empty = json::object();
  const json& ds = j.contains("dataset") ? j["dataset"] : empty;
  reject_unknown(ds, "dataset",
                 {"kind", "generator", "path", "header", "n", "noise", "stddev", "centers", "dim", "seed",
                  "max_train_rows"});
  c.dataset.kind = get<std::string>(ds, "kind", "dataset", c.dataset.kind);
  c.dataset.generator = get<std::string>(ds, "generator", "dataset", c.dataset.generator);
  c.dataset.path = get<std::string>(ds, "path", "dataset", "");
  c.dataset.header = get<bool>(ds, "header", "dataset", false);
  c.dataset.n = get<std::size_t>(ds, "n", "dataset", c.dataset.n);
  c.dataset.noise = get<double>(ds, "noise", "dataset", c.dataset.noise);
  c.dataset.stddev = get<double>(ds, "stddev", "dataset", c.dataset.stddev);
  c.dataset.centers = get<std::vector<std::vector<double>>>(ds, "centers", "dataset", {});
  c.dataset.dim = get<std::size_t>(ds, "dim", "dataset", c.dataset.dim);
  c.dataset.seed = get<Seed>(ds, "seed", "dataset", 0);
  if (ds.contains("max_train_rows") && !ds["max_train_rows"].is_null()) {
    c.dataset.max_train_rows = get<std::size_t>(ds, "max_train_rows", "dataset", 0);
  }

  const json& model = j.contains("model") ? j["model"] : empty;
  reject_unknown(model, "model", {"d", "K", "modes"});
  c.latent_dim = get<std::size_t>(model, "d", "model", c.latent_dim);
  c.components = get<std::size_t>(model, "K", "model", c.components);
  if (model.contains("modes")) {
    c.modes.clear();
    for (const auto& name : get<std::vector<std::string>>(model, "modes", "model", {})) {
      try {
        c.modes.push_back(parse_mode(name));
      } catch (const Error& e) {
        throw ConfigError(std::string("config: model.modes: ") + e.what());
      }
    }
  }

  const json& em = j.contains("em") ? j["em"] : empty;
  reject_unknown(em, "em", {"max_iters", "rel_tol", "restarts", "covariance_type", "covariance_floor"});
  c.em.max_iters = get<std::size_t>(em, "max_iters", "em", c.em.max_iters);
  c.em.rel_tol = get<double>(em, "rel_tol", "em", c.em.rel_tol);
  c.em.restarts = get<std::size_t>(em, "restarts", "em", c.em.restarts);
  c.em.covariance_floor = get<double>(em, "covariance_floor", "em", c.em.covariance_floor);
  if (em.contains("covariance_type")) {
    try {
      c.em.covariance_type = parse_covariance_type(get<std::string>(em, "covariance_type", "em", "full"));
    } catch (const Error& e) {
      throw ConfigError(std::string("config: em.covariance_type: ") + e.what());
    }
  }

  const json& ex = j.contains("experiment") ? j["experiment"] : empty;
  reject_unknown(ex, "experiment", {"seeds", "fractions", "out", "threads"});
  if (ex.contains("seeds")) c.seeds = get<std::vector<Seed>>(ex, "seeds", "experiment", {});
  if (ex.contains("fractions")) {
    const auto f = get<std::vector<double>>(ex, "fractions", "experiment", {});
    if (f.size() != 3) throw ConfigError("config: experiment.fractions must have 3 entries");
    c.fractions = {f[0], f[1], f[2]};
  }
  c.out_dir = get<std::string>(ex, "out", "experiment", c.out_dir.string());
  c.threads = get<unsigned>(ex, "threads", "experiment", 0);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  ExperimentConfig c = ExperimentConfig::from_json(load_toml(path));
  if (c.dataset.kind == "csv" && c.dataset.path.is_relative()) {
    c.dataset.path = path.parent_path() / c.dataset.path;
  }
  return c;
}

RunResult run_single(const ExperimentConfig& config, const Dataset& raw, ProjectionMode mode, Seed seed,
                     std::optional<FlowModel>* model_out) {
  const auto start = std::chrono::steady_clock::now();
  Dataset ds = split_dataset(raw, config.fractions, seed);
  if (config.dataset.max_train_rows) ds = cap_split(ds, SplitLabel::Train, *config.dataset.max_train_rows);
  ds = standardize(ds);
  const Matrix train = ds.rows(SplitLabel::Train);
  const Matrix test = ds.rows(SplitLabel::Test);

  std::optional<ProjectionLayer> layer;
  if (mode == ProjectionMode::Pca) {
    layer.emplace(fit_pca_layer(train, config.latent_dim));
  } else {
    layer.emplace(make_rpf_layer(
        sample_haar_semi_orthogonal(ds.dim(), config.latent_dim, seed + kProjectionSeedOffset), mode));
  }
  EmConfig em = config.em;
  em.seed = seed + kEmSeedOffset;
  const Matrix codes = encode_batch(*layer, train);
  GmmFit fit = gmm_fit(codes, config.components, em);
  const double train_ll = fit.train_log_likelihood();
  FlowModel model(std::move(*layer), std::move(fit.params), FlowMetadata{seed, fingerprint(ds)});

  const auto lls = flow_log_likelihood_batch(model, test, 1);
  double sum = 0.0;
  for (double v : lls) sum += v;

  RunResult r;
  r.mode = mode;
  r.seed = seed;
  r.test_ll = sum / static_cast<double>(lls.size());
  r.train_ll = train_ll;
  r.train_rows = static_cast<std::size_t>(train.rows());
  r.test_rows = static_cast<std::size_t>(test.rows());
  r.settings_fingerprint = settings_fingerprint(seed, ds, config);
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (model_out != nullptr) model_out->emplace(std::move(model));
  return r;
}

BenchResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, load_dataset(config.dataset));
}

BenchResult run_experiment(const ExperimentConfig& config, const Dataset& raw) {
  config.validate();
  std::vector<std::pair<ProjectionMode, Seed>> jobs;
  for (auto m : config.modes) {
    for (auto s : config.seeds) jobs.emplace_back(m, s);
  }
  std::sort(jobs.begin(), jobs.end());

  std::vector<std::optional<RunResult>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto [mode, seed] = jobs[i];
      try {
        try {
          results[i] = run_single(config, raw, mode, seed);
        } catch (const Error&) {
          rethrow_with_context("[mode=" + std::string(mode_name(mode)) + ", seed=" + std::to_string(seed) + "] ");
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BenchResult out;
  for (auto& r : results) out.runs.push_back(std::move(*r));
  for (auto m : config.modes) {
    std::vector<double> values;
    for (const auto& r : out.runs) {
      if (r.mode == m) values.push_back(r.test_ll);
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    out.aggregates.push_back({m, values.size(), mean, sample_std(values, mean),
                              *std::min_element(values.begin(), values.end()),
                              *std::max_element(values.begin(), values.end())});
  }
  std::sort(out.aggregates.begin(), out.aggregates.end(),
            [](const ModeAggregate& a, const ModeAggregate& b) { return a.mode < b.mode; });
  json echo = config.to_json();
  echo["experiment"].erase("out");
  echo["experiment"].erase("threads");
  out.config_fingerprint = hash_hex(echo.dump());
  return out;
}

json bench_result_json(const BenchResult& result, const ExperimentConfig& config) {
  json runs = json::array();
  for (const auto& r : result.runs) {
    runs.push_back({{"mode", std::string(mode_name(r.mode))},
                    {"seed", r.seed},
                    {"test_ll", r.test_ll},
                    {"train_latent_ll", r.train_ll},
                    {"runtime_s", r.runtime_s},
                    {"train_rows", r.train_rows},
                    {"test_rows", r.test_rows},
                    {"settings_fingerprint", r.settings_fingerprint}});
  }
  json aggregates = json::array();
  for (const auto& a : result.aggregates) {
    aggregates.push_back({{"mode", std::string(mode_name(a.mode))},
                          {"runs", a.runs},
                          {"mean", a.mean},
                          {"std", a.std},
                          {"min", a.min},
                          {"max", a.max}});
  }
  return {{"format_version", 1},
          {"config", config.to_json()},
          {"config_fingerprint", result.config_fingerprint},
          {"units", "mean test log-likelihood, nats per example"},
          {"std_convention", "sample standard deviation over seeds (divisor n-1)"},
          {"kernel_backend", std::string(simd::backend_name(simd::active().backend))},
          {"runs", std::move(runs)},
          {"aggregates", std::move(aggregates)}};
}

void write_bench_result(const BenchResult& result, const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  write_atomically(config.out_dir / "result.json", bench_result_json(result, config).dump(2) + "\n");
  std::ostringstream csv;
  csv << std::setprecision(17) << "mode,seed,test_ll,runtime_s\n";
  for (const auto& r : result.runs) {
    csv << mode_name(r.mode) << ',' << r.seed << ',' << r.test_ll << ',' << r.runtime_s << '\n';
  }
  write_atomically(config.out_dir / "results.csv", csv.str());
}

ProjectionOutputs emit_projections(const ExperimentConfig& config, const Dataset& dataset,
                                   const std::vector<ProjectionMode>& modes, const std::filesystem::path& out_dir) {
  if (dataset.dim() != 3) {
    throw DimensionError("project: dataset must be 3-D, got D=" + std::to_string(dataset.dim()));
  }
  if (dataset.color.size() != dataset.size()) {
    throw DimensionError("project: dataset has no coloring coordinate");
  }
  if (config.seeds.empty()) throw ConfigError("project: need at least one seed");
  std::filesystem::create_directories(out_dir);

  Dataset all = dataset;
  all.split.assign(all.size(), SplitLabel::Train);
  const Dataset standardized = standardize(all);

  auto write_table = [](const std::filesystem::path& path, const std::string& header, const Matrix& values,
                        const std::vector<double>& color) {
    std::ostringstream os;
    os << std::setprecision(17) << header << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      for (Eigen::Index c = 0; c < values.cols(); ++c) os << values(r, c) << ',';
      os << color[static_cast<std::size_t>(r)] << '\n';
    }
    write_atomically(path, os.str());
  };

  ProjectionOutputs out;
  out.raw_csv = out_dir / (dataset.name + "_raw.csv");
  write_table(out.raw_csv, "x1,x2,x3,color", dataset.values, dataset.color);
  for (auto mode : modes) {
    std::optional<ProjectionLayer> layer;
    if (mode == ProjectionMode::Pca) {
      layer.emplace(fit_pca_layer(standardized.values, 2));
    } else {
      layer.emplace(make_rpf_layer(sample_haar_semi_orthogonal(3, 2, config.seeds.front() + kProjectionSeedOffset), mode));
    }
    Matrix embedding = encode_batch(*layer, standardized.values);
    const auto path = out_dir / (dataset.name + "_" + std::string(mode_name(mode)) + ".csv");
    write_table(path, "x2d_1,x2d_2,color", embedding, dataset.color);
    out.mode_csvs.emplace_back(mode, path);
    out.embeddings.emplace_back(mode, std::move(embedding));
  }
  return out;
}

}  // namespace rpf
