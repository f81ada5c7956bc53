#pragma once

#include "rpf/data.hpp"
#include "rpf/flow.hpp"
#include "rpf/gmm.hpp"
#include "rpf/projection.hpp"

#include "json.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rpf {

/// Where the experiment's rows come from: a CSV file or a named generator.
struct DatasetSpec {
  std::string kind = "generator";  // "generator" or "csv"
  std::string generator = "blobs";  // blobs, swiss_roll, s_curve, manifold6, gaussian
  std::filesystem::path path;
  bool header = false;
  std::size_t n = 2000;
  double noise = 0.0;
  double stddev = 1.0;
  std::vector<std::vector<double>> centers;
  std::size_t dim = 2;
  Seed seed = 0;  // generator seed, shared by every replicate
  std::optional<std::size_t> max_train_rows;
};

Dataset load_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  DatasetSpec dataset;
  std::size_t latent_dim = 2;
  std::size_t components = 4;
  std::vector<ProjectionMode> modes{ProjectionMode::RpfJl, ProjectionMode::RpfIso, ProjectionMode::Pca};
  std::vector<Seed> seeds{0};
  EmConfig em;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::filesystem::path out_dir = "results";
  unsigned threads = 0;  // 0 = hardware concurrency

  /// Throws ConfigError on empty/duplicate seeds, d == 0, K == 0, no modes.
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Reads a TOML experiment config (tables [dataset], [model], [em], [experiment]).
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Replicate seed s drives the split (s), the Haar draw (s + 1000) and EM
// (s + 2000, restart r on stream r).
inline constexpr Seed kProjectionSeedOffset = 1000;
inline constexpr Seed kEmSeedOffset = 2000;

struct RunResult {
  ProjectionMode mode;
  Seed seed;
  double test_ll;   // mean nats per test example
  double train_ll;  // final EM mean log-likelihood of the codes (latent, no volume term)
  double runtime_s;
  std::size_t train_rows;
  std::size_t test_rows;
  std::string settings_fingerprint;  // split seed, standardization, d, K, EM config
};

struct ModeAggregate {
  ProjectionMode mode;
  std::size_t runs;
  double mean;
  double std;  // sample standard deviation, divisor n - 1 (0 for a single run)
  double min;
  double max;
};

struct BenchResult {
  std::vector<RunResult> runs;  // sorted by (mode, seed)
  std::vector<ModeAggregate> aggregates;
  std::string config_fingerprint;
};

/// One (mode, seed) replicate on an already loaded raw dataset. Also returns
/// the fitted model when `model_out` is non-null.
RunResult run_single(const ExperimentConfig& config, const Dataset& raw, ProjectionMode mode, Seed seed,
                     std::optional<FlowModel>* model_out = nullptr);

/// All (mode, seed) replicates; independent runs execute in parallel and are
/// reported in (mode, seed) order. Errors carry (mode, seed) context.
BenchResult run_experiment(const ExperimentConfig& config);
BenchResult run_experiment(const ExperimentConfig& config, const Dataset& raw);

nlohmann::json bench_result_json(const BenchResult& result, const ExperimentConfig& config);

/// Writes result.json and results.csv (mode,seed,test_ll,runtime_s) into config.out_dir.
void write_bench_result(const BenchResult& result, const ExperimentConfig& config);

struct ProjectionOutputs {
  std::filesystem::path raw_csv;
  std::vector<std::pair<ProjectionMode, std::filesystem::path>> mode_csvs;
  std::vector<std::pair<ProjectionMode, Matrix>> embeddings;  // n x 2, dataset row order
};

/// Standardizes a 3-D dataset (all rows), encodes it to 2-D with each mode and
/// writes <name>_raw.csv (x1,x2,x3,color) and <name>_<MODE>.csv
/// (x2d_1,x2d_2,color). RPF modes use seeds[0] + 1000 for the Haar draw.
/// Throws DimensionError unless the dataset is 3-D with a color coordinate.
ProjectionOutputs emit_projections(const ExperimentConfig& config, const Dataset& dataset,
                                   const std::vector<ProjectionMode>& modes,
                                   const std::filesystem::path& out_dir);

}  // namespace rpf
