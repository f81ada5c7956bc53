#include "cli.hpp"

#include "rpf/bench.hpp"
#include "rpf/config.hpp"
#include "rpf/data.hpp"
#include "rpf/error.hpp"
#include "rpf/flow.hpp"
#include "rpf/ortho.hpp"
#include "rpf/projection.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rpf::cli {
namespace {

using nlohmann::json;

struct GlobalOptions {
  Seed seed = 0;
  bool seed_given = false;
  std::string out;
  bool quiet = false;
  bool json = false;
};

struct DataSource {
  std::string data;
  bool header = false;
  std::string generator;
  std::size_t n = 1000;
  double noise = 0.0;
  std::size_t dim = 8;
  Seed data_seed = 0;

  void add_to(CLI::App* cmd, const std::string& default_generator) {
    generator = default_generator;
    cmd->add_option("--data", data, "Input CSV file");
    cmd->add_flag("--header", header, "CSV has a header row");
    cmd->add_option("--generator", generator,
                    "Synthetic source when --data is absent: gaussian, blobs, swiss_roll, s_curve, manifold6")
        ->capture_default_str();
    cmd->add_option("--n", n, "Generated rows")->capture_default_str();
    cmd->add_option("--noise", noise, "Generator noise stddev")->capture_default_str();
    cmd->add_option("--dim", dim, "Dimension for the gaussian generator")->capture_default_str();
    cmd->add_option("--data-seed", data_seed, "Generator seed")->capture_default_str();
  }

  Dataset load() const {
    if (!data.empty()) return load_csv(data, header);
    DatasetSpec spec;
    spec.kind = "generator";
    spec.generator = generator;
    spec.n = n;
    spec.noise = noise;
    spec.dim = dim;
    spec.seed = data_seed;
    return load_dataset(spec);
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

ProjectionLayer build_layer(ProjectionMode mode, const Matrix& train, std::size_t latent_dim, Seed seed) {
  if (mode == ProjectionMode::Pca) return fit_pca_layer(train, latent_dim);
  return make_rpf_layer(sample_haar_semi_orthogonal(static_cast<std::size_t>(train.cols()), latent_dim, seed), mode);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << content;
  if (!f) throw DataError("failed writing '" + path + "'");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random projection flows: injective density models with Haar projections and GMM latents", "rpf"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Seed for projections, EM and sampling");
  app.add_option("--out", global.out, "Output path (file or directory, per subcommand)");
  app.add_flag("--quiet", global.quiet, "Suppress progress output");
  app.add_flag("--json", global.json, "Print machine-readable JSON results");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a flow model to data and write it as JSON");
  DataSource fit_src;
  fit_src.add_to(fit, "gaussian");
  std::string fit_mode = "RPF_JL";
  std::size_t fit_d = 0;
  std::size_t fit_k = 4;
  EmConfig fit_em;
  std::string fit_cov = "full";
  fit->add_option("--mode", fit_mode, "RPF_JL, RPF_ISO or PCA")->capture_default_str();
  fit->add_option("--d", fit_d, "Latent dimension")->required();
  fit->add_option("--K", fit_k, "Mixture components")->capture_default_str();
  fit->add_option("--covariance", fit_cov, "full or diagonal")->capture_default_str();
  fit->add_option("--restarts", fit_em.restarts, "EM restarts")->capture_default_str();
  fit->add_option("--max-iters", fit_em.max_iters, "EM iterations per restart")->capture_default_str();
  fit->add_option("--rel-tol", fit_em.rel_tol, "EM relative tolerance")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Mean log-likelihood of data under a saved model");
  std::string eval_model;
  std::string eval_data;
  bool eval_header = false;
  std::string eval_dump;
  eval->add_option("--model", eval_model, "Model JSON")->required();
  eval->add_option("--data", eval_data, "CSV of points")->required();
  eval->add_flag("--header", eval_header, "CSV has a header row");
  eval->add_option("--dump", eval_dump, "Write row_index,loglik,residual_norm CSV here");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw samples from a saved model");
  std::string sample_model;
  std::size_t sample_n = 1000;
  sample->add_option("--model", sample_model, "Model JSON")->required();
  sample->add_option("--n", sample_n, "Number of samples")->capture_default_str();

  // project
  auto* project = app.add_subcommand("project", "Write 2-D projections of a 3-D synthetic dataset");
  std::string project_config;
  std::string project_dataset = "swiss_roll";
  std::size_t project_n = 2000;
  double project_noise = 0.0;
  Seed project_data_seed = 0;
  std::vector<std::string> project_modes{"PCA", "RPF_JL", "RPF_ISO"};
  project->add_option("--config", project_config, "TOML config supplying dataset and seeds");
  project->add_option("--dataset", project_dataset, "swiss_roll, s_curve or blobs")->capture_default_str();
  project->add_option("--n", project_n, "Rows")->capture_default_str();
  project->add_option("--noise", project_noise, "Noise stddev")->capture_default_str();
  project->add_option("--data-seed", project_data_seed, "Generator seed")->capture_default_str();
  project->add_option("--modes", project_modes, "Projection modes")->delimiter(',')->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "Run a multi-seed RPF vs PCA benchmark from a TOML config");
  std::string bench_config;
  std::optional<std::size_t> bench_d;
  std::optional<std::size_t> bench_k;
  std::optional<unsigned> bench_threads;
  bench->add_option("--config", bench_config, "Experiment TOML")->required();
  bench->add_option("--d", bench_d, "Override model.d");
  bench->add_option("--K", bench_k, "Override model.K");
  bench->add_option("--threads", bench_threads, "Override experiment.threads");

  // distortion
  auto* distortion = app.add_subcommand("distortion", "Empirical pairwise distance distortion of a projection");
  DataSource dist_src;
  dist_src.n = 500;
  dist_src.dim = 64;
  dist_src.add_to(distortion, "gaussian");
  std::size_t dist_d = 0;
  std::string dist_mode = "RPF_JL";
  std::size_t dist_pairs = 1000;
  distortion->add_option("--d", dist_d, "Latent dimension")->required();
  distortion->add_option("--mode", dist_mode, "RPF_JL, RPF_ISO or PCA")->capture_default_str();
  distortion->add_option("--pairs", dist_pairs, "Sampled pairs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  global.seed_given = app.count("--seed") > 0;

  try {
    if (fit->parsed()) {
      const Dataset ds = fit_src.load();
      fit_em.covariance_type = parse_covariance_type(fit_cov);
      fit_em.seed = global.seed + kEmSeedOffset;
      const ProjectionMode mode = parse_mode(fit_mode);
      ProjectionLayer layer = build_layer(mode, ds.values, fit_d, global.seed + kProjectionSeedOffset);
      const Matrix codes = encode_batch(layer, ds.values);
      GmmFit gfit = gmm_fit(codes, fit_k, fit_em);
      const double latent_ll = gfit.train_log_likelihood();
      FlowModel model(std::move(layer), std::move(gfit.params), FlowMetadata{global.seed, fingerprint(ds)});
      const auto lls = flow_log_likelihood_batch(model, ds.values, 0);
      double sum = 0.0;
      for (double v : lls) sum += v;
      const double mean = sum / static_cast<double>(lls.size());
      const std::string path = global.out.empty() ? "model.json" : global.out;
      save_model(model, path);
      if (global.json) {
        out << json{{"model", path}, {"train_loglik", mean}, {"train_latent_loglik", latent_ll}, {"rows", lls.size()}}.dump(2)
            << '\n';
      } else if (!global.quiet) {
        out << "wrote " << path << "\ntrain mean loglik " << fmt(mean) << '\n';
      }
      return kExitOk;
    }

    if (eval->parsed()) {
      const FlowModel model = load_model(eval_model);
      const Dataset ds = load_csv(eval_data, eval_header);
      const auto lls = flow_log_likelihood_batch(model, ds.values, 0);
      double sum = 0.0;
      for (double v : lls) sum += v;
      const double mean = sum / static_cast<double>(lls.size());
      if (!eval_dump.empty()) {
        std::ostringstream csv;
        csv << std::setprecision(17) << "row_index,loglik,residual_norm\n";
        for (std::size_t i = 0; i < lls.size(); ++i) {
          csv << i << ',' << lls[i] << ',' << model.residual(row_span(ds.values, static_cast<Eigen::Index>(i))) << '\n';
        }
        write_text(eval_dump, csv.str());
      }
      if (global.json) {
        out << json{{"mean_loglik", mean}, {"rows", lls.size()}}.dump(2) << '\n';
      } else {
        out << "mean_loglik " << fmt(mean) << '\n';
      }
      return kExitOk;
    }

    if (sample->parsed()) {
      const FlowModel model = load_model(sample_model);
      Dataset ds = make_dataset("samples", flow_sample(model, sample_n, global.seed));
      if (global.out.empty()) {
        out << std::setprecision(17);
        for (Eigen::Index r = 0; r < ds.values.rows(); ++r) {
          for (Eigen::Index c = 0; c < ds.values.cols(); ++c) out << (c ? "," : "") << ds.values(r, c);
          out << '\n';
        }
      } else {
        save_csv(ds, global.out);
        if (!global.quiet) out << "wrote " << ds.size() << " samples to " << global.out << '\n';
      }
      return kExitOk;
    }

    if (project->parsed()) {
      ExperimentConfig config;
      Dataset ds;
      if (!project_config.empty()) {
        config = load_experiment_config(project_config);
        ds = load_dataset(config.dataset);
      } else {
        DatasetSpec spec;
        spec.generator = project_dataset;
        spec.n = project_n;
        spec.noise = project_noise;
        spec.seed = project_data_seed;
        if (project_dataset == "blobs") {
          spec.centers = {{-6.0, 0.0, 0.0}, {6.0, 0.0, 3.0}, {0.0, 6.0, -3.0}};
          spec.stddev = 1.0;
        }
        ds = load_dataset(spec);
      }
      if (global.seed_given) config.seeds = {global.seed};
      std::vector<ProjectionMode> modes;
      for (const auto& m : project_modes) modes.push_back(parse_mode(m));
      const std::filesystem::path dir = global.out.empty() ? "projections" : global.out;
      const auto outputs = emit_projections(config, ds, modes, dir);
      save_metadata(ds, dir / (ds.name + "_meta.json"));
      if (global.json) {
        json files = json::array({outputs.raw_csv.string()});
        for (const auto& [mode, path] : outputs.mode_csvs) files.push_back(path.string());
        out << json{{"files", files}}.dump(2) << '\n';
      } else if (!global.quiet) {
        out << "wrote " << outputs.raw_csv.string() << '\n';
        for (const auto& [mode, path] : outputs.mode_csvs) out << "wrote " << path.string() << '\n';
      }
      return kExitOk;
    }

    if (bench->parsed()) {
      ExperimentConfig config = load_experiment_config(bench_config);
      if (bench_d) config.latent_dim = *bench_d;
      if (bench_k) config.components = *bench_k;
      if (bench_threads) config.threads = *bench_threads;
      if (global.seed_given) config.seeds = {global.seed};
      if (!global.out.empty()) config.out_dir = global.out;
      config.validate();
      const BenchResult result = run_experiment(config);
      write_bench_result(result, config);
      if (global.json) {
        out << bench_result_json(result, config).dump(2) << '\n';
      } else if (!global.quiet) {
        out << "mode       mean_test_ll  std       runs\n";
        for (const auto& a : result.aggregates) {
          out << std::left << std::setw(10) << mode_name(a.mode) << ' ' << std::right << std::fixed
              << std::setprecision(4) << std::setw(12) << a.mean << "  " << std::setw(8) << a.std << "  " << a.runs
              << '\n';
        }
        out.unsetf(std::ios::floatfield);
        out << "wrote " << (config.out_dir / "result.json").string() << " and "
            << (config.out_dir / "results.csv").string() << '\n';
      }
      return kExitOk;
    }

    if (distortion->parsed()) {
      const Dataset ds = dist_src.load();
      const ProjectionMode mode = parse_mode(dist_mode);
      const ProjectionLayer layer = build_layer(mode, ds.values, dist_d, global.seed + kProjectionSeedOffset);
      const DistortionReport report = jl_distortion(layer, ds.values, dist_pairs, global.seed);
      if (global.json) {
        out << json{{"mode", std::string(mode_name(mode))},
                    {"mean_ratio", report.mean_ratio},
                    {"max_epsilon", report.max_epsilon},
                    {"pair_count", report.pair_count}}
                   .dump(2)
            << '\n';
      } else {
        out << "mode " << mode_name(mode) << "\nmean_ratio " << fmt(report.mean_ratio) << "\nmax_epsilon "
            << fmt(report.max_epsilon) << "\npair_count " << report.pair_count << '\n';
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace rpf::cli
