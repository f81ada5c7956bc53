#include "doctest.h"

#include "cli.hpp"

#include "rpf/data.hpp"
#include "rpf/flow.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace rpf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "rpf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "rpf_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const fs::path kConfigs = fs::path(RPF_SOURCE_DIR) / "configs";

}  // namespace

TEST_CASE("bench on the bundled blobs config writes both result files") {
  const fs::path dir = temp_dir("bench");
  const auto r = run({"bench", "--config", (kConfigs / "blobs.toml").string(), "--out", dir.string(), "--threads", "2"});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "result.json"));
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(r.out.find("RPF_JL") != std::string::npos);
}

TEST_CASE("eval reports the batch mean of the saved model") {
  const fs::path dir = temp_dir("eval");
  const Dataset train = gen_manifold6(800, 0.05, 1);
  const Dataset test = gen_manifold6(200, 0.05, 2);
  save_csv(train, dir / "train.csv");
  save_csv(test, dir / "test.csv");
  const auto fit = run({"fit", "--data", (dir / "train.csv").string(), "--d", "3", "--K", "4", "--mode", "RPF_JL",
                        "--seed", "5", "--out", (dir / "m.json").string(), "--quiet"});
  REQUIRE(fit.code == 0);

  const auto eval = run({"eval", "--model", (dir / "m.json").string(), "--data", (dir / "test.csv").string(), "--json",
                         "--dump", (dir / "dump.csv").string()});
  REQUIRE(eval.code == 0);
  const double reported = nlohmann::json::parse(eval.out)["mean_loglik"].get<double>();

  const FlowModel model = load_model(dir / "m.json");
  const Dataset loaded = load_csv(dir / "test.csv", false);
  const auto lls = flow_log_likelihood_batch(model, loaded.values);
  double sum = 0.0;
  for (double v : lls) sum += v;
  CHECK(std::abs(reported - sum / static_cast<double>(lls.size())) < 1e-12);
  CHECK(model.metadata().seed == 5);

  std::ifstream dump(dir / "dump.csv");
  std::string header;
  std::getline(dump, header);
  CHECK(header == "row_index,loglik,residual_norm");
  std::size_t rows = 0;
  for (std::string line; std::getline(dump, line);) ++rows;
  CHECK(rows == 200);
}

TEST_CASE("fit with d larger than D is a data error") {
  const fs::path dir = temp_dir("bad_d");
  save_csv(gen_gaussian(50, 3, 1), dir / "x.csv");
  const auto r = run({"fit", "--data", (dir / "x.csv").string(), "--d", "4", "--out", (dir / "m.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("invalid dimension") != std::string::npos);
}

TEST_CASE("unknown flags are usage errors with help text") {
  const auto r = run({"bench", "--frobnicate"});
  CHECK(r.code == 1);
  CHECK((r.out + r.err).find("--config") != std::string::npos);
  const auto top = run({"--frobnicate"});
  CHECK(top.code == 1);
  CHECK((top.out + top.err).find("bench") != std::string::npos);
  CHECK(run({}).code == 1);
}

TEST_CASE("bad config files are usage errors") {
  const fs::path dir = temp_dir("bad_config");
  std::ofstream(dir / "x.toml") << "[model]\nd = 0\n";
  CHECK(run({"bench", "--config", (dir / "x.toml").string()}).code == 1);
  CHECK(run({"bench", "--config", (dir / "missing.toml").string()}).code == 1);
}

TEST_CASE("sample writes points on the model subspace") {
  const fs::path dir = temp_dir("sample");
  REQUIRE(run({"fit", "--generator", "swiss_roll", "--n", "500", "--d", "2", "--K", "3", "--out",
               (dir / "m.json").string(), "--quiet"})
              .code == 0);
  const auto r = run({"sample", "--model", (dir / "m.json").string(), "--n", "25", "--out", (dir / "s.csv").string()});
  REQUIRE(r.code == 0);
  const Dataset s = load_csv(dir / "s.csv", false);
  CHECK(s.size() == 25);
  const FlowModel model = load_model(dir / "m.json");
  for (Eigen::Index i = 0; i < s.values.rows(); ++i) CHECK(model.residual(row_span(s.values, i)) < 1e-8);
}

TEST_CASE("project writes raw and per-mode CSVs") {
  const fs::path dir = temp_dir("project");
  const auto r = run({"project", "--dataset", "s_curve", "--n", "300", "--out", dir.string(), "--json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["files"].size() == 4);
  for (const auto& f : doc["files"]) CHECK(fs::exists(f.get<std::string>()));
  CHECK(fs::exists(dir / "s_curve_meta.json"));
}

TEST_CASE("distortion reports JSON") {
  const auto r = run({"distortion", "--generator", "gaussian", "--dim", "32", "--n", "300", "--d", "16", "--json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["mean_ratio"].get<double>() > 0.9);
  CHECK(doc["mean_ratio"].get<double>() < 1.1);
}

TEST_CASE("help exits cleanly") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("distortion") != std::string::npos);
}
