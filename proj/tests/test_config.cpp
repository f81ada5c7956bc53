#include "doctest.h"

#include "rpf/bench.hpp"
#include "rpf/config.hpp"

#include <filesystem>
#include <fstream>

using namespace rpf;
using nlohmann::json;

TEST_CASE("scalars, tables and comments") {
  const json j = parse_toml(R"(
# top comment
title = "rpf"   # trailing comment
count = 42
neg = -7
ratio = 1.5e-3
big = 1_000
flag = true
off = false
lit = 'C:\path'
esc = "a\tb\"c"

[model]
d = 3
"quoted key" = 1

[em.inner]
x = 2.0
)");
  CHECK(j["title"] == "rpf");
  CHECK(j["count"] == 42);
  CHECK(j["count"].is_number_integer());
  CHECK(j["neg"] == -7);
  CHECK(j["ratio"].get<double>() == doctest::Approx(1.5e-3));
  CHECK(j["big"] == 1000);
  CHECK(j["flag"] == true);
  CHECK(j["off"] == false);
  CHECK(j["lit"] == "C:\\path");
  CHECK(j["esc"] == "a\tb\"c");
  CHECK(j["model"]["d"] == 3);
  CHECK(j["model"]["quoted key"] == 1);
  CHECK(j["em"]["inner"]["x"].get<double>() == 2.0);
}

TEST_CASE("arrays and inline tables") {
  const json j = parse_toml(R"(
seeds = [0, 1, 2]
nested = [
  [1.0, 2.0],  # first
  [3.0, 4.0],
]
empty = []
point = { x = 1, y = "two" }
a.b.c = 5
)");
  CHECK(j["seeds"] == json::array({0, 1, 2}));
  CHECK(j["nested"][1][0].get<double>() == 3.0);
  CHECK(j["empty"].empty());
  CHECK(j["point"]["y"] == "two");
  CHECK(j["a"]["b"]["c"] == 5);
}

TEST_CASE("parse errors carry the line number") {
  CHECK_THROWS_WITH_AS(parse_toml("a = 1\nb = \n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_toml("a = 1\na = 2\n"), doctest::Contains("duplicate"), ConfigError);
  CHECK_THROWS_AS(parse_toml("s = \"open\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[[tables]]\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("x = 1 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("x = 1979-05-27\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("x = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(load_toml("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("experiment config from TOML") {
  const json j = parse_toml(R"(
[dataset]
generator = "swiss_roll"
n = 500
noise = 0.1

[model]
d = 2
K = 5
modes = ["rpf_iso", "PCA"]

[em]
restarts = 2
covariance_type = "diagonal"

[experiment]
seeds = [3, 4]
fractions = [0.6, 0.2, 0.2]
threads = 2
)");
  const ExperimentConfig c = ExperimentConfig::from_json(j);
  CHECK(c.dataset.generator == "swiss_roll");
  CHECK(c.dataset.n == 500);
  CHECK(c.latent_dim == 2);
  CHECK(c.components == 5);
  CHECK(c.modes == std::vector<ProjectionMode>{ProjectionMode::RpfIso, ProjectionMode::Pca});
  CHECK(c.em.restarts == 2);
  CHECK(c.em.covariance_type == CovarianceType::Diagonal);
  CHECK(c.seeds == std::vector<Seed>{3, 4});
  CHECK(c.fractions[0] == 0.6);
  CHECK(c.threads == 2);

  const ExperimentConfig again = ExperimentConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
}

TEST_CASE("experiment config validation") {
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[model]\nd = 0\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[model]\nK = 0\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[experiment]\nseeds = []\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[experiment]\nseeds = [1, 1]\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[model]\nmodes = [\"ICA\"]\n")), ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(parse_toml("[model]\nlatent = 2\n")), doctest::Contains("model.latent"),
                       ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[model]\nd = \"two\"\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[em]\nrel_tol = 0.0\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(parse_toml("[experiment]\nfractions = [0.5, 0.5]\n")), ConfigError);
}

TEST_CASE("bundled configs load") {
  const std::filesystem::path dir = std::filesystem::path(RPF_SOURCE_DIR) / "configs";
  for (const char* name : {"blobs.toml", "swiss_roll.toml", "s_curve.toml", "manifold6.toml", "power.toml"}) {
    CAPTURE(name);
    const ExperimentConfig c = load_experiment_config(dir / name);
    CHECK(c.seeds.size() == 5);
  }
  const ExperimentConfig power = load_experiment_config(dir / "power.toml");
  CHECK(power.dataset.kind == "csv");
  CHECK(power.dataset.path.is_absolute());
  REQUIRE(power.dataset.max_train_rows.has_value());
  CHECK(*power.dataset.max_train_rows == 50000);
}
