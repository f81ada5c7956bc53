#include "doctest.h"
#include "oracles.hpp"

#include "rpf/error.hpp"
#include "rpf/gmm.hpp"
#include "rpf/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

using namespace rpf;

namespace {

Eigen::MatrixXd random_spd(std::size_t d, Rng& rng, double lo) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return a * a.transpose() / static_cast<double>(d) + lo * Eigen::MatrixXd::Identity(d, d);
}

GmmParams random_mixture(std::size_t k, std::size_t d, Seed seed) {
  Rng rng(seed);
  Vector w(k);
  for (auto& x : w) x = 0.2 + rng.uniform();
  w /= w.sum();
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t i = 0; i < k; ++i) {
    Vector m(d);
    for (auto& x : m) x = 2.0 * rng.normal();
    means.push_back(m);
    covs.push_back(random_spd(d, rng, 0.3));
  }
  return GmmParams(w, means, covs);
}

Matrix blob_pair(std::size_t n, Seed seed) {
  Rng rng(seed);
  Matrix z(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = i < n / 2 ? 10.0 : -10.0;
    z(i, 0) = c + rng.normal();
    z(i, 1) = rng.normal();
  }
  return z;
}

std::vector<double> weights_of(const GmmParams& p) { return {p.weights().data(), p.weights().data() + p.weights().size()}; }

void check_monotone(const GmmFit& fit) {
  for (const auto& trace : fit.restarts) {
    for (std::size_t i = 1; i < trace.mean_log_likelihood.size(); ++i)
      CHECK(trace.mean_log_likelihood[i] - trace.mean_log_likelihood[i - 1] >= -1e-9);
  }
}

}  // namespace

TEST_CASE("standard normal log-density at the mode") {
  GmmParams p(Vector::Ones(1), {Vector::Zero(2)}, {Eigen::MatrixXd::Identity(2, 2)});
  const Vector z = Vector::Zero(2);
  CHECK(gmm_logpdf(p, as_span(z)) == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
}

TEST_CASE("two identical components collapse exactly") {
  Rng rng(1);
  const Eigen::MatrixXd cov = random_spd(3, rng, 0.5);
  Vector mu(3);
  mu << 0.3, -1.0, 2.0;
  GmmParams single(Vector::Ones(1), {mu}, {cov});
  Vector w(2);
  w << 0.5, 0.5;
  GmmParams doubled(w, {mu, mu}, {cov, cov});
  for (int t = 0; t < 50; ++t) {
    Vector z(3);
    for (auto& x : z) x = 3.0 * rng.normal();
    CHECK(gmm_logpdf(doubled, as_span(z)) == gmm_logpdf(single, as_span(z)));
  }
}

TEST_CASE("log-density agrees with direct summation") {
  const GmmParams p = random_mixture(3, 2, 2);
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    Vector z(2);
    for (auto& x : z) x = 2.5 * rng.normal();
    const long double ref = test::naive_mixture_density(weights_of(p), p.means(), p.covariances(), z);
    CHECK(std::abs(gmm_logpdf(p, as_span(z)) - static_cast<double>(std::log(ref))) < 1e-10);
  }
}

TEST_CASE("single components match the explicit Gaussian formula") {
  Rng rng(4);
  for (std::size_t d : {1u, 3u, 8u, 20u}) {
    const Eigen::MatrixXd cov = random_spd(d, rng, 0.2);
    Vector mu(d);
    for (auto& x : mu) x = rng.normal();
    GmmParams p(Vector::Ones(1), {mu}, {cov});
    Vector z(d);
    for (auto& x : z) x = rng.normal();
    CHECK(std::abs(gmm_logpdf(p, as_span(z)) - test::gaussian_log_density(mu, cov, z)) < 1e-9);
  }
}

TEST_CASE("density integrates to one on a grid") {
  Vector w(3);
  w << 0.2, 0.5, 0.3;
  Eigen::MatrixXd c0(2, 2), c1(2, 2), c2(2, 2);
  c0 << 1.0, 0.3, 0.3, 0.8;
  c1 << 2.0, -0.5, -0.5, 1.5;
  c2 << 0.5, 0.0, 0.0, 3.0;
  Vector m0(2), m1(2), m2(2);
  m0 << -3, 1;
  m1 << 2, 2;
  m2 << 0, -4;
  GmmParams p(w, {m0, m1, m2}, {c0, c1, c2});
  const int steps = 1600;
  const double h = 40.0 / steps;
  double total = 0.0;
  Vector z(2);
  for (int i = 0; i < steps; ++i) {
    z(0) = -20.0 + (i + 0.5) * h;
    for (int j = 0; j < steps; ++j) {
      z(1) = -20.0 + (j + 0.5) * h;
      total += std::exp(gmm_logpdf(p, as_span(z)));
    }
  }
  CHECK(std::abs(total * h * h - 1.0) < 1e-3);
}

TEST_CASE("relabeling components leaves the density unchanged") {
  const GmmParams p = random_mixture(4, 3, 5);
  const std::vector<std::size_t> order{2, 0, 3, 1};
  Vector w(4);
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t i = 0; i < 4; ++i) {
    w(static_cast<Eigen::Index>(i)) = p.weights()(static_cast<Eigen::Index>(order[i]));
    means.push_back(p.means()[order[i]]);
    covs.push_back(p.covariances()[order[i]]);
  }
  GmmParams q(w, means, covs);
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    Vector z(3);
    for (auto& x : z) x = 3.0 * rng.normal();
    CHECK(gmm_logpdf(p, as_span(z)) == gmm_logpdf(q, as_span(z)));
  }
}

TEST_CASE("far tails stay finite") {
  const GmmParams p = random_mixture(3, 2, 7);
  Vector z(2);
  z << 1e4, -1e4;
  CHECK(std::isfinite(gmm_logpdf(p, as_span(z))));
}

TEST_CASE("parameter validation names the offending field") {
  Vector w(2);
  w << 0.5, 0.4;
  try {
    GmmParams(w, {Vector::Zero(2), Vector::Zero(2)}, {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("weights") != std::string::npos);
  }
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(GmmParams(Vector::Ones(1), {Vector::Zero(2)}, {indefinite}), ModelError);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.1, 0, 1;
  CHECK_THROWS_AS(GmmParams(Vector::Ones(1), {Vector::Zero(2)}, {asym}), ModelError);
  CHECK_THROWS_AS(GmmParams(Vector::Ones(1), {Vector::Zero(3)}, {Eigen::MatrixXd::Identity(2, 2)}), ModelError);
  Eigen::MatrixXd full(2, 2);
  full << 1, 0.5, 0.5, 1;
  CHECK_THROWS_AS(GmmParams(Vector::Ones(1), {Vector::Zero(2)}, {full}, CovarianceType::Diagonal), ModelError);
  Vector neg(2);
  neg << 1.5, -0.5;
  CHECK_THROWS_AS(GmmParams(neg, {Vector::Zero(1), Vector::Zero(1)}, {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)}),
                  ModelError);
}

TEST_CASE("logpdf rejects wrong lengths") {
  const GmmParams p = random_mixture(2, 3, 8);
  const Vector z = Vector::Zero(2);
  CHECK_THROWS_AS(gmm_logpdf(p, as_span(z)), DimensionError);
}

TEST_CASE("sampling concentrates at a tight mean") {
  Vector m(3);
  m << 1.0, -2.0, 0.5;
  const double floor = 1e-6;
  GmmParams p(Vector::Ones(1), {m}, {floor * Eigen::MatrixXd::Identity(3, 3)});
  const std::size_t n = 20000;
  const Matrix s = gmm_sample(p, n, 9);
  const Vector mean = s.colwise().mean().transpose();
  CHECK((mean - m).norm() <= 3.0 * std::sqrt(floor / n) * std::sqrt(3.0));
}

TEST_CASE("zero-weight components are never sampled") {
  Vector w(2);
  w << 1.0, 0.0;
  Vector far(2);
  far << 100.0, 100.0;
  GmmParams p(w, {Vector::Zero(2), far}, {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
  const Matrix s = gmm_sample(p, 1000, 10);
  CHECK(s.rowwise().norm().maxCoeff() < 20.0);
}

TEST_CASE("standard normal samples have identity covariance") {
  GmmParams p(Vector::Ones(1), {Vector::Zero(3)}, {Eigen::MatrixXd::Identity(3, 3)});
  const Matrix s = gmm_sample(p, 50000, 11);
  const Matrix centered = s.rowwise() - s.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 50000.0;
  CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).norm() < 0.05 * std::sqrt(3.0));
  CHECK((gmm_sample(p, 10, 11) - s.topRows(10)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampled component frequencies follow the weights") {
  Vector w(3);
  w << 0.1, 0.6, 0.3;
  std::vector<Vector> means;
  for (double c : {-50.0, 0.0, 50.0}) means.push_back(Vector::Constant(1, c));
  GmmParams p(w, means, {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)});
  const Matrix s = gmm_sample(p, 30000, 12);
  int counts[3] = {0, 0, 0};
  for (Eigen::Index i = 0; i < s.rows(); ++i) ++counts[s(i, 0) < -25 ? 0 : (s(i, 0) < 25 ? 1 : 2)];
  CHECK(std::abs(counts[0] / 30000.0 - 0.1) < 0.01);
  CHECK(std::abs(counts[1] / 30000.0 - 0.6) < 0.01);
  CHECK(std::abs(counts[2] / 30000.0 - 0.3) < 0.01);
}

TEST_CASE("one component recovers the closed-form MLE") {
  Rng rng(13);
  Matrix z(500, 3);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal();
    z.row(i) << 1.0 + a, 2.0 * b + 0.5 * a, -3.0 + 0.2 * c;
  }
  EmConfig cfg;
  const GmmFit fit = gmm_fit(z, 1, cfg);
  const Vector mean = z.colwise().mean().transpose();
  const Matrix centered = z.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 500.0 + cfg.covariance_floor * Eigen::MatrixXd::Identity(3, 3);
  CHECK(fit.params.weights()(0) == 1.0);
  CHECK((fit.params.means()[0] - mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.params.covariances()[0] - cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("two separated clusters are recovered") {
  const Matrix z = blob_pair(2000, 14);
  const GmmFit fit = gmm_fit(z, 2, EmConfig{});
  const auto& m = fit.params.means();
  const bool first_right = m[0](0) > 0;
  const Vector& right = first_right ? m[0] : m[1];
  const Vector& left = first_right ? m[1] : m[0];
  CHECK(std::abs(right(0) - 10.0) < 0.2);
  CHECK(std::abs(right(1)) < 0.2);
  CHECK(std::abs(left(0) + 10.0) < 0.2);
  CHECK(std::abs(left(1)) < 0.2);
  CHECK(std::abs(fit.params.weights()(0) - 0.5) < 0.01);
  check_monotone(fit);
}

TEST_CASE("one point per component stays finite through the floor") {
  Matrix z(4, 2);
  z << 0, 0, 1, 0, 0, 1, 5, 5;
  const GmmFit fit = gmm_fit(z, 4, EmConfig{});
  CHECK(std::isfinite(fit.train_log_likelihood()));
  for (const auto& cov : fit.params.covariances()) CHECK(cov.allFinite());
  CHECK(std::abs(fit.params.weights().sum() - 1.0) < 1e-12);
}

TEST_CASE("EM never decreases the likelihood") {
  EmConfig cfg;
  cfg.restarts = 4;
  const GmmParams truth = random_mixture(4, 3, 15);
  const Matrix z = gmm_sample(truth, 3000, 16);
  for (std::size_t k : {1u, 2u, 4u, 7u}) {
    check_monotone(gmm_fit(z, k, cfg));
  }
  cfg.covariance_type = CovarianceType::Diagonal;
  check_monotone(gmm_fit(z, 5, cfg));
  check_monotone(gmm_fit(blob_pair(600, 17), 3, cfg));
}

TEST_CASE("fitting is deterministic and restarts pick the best") {
  const Matrix z = gmm_sample(random_mixture(3, 2, 18), 1500, 19);
  EmConfig cfg;
  cfg.seed = 77;
  const GmmFit a = gmm_fit(z, 3, cfg);
  const GmmFit b = gmm_fit(z, 3, cfg);
  CHECK(a.best_restart == b.best_restart);
  CHECK((a.params.weights() - b.params.weights()).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK((a.params.means()[k] - b.params.means()[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.params.covariances()[k] - b.params.covariances()[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.restarts.size() == 3);
  for (const auto& r : a.restarts) CHECK(r.mean_log_likelihood.back() <= a.train_log_likelihood());
}

TEST_CASE("diagonal fits produce diagonal covariances") {
  EmConfig cfg;
  cfg.covariance_type = CovarianceType::Diagonal;
  const GmmFit fit = gmm_fit(gmm_sample(random_mixture(2, 3, 20), 800, 21), 2, cfg);
  CHECK(fit.params.covariance_type() == CovarianceType::Diagonal);
  for (const auto& c : fit.params.covariances()) {
    const Eigen::MatrixXd off = c - Eigen::MatrixXd(c.diagonal().asDiagonal());
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fit input errors") {
  const Matrix z = blob_pair(10, 22);
  try {
    gmm_fit(z, 11, EmConfig{});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("too few points") != std::string::npos);
  }
  Matrix bad = z;
  bad(3, 1) = std::nan("");
  CHECK_THROWS_AS(gmm_fit(bad, 2, EmConfig{}), DataError);
  bad(3, 1) = INFINITY;
  CHECK_THROWS_AS(gmm_fit(bad, 2, EmConfig{}), DataError);

  EmConfig cfg;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EmConfig{};
  cfg.rel_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EmConfig{};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EmConfig{};
  cfg.covariance_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(EmConfig{}.validate());
}

TEST_CASE("fitted covariances respect the floor") {
  // Points on a line: the covariance would be singular without the floor.
  Matrix z(200, 2);
  for (int i = 0; i < 200; ++i) z.row(i) << i * 0.01, 2.0 * i * 0.01;
  EmConfig cfg;
  const GmmFit fit = gmm_fit(z, 2, cfg);
  for (const auto& c : fit.params.covariances()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    CHECK(eig.eigenvalues().minCoeff() >= cfg.covariance_floor * (1.0 - 1e-6));
  }
}
