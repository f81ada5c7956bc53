#pragma once

// Test-only reference computations. Nothing here calls into the library's
// numeric paths, so the checks that use them stay independent.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace rpf::test {

struct KsResult {
  double statistic;
  double p_value;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
// distribution and the usual small-sample correction of lambda.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return {d, std::clamp(2.0 * p, 0.0, 1.0)};
}

// Mixture density by direct summation in extended precision.
inline long double naive_mixture_density(const std::vector<double>& weights, const std::vector<Eigen::VectorXd>& means,
                                         const std::vector<Eigen::MatrixXd>& covs, const Eigen::VectorXd& z) {
  using Ld = long double;
  Ld total = 0.0L;
  const auto d = static_cast<Ld>(z.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    using LdMatrix = Eigen::Matrix<Ld, Eigen::Dynamic, Eigen::Dynamic>;
    using LdVector = Eigen::Matrix<Ld, Eigen::Dynamic, 1>;
    const LdMatrix cov = covs[k].cast<Ld>();
    const LdVector diff = (z - means[k]).cast<Ld>();
    const Ld quad = diff.dot(cov.inverse() * diff);
    const Ld det = cov.determinant();
    const Ld norm = std::pow(2.0L * std::numbers::pi_v<Ld>, d / 2.0L) * std::sqrt(det);
    total += static_cast<Ld>(weights[k]) * std::exp(-0.5L * quad) / norm;
  }
  return total;
}

// Log-density of a multivariate normal via an explicit inverse/determinant.
inline double gaussian_log_density(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const Eigen::VectorXd& z) {
  const Eigen::VectorXd diff = z - mean;
  const double quad = diff.dot(cov.inverse() * diff);
  return -0.5 * (static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) + std::log(cov.determinant()) + quad);
}

inline double log_sum_exp_plain(const std::vector<double>& terms) {
  double top = -INFINITY;
  for (double t : terms) top = std::max(top, t);
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

}  // namespace rpf::test
