#pragma once

#include "rpf/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <string_view>
#include <vector>

namespace rpf {

enum class CovarianceType { Full, Diagonal };

std::string_view covariance_type_name(CovarianceType type);
CovarianceType parse_covariance_type(std::string_view name);

/// Gaussian mixture sum_k pi_k N(z; mu_k, Sigma_k).
///
/// The constructor validates the parameters (weights on the simplex to 1e-12,
/// consistent dimensions, symmetric positive-definite covariances, zero
/// off-diagonals for the diagonal type) and caches a Cholesky factor per
/// component. Immutable afterwards.
class GmmParams {
 public:
  GmmParams(Vector weights, std::vector<Vector> means, std::vector<Eigen::MatrixXd> covariances,
            CovarianceType type = CovarianceType::Full);

  std::size_t components() const { return static_cast<std::size_t>(weights_.size()); }
  std::size_t dim() const { return dim_; }
  CovarianceType covariance_type() const { return type_; }
  const Vector& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }

  /// log N(z; mu_k, Sigma_k) for one component.
  double component_log_pdf(std::size_t k, std::span<const double> z) const;

 private:
  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  CovarianceType type_;
  std::size_t dim_;
  std::vector<Matrix> chol_;          // lower factors, row-major
  std::vector<double> log_norm_;      // -(d log 2pi + log det Sigma) / 2
};

/// log p(z), combined with a log-sum-exp over components. The terms are
/// summed in sorted order, so relabeling components gives identical results.
double gmm_logpdf(const GmmParams& params, std::span<const double> z);

/// Ancestral sampling: component from the weights, then mu + L n.
Matrix gmm_sample(const GmmParams& params, std::size_t n, Seed seed);

struct EmConfig {
  std::size_t max_iters = 200;
  double rel_tol = 1e-6;
  std::size_t restarts = 3;
  CovarianceType covariance_type = CovarianceType::Full;
  double covariance_floor = 1e-6;
  Seed seed = 0;

  /// Throws Error on max_iters == 0, rel_tol <= 0, restarts == 0 or floor <= 0.
  void validate() const;
};

struct RestartTrace {
  std::vector<double> mean_log_likelihood;  // per E-step, nats per point
  std::size_t reseeds = 0;                  // components re-seeded after collapsing
  bool converged = false;
};

struct GmmFit {
  GmmParams params;
  std::vector<RestartTrace> restarts;
  std::size_t best_restart = 0;

  double train_log_likelihood() const {
    return restarts[best_restart].mean_log_likelihood.back();
  }
};

/// EM from k-means++ seeding.
///
/// Restart r draws from Rng(config.seed, r). Each restart alternates E and M
/// steps until the relative improvement of the mean training log-likelihood
/// drops below rel_tol or max_iters M-steps have run. The covariance floor is
/// added to every diagonal at each M-step. The restart with the highest final
/// log-likelihood wins (lowest index on ties).
GmmFit gmm_fit(const Matrix& data, std::size_t components, const EmConfig& config);

}  // namespace rpf
