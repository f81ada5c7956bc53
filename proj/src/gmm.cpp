#include "rpf/gmm.hpp"

#include "rpf/error.hpp"
#include "rpf/rng.hpp"
#include "rpf/simd/kernels.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

namespace rpf {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

struct WeightedTerm {
  double log_density;
  double weight;
};

// log sum_k w_k exp(l_k), evaluated in a canonical order of the terms.
double log_sum_exp(std::vector<WeightedTerm>& terms) {
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  std::sort(terms.begin(), terms.end(), [](const WeightedTerm& a, const WeightedTerm& b) {
    if (a.log_density != b.log_density) return a.log_density > b.log_density;
    return a.weight > b.weight;
  });
  const double top = terms.front().log_density;
  double sum = 0.0;
  for (const auto& t : terms) sum += t.weight * std::exp(t.log_density - top);
  return top + std::log(sum);
}

std::string component_field(const char* field, std::size_t k) {
  return std::string(field) + "[" + std::to_string(k) + "]";
}

}  // namespace

std::string_view covariance_type_name(CovarianceType type) {
  return type == CovarianceType::Full ? "full" : "diagonal";
}

CovarianceType parse_covariance_type(std::string_view name) {
  std::string key;
  for (char ch : name) key.push_back(static_cast<char>(std::tolower(ch)));
  if (key == "full") return CovarianceType::Full;
  if (key == "diagonal" || key == "diag") return CovarianceType::Diagonal;
  throw Error("unknown covariance type '" + std::string(name) + "' (expected full or diagonal)");
}

GmmParams::GmmParams(Vector weights, std::vector<Vector> means,
                     std::vector<Eigen::MatrixXd> covariances, CovarianceType type)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)),
      type_(type),
      dim_(0) {
  const auto k = static_cast<std::size_t>(weights_.size());
  if (k == 0) throw ModelError("gmm.weights: mixture needs at least one component");
  if (means_.size() != k || covariances_.size() != k) {
    throw ModelError("gmm: weights, means and covariances must have the same number of components");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = weights_(static_cast<Eigen::Index>(i));
    if (!std::isfinite(w) || w < 0.0) {
      throw ModelError("gmm.weights: " + component_field("weights", i) + " is negative or non-finite");
    }
    total += w;
  }
  if (!(std::abs(total - 1.0) <= 1e-12)) {
    throw ModelError("gmm.weights: mixture weights sum to " + std::to_string(total) + ", expected 1");
  }

  dim_ = static_cast<std::size_t>(means_.front().size());
  if (dim_ == 0) throw ModelError("gmm.means: zero-dimensional components");
  chol_.reserve(k);
  log_norm_.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& mu = means_[i];
    const auto& cov = covariances_[i];
    if (static_cast<std::size_t>(mu.size()) != dim_) {
      throw ModelError("gmm.means: " + component_field("means", i) + " has inconsistent dimension");
    }
    if (!mu.allFinite()) throw ModelError("gmm.means: " + component_field("means", i) + " is non-finite");
    if (static_cast<std::size_t>(cov.rows()) != dim_ || static_cast<std::size_t>(cov.cols()) != dim_) {
      throw ModelError("gmm.covariances: " + component_field("covariances", i) + " has wrong shape");
    }
    if (!cov.allFinite()) {
      throw ModelError("gmm.covariances: " + component_field("covariances", i) + " is non-finite");
    }
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
      throw ModelError("gmm.covariances: " + component_field("covariances", i) + " is not symmetric");
    }
    if (type_ == CovarianceType::Diagonal && !cov.isDiagonal(0.0)) {
      throw ModelError("gmm.covariances: " + component_field("covariances", i) +
                       " has off-diagonal entries but covariance_type is diagonal");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)) {
      throw ModelError("gmm.covariances: " + component_field("covariances", i) +
                       " is not symmetric positive-definite");
    }
    Matrix lower = llt.matrixL().toDenseMatrix();
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < lower.rows(); ++j) log_det += 2.0 * std::log(lower(j, j));
    log_norm_.push_back(-0.5 * (static_cast<double>(dim_) * kLog2Pi + log_det));
    chol_.push_back(std::move(lower));
  }
}

double GmmParams::component_log_pdf(std::size_t k, std::span<const double> z) const {
  const auto& lower = chol_[k];
  const double* mu = means_[k].data();
  const auto& kern = simd::active();
  // Forward substitution L y = z - mu.
  double y_buf[16];
  std::vector<double> y_heap;
  double* y = y_buf;
  if (dim_ > 16) {
    y_heap.resize(dim_);
    y = y_heap.data();
  }
  double quad = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* row = lower.data() + i * dim_;
    const double partial = kern.dot(row, y, i);
    y[i] = (z[i] - mu[i] - partial) / row[i];
    quad += y[i] * y[i];
  }
  return log_norm_[k] - 0.5 * quad;
}

double gmm_logpdf(const GmmParams& params, std::span<const double> z) {
  if (z.size() != params.dim()) {
    throw DimensionError("dimension mismatch: latent point has length " + std::to_string(z.size()) +
                         ", mixture has dimension " + std::to_string(params.dim()));
  }
  std::vector<WeightedTerm> terms;
  terms.reserve(params.components());
  for (std::size_t k = 0; k < params.components(); ++k) {
    const double w = params.weights()(static_cast<Eigen::Index>(k));
    if (w > 0.0) terms.push_back({params.component_log_pdf(k, z), w});
  }
  return log_sum_exp(terms);
}

Matrix gmm_sample(const GmmParams& params, std::size_t n, Seed seed) {
  const auto d = static_cast<Eigen::Index>(params.dim());
  const auto k = params.components();
  std::vector<double> cumulative(k);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = params.weights()(static_cast<Eigen::Index>(i));
    acc += w;
    cumulative[i] = acc;
    if (w > 0.0) last_positive = i;
  }
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(k);
  for (const auto& cov : params.covariances()) factors.emplace_back(Eigen::LLT<Eigen::MatrixXd>(cov).matrixL());

  Rng rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), d);
  Vector noise(d);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double u = rng.uniform() * acc;
    std::size_t comp = last_positive;
    for (std::size_t i = 0; i < k; ++i) {
      if (params.weights()(static_cast<Eigen::Index>(i)) > 0.0 && u < cumulative[i]) {
        comp = i;
        break;
      }
    }
    for (Eigen::Index j = 0; j < d; ++j) noise(j) = rng.normal();
    out.row(r) = (params.means()[comp] + factors[comp] * noise).transpose();
  }
  return out;
}

void EmConfig::validate() const {
  if (max_iters == 0) throw Error("em.max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw Error("em.rel_tol must be > 0");
  if (restarts == 0) throw Error("em.restarts must be >= 1");
  if (!(covariance_floor > 0.0)) throw Error("em.covariance_floor must be > 0");
}

namespace {

struct EStep {
  Matrix resp;                      // N x K responsibilities
  std::vector<double> point_ll;     // log p(z_i)
  double mean_ll = 0.0;
};

EStep expectation(const GmmParams& params, const Matrix& data) {
  const auto n = data.rows();
  const auto k = static_cast<Eigen::Index>(params.components());
  EStep out;
  out.resp.setZero(n, k);
  out.point_ll.resize(static_cast<std::size_t>(n));
  std::vector<double> comp_ll(static_cast<std::size_t>(k));
  std::vector<WeightedTerm> terms;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = row_span(data, i);
    terms.clear();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double w = params.weights()(c);
      comp_ll[static_cast<std::size_t>(c)] = w > 0.0 ? params.component_log_pdf(static_cast<std::size_t>(c), z)
                                                     : -std::numeric_limits<double>::infinity();
      if (w > 0.0) terms.push_back({comp_ll[static_cast<std::size_t>(c)], w});
    }
    const double ll = log_sum_exp(terms);
    for (Eigen::Index c = 0; c < k; ++c) {
      const double w = params.weights()(c);
      if (w > 0.0) out.resp(i, c) = w * std::exp(comp_ll[static_cast<std::size_t>(c)] - ll);
    }
    out.point_ll[static_cast<std::size_t>(i)] = ll;
    total += ll;
  }
  out.mean_ll = total / static_cast<double>(n);
  return out;
}

Eigen::MatrixXd floored_covariance(const Matrix& data, const Vector& weights, double mass,
                                   const Vector& mean, const EmConfig& config) {
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  Eigen::MatrixXd cov;
  if (config.covariance_type == CovarianceType::Full) {
    cov = centered.transpose() * (centered.array().colwise() * weights.array()).matrix();
    cov /= mass;
    cov = 0.5 * (cov + cov.transpose());
  } else {
    const Vector diag =
        (centered.array().square().colwise() * weights.array()).colwise().sum().transpose() / mass;
    cov = diag.asDiagonal();
  }
  cov.diagonal().array() += config.covariance_floor;
  return cov;
}

// M-step from responsibilities. Components with almost no mass are re-seeded
// at the worst-explained points (lowest score, lowest index on ties).
GmmParams maximization(const Matrix& data, const Matrix& resp, std::span<const double> scores,
                       const EmConfig& config, std::size_t& reseeds) {
  const auto n = data.rows();
  const auto k = resp.cols();
  const double threshold = 1e-10 * static_cast<double>(n);
  const Vector uniform = Vector::Ones(n);
  const Vector global_mean = data.colwise().mean().transpose();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
  });
  std::size_t next_worst = 0;

  Vector mass(k);
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Vector w = resp.col(c);
    const double nk = w.sum();
    if (nk < threshold) {
      const Eigen::Index point = order[next_worst++ % order.size()];
      means.emplace_back(data.row(point).transpose());
      covs.push_back(floored_covariance(data, uniform, static_cast<double>(n), global_mean, config));
      mass(c) = 1.0;
      ++reseeds;
      continue;
    }
    Vector mu = (data.transpose() * w) / nk;
    covs.push_back(floored_covariance(data, w, nk, mu, config));
    means.push_back(std::move(mu));
    mass(c) = nk;
  }
  Vector weights = mass / mass.sum();
  return GmmParams(std::move(weights), std::move(means), std::move(covs), config.covariance_type);
}

// k-means++ seeding followed by a hard nearest-center assignment.
Matrix kmeanspp_responsibilities(const Matrix& data, std::size_t components, Rng& rng,
                                 std::vector<double>& scores) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto dim = static_cast<std::size_t>(data.cols());
  const auto& kern = simd::active();
  std::vector<std::size_t> centers;
  centers.push_back(rng.below(n));
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  while (centers.size() < components) {
    const double* c = data.data() + centers.back() * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], kern.squared_distance(data.data() + i * dim, c, dim));
      total += min_dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_dist[i];
        if (min_dist[i] > 0.0 && u < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the top end of the cumulative sum
        for (std::size_t i = n; i-- > 0;) {
          if (min_dist[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = rng.below(n);
    }
    centers.push_back(pick);
  }

  Matrix resp = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(components));
  scores.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < components; ++c) {
      const double dist = kern.squared_distance(data.data() + i * dim, data.data() + centers[c] * dim, dim);
      if (dist < best_dist) {  // strict: lowest index wins ties
        best_dist = dist;
        best = c;
      }
    }
    resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)) = 1.0;
    scores[i] = -best_dist;
  }
  return resp;
}

std::pair<GmmParams, RestartTrace> run_restart(const Matrix& data, std::size_t components,
                                               const EmConfig& config, std::size_t restart) {
  Rng rng(config.seed, restart);
  RestartTrace trace;
  std::vector<double> scores;
  const Matrix init = kmeanspp_responsibilities(data, components, rng, scores);
  GmmParams params = maximization(data, init, scores, config, trace.reseeds);

  for (std::size_t iter = 0;; ++iter) {
    EStep e = expectation(params, data);
    if (!std::isfinite(e.mean_ll)) throw DataError("EM produced a non-finite log-likelihood");
    const double ll = e.mean_ll;
    if (!trace.mean_log_likelihood.empty()) {
      const double prev = trace.mean_log_likelihood.back();
      trace.mean_log_likelihood.push_back(ll);
      if ((ll - prev) < config.rel_tol * std::max(std::abs(prev), 1e-300)) {
        trace.converged = true;
        break;
      }
    } else {
      trace.mean_log_likelihood.push_back(ll);
    }
    if (iter == config.max_iters) break;
    params = maximization(data, e.resp, e.point_ll, config, trace.reseeds);
  }
  return {std::move(params), std::move(trace)};
}

}  // namespace

GmmFit gmm_fit(const Matrix& data, std::size_t components, const EmConfig& config) {
  config.validate();
  if (components == 0) throw Error("gmm_fit: number of components must be >= 1");
  if (data.rows() == 0 || data.cols() == 0) throw DataError("gmm_fit: empty data");
  if (static_cast<std::size_t>(data.rows()) < components) {
    throw DataError("gmm_fit: too few points: " + std::to_string(data.rows()) + " rows for " +
                    std::to_string(components) + " components");
  }
  if (!data.allFinite()) throw DataError("gmm_fit: data contains non-finite values");

  std::optional<GmmParams> best;
  std::vector<RestartTrace> traces;
  std::size_t best_index = 0;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    auto [params, trace] = run_restart(data, components, config, r);
    const double final_ll = trace.mean_log_likelihood.back();
    if (!best || final_ll > traces[best_index].mean_log_likelihood.back()) {
      best = std::move(params);
      best_index = r;
    }
    traces.push_back(std::move(trace));
  }
  return GmmFit{std::move(*best), std::move(traces), best_index};
}

}  // namespace rpf
