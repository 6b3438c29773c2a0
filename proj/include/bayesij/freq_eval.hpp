#pragma once

/// \file freq_eval.hpp
/// \brief Sensitivity derivatives, frequentist covariance estimators and model-assessment penalties.

#include <cmath>
#include <optional>
#include <string>

#include "bayesij/core.hpp"
#include "bayesij/kernels.hpp"
#include "bayesij/spectral.hpp"

namespace bayesij {

enum class CovEstimator { plain, centered, prior_adjusted, projected };

inline const char* to_string(CovEstimator e) {
  switch (e) {
    case CovEstimator::plain: return "plain";
    case CovEstimator::centered: return "centered";
    case CovEstimator::prior_adjusted: return "prior_adjusted";
    case CovEstimator::projected: return "projected";
  }
  return "unknown";
}

struct FreqCovEstimate {
  Matrix values;
  CovEstimator estimator = CovEstimator::plain;
  Index rank_used = -1;  ///< -1 for the full set of observations
};

struct SensitivityReport {
  Matrix first_order;                               ///< p x n
  std::optional<ThirdCumulantTensor> second_order;
};

inline SensitivityReport sensitivity_first(const StatMatrix& stats, const LogLikMatrix& loglik) {
  check_pair(stats, loglik);
  return {cov_grid(stats.values(), loglik.values()), std::nullopt};
}

inline ThirdCumulantTensor sensitivity_second(const StatMatrix& stats, const Matrix& f) {
  require(stats.M() == f.rows(), "draw count mismatch: stats " + detail::shape(stats.values()) + " vs functions " +
                                     detail::shape(f));
  require(stats.M() >= 3, "third cumulants need at least 3 draws");
  const Matrix ac = center_columns(stats.values());
  const Matrix fc = center_columns(f);
  const double inv_m = 1.0 / static_cast<double>(stats.M());
  ThirdCumulantTensor t(stats.p(), f.cols());
  for (Index j = 0; j < stats.p(); ++j) {
    Matrix s = fc.transpose() * ac.col(j).asDiagonal() * fc * inv_m;
    t.slice(j) = 0.5 * (s + s.transpose());
  }
  return t;
}

inline FreqCovEstimate freq_cov(const StatMatrix& stats, const LogLikMatrix& loglik, CovEstimator estimator,
                                const LogPriorVector* logprior = nullptr, const ProjectedLogLik* projection = nullptr) {
  check_pair(stats, loglik);
  FreqCovEstimate out;
  out.estimator = estimator;
  Matrix g;
  switch (estimator) {
    case CovEstimator::plain:
      g = cov_grid(stats.values(), loglik.values());
      break;
    case CovEstimator::centered:
      g = cov_grid(stats.values(), loglik.values());
      g = g.colwise() - g.rowwise().mean();
      break;
    case CovEstimator::prior_adjusted: {
      if (logprior == nullptr) fail(ErrorCode::InvalidInput, "prior_adjusted estimator requires a log prior");
      require(logprior->values.size() == loglik.M(), "log prior length does not match draw count");
      g = cov_grid(stats.values(), loglik.values());
      const Vector shift = cov_grid(stats.values(), logprior->values) / static_cast<double>(loglik.n());
      g = g.colwise() + shift;
      break;
    }
    case CovEstimator::projected:
      if (projection == nullptr) fail(ErrorCode::InvalidInput, "projected estimator requires a projection");
      require(projection->projections.rows() == loglik.M(), "projection draw count does not match loglik");
      g = cov_grid(stats.values(), projection->projections);
      out.rank_used = projection->a_M;
      break;
  }
  out.values = g * g.transpose();
  out.values = 0.5 * (out.values + out.values.transpose());
  return out;
}

struct PenaltyReport {
  double waic_penalty = 0.0;
  std::optional<double> tic_penalty;
  std::optional<double> pcic_penalty;
};

inline PenaltyReport penalties(const LogLikMatrix& loglik, const LogPriorVector* logprior = nullptr,
                               const InfoMatrices* info = nullptr) {
  PenaltyReport rep;
  const Matrix c = center_columns(loglik.values());
  const double inv_m = 1.0 / static_cast<double>(loglik.M());
  long double tr = 0.0L;
  for (Index i = 0; i < c.cols(); ++i) tr += c.col(i).squaredNorm() * inv_m;
  rep.waic_penalty = static_cast<double>(tr);
  if (info != nullptr) {
    Eigen::LDLT<Matrix> ldlt(info->J_hat);
    rep.tic_penalty = (ldlt.solve(info->I_hat)).trace();
  }
  if (logprior != nullptr) {
    require(logprior->values.size() == loglik.M(), "log prior length does not match draw count");
    const Vector cp = cov_grid(loglik.values(), logprior->values);
    rep.pcic_penalty = rep.waic_penalty + cp.sum() / static_cast<double>(loglik.n());
  }
  return rep;
}

inline double kl_quadratic(const WMatrix& w, const Vector& eta) {
  require(eta.size() == w.values.rows(), "perturbation length does not match W");
  return 0.5 * eta.dot(w.values * eta);
}

inline double kl_quadratic(const WMatrix& w, const WeightVector& weights) { return kl_quadratic(w, weights.eta()); }

struct CenteringReport {
  Vector value;  ///< Cov_pos[A_j, sum_i l_i (+ log p)]
  Vector scale;  ///< sum_i |Cov_pos[A_j, l_i]|
};

inline CenteringReport centering_diagnostic(const StatMatrix& stats, const LogLikMatrix& loglik,
                                            const LogPriorVector* logprior = nullptr) {
  check_pair(stats, loglik);
  Vector total = loglik.values().rowwise().sum();
  if (logprior != nullptr) {
    require(logprior->values.size() == loglik.M(), "log prior length does not match draw count");
    total += logprior->values;
  }
  const Matrix g = cov_grid(stats.values(), loglik.values());
  return {cov_grid(stats.values(), total).col(0), g.cwiseAbs().rowwise().sum()};
}

}  // namespace bayesij
