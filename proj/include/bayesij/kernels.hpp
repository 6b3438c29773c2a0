#pragma once

/// \file kernels.hpp
/// \brief The W family, the dual Z matrix, and score-based kernels with information matrices.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bayesij/core.hpp"
#include "bayesij/eigen_solver.hpp"

namespace bayesij {

enum class WKind { raw, double_centered };

struct WMatrix {
  Matrix values;
  WKind kind = WKind::raw;
  Index n = 0;
  Index source_M = 0;

  double trace() const { return values.trace(); }
};

struct ZMatrix {
  Matrix values;
};

struct CenteredDeviationMatrix {
  Matrix values;  ///< n x M
};

inline WMatrix build_w(const LogLikMatrix& loglik, WKind kind = WKind::raw) {
  require(loglik.M() >= 2, "build_w needs at least 2 draws");
  Matrix x = loglik.values();
  if (kind == WKind::double_centered) {
    for (Index u = 0; u < x.rows(); ++u) {
      const double rm = static_cast<double>(detail::mean_ld(x.row(u)));
      x.row(u).array() -= rm;
    }
  }
  const Matrix c = center_columns(x);
  Matrix w = (c.transpose() * c) / static_cast<double>(loglik.M());
  w = 0.5 * (w + w.transpose());
  return {std::move(w), kind, loglik.n(), loglik.M()};
}

/// n * Cov_pos of two log-likelihood vectors over the same draws.
inline double eval_w_kernel(const Vector& loglik_x, const Vector& loglik_y, Index n) {
  return static_cast<double>(n) * posterior_cov(loglik_x, loglik_y);
}

inline CenteredDeviationMatrix build_deviation(const LogLikMatrix& loglik) {
  require(loglik.n() >= 2, "build_deviation needs at least 2 observations");
  const Matrix& l = loglik.values();
  const Vector col = column_means(l);
  Vector row(l.rows());
  for (Index u = 0; u < l.rows(); ++u) row[u] = static_cast<double>(detail::mean_ld(l.row(u)));
  const double grand = static_cast<double>(detail::mean_ld(col));
  Matrix a(l.cols(), l.rows());
  for (Index i = 0; i < l.cols(); ++i)
    for (Index r = 0; r < l.rows(); ++r) a(i, r) = l(r, i) - col[i] - row[r] + grand;
  return {std::move(a)};
}

inline ZMatrix build_z(const LogLikMatrix& loglik) {
  require(loglik.n() >= 2, "build_z needs at least 2 observations");
  const CenteredDeviationMatrix a = build_deviation(loglik);
  Matrix z = (a.values.transpose() * a.values) / static_cast<double>(loglik.n());
  z = 0.5 * (z + z.transpose());
  return {std::move(z)};
}

struct DualityReport {
  Vector z_eigenvalues;   ///< nonzero eigenvalues of (1/M) Z
  Vector wc_eigenvalues;  ///< nonzero eigenvalues of (1/n) W^c
  double max_rel_diff = 0.0;
  double z_identity_residual = 0.0;   ///< max |(1/M)Z - (1/(nM)) A^T A|
  double wc_identity_residual = 0.0;  ///< max |(1/n)W^c - (1/(nM)) A A^T|
};

/// Compares the spectra of (1/M)Z and (1/n)W^c. Eigenvalues below rel_zero * largest are treated as zero.
inline DualityReport duality_report(const LogLikMatrix& loglik, double rel_zero = 1e-10) {
  const double n = static_cast<double>(loglik.n());
  const double m = static_cast<double>(loglik.M());
  const CenteredDeviationMatrix a = build_deviation(loglik);
  const ZMatrix z = build_z(loglik);
  const WMatrix wc = build_w(loglik, WKind::double_centered);
  DualityReport rep;
  const Matrix zs = z.values / m;
  const Matrix ws = wc.values / n;
  rep.z_identity_residual = (zs - a.values.transpose() * a.values / (n * m)).cwiseAbs().maxCoeff();
  rep.wc_identity_residual = (ws - a.values * a.values.transpose() / (n * m)).cwiseAbs().maxCoeff();

  const Vector ez = symmetric_eigen(zs).values;
  const Vector ew = symmetric_eigen(ws).values;
  const double top = std::max({ez.size() ? ez[0] : 0.0, ew.size() ? ew[0] : 0.0, 0.0});
  auto nonzero = [&](const Vector& e) {
    std::vector<double> keep;
    for (Index k = 0; k < e.size(); ++k)
      if (e[k] > rel_zero * top) keep.push_back(e[k]);
    return Vector(Eigen::Map<const Vector>(keep.data(), static_cast<Index>(keep.size())));
  };
  rep.z_eigenvalues = nonzero(ez);
  rep.wc_eigenvalues = nonzero(ew);
  const Index k = std::min(rep.z_eigenvalues.size(), rep.wc_eigenvalues.size());
  if (rep.z_eigenvalues.size() != rep.wc_eigenvalues.size()) rep.max_rel_diff = 1.0;
  for (Index j = 0; j < k; ++j) {
    const double d = std::abs(rep.z_eigenvalues[j] - rep.wc_eigenvalues[j]) / std::max(std::abs(rep.wc_eigenvalues[j]), 1e-300);
    rep.max_rel_diff = std::max(rep.max_rel_diff, d);
  }
  return rep;
}

/// Per-observation scores at the estimate together with the averaged negative Hessian.
struct ScoreMatrix {
  Matrix values;       ///< n x k
  Matrix hessian_sum;  ///< k x k, -(1/n) sum_i d^2 log p(X_i | theta)
};

struct InfoMatrices {
  Matrix I_hat;
  Matrix J_hat;
  Matrix sandwich;
  Matrix J_inv_sqrt;
  Matrix J_sqrt;
  Vector theta_hat;
  double prior_weight = 0.0;
};

namespace detail {

/// Symmetric function of a symmetric PD matrix through its eigendecomposition.
template <class F>
Matrix sym_apply(const Matrix& a, F f) {
  const SymmetricEigen e = symmetric_eigen(a);
  const double top = e.values.size() ? e.values[0] : 0.0;
  const double floor = 1e-12 * std::max(top, 0.0);
  Vector fv(e.values.size());
  for (Index k = 0; k < e.values.size(); ++k) fv[k] = f(std::max(e.values[k], floor));
  return e.vectors * fv.asDiagonal() * e.vectors.transpose();
}

inline void require_pd(const Matrix& j, const char* what) {
  if (j.rows() == 0 || !j.allFinite()) fail(ErrorCode::SingularInformation, std::string(what) + " is empty or non-finite");
  Eigen::LLT<Matrix> llt(0.5 * (j + j.transpose()));
  if (llt.info() != Eigen::Success) fail(ErrorCode::SingularInformation, std::string(what) + " is not positive definite");
  const SymmetricEigen e = symmetric_eigen(j);
  if (!(e.values[e.values.size() - 1] > 1e-12 * e.values[0])) {
    fail(ErrorCode::SingularInformation, std::string(what) + " is numerically singular");
  }
}

}  // namespace detail

/// Builds I, J and the sandwich J^{-1/2} I J^{-1/2}.
/// With prior_weight > 0 each score is shifted by prior_weight * prior_score and
/// J gains prior_weight * prior_neg_hessian.
inline InfoMatrices build_info_matrices(const ScoreMatrix& scores, const std::optional<Vector>& prior_score = std::nullopt,
                                        double prior_weight = 0.0,
                                        const std::optional<Matrix>& prior_neg_hessian = std::nullopt,
                                        const Vector& theta_hat = Vector()) {
  const Index n = scores.values.rows();
  const Index k = scores.values.cols();
  require(n >= 1 && k >= 1, "score matrix must be non-empty");
  require(scores.hessian_sum.rows() == k && scores.hessian_sum.cols() == k,
          "hessian_sum must be " + std::to_string(k) + "x" + std::to_string(k));
  require(prior_weight >= 0.0, "prior weight must be nonnegative");
  Matrix s = scores.values;
  if (prior_weight > 0.0 && prior_score) {
    require(prior_score->size() == k, "prior score length mismatch");
    s.rowwise() += (prior_weight * *prior_score).transpose();
  }
  InfoMatrices info;
  info.I_hat = (s.transpose() * s) / static_cast<double>(n);
  info.J_hat = scores.hessian_sum;
  if (prior_weight > 0.0 && prior_neg_hessian) {
    require(prior_neg_hessian->rows() == k && prior_neg_hessian->cols() == k, "prior Hessian shape mismatch");
    info.J_hat += prior_weight * *prior_neg_hessian;
  }
  info.J_hat = 0.5 * (info.J_hat + info.J_hat.transpose());
  detail::require_pd(info.J_hat, "J_hat");
  info.J_inv_sqrt = detail::sym_apply(info.J_hat, [](double x) { return 1.0 / std::sqrt(x); });
  info.J_sqrt = detail::sym_apply(info.J_hat, [](double x) { return std::sqrt(x); });
  info.sandwich = info.J_inv_sqrt * info.I_hat * info.J_inv_sqrt;
  info.sandwich = 0.5 * (info.sandwich + info.sandwich.transpose());
  info.theta_hat = theta_hat;
  info.prior_weight = prior_weight;
  return info;
}

enum class ScoreMetric { fisher, modified_fisher, plain };

inline double eval_score_kernel(const InfoMatrices& info, ScoreMetric metric, const Vector& x_score,
                                const Vector& y_score) {
  require(x_score.size() == y_score.size(), "score length mismatch");
  if (metric == ScoreMetric::plain) return x_score.dot(y_score);
  const Matrix& m = metric == ScoreMetric::fisher ? info.I_hat : info.J_hat;
  require(m.rows() == x_score.size(), "score length does not match the information matrix");
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) fail(ErrorCode::SingularInformation, "metric is singular");
  const SymmetricEigen e = symmetric_eigen(m);
  if (!(e.values[e.values.size() - 1] > 1e-12 * std::max(e.values[0], 1e-300))) {
    fail(ErrorCode::SingularInformation, "metric is singular");
  }
  return x_score.dot(ldlt.solve(y_score));
}

/// Phi = s J^{-1/2}, n x k.
inline Matrix mf_feature_matrix(const ScoreMatrix& scores, const InfoMatrices& info) {
  require(info.J_inv_sqrt.rows() == scores.values.cols(), "info matrices do not match score dimension");
  return scores.values * info.J_inv_sqrt;
}

struct EmbeddingMatrix {
  Matrix values;  ///< k x M
  Index n = 0;
};

inline EmbeddingMatrix build_embedding(const Matrix& draws, const Vector& theta_hat, const Matrix& J_hat, Index n) {
  require(draws.cols() == theta_hat.size(), "draws and theta_hat dimension mismatch");
  require(J_hat.rows() == theta_hat.size() && J_hat.cols() == theta_hat.size(), "J_hat shape mismatch");
  require(n >= 1, "n must be positive");
  detail::require_pd(J_hat, "J_hat");
  const Matrix j_sqrt = detail::sym_apply(J_hat, [](double x) { return std::sqrt(x); });
  const Matrix dev = draws.rowwise() - theta_hat.transpose();
  const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(draws.rows()));
  return {scale * j_sqrt * dev.transpose(), n};
}

struct EmbeddingReport {
  double orthogonality_error = 0.0;  ///< ||Theta Theta^T - I||_F
  double z_relation_error = 0.0;     ///< ||(n/M) Z - Theta^T S Theta||_F
  double z_norm = 0.0;               ///< ||(n/M) Z||_F
  double scaled_z_lambda1 = 0.0;     ///< (n/M) lambda_1(Z)
  double sandwich_lambda1 = 0.0;
};

/// Embedding diagnostics computed through traces, without forming any M x M matrix.
inline EmbeddingReport embedding_diagnostics(const EmbeddingMatrix& emb, const LogLikMatrix& loglik, const Matrix& sandwich) {
  const Index k = emb.values.rows();
  require(emb.values.cols() == loglik.M(), "embedding draw count does not match loglik");
  require(sandwich.rows() == k && sandwich.cols() == k, "sandwich dimension mismatch");
  const double m = static_cast<double>(loglik.M());
  EmbeddingReport rep;
  const Matrix g = emb.values * emb.values.transpose();
  rep.orthogonality_error = (g - Matrix::Identity(k, k)).norm();

  // (n/M) Z = (1/M) A^T A with A the n x M deviation matrix.
  const CenteredDeviationMatrix a = build_deviation(loglik);
  const Matrix aat = a.values * a.values.transpose() / m;  // n x n, same nonzero spectrum as (n/M) Z
  rep.z_norm = aat.norm();
  const Matrix at = a.values * emb.values.transpose();  // n x k
  const double cross = (at.transpose() * at).cwiseProduct(sandwich).sum() / m;
  const Matrix sg = sandwich * g;
  const double quad = (sg * sg).trace();
  rep.z_relation_error = std::sqrt(std::max(rep.z_norm * rep.z_norm - 2.0 * cross + quad, 0.0));
  const SymmetricEigen ez = symmetric_eigen(aat);
  rep.scaled_z_lambda1 = ez.values.size() ? ez.values[0] : 0.0;
  const SymmetricEigen es = symmetric_eigen(sandwich);
  rep.sandwich_lambda1 = es.values[0];
  return rep;
}

}  // namespace bayesij
