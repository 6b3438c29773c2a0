#pragma once

/// \file spectral.hpp
/// \brief Principal space of W: incomplete pivoted Cholesky, dual and full eigensolvers,
/// projections, residual bounds and representative observation sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "bayesij/core.hpp"
#include "bayesij/eigen_solver.hpp"
#include "bayesij/kernels.hpp"
#include "bayesij/random.hpp"

namespace bayesij {

/// W = P (L L^T + R) P^T with L stored in pivoted row order.
struct PivotedCholesky {
  Matrix L;                                 ///< n x a_M
  std::vector<Index> pivots;                ///< original indices of the chosen pivots
  std::vector<Index> permutation;           ///< original index of pivoted row k
  std::vector<double> residual_trace_history;
  double trace_w = 0.0;
  Index a_M = 0;

  double residual_trace() const { return residual_trace_history.empty() ? trace_w : residual_trace_history.back(); }
};

struct CholeskyOptions {
  double rel_tol = 1e-8;
  Index max_rank = -1;  ///< -1 selects min(n, 500)
};

inline PivotedCholesky incomplete_cholesky(const Matrix& w, const CholeskyOptions& opt = {}) {
  const Index n = w.rows();
  require(n == w.cols() && n >= 1, "incomplete_cholesky needs a non-empty square matrix");
  require(opt.rel_tol > 0.0 && opt.rel_tol < 1.0, "rel_tol must lie in (0, 1)");
  const Index max_rank = opt.max_rank < 0 ? std::min<Index>(n, 500) : opt.max_rank;
  require(max_rank <= n, "max_rank exceeds n");

  PivotedCholesky out;
  long double tr = 0.0L;
  for (Index i = 0; i < n; ++i) tr += w(i, i);
  out.trace_w = static_cast<double>(tr);
  const double tol_neg = -1e-10 * std::abs(out.trace_w);
  Vector d = w.diagonal();
  for (Index i = 0; i < n; ++i)
    if (d[i] < tol_neg) fail(ErrorCode::NotPSD, "negative diagonal at index " + std::to_string(i));

  Matrix g = Matrix::Zero(n, std::max<Index>(max_rank, 0));
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  const double tie = 1e-14 * std::abs(out.trace_w);
  auto residual = [&]() {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += d[i];
    return s;
  };

  if (out.trace_w > 0.0) {
    double tr_r = residual();
    for (Index j = 0; j < max_rank; ++j) {
      if (tr_r <= opt.rel_tol * out.trace_w) break;
      Index p = -1;
      double best = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (p < 0 || d[i] > best + tie) {
          p = i;
          best = d[i];
        }
      }
      if (p < 0 || best <= 0.0) break;
      const double piv = std::sqrt(best);
      g(p, j) = piv;
      for (Index i = 0; i < n; ++i) {
        if (chosen[i] || i == p) continue;
        double s = w(i, p);
        for (Index k = 0; k < j; ++k) s -= g(i, k) * g(p, k);
        g(i, j) = s / piv;
        d[i] -= g(i, j) * g(i, j);
        if (d[i] < tol_neg) fail(ErrorCode::NotPSD, "negative residual diagonal at index " + std::to_string(i));
      }
      d[p] = 0.0;
      chosen[p] = 1;
      out.pivots.push_back(p);
      tr_r = residual();
      out.residual_trace_history.push_back(tr_r);
    }
  }
  out.a_M = static_cast<Index>(out.pivots.size());
  out.permutation = out.pivots;
  for (Index i = 0; i < n; ++i)
    if (!chosen[i]) out.permutation.push_back(i);
  out.L.resize(n, out.a_M);
  for (Index k = 0; k < n; ++k) out.L.row(k) = g.row(out.permutation[k]).head(out.a_M);
  return out;
}

inline PivotedCholesky incomplete_cholesky(const WMatrix& w, const CholeskyOptions& opt = {}) {
  return incomplete_cholesky(w.values, opt);
}

/// L with rows restored to the original observation order.
inline Matrix unpermuted_factor(const PivotedCholesky& chol) {
  Matrix out(chol.L.rows(), chol.L.cols());
  for (Index k = 0; k < chol.L.rows(); ++k) out.row(chol.permutation[k]) = chol.L.row(k);
  return out;
}

struct SpectralBasis {
  Vector eigenvalues;  ///< descending
  Matrix vectors;      ///< n x a, original observation order
  Index rank_retained = 0;
  Matrix V;                    ///< a_M x a link to the Cholesky factor; empty for full_eigen
  double residual_trace = 0.0; ///< tr R of the factorization, 0 for full_eigen

  double tail_sum(Index a_M) const {
    double s = 0.0;
    for (Index a = a_M; a < eigenvalues.size(); ++a) s += eigenvalues[a];
    return s;
  }
};

inline SpectralBasis full_eigen(const Matrix& w, const EigenOptions& opt = {}) {
  SymmetricEigen e = symmetric_eigen(w, opt);
  SpectralBasis b;
  b.eigenvalues = std::move(e.values);
  b.vectors = std::move(e.vectors);
  b.rank_retained = b.eigenvalues.size();
  return b;
}

inline SpectralBasis full_eigen(const WMatrix& w, const EigenOptions& opt = {}) { return full_eigen(w.values, opt); }

inline SpectralBasis dual_eigen(const PivotedCholesky& chol) {
  SpectralBasis b;
  b.residual_trace = chol.residual_trace();
  const Index n = chol.L.rows();
  if (chol.a_M == 0) {
    b.eigenvalues.resize(0);
    b.vectors.resize(n, 0);
    b.V.resize(0, 0);
    return b;
  }
  const Matrix ltl = chol.L.transpose() * chol.L;
  const SymmetricEigen e = symmetric_eigen(ltl);
  const double top = e.values[0];
  Index kept = 0;
  while (kept < e.values.size() && e.values[kept] > 1e-14 * top && e.values[kept] > 0.0) ++kept;
  b.eigenvalues = e.values.head(kept);
  b.V = e.vectors.leftCols(kept);
  const Matrix pivoted = chol.L * b.V;
  b.vectors.resize(n, kept);
  for (Index a = 0; a < kept; ++a) {
    const double s = 1.0 / std::sqrt(b.eigenvalues[a]);
    for (Index k = 0; k < n; ++k) b.vectors(chol.permutation[k], a) = pivoted(k, a) * s;
    detail::fix_signs(b.vectors, a, &b.V);
  }
  b.rank_retained = kept;
  return b;
}

struct ProjectedLogLik {
  Matrix projections;     ///< M x a_M, columns L_a
  Matrix projected_loglik;///< M x n, columns l*_i
  Matrix basis_vectors;   ///< n x a_M leading eigenvectors used
  Vector eigenvalues;     ///< all eigenvalues of the basis
  Index a_M = 0;
};

inline ProjectedLogLik project_loglik(const LogLikMatrix& loglik, const SpectralBasis& basis, Index a_M) {
  if (a_M < 0 || a_M > basis.vectors.cols()) {
    fail(ErrorCode::InvalidInput, "a_M = " + std::to_string(a_M) + " outside [0, " + std::to_string(basis.vectors.cols()) + "]");
  }
  require(basis.vectors.rows() == loglik.n(), "basis dimension does not match loglik observations");
  ProjectedLogLik out;
  out.a_M = a_M;
  out.basis_vectors = basis.vectors.leftCols(a_M);
  out.eigenvalues = basis.eigenvalues;
  out.projections = loglik.values() * out.basis_vectors;
  out.projected_loglik = out.projections * out.basis_vectors.transpose();
  return out;
}

inline Vector project_perturbation(const Vector& eta, const SpectralBasis& basis, Index a_M) {
  require(eta.size() == basis.vectors.rows(), "perturbation length does not match basis");
  require(a_M >= 0 && a_M <= basis.vectors.cols(), "a_M out of range");
  return basis.vectors.leftCols(a_M).transpose() * eta;
}

inline Vector project_perturbation(const WeightVector& w, const SpectralBasis& basis, Index a_M) {
  return project_perturbation(w.eta(), basis, a_M);
}

struct RepresentativeSet {
  std::vector<Index> indices;
  Matrix eta_map;      ///< L in original row order, n x a_M; eta_dagger = eta_map^T eta
  Matrix V;            ///< eigen link
  Vector eigenvalues;

  /// eta_dagger restricted to the pivot observations.
  Vector eta_dagger(const Vector& eta) const { return eta_map.transpose() * eta; }

  /// eta_tilde_a = (1/sqrt(lambda_a)) sum_b V_ba eta_dagger_b.
  Vector eta_tilde(const Vector& eta) const {
    const Vector dag = eta_dagger(eta);
    Vector out = V.transpose() * dag;
    for (Index a = 0; a < out.size(); ++a) out[a] /= std::sqrt(eigenvalues[a]);
    return out;
  }
};

inline RepresentativeSet representative_set(const PivotedCholesky& chol, const SpectralBasis& basis) {
  require(basis.V.rows() == chol.a_M, "basis was not derived from this factorization");
  RepresentativeSet rep;
  rep.indices = chol.pivots;
  rep.eta_map = unpermuted_factor(chol);
  rep.V = basis.V;
  rep.eigenvalues = basis.eigenvalues;
  return rep;
}

inline LogLikMatrix subsample_draws(const LogLikMatrix& loglik, Index m_star, std::uint64_t seed) {
  if (m_star < 2 || m_star > loglik.M()) {
    fail(ErrorCode::InvalidInput, "m_star = " + std::to_string(m_star) + " outside [2, " + std::to_string(loglik.M()) + "]");
  }
  std::vector<Index> idx(static_cast<std::size_t>(loglik.M()));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (m_star < loglik.M()) {
    Rng rng(seed);
    for (Index k = 0; k < m_star; ++k) {
      const Index j = k + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(loglik.M() - k)));
      std::swap(idx[k], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(m_star));
    std::sort(idx.begin(), idx.end());
  }
  Matrix out(m_star, loglik.n());
  for (Index k = 0; k < m_star; ++k) out.row(k) = loglik.values().row(idx[k]);
  return LogLikMatrix(std::move(out));
}

/// Posterior variance of each residual l_i - l*_i.
inline Vector residual_variances(const LogLikMatrix& loglik, const ProjectedLogLik& proj) {
  const Matrix r = center_columns(loglik.values() - proj.projected_loglik);
  return (r.array().square().colwise().sum() / static_cast<double>(loglik.M())).transpose();
}

/// tr((I - P) W (I - P)) for the projector P onto the retained vectors. Equals the eigenvalue tail for an eigenbasis.
inline double residual_trace_bound(const Matrix& w, const ProjectedLogLik& proj) {
  const Matrix& u = proj.basis_vectors;
  const Matrix wu = w * u;
  return w.trace() - 2.0 * (u.transpose() * wu).trace() + (u.transpose() * wu * (u.transpose() * u)).trace();
}

inline double covariance_error_bound(double var_a, double tail) { return std::sqrt(std::max(var_a, 0.0) * std::max(tail, 0.0)); }

inline double third_cumulant_error_bound(double sup_dev_a, double var_i, double var_j, double tail) {
  return sup_dev_a * (std::sqrt(std::max(var_i, 0.0)) + std::sqrt(std::max(var_j, 0.0))) * std::sqrt(std::max(tail, 0.0));
}

}  // namespace bayesij
