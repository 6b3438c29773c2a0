#pragma once

/// \file core.hpp
/// \brief Matrix containers and the posterior/empirical moment engine.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bayesij/error.hpp"

namespace bayesij {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

template <class V>
long double mean_ld(const V& v) {
  long double s = 0.0L;
  for (Index u = 0; u < v.size(); ++u) s += static_cast<long double>(v[u]);
  return s / static_cast<long double>(v.size());
}

}  // namespace detail

/// \brief Per-observation log-likelihoods at posterior draws, M draws by n observations.
class LogLikMatrix {
 public:
  LogLikMatrix() = default;

  explicit LogLikMatrix(Matrix values) : values_(std::move(values)) {
    require(values_.rows() >= 2, "loglik needs at least 2 draws, got " + detail::shape(values_));
    require(values_.cols() >= 1, "loglik needs at least 1 observation");
    require(detail::all_finite(values_), "loglik entries must be finite");
  }

  const Matrix& values() const { return values_; }
  Index M() const { return values_.rows(); }
  Index n() const { return values_.cols(); }
  Vector column(Index i) const { return values_.col(i); }

 private:
  Matrix values_;
};

/// \brief Statistics A_j evaluated at each draw, M by p.
class StatMatrix {
 public:
  StatMatrix() = default;

  explicit StatMatrix(Matrix values, std::vector<std::string> names = {})
      : values_(std::move(values)), names_(std::move(names)) {
    require(detail::all_finite(values_), "statistic entries must be finite");
    if (names_.empty()) {
      for (Index j = 0; j < values_.cols(); ++j) names_.push_back("A" + std::to_string(j + 1));
    }
    require(static_cast<Index>(names_.size()) == values_.cols(), "statistic names do not match column count");
  }

  const Matrix& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }
  Index M() const { return values_.rows(); }
  Index p() const { return values_.cols(); }

 private:
  Matrix values_;
  std::vector<std::string> names_;
};

/// \brief log p at each draw together with the prior strength.
struct LogPriorVector {
  Vector values;
  double prior_weight = 0.0;
};

/// \brief Observation weights; eta = w - 1.
struct WeightVector {
  Vector w;

  static WeightVector ones(Index n) { return {Vector::Ones(n)}; }
  static WeightVector from_eta(const Vector& eta) { return {(eta.array() + 1.0).matrix()}; }
  Vector eta() const { return (w.array() - 1.0).matrix(); }
};

/// \brief p x a x a tensor of third cumulants, symmetric in the last two indices.
class ThirdCumulantTensor {
 public:
  ThirdCumulantTensor() = default;
  ThirdCumulantTensor(Index p, Index a) : p_(p), a_(a), slices_(static_cast<std::size_t>(p), Matrix::Zero(a, a)) {}

  Index p() const { return p_; }
  Index a() const { return a_; }
  double operator()(Index j, Index alpha, Index beta) const { return slices_[j](alpha, beta); }
  const Matrix& slice(Index j) const { return slices_[j]; }
  Matrix& slice(Index j) { return slices_[j]; }

 private:
  Index p_ = 0;
  Index a_ = 0;
  std::vector<Matrix> slices_;
};

inline void check_pair(const StatMatrix& stats, const LogLikMatrix& loglik) {
  if (stats.M() != loglik.M()) {
    fail(ErrorCode::InvalidInput, "draw count mismatch: stats " + detail::shape(stats.values()) + " vs loglik " +
                                      detail::shape(loglik.values()));
  }
}

/// Column means with long double accumulation.
inline Vector column_means(const Matrix& m) {
  Vector out(m.cols());
  for (Index j = 0; j < m.cols(); ++j) out[j] = static_cast<double>(detail::mean_ld(m.col(j)));
  return out;
}

inline Matrix center_columns(const Matrix& m) {
  return m.rowwise() - column_means(m).transpose();
}

inline Vector posterior_mean(const Matrix& values) {
  if (values.rows() == 0 || values.cols() == 0) fail(ErrorCode::InvalidInput, "posterior_mean of empty matrix");
  return column_means(values);
}

inline Vector posterior_mean(const StatMatrix& stats) { return posterior_mean(stats.values()); }

inline double posterior_cov(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::InvalidInput,
         "length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  require(a.size() >= 2, "posterior_cov needs at least 2 draws");
  const long double ma = detail::mean_ld(a);
  const long double mb = detail::mean_ld(b);
  long double s = 0.0L;
  for (Index u = 0; u < a.size(); ++u) s += (a[u] - ma) * (b[u] - mb);
  return static_cast<double>(s / static_cast<long double>(a.size()));
}

inline double posterior_var(const Vector& a) { return posterior_cov(a, a); }

inline double third_cumulant(const Vector& a, const Vector& b, const Vector& c) {
  if (a.size() != b.size() || a.size() != c.size()) fail(ErrorCode::InvalidInput, "third_cumulant length mismatch");
  require(a.size() >= 3, "third_cumulant needs at least 3 draws");
  const long double ma = detail::mean_ld(a);
  const long double mb = detail::mean_ld(b);
  const long double mc = detail::mean_ld(c);
  long double s = 0.0L;
  for (Index u = 0; u < a.size(); ++u) s += (a[u] - ma) * (b[u] - mb) * (c[u] - mc);
  return static_cast<double>(s / static_cast<long double>(a.size()));
}

inline double empirical_cov_over_obs(const Vector& f, const Vector& g) {
  if (f.size() != g.size()) fail(ErrorCode::InvalidInput, "empirical_cov_over_obs length mismatch");
  require(f.size() >= 1, "empirical_cov_over_obs needs at least 1 observation");
  const long double mf = detail::mean_ld(f);
  const long double mg = detail::mean_ld(g);
  long double s = 0.0L;
  for (Index i = 0; i < f.size(); ++i) s += (f[i] - mf) * (g[i] - mg);
  return static_cast<double>(s / static_cast<long double>(f.size()));
}

/// p x n grid of Cov_pos[A_j, l_i].
inline Matrix cov_grid(const Matrix& stats, const Matrix& funcs) {
  require(stats.rows() == funcs.rows(),
          "cov_grid draw mismatch " + detail::shape(stats) + " vs " + detail::shape(funcs));
  const Matrix sc = center_columns(stats);
  const Matrix fc = center_columns(funcs);
  return (sc.transpose() * fc) / static_cast<double>(stats.rows());
}

inline double centered_cov_star(const Vector& stats_col, const LogLikMatrix& loglik, Index i) {
  if (i < 0 || i >= loglik.n()) fail(ErrorCode::InvalidInput, "observation index out of range: " + std::to_string(i));
  require(stats_col.size() == loglik.M(), "statistic length does not match draw count");
  const Matrix g = cov_grid(stats_col, loglik.values());
  return g(0, i) - g.row(0).mean();
}

}  // namespace bayesij
