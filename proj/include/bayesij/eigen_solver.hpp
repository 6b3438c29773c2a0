#pragma once

/// \file eigen_solver.hpp
/// \brief Dense symmetric eigensolvers: cyclic Jacobi and Householder tridiagonalization with implicit QL.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bayesij/core.hpp"

namespace bayesij {

struct SymmetricEigen {
  Vector values;   ///< descending
  Matrix vectors;  ///< columns are unit eigenvectors
};

namespace detail {

/// Largest-magnitude component positive; first such component on ties.
inline void fix_signs(Matrix& vectors, Index col, Matrix* partner = nullptr) {
  Index best = 0;
  double best_abs = -1.0;
  for (Index r = 0; r < vectors.rows(); ++r) {
    const double a = std::abs(vectors(r, col));
    if (a > best_abs * (1.0 + 1e-12) + 1e-300) {
      best_abs = a;
      best = r;
    }
  }
  if (vectors.rows() > 0 && vectors(best, col) < 0.0) {
    vectors.col(col) *= -1.0;
    if (partner != nullptr) partner->col(col) *= -1.0;
  }
}

inline SymmetricEigen sort_descending(const Vector& values, const Matrix& vectors) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] > values[b]; });
  SymmetricEigen out{Vector(values.size()), Matrix(vectors.rows(), values.size())};
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.values[static_cast<Index>(k)] = values[order[k]];
    out.vectors.col(static_cast<Index>(k)) = vectors.col(order[k]);
  }
  for (Index k = 0; k < out.vectors.cols(); ++k) fix_signs(out.vectors, k);
  return out;
}

inline SymmetricEigen jacobi_eigen(Matrix a, int max_sweeps) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) {
      return sort_descending(a.diagonal(), v);
    }
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-18 * scale) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  fail(ErrorCode::NumericalFailure, "Jacobi eigensolver did not converge");
}

// Householder reduction to tridiagonal form (tred2) followed by implicit QL (tql2).
inline SymmetricEigen tridiagonal_ql_eigen(const Matrix& a, int max_iter) {
  const Index n = a.rows();
  Matrix v = a;
  Vector d(n), e(n);
  for (Index j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (Index i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (Index k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (Index j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (Index k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (Index j = 0; j < i; ++j) e[j] = 0.0;
      for (Index j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (Index k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (Index j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (Index j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (Index j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (Index k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (Index i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (Index k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (Index j = 0; j <= i; ++j) {
        double g = 0.0;
        for (Index k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (Index k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (Index k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (Index j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  for (Index i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    Index m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iter) fail(ErrorCode::NumericalFailure, "QL eigensolver did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (Index i = l + 2; i < n; ++i) d[i] -= h;
        f += h;
        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (Index k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
          if (i == 0) break;
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] = d[l] + f;
    e[l] = 0.0;
  }
  return sort_descending(d, v);
}

}  // namespace detail

struct EigenOptions {
  Index max_n = 2000;
  Index jacobi_max_n = 200;
  int max_sweeps = 100;
  int max_ql_iter = 60;
};

/// All eigenpairs of a symmetric matrix, descending, with the sign convention applied.
inline SymmetricEigen symmetric_eigen(const Matrix& a, const EigenOptions& opt = {}) {
  require(a.rows() == a.cols(), "symmetric_eigen needs a square matrix, got " + detail::shape(a));
  if (a.rows() > opt.max_n) {
    fail(ErrorCode::InvalidInput, "matrix order " + std::to_string(a.rows()) + " exceeds eigensolver cap " +
                                      std::to_string(opt.max_n));
  }
  require(a.allFinite(), "symmetric_eigen input must be finite");
  if (a.rows() == 0) return {Vector(0), Matrix(0, 0)};
  const Matrix sym = 0.5 * (a + a.transpose());
  if (sym.rows() <= opt.jacobi_max_n) return detail::jacobi_eigen(sym, opt.max_sweeps);
  return detail::tridiagonal_ql_eigen(sym, opt.max_ql_iter);
}

}  // namespace bayesij
