#pragma once

/// \file bootstrap.hpp
/// \brief Multinomial resampling and approximate bootstraps of posterior means.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bayesij/core.hpp"
#include "bayesij/freq_eval.hpp"
#include "bayesij/random.hpp"
#include "bayesij/spectral.hpp"

namespace bayesij {

/// Runs fn(0..count-1) over at most `threads` workers with a fixed static schedule.
template <class F>
void parallel_for(Index count, int threads, F&& fn) {
  const Index workers = std::max<Index>(1, std::min<Index>(threads, count));
  if (workers <= 1) {
    for (Index b = 0; b < count; ++b) fn(b);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (Index t = 0; t < workers; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (Index b = t; b < count; b += workers) fn(b);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ResampleDraw {
  std::vector<int> counts;

  Vector eta() const {
    Vector e(static_cast<Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) e[static_cast<Index>(i)] = counts[i] - 1.0;
    return e;
  }
};

inline ResampleDraw one_multinomial(Index n, Rng& rng) {
  ResampleDraw r;
  r.counts.assign(static_cast<std::size_t>(n), 0);
  for (Index t = 0; t < n; ++t) ++r.counts[static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(n)))];
  return r;
}

inline std::vector<ResampleDraw> draw_resamples(Index n, Index n_b, std::uint64_t seed) {
  require(n >= 1, "draw_resamples needs n >= 1");
  require(n_b >= 1, "draw_resamples needs n_b >= 1");
  std::vector<ResampleDraw> out(static_cast<std::size_t>(n_b));
  for (Index b = 0; b < n_b; ++b) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b));
    out[static_cast<std::size_t>(b)] = one_multinomial(n, rng);
  }
  return out;
}

enum class BootMethod { first, second_direct, second_efficient, second_projected, importance, gold };

inline const char* to_string(BootMethod m) {
  switch (m) {
    case BootMethod::first: return "first";
    case BootMethod::second_direct: return "second_direct";
    case BootMethod::second_efficient: return "second_efficient";
    case BootMethod::second_projected: return "second_projected";
    case BootMethod::importance: return "importance";
    case BootMethod::gold: return "gold";
  }
  return "unknown";
}

struct BootstrapRun {
  Matrix estimates;  ///< N_b x p
  BootMethod method = BootMethod::first;
  std::optional<Index> rank_used;
  std::uint64_t seed = 0;
  Index draws_used = 0;
  std::vector<char> degenerate;  ///< per replicate; only the importance method sets entries
};

struct ImportanceDiagnostics {
  Vector max_weight;
  Vector ess;
};

struct BootOptions {
  int threads = 1;
  std::uint64_t seed = 0;     ///< recorded in the run
  double tensor_budget = 1e8; ///< direct second-order tensor when p n^2 <= budget
};

namespace detail {

inline Matrix eta_matrix(const std::vector<ResampleDraw>& resamples, Index n) {
  Matrix e(n, static_cast<Index>(resamples.size()));
  for (std::size_t b = 0; b < resamples.size(); ++b) {
    require(static_cast<Index>(resamples[b].counts.size()) == n,
            "resample length " + std::to_string(resamples[b].counts.size()) + " does not match n = " + std::to_string(n));
    e.col(static_cast<Index>(b)) = resamples[b].eta();
  }
  return e;
}

inline BootstrapRun make_run(BootMethod m, Index nb, Index p, const LogLikMatrix& loglik, const BootOptions& opt) {
  BootstrapRun run;
  run.method = m;
  run.estimates = Matrix::Zero(nb, p);
  run.seed = opt.seed;
  run.draws_used = loglik.M();
  run.degenerate.assign(static_cast<std::size_t>(nb), 0);
  return run;
}

}  // namespace detail

/// A^(B) = E[A] + sum_i eta_i Cov[A, l_i]; with a projection, eta is replaced by U^T eta and l by the projections.
inline BootstrapRun boot_first(const StatMatrix& stats, const LogLikMatrix& loglik, const std::vector<ResampleDraw>& resamples,
                               const BootOptions& opt = {}, const ProjectedLogLik* projection = nullptr) {
  check_pair(stats, loglik);
  const Index nb = static_cast<Index>(resamples.size());
  BootstrapRun run = detail::make_run(BootMethod::first, nb, stats.p(), loglik, opt);
  const Vector mean = posterior_mean(stats);
  Matrix eta = detail::eta_matrix(resamples, loglik.n());
  Matrix g;
  if (projection != nullptr) {
    g = cov_grid(stats.values(), projection->projections);
    eta = projection->basis_vectors.transpose() * eta;
    run.rank_used = projection->a_M;
  } else {
    g = cov_grid(stats.values(), loglik.values());
  }
  parallel_for(nb, opt.threads, [&](Index b) {
    run.estimates.row(b) = (mean + g * eta.col(b)).transpose();
  });
  return run;
}

enum class SecondMode { automatic, direct, efficient, projected };

/// Adds (1/2) sum_ij eta_i eta_j K[A, l_i, l_j] to the first-order estimate.
inline BootstrapRun boot_second(const StatMatrix& stats, const LogLikMatrix& loglik, const std::vector<ResampleDraw>& resamples,
                                SecondMode mode = SecondMode::automatic, const ProjectedLogLik* projection = nullptr,
                                const BootOptions& opt = {}) {
  check_pair(stats, loglik);
  const Index nb = static_cast<Index>(resamples.size());
  const Index n = loglik.n();
  const Index p = stats.p();
  const double inv_m = 1.0 / static_cast<double>(loglik.M());
  if (mode == SecondMode::automatic) {
    mode = static_cast<double>(p) * static_cast<double>(n) * static_cast<double>(n) <= opt.tensor_budget ? SecondMode::direct
                                                                                                       : SecondMode::efficient;
  }
  if (mode == SecondMode::projected && projection == nullptr) {
    fail(ErrorCode::InvalidInput, "projected second-order bootstrap requires a projection");
  }
  const BootMethod method = mode == SecondMode::direct      ? BootMethod::second_direct
                            : mode == SecondMode::efficient ? BootMethod::second_efficient
                                                            : BootMethod::second_projected;
  BootstrapRun run = detail::make_run(method, nb, p, loglik, opt);
  const Vector mean = posterior_mean(stats);
  const Matrix eta = detail::eta_matrix(resamples, n);
  const Matrix lc = center_columns(loglik.values());
  const Matrix ac = center_columns(stats.values());
  const Matrix g = ac.transpose() * lc * inv_m;

  if (mode == SecondMode::direct) {
    const ThirdCumulantTensor k = sensitivity_second(stats, loglik.values());
    parallel_for(nb, opt.threads, [&](Index b) {
      const Vector e = eta.col(b);
      for (Index j = 0; j < p; ++j) run.estimates(b, j) = mean[j] + g.row(j).dot(e) + 0.5 * e.dot(k.slice(j) * e);
    });
  } else if (mode == SecondMode::efficient) {
    parallel_for(nb, opt.threads, [&](Index b) {
      const Vector e = eta.col(b);
      const Vector big_l = lc * e;
      const Vector sq = big_l.array().square().matrix();
      for (Index j = 0; j < p; ++j) {
        run.estimates(b, j) = mean[j] + g.row(j).dot(e) + 0.5 * ac.col(j).dot(sq) * inv_m;
      }
    });
  } else {
    run.rank_used = projection->a_M;
    const ThirdCumulantTensor k = sensitivity_second(stats, projection->projections);
    const Matrix eta_t = projection->basis_vectors.transpose() * eta;
    parallel_for(nb, opt.threads, [&](Index b) {
      const Vector e = eta.col(b);
      const Vector et = eta_t.col(b);
      for (Index j = 0; j < p; ++j) run.estimates(b, j) = mean[j] + g.row(j).dot(e) + 0.5 * et.dot(k.slice(j) * et);
    });
  }
  return run;
}

struct ImportanceResult {
  BootstrapRun run;
  ImportanceDiagnostics diagnostics;
};

/// Self-normalized reweighting with weights proportional to exp(sum_i eta_i l[u,i]).
inline ImportanceResult boot_importance(const StatMatrix& stats, const LogLikMatrix& loglik,
                                        const std::vector<ResampleDraw>& resamples, const BootOptions& opt = {}) {
  check_pair(stats, loglik);
  const Index nb = static_cast<Index>(resamples.size());
  const Index m = loglik.M();
  ImportanceResult res;
  res.run = detail::make_run(BootMethod::importance, nb, stats.p(), loglik, opt);
  res.diagnostics.max_weight = Vector::Zero(nb);
  res.diagnostics.ess = Vector::Zero(nb);
  const Matrix eta = detail::eta_matrix(resamples, loglik.n());
  parallel_for(nb, opt.threads, [&](Index b) {
    const Vector lw = loglik.values() * eta.col(b);
    const double top = lw.maxCoeff();
    if (!std::isfinite(top)) {
      res.run.degenerate[static_cast<std::size_t>(b)] = 1;
      res.run.estimates.row(b).setConstant(std::numeric_limits<double>::quiet_NaN());
      res.diagnostics.max_weight[b] = std::numeric_limits<double>::quiet_NaN();
      res.diagnostics.ess[b] = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    Vector w(m);
    long double total = 0.0L;
    for (Index u = 0; u < m; ++u) {
      w[u] = std::exp(lw[u] - top);
      total += w[u];
    }
    if (!(total > 0.0L) || !std::isfinite(static_cast<double>(total))) {
      res.run.degenerate[static_cast<std::size_t>(b)] = 1;
      res.run.estimates.row(b).setConstant(std::numeric_limits<double>::quiet_NaN());
      res.diagnostics.max_weight[b] = std::numeric_limits<double>::quiet_NaN();
      res.diagnostics.ess[b] = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    long double sq = 0.0L;
    for (Index u = 0; u < m; ++u) {
      w[u] = static_cast<double>(w[u] / total);
      sq += static_cast<long double>(w[u]) * w[u];
    }
    for (Index j = 0; j < stats.p(); ++j) {
      long double s = 0.0L;
      for (Index u = 0; u < m; ++u) s += static_cast<long double>(w[u]) * stats.values()(u, j);
      res.run.estimates(b, j) = static_cast<double>(s);
    }
    res.diagnostics.max_weight[b] = w.maxCoeff();
    res.diagnostics.ess[b] = static_cast<double>(1.0L / sq);
  });
  return res;
}

using Refitter = std::function<Vector(const ResampleDraw&)>;

/// Collects refit estimates from a caller-supplied model refitter.
inline BootstrapRun boot_gold(const Refitter& refit, const std::vector<ResampleDraw>& resamples, Index draws_used = 0,
                              const BootOptions& opt = {}) {
  const Index nb = static_cast<Index>(resamples.size());
  BootstrapRun run;
  run.method = BootMethod::gold;
  run.seed = opt.seed;
  run.draws_used = draws_used;
  run.degenerate.assign(static_cast<std::size_t>(nb), 0);
  std::vector<Vector> rows(static_cast<std::size_t>(nb));
  parallel_for(nb, opt.threads, [&](Index b) {
    try {
      rows[static_cast<std::size_t>(b)] = refit(resamples[static_cast<std::size_t>(b)]);
    } catch (const Error& e) {
      throw Error(e.code(), "replicate " + std::to_string(b) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::NumericalFailure, "replicate " + std::to_string(b) + ": " + e.what());
    }
  });
  const Index p = nb > 0 ? rows[0].size() : 0;
  run.estimates.resize(nb, p);
  for (Index b = 0; b < nb; ++b) {
    require(rows[static_cast<std::size_t>(b)].size() == p, "refitter returned inconsistent lengths");
    run.estimates.row(b) = rows[static_cast<std::size_t>(b)].transpose();
  }
  return run;
}

/// Type-7 quantile (linear interpolation between order statistics) of a sorted sample.
inline double quantile_type7(const std::vector<double>& sorted, double prob) {
  require(!sorted.empty(), "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct BootSummary {
  Vector mean, var, q10, q25, q75, q90;
  Index used = 0;
  Index flagged = 0;
};

inline BootSummary summarize(const BootstrapRun& run) {
  const Index nb = run.estimates.rows();
  const Index p = run.estimates.cols();
  BootSummary s;
  for (Index b = 0; b < nb; ++b) (run.degenerate.size() > static_cast<std::size_t>(b) && run.degenerate[b]) ? ++s.flagged : ++s.used;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.mean = Vector::Constant(p, nan);
  s.var = s.q10 = s.q25 = s.q75 = s.q90 = s.mean;
  if (s.used == 0) return s;
  for (Index j = 0; j < p; ++j) {
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(s.used));
    for (Index b = 0; b < nb; ++b)
      if (!(run.degenerate.size() > static_cast<std::size_t>(b) && run.degenerate[b])) xs.push_back(run.estimates(b, j));
    const Vector v = Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
    const long double mu = detail::mean_ld(v);
    long double ss = 0.0L;
    for (double x : xs) ss += (x - mu) * (x - mu);
    s.mean[j] = static_cast<double>(mu);
    s.var[j] = static_cast<double>(ss / static_cast<long double>(xs.size()));
    std::sort(xs.begin(), xs.end());
    s.q10[j] = quantile_type7(xs, 0.10);
    s.q25[j] = quantile_type7(xs, 0.25);
    s.q75[j] = quantile_type7(xs, 0.75);
    s.q90[j] = quantile_type7(xs, 0.90);
  }
  return s;
}

}  // namespace bayesij
