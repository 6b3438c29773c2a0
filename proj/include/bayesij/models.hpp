#pragma once

/// \file models.hpp
/// \brief Toy models that generate data and posterior draws: Weibull, beta-binomial,
/// normal mean and cubic regression.

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bayesij/bootstrap.hpp"
#include "bayesij/core.hpp"
#include "bayesij/kernels.hpp"
#include "bayesij/random.hpp"

namespace bayesij {

enum class StatId { q_mean, theta_mean };

struct ModelBundle {
  std::string model;
  Vector data;
  Vector covariates;  ///< regression only
  Matrix draws;       ///< M x k
  std::vector<std::string> param_names;
  LogLikMatrix loglik;
  LogPriorVector logprior;
  std::optional<ScoreMatrix> scores;
  Vector theta_hat;
  double acceptance_rate = 1.0;
  std::vector<std::string> warnings;
  std::function<double(const WeightVector&, StatId)> exact_weighted_mean;

  StatMatrix param_stats() const { return StatMatrix(draws, param_names); }
};

/// Random-walk Metropolis settings.
struct McmcConfig {
  int chains = 4;
  int iters = 1000;    ///< retained draws per chain
  int burn_in = 1000;  ///< adaptation phase, discarded
  double init_step = 1.0;
  std::uint64_t seed = 1;
};

struct McmcResult {
  Matrix draws;  ///< M x k unconstrained coordinates, chain-major
  std::vector<double> chain_acceptance;
  double acceptance_rate = 0.0;
  Vector mode;
};

namespace detail {

/// Nelder-Mead maximization of f.
inline Vector nelder_mead_max(const std::function<double(const Vector&)>& f, const Vector& x0, double step,
                              int max_iter = 4000, double tol = 1e-12) {
  const Index k = x0.size();
  std::vector<Vector> pts(static_cast<std::size_t>(k + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(k + 1));
  for (Index i = 0; i < k; ++i) pts[static_cast<std::size_t>(i + 1)][i] += step;
  auto neg = [&](const Vector& x) {
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = neg(pts[i]);
  std::vector<std::size_t> order(pts.size());
  for (int it = 0; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::abs(val[worst] - val[best]) <= tol * (std::abs(val[best]) + 1e-300) && it > 10) {
      double spread = 0.0;
      for (auto& p : pts) spread = std::max(spread, (p - pts[best]).cwiseAbs().maxCoeff());
      if (spread < 1e-9) break;
    }
    Vector centroid = Vector::Zero(k);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(k);
    const Vector xr = centroid + (centroid - pts[worst]);
    const double fr = neg(xr);
    if (fr < val[best]) {
      const Vector xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = neg(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      const bool outside = fr < val[worst];
      const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = neg(xc);
      if (fc < std::min(fr, val[worst])) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          val[i] = neg(pts[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (val[i] < val[best]) best = i;
  return pts[best];
}

/// Negative Hessian of f by central differences.
inline Matrix neg_hessian(const std::function<double(const Vector&)>& f, const Vector& x) {
  const Index k = x.size();
  Matrix h(k, k);
  Vector step(k);
  for (Index i = 0; i < k; ++i) step[i] = 1e-4 * std::max(1.0, std::abs(x[i]));
  for (Index i = 0; i < k; ++i) {
    for (Index j = i; j < k; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp[i] += step[i];
      pp[j] += step[j];
      pm[i] += step[i];
      pm[j] -= step[j];
      mp[i] -= step[i];
      mp[j] += step[j];
      mm[i] -= step[i];
      mm[j] -= step[j];
      const double v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step[i] * step[j]);
      h(i, j) = -v;
      h(j, i) = -v;
    }
  }
  return h;
}

}  // namespace detail

/// Adaptive random-walk Metropolis on coordinates whitened by the Laplace approximation at the mode.
/// Diagonal proposal whose common scale follows a Robbins-Monro recursion toward 0.3 acceptance
/// during burn-in and is frozen afterwards.
inline McmcResult run_metropolis(const std::function<double(const Vector&)>& log_target, const Vector& init,
                                 const McmcConfig& cfg) {
  require(cfg.chains >= 1 && cfg.iters >= 1 && cfg.burn_in >= 0, "invalid MCMC configuration");
  const Index k = init.size();
  McmcResult res;
  res.mode = detail::nelder_mead_max(log_target, init, 0.5);
  Matrix h = detail::neg_hessian(log_target, res.mode);
  h = 0.5 * (h + h.transpose());
  Eigen::LLT<Matrix> llt_h(h);
  Matrix chol;
  if (llt_h.info() == Eigen::Success) {
    chol = llt_h.matrixL().solve(Matrix::Identity(k, k)).transpose();
  } else {
    chol = Matrix::Identity(k, k);
  }
  res.draws.resize(static_cast<Index>(cfg.chains) * cfg.iters, k);
  const double target_rate = 0.3;
  long total_accept = 0;
  for (int c = 0; c < cfg.chains; ++c) {
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(c));
    Vector z(k);
    for (Index j = 0; j < k; ++j) z[j] = rng.normal();
    auto to_x = [&](const Vector& zz) { return Vector(res.mode + chol * zz); };
    double cur = log_target(to_x(z));
    if (!std::isfinite(cur)) {
      z.setZero();
      cur = log_target(to_x(z));
    }
    double log_scale = std::log(cfg.init_step * 2.38 / std::sqrt(static_cast<double>(k)));
    long accepted = 0;
    for (int t = 0; t < cfg.burn_in + cfg.iters; ++t) {
      Vector prop = z;
      const double s = std::exp(log_scale);
      for (Index j = 0; j < k; ++j) prop[j] += s * rng.normal();
      const double val = log_target(to_x(prop));
      const double log_u = std::log(rng.uniform_open());
      const bool accept = std::isfinite(val) && log_u < val - cur;
      if (accept) {
        z = prop;
        cur = val;
      }
      if (t < cfg.burn_in) {
        log_scale += ((accept ? 1.0 : 0.0) - target_rate) / std::pow(t + 1.0, 0.6);
      } else {
        if (accept) ++accepted;
        res.draws.row(static_cast<Index>(c) * cfg.iters + (t - cfg.burn_in)) = to_x(z).transpose();
      }
    }
    res.chain_acceptance.push_back(static_cast<double>(accepted) / cfg.iters);
    total_accept += accepted;
  }
  res.acceptance_rate = static_cast<double>(total_accept) / (static_cast<double>(cfg.chains) * cfg.iters);
  return res;
}

inline void acceptance_warning(ModelBundle& b) {
  if (b.acceptance_rate < 0.1 || b.acceptance_rate > 0.6) {
    b.warnings.push_back("ConvergenceWarning: Metropolis acceptance rate " + std::to_string(b.acceptance_rate) +
                         " outside [0.1, 0.6]");
  }
}

// ---------------------------------------------------------------- Weibull

inline double weibull_logpdf(double x, double gamma, double lambda) {
  if (!(x >= 0.0) || !(gamma > 0.0) || !(lambda > 0.0)) fail(ErrorCode::InvalidInput, "weibull_logpdf domain violation");
  const double t = std::log(x / lambda);
  return std::log(gamma / lambda) + (gamma - 1.0) * t - std::pow(x / lambda, gamma);
}

struct WeibullConfig {
  double gamma = 2.0;
  double lambda = 50.0;
  Index n = 59;
  std::uint64_t data_seed = 1;
  McmcConfig mcmc{};
  std::optional<Vector> data;
};

inline Vector weibull_sample(Index n, double gamma, double lambda, Rng& rng) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = lambda * std::pow(-std::log(rng.uniform_open()), 1.0 / gamma);
  return x;
}

/// Per-observation scores and averaged negative Hessian in (gamma, lambda).
inline ScoreMatrix weibull_scores(const Vector& x, double gamma, double lambda) {
  const Index n = x.size();
  ScoreMatrix s{Matrix(n, 2), Matrix::Zero(2, 2)};
  for (Index i = 0; i < n; ++i) {
    const double t = std::log(x[i] / lambda);
    const double u = std::pow(x[i] / lambda, gamma);
    s.values(i, 0) = 1.0 / gamma + t - u * t;
    s.values(i, 1) = (gamma / lambda) * (u - 1.0);
    const double hgg = -1.0 / (gamma * gamma) - u * t * t;
    const double hgl = (-1.0 + u + gamma * u * t) / lambda;
    const double hll = -(gamma / (lambda * lambda)) * (u - 1.0 + gamma * u);
    s.hessian_sum(0, 0) -= hgg;
    s.hessian_sum(0, 1) -= hgl;
    s.hessian_sum(1, 1) -= hll;
  }
  s.hessian_sum(1, 0) = s.hessian_sum(0, 1);
  s.hessian_sum /= static_cast<double>(n);
  return s;
}

inline ModelBundle run_weibull(const WeibullConfig& cfg) {
  require(cfg.gamma > 0.0 && cfg.lambda > 0.0, "Weibull parameters must be positive");
  ModelBundle b;
  b.model = "weibull";
  if (cfg.data) {
    b.data = *cfg.data;
  } else {
    require(cfg.n >= 2, "Weibull demo needs n >= 2");
    Rng rng(cfg.data_seed);
    b.data = weibull_sample(cfg.n, cfg.gamma, cfg.lambda, rng);
  }
  const Vector& x = b.data;
  for (Index i = 0; i < x.size(); ++i) require(x[i] > 0.0, "Weibull data must be positive");
  auto loglik_sum = [&](double g, double l) {
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i) s += weibull_logpdf(x[i], g, l);
    return s;
  };
  // Flat prior on (gamma, lambda); the log-coordinate Jacobian enters the target.
  auto target = [&](const Vector& phi) {
    const double g = std::exp(phi[0]);
    const double l = std::exp(phi[1]);
    return loglik_sum(g, l) + phi[0] + phi[1];
  };
  const Vector init = Vector{{0.0, std::log(x.mean())}};
  const McmcResult chain = run_metropolis(target, init, cfg.mcmc);
  const Index m = chain.draws.rows();
  b.draws = chain.draws.array().exp().matrix();
  b.param_names = {"gamma", "lambda"};
  Matrix ll(m, x.size());
  for (Index u = 0; u < m; ++u)
    for (Index i = 0; i < x.size(); ++i) ll(u, i) = weibull_logpdf(x[i], b.draws(u, 0), b.draws(u, 1));
  b.loglik = LogLikMatrix(std::move(ll));
  b.logprior.values = chain.draws.rowwise().sum();
  b.logprior.prior_weight = 0.0;
  auto mle_target = [&](const Vector& phi) { return loglik_sum(std::exp(phi[0]), std::exp(phi[1])); };
  const Vector mle = detail::nelder_mead_max(mle_target, chain.mode, 0.1);
  b.theta_hat = mle.array().exp().matrix();
  b.scores = weibull_scores(x, b.theta_hat[0], b.theta_hat[1]);
  b.acceptance_rate = chain.acceptance_rate;
  acceptance_warning(b);
  return b;
}

/// Weibull survival exp(-(t / lambda)^gamma) at each draw.
inline Vector predictive_tail_stat(const ModelBundle& b, double threshold) {
  require(b.model == "weibull", "predictive_tail_stat needs a Weibull bundle");
  require(threshold >= 0.0, "threshold must be nonnegative");
  Vector out(b.draws.rows());
  for (Index u = 0; u < b.draws.rows(); ++u) out[u] = std::exp(-std::pow(threshold / b.draws(u, 1), b.draws(u, 0)));
  return out;
}

// ---------------------------------------------------------------- beta-binomial

inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

inline double betabinom_logpmf(int x, int trials, double q0, double rho) {
  if (trials < 0 || x < 0 || x > trials || !(q0 > 0.0 && q0 < 1.0) || !(rho > 0.0 && rho < 1.0)) {
    fail(ErrorCode::InvalidInput, "betabinom_logpmf domain violation");
  }
  const double a = q0 * (1.0 - rho) / rho;
  const double b = (1.0 - q0) * (1.0 - rho) / rho;
  return log_choose(trials, x) + log_beta_fn(x + a, trials - x + b) - log_beta_fn(a, b);
}

enum class DrawScheme { iid, stratified };

struct BetaBinomialConfig {
  int N = 5;
  Index n = 20;
  double q0 = 0.25;
  double rho = 0.65;
  double alpha = 1.0;
  double beta = 1.0;
  double prior_weight = 0.0;  ///< Lambda of the n Lambda log p~(q) term
  double shape_a = 0.0;       ///< log p~(q) = shape_a log q + shape_b log(1 - q)
  double shape_b = 0.0;
  Index M = 5000;
  std::uint64_t seed = 1;
  DrawScheme scheme = DrawScheme::iid;
  std::optional<std::vector<int>> data;
};

inline std::vector<int> betabinom_sample(Index n, int trials, double q0, double rho, Rng& rng) {
  std::vector<int> x(static_cast<std::size_t>(n));
  double a = 0.0, b = 0.0;
  if (rho > 0.0) {
    a = q0 * (1.0 - rho) / rho;
    b = (1.0 - q0) * (1.0 - rho) / rho;
  }
  for (auto& xi : x) {
    const double q = rho > 0.0 ? rng.beta(a, b) : q0;
    xi = rng.binomial(trials, q);
  }
  return x;
}

/// Posterior Beta parameters for weighted data.
inline std::pair<double, double> betabinom_posterior(const BetaBinomialConfig& cfg, const std::vector<int>& x, const Vector& w) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sn = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += w[static_cast<Index>(i)] * x[i];
    sn += w[static_cast<Index>(i)] * cfg.N;
  }
  return {cfg.alpha + sx + n * cfg.prior_weight * cfg.shape_a, cfg.beta + (sn - sx) + n * cfg.prior_weight * cfg.shape_b};
}

inline ModelBundle run_betabinomial(const BetaBinomialConfig& cfg) {
  require(cfg.N >= 1, "N must be positive");
  require(cfg.q0 > 0.0 && cfg.q0 < 1.0, "q0 must lie in (0, 1)");
  require(cfg.rho >= 0.0 && cfg.rho < 1.0, "rho must lie in [0, 1)");
  require(cfg.alpha > 0.0 && cfg.beta > 0.0, "prior parameters must be positive");
  require(cfg.M >= 2, "M must be at least 2");
  ModelBundle b;
  b.model = "betabinom";
  Rng rng(cfg.seed);
  std::vector<int> x;
  if (cfg.data) {
    x = *cfg.data;
  } else {
    require(cfg.n >= 1, "n must be positive");
    Rng data_rng = Rng::stream(cfg.seed, 0xDA7A);
    x = betabinom_sample(cfg.n, cfg.N, cfg.q0, cfg.rho, data_rng);
  }
  const Index n = static_cast<Index>(x.size());
  b.data.resize(n);
  for (Index i = 0; i < n; ++i) {
    require(x[static_cast<std::size_t>(i)] >= 0 && x[static_cast<std::size_t>(i)] <= cfg.N, "observation outside [0, N]");
    b.data[i] = x[static_cast<std::size_t>(i)];
  }
  const auto [pa, pb] = betabinom_posterior(cfg, x, Vector::Ones(n));
  b.draws.resize(cfg.M, 1);
  for (Index u = 0; u < cfg.M; ++u) {
    if (cfg.scheme == DrawScheme::stratified) {
      const double p = (static_cast<double>(u) + rng.uniform_open()) / static_cast<double>(cfg.M);
      b.draws(u, 0) = boost::math::ibeta_inv(pa, pb, p);
    } else {
      b.draws(u, 0) = rng.beta(pa, pb);
    }
    b.draws(u, 0) = std::clamp(b.draws(u, 0), 1e-300, 1.0 - 1e-16);
  }
  b.param_names = {"q"};
  Matrix ll(cfg.M, n);
  for (Index u = 0; u < cfg.M; ++u) {
    const double q = b.draws(u, 0);
    for (Index i = 0; i < n; ++i) {
      const int xi = x[static_cast<std::size_t>(i)];
      ll(u, i) = log_choose(cfg.N, xi) + xi * std::log(q) + (cfg.N - xi) * std::log1p(-q);
    }
  }
  b.loglik = LogLikMatrix(std::move(ll));
  b.logprior.values.resize(cfg.M);
  const double nd = static_cast<double>(n);
  for (Index u = 0; u < cfg.M; ++u) {
    const double q = b.draws(u, 0);
    b.logprior.values[u] = (cfg.alpha - 1.0 + nd * cfg.prior_weight * cfg.shape_a) * std::log(q) +
                           (cfg.beta - 1.0 + nd * cfg.prior_weight * cfg.shape_b) * std::log1p(-q);
  }
  b.logprior.prior_weight = cfg.prior_weight;
  double sx = 0.0;
  for (int xi : x) sx += xi;
  const double qhat = std::clamp(sx / (nd * cfg.N), 1e-6, 1.0 - 1e-6);
  b.theta_hat = Vector::Constant(1, qhat);
  ScoreMatrix s{Matrix(n, 1), Matrix::Zero(1, 1)};
  for (Index i = 0; i < n; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    s.values(i, 0) = xi / qhat - (cfg.N - xi) / (1.0 - qhat);
    s.hessian_sum(0, 0) += xi / (qhat * qhat) + (cfg.N - xi) / ((1.0 - qhat) * (1.0 - qhat));
  }
  s.hessian_sum /= nd;
  b.scores = s;
  b.exact_weighted_mean = [cfg, x](const WeightVector& w, StatId stat) {
    if (stat != StatId::q_mean) fail(ErrorCode::Unsupported, "beta-binomial oracle supports q_mean only");
    require(w.w.size() == static_cast<Index>(x.size()), "weight length mismatch");
    const auto [a, bb] = betabinom_posterior(cfg, x, w.w);
    return a / (a + bb);
  };
  return b;
}

// ---------------------------------------------------------------- normal mean

struct NormalMeanConfig {
  Index n = 200;
  double theta_true = 0.0;
  Index M = 20000;
  std::uint64_t seed = 1;
  std::optional<Vector> data;
};

inline ModelBundle run_normal_mean(const NormalMeanConfig& cfg) {
  require(cfg.M >= 2, "M must be at least 2");
  ModelBundle b;
  b.model = "normal";
  Rng rng(cfg.seed);
  if (cfg.data) {
    b.data = *cfg.data;
  } else {
    require(cfg.n >= 1, "n must be positive");
    Rng data_rng = Rng::stream(cfg.seed, 0xDA7A);
    b.data.resize(cfg.n);
    for (Index i = 0; i < cfg.n; ++i) b.data[i] = data_rng.normal(cfg.theta_true, 1.0);
  }
  const Index n = b.data.size();
  const double xbar = b.data.mean();
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  b.draws.resize(cfg.M, 1);
  for (Index u = 0; u < cfg.M; ++u) b.draws(u, 0) = rng.normal(xbar, sd);
  b.param_names = {"theta"};
  const double c = -0.5 * std::log(2.0 * std::numbers::pi);
  Matrix ll(cfg.M, n);
  for (Index u = 0; u < cfg.M; ++u)
    for (Index i = 0; i < n; ++i) {
      const double r = b.data[i] - b.draws(u, 0);
      ll(u, i) = c - 0.5 * r * r;
    }
  b.loglik = LogLikMatrix(std::move(ll));
  b.logprior.values = Vector::Zero(cfg.M);
  b.theta_hat = Vector::Constant(1, xbar);
  ScoreMatrix s{(b.data.array() - xbar).matrix(), Matrix::Identity(1, 1)};
  b.scores = s;
  const Vector data = b.data;
  b.exact_weighted_mean = [data](const WeightVector& w, StatId stat) {
    if (stat != StatId::theta_mean) fail(ErrorCode::Unsupported, "normal-mean oracle supports theta_mean only");
    require(w.w.size() == data.size(), "weight length mismatch");
    return w.w.dot(data) / w.w.sum();
  };
  return b;
}

// ---------------------------------------------------------------- cubic regression

enum class RegressionLikelihood { normal_known_sigma, normal_est_sigma, student_t };

struct RegressionConfig {
  Index n = 30;
  double sigma_true = 0.3;  ///< scale of the t4 noise
  double sigma_known = 0.1; ///< likelihood scale when sigma is given
  double nu = 5.0;
  RegressionLikelihood likelihood = RegressionLikelihood::normal_known_sigma;
  int degree = 3;
  std::uint64_t seed = 1;
  McmcConfig mcmc{};
  std::optional<Vector> z;
  std::optional<Vector> y;
};

inline double regression_curve(const Vector& beta, double z) {
  double s = 0.0, p = 1.0;
  for (Index k = 0; k < beta.size(); ++k) {
    s += beta[k] * p;
    p *= z;
  }
  return s;
}

namespace detail {

inline double regression_obs_loglik(const RegressionConfig& cfg, double y, double f, double sigma) {
  const double r = y - f;
  switch (cfg.likelihood) {
    case RegressionLikelihood::normal_known_sigma:
    case RegressionLikelihood::normal_est_sigma:
      return -0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) - 0.5 * r * r / (sigma * sigma);
    case RegressionLikelihood::student_t: {
      const double nu = cfg.nu;
      return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
             std::log(sigma) - 0.5 * (nu + 1.0) * std::log1p(r * r / (nu * sigma * sigma));
    }
  }
  return 0.0;
}

}  // namespace detail

inline ModelBundle run_regression(const RegressionConfig& cfg) {
  require(cfg.degree >= 0, "degree must be nonnegative");
  const Index nb = cfg.degree + 1;
  ModelBundle b;
  b.model = "regression";
  Rng data_rng = Rng::stream(cfg.seed, 0xDA7A);
  if (cfg.z) {
    b.covariates = *cfg.z;
  } else {
    b.covariates.resize(cfg.n);
    for (Index i = 0; i < cfg.n; ++i) {
      b.covariates[i] = cfg.n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(cfg.n - 1);
    }
  }
  const Index n = b.covariates.size();
  require(n >= cfg.degree + 2, "regression needs n >= degree + 2");
  if (cfg.y) {
    require(cfg.y->size() == n, "response length does not match covariates");
    b.data = *cfg.y;
  } else {
    b.data.resize(n);
    for (Index i = 0; i < n; ++i) {
      b.data[i] = std::sin(std::numbers::pi * b.covariates[i]) + cfg.sigma_true * data_rng.student_t(4.0);
    }
  }
  const bool est_sigma = cfg.likelihood != RegressionLikelihood::normal_known_sigma;
  const Index k = nb + (est_sigma ? 1 : 0);
  const Vector z = b.covariates;
  const Vector y = b.data;
  auto obs_ll = [cfg, z, y, nb, est_sigma](const Vector& theta, Index i) {
    const double sigma = est_sigma ? theta[nb] : cfg.sigma_known;
    return detail::regression_obs_loglik(cfg, y[i], regression_curve(theta.head(nb), z[i]), sigma);
  };
  auto to_theta = [nb, est_sigma](const Vector& phi) {
    Vector t = phi;
    if (est_sigma) t[nb] = std::exp(phi[nb]);
    return t;
  };
  auto target = [&](const Vector& phi) {
    const Vector theta = to_theta(phi);
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += obs_ll(theta, i);
    return s + (est_sigma ? phi[nb] : 0.0);
  };
  // Least-squares start.
  Matrix x(n, nb);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < nb; ++j) x(i, j) = std::pow(z[i], static_cast<double>(j));
  const Vector ls = x.colPivHouseholderQr().solve(y);
  Vector init(k);
  init.head(nb) = ls;
  if (est_sigma) init[nb] = std::log(std::max(std::sqrt((y - x * ls).squaredNorm() / n), 1e-3));
  const McmcResult chain = run_metropolis(target, init, cfg.mcmc);
  const Index m = chain.draws.rows();
  b.draws.resize(m, k);
  for (Index u = 0; u < m; ++u) b.draws.row(u) = to_theta(chain.draws.row(u).transpose()).transpose();
  for (Index j = 0; j < nb; ++j) b.param_names.push_back("beta" + std::to_string(j));
  if (est_sigma) b.param_names.push_back("sigma");
  Matrix ll(m, n);
  for (Index u = 0; u < m; ++u) {
    const Vector theta = b.draws.row(u).transpose();
    for (Index i = 0; i < n; ++i) ll(u, i) = obs_ll(theta, i);
  }
  b.loglik = LogLikMatrix(std::move(ll));
  b.logprior.values = est_sigma ? Vector(chain.draws.col(nb)) : Vector(Vector::Zero(m));
  auto mle_target = [&](const Vector& phi) {
    const Vector theta = to_theta(phi);
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += obs_ll(theta, i);
    return s;
  };
  const Vector mle = detail::nelder_mead_max(mle_target, chain.mode, 0.05);
  b.theta_hat = to_theta(mle);
  ScoreMatrix s{Matrix(n, k), Matrix::Zero(k, k)};
  for (Index i = 0; i < n; ++i) {
    auto fi = [&](const Vector& t) { return obs_ll(t, i); };
    for (Index a = 0; a < k; ++a) {
      const double h = 1e-6 * std::max(1.0, std::abs(b.theta_hat[a]));
      Vector tp = b.theta_hat, tm = b.theta_hat;
      tp[a] += h;
      tm[a] -= h;
      s.values(i, a) = (fi(tp) - fi(tm)) / (2.0 * h);
    }
    s.hessian_sum += detail::neg_hessian(fi, b.theta_hat);
  }
  s.hessian_sum /= static_cast<double>(n);
  b.scores = s;
  b.acceptance_rate = chain.acceptance_rate;
  acceptance_warning(b);
  return b;
}

/// Fitted curve at each grid point for each draw, M x grid.
inline Matrix regression_curve_stats(const ModelBundle& b, const Vector& grid) {
  require(b.model == "regression", "curve statistics need a regression bundle");
  Index nb = 0;
  for (const auto& name : b.param_names)
    if (name.rfind("beta", 0) == 0) ++nb;
  Matrix out(b.draws.rows(), grid.size());
  for (Index u = 0; u < b.draws.rows(); ++u) {
    const Vector beta = b.draws.row(u).head(nb).transpose();
    for (Index g = 0; g < grid.size(); ++g) out(u, g) = regression_curve(beta, grid[g]);
  }
  return out;
}

/// First-order shift of posterior means when observation `from` is removed and `into` is doubled.
inline Vector merge_shift(const StatMatrix& stats, const LogLikMatrix& loglik, Index from, Index into) {
  check_pair(stats, loglik);
  require(from >= 0 && from < loglik.n() && into >= 0 && into < loglik.n(), "merge indices out of range");
  if (from == into) return Vector::Zero(stats.p());
  const Matrix g = cov_grid(stats.values(), loglik.values());
  return g.col(into) - g.col(from);
}

inline Vector merge_shift_experiment(const ModelBundle& b, Index from, Index into, const Vector& grid) {
  return merge_shift(StatMatrix(regression_curve_stats(b, grid)), b.loglik, from, into);
}

inline double exact_weighted_mean(const ModelBundle& b, const WeightVector& w, StatId stat) {
  if (!b.exact_weighted_mean) fail(ErrorCode::Unsupported, "model " + b.model + " has no conjugate oracle");
  return b.exact_weighted_mean(w, stat);
}

/// Refitter for gold-standard bootstraps of conjugate models.
inline Refitter conjugate_refitter(const ModelBundle& b, StatId stat) {
  if (!b.exact_weighted_mean) fail(ErrorCode::Unsupported, "model " + b.model + " has no conjugate oracle");
  auto oracle = b.exact_weighted_mean;
  return [oracle, stat](const ResampleDraw& r) {
    WeightVector w{Vector(static_cast<Index>(r.counts.size()))};
    for (std::size_t i = 0; i < r.counts.size(); ++i) w.w[static_cast<Index>(i)] = r.counts[i];
    return Vector(Vector::Constant(1, oracle(w, stat)));
  };
}

}  // namespace bayesij
