#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>

#include "bayesij/freq_eval.hpp"
#include "bayesij/models.hpp"

using namespace bayesij;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvalues()[0];
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

BetaBinomialConfig exact_bb(Index m) {
  BetaBinomialConfig cfg;
  cfg.M = m;
  cfg.scheme = DrawScheme::stratified;
  cfg.seed = 17;
  return cfg;
}

double beta_kl(double a1, double b1, double a2, double b2) {
  using boost::math::digamma;
  return log_beta_fn(a2, b2) - log_beta_fn(a1, b1) + (a1 - a2) * digamma(a1) + (b1 - b2) * digamma(b1) +
         (a2 - a1 + b2 - b1) * digamma(a1 + b1);
}

}  // namespace

TEST(SensitivityFirst, ConstantStatisticIsZero) {
  const LogLikMatrix l(random_matrix(10, 4, 1));
  const SensitivityReport r = sensitivity_first(StatMatrix(Matrix::Constant(10, 1, 3.0)), l);
  EXPECT_TRUE(r.first_order.isZero(1e-15));
  EXPECT_FALSE(r.second_order.has_value());
}

TEST(SensitivityFirst, BetaBinomialFiniteDifference) {
  const ModelBundle b = run_betabinomial(exact_bb(50000));
  const Matrix g = sensitivity_first(b.param_stats(), b.loglik).first_order;
  const double h = 1e-4;
  for (Index i = 0; i < b.loglik.n(); ++i) {
    WeightVector wp = WeightVector::ones(b.loglik.n()), wm = wp;
    wp.w[i] += h;
    wm.w[i] -= h;
    const double fd = (exact_weighted_mean(b, wp, StatId::q_mean) - exact_weighted_mean(b, wm, StatId::q_mean)) / (2 * h);
    EXPECT_NEAR(g(0, i), fd, 0.02 * std::abs(fd)) << i;
  }
}

TEST(SensitivityFirst, SumMatchesTotalCovariance) {
  NormalMeanConfig cfg;
  cfg.n = 100;
  cfg.M = 20000;
  const ModelBundle b = run_normal_mean(cfg);
  const Matrix g = sensitivity_first(b.param_stats(), b.loglik).first_order;
  const Vector total = b.loglik.values().rowwise().sum();
  EXPECT_NEAR(g.sum(), posterior_cov(b.draws.col(0), total), 1e-10);
  EXPECT_LT(std::abs(g.sum()), 0.05 * g.cwiseAbs().sum());
}

TEST(SensitivitySecond, ConstantAndSymmetry) {
  const Matrix f = random_matrix(30, 4, 2);
  Matrix fc = f;
  fc.col(2).setConstant(1.5);
  const ThirdCumulantTensor t = sensitivity_second(StatMatrix(random_matrix(30, 2, 3)), fc);
  for (Index j = 0; j < 2; ++j) {
    EXPECT_TRUE(t.slice(j).row(2).isZero(1e-15));
    EXPECT_TRUE(t.slice(j).isApprox(t.slice(j).transpose(), 0));
  }
  const Matrix a = random_matrix(30, 1, 4);
  const ThirdCumulantTensor u = sensitivity_second(StatMatrix(a), f);
  EXPECT_NEAR(u(0, 1, 3), third_cumulant(a.col(0), f.col(1), f.col(3)), 1e-14);
  EXPECT_THROW(sensitivity_second(StatMatrix(random_matrix(5, 1, 1)), random_matrix(6, 2, 1)), Error);
}

TEST(SensitivitySecond, BetaBinomialFiniteDifference) {
  const ModelBundle b = run_betabinomial(exact_bb(50000));
  const ThirdCumulantTensor k = sensitivity_second(b.param_stats(), b.loglik.values());
  const double h = 1e-3;
  const Index n = b.loglik.n();
  auto e = [&](Index i, double di, Index j, double dj) {
    WeightVector w = WeightVector::ones(n);
    w.w[i] += di;
    w.w[j] += dj;
    return exact_weighted_mean(b, w, StatId::q_mean);
  };
  for (auto [i, j] : std::vector<std::pair<Index, Index>>{{0, 1}, {2, 2}, {3, 7}, {5, 11}, {19, 4}}) {
    const double fd = (e(i, h, j, h) - e(i, h, j, -h) - e(i, -h, j, h) + e(i, -h, j, -h)) / (4 * h * h);
    EXPECT_NEAR(k(0, i, j), fd, 0.05 * std::abs(fd)) << i << "," << j;
  }
}

TEST(FreqCov, ConstantStatisticAnyEstimator) {
  const LogLikMatrix l(random_matrix(20, 5, 8));
  const StatMatrix s(Matrix::Constant(20, 2, 1.0));
  const LogPriorVector lp{random_matrix(20, 1, 9).col(0), 0.0};
  const ProjectedLogLik proj = project_loglik(l, full_eigen(build_w(l)), 3);
  for (CovEstimator e : {CovEstimator::plain, CovEstimator::centered, CovEstimator::prior_adjusted, CovEstimator::projected}) {
    EXPECT_TRUE(freq_cov(s, l, e, &lp, &proj).values.isZero(1e-14)) << to_string(e);
  }
}

TEST(FreqCov, MissingInputs) {
  const LogLikMatrix l(random_matrix(20, 5, 8));
  const StatMatrix s(random_matrix(20, 1, 3));
  for (CovEstimator e : {CovEstimator::prior_adjusted, CovEstimator::projected}) {
    try {
      freq_cov(s, l, e);
      FAIL();
    } catch (const Error& err) {
      EXPECT_EQ(err.code(), ErrorCode::InvalidInput);
    }
  }
}

TEST(FreqCov, NormalMeanPlain) {
  NormalMeanConfig cfg;
  cfg.n = 100;
  cfg.M = 20000;
  cfg.seed = 4;
  const ModelBundle b = run_normal_mean(cfg);
  const double sigma = freq_cov(b.param_stats(), b.loglik, CovEstimator::plain).values(0, 0);
  double ref = 0;
  for (Index i = 0; i < 100; ++i) ref += std::pow(b.data[i] - b.data.mean(), 2) / (100.0 * 100.0);
  EXPECT_NEAR(sigma, ref, 0.15 * ref);
}

TEST(FreqCov, ProjectedCompleteEqualsPlainAndPsd) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const LogLikMatrix l(random_matrix(40, 7, s));
    const StatMatrix st(random_matrix(40, 3, s + 10));
    const SpectralBasis basis = full_eigen(build_w(l));
    const ProjectedLogLik proj = project_loglik(l, basis, 7);
    const Matrix plain = freq_cov(st, l, CovEstimator::plain).values;
    const FreqCovEstimate pe = freq_cov(st, l, CovEstimator::projected, nullptr, &proj);
    EXPECT_LT((pe.values - plain).cwiseAbs().maxCoeff(), 1e-10 * plain.cwiseAbs().maxCoeff());
    EXPECT_EQ(pe.rank_used, 7);
    const LogPriorVector lp{random_matrix(40, 1, s + 20).col(0), 0.0};
    for (CovEstimator e : {CovEstimator::plain, CovEstimator::centered, CovEstimator::prior_adjusted, CovEstimator::projected}) {
      const Matrix v = freq_cov(st, l, e, &lp, &proj).values;
      EXPECT_TRUE(v.isApprox(v.transpose()));
      EXPECT_GE(min_eigenvalue(v), -1e-12 * v.norm());
    }
    for (Index am = 0; am < 7; ++am) {
      const ProjectedLogLik pa = project_loglik(l, basis, am);
      const Matrix g = cov_grid(st.values(), l.values());
      const Matrix ga = cov_grid(st.values(), pa.projections);
      const Matrix est = freq_cov(st, l, CovEstimator::projected, nullptr, &pa).values;
      const double tail = basis.tail_sum(am);
      for (Index j = 0; j < 3; ++j) {
        const double va = posterior_var(st.values().col(j));
        const double bound = 2.0 * g.row(j).norm() * std::sqrt(va * tail) + va * tail;
        EXPECT_LE(std::abs(est(j, j) - plain(j, j)), bound + 1e-10);
        EXPECT_NEAR(est(j, j), ga.row(j).squaredNorm(), 1e-12);
      }
    }
  }
}

TEST(FreqCov, CenteredInvariantToDrawShift) {
  const Matrix lv = random_matrix(30, 6, 41);
  const StatMatrix st(random_matrix(30, 2, 42));
  const Vector c = 10.0 * random_matrix(30, 1, 43).col(0);
  const Matrix shifted = lv.colwise() + c;
  const Matrix a = freq_cov(st, LogLikMatrix(lv), CovEstimator::centered).values;
  const Matrix b = freq_cov(st, LogLikMatrix(shifted), CovEstimator::centered).values;
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9 * a.cwiseAbs().maxCoeff());
}

TEST(FreqCov, PriorAdjustedConstantPriorEqualsPlain) {
  const LogLikMatrix l(random_matrix(30, 6, 51));
  const StatMatrix st(random_matrix(30, 2, 52));
  const LogPriorVector lp{Vector::Constant(30, -3.2), 0.0};
  EXPECT_TRUE(freq_cov(st, l, CovEstimator::prior_adjusted, &lp).values.isApprox(freq_cov(st, l, CovEstimator::plain).values));
}

TEST(Penalties, Basics) {
  const LogLikMatrix c(Matrix::Constant(10, 3, -1.0));
  EXPECT_EQ(penalties(c).waic_penalty, 0.0);
  const LogLikMatrix l(random_matrix(30, 6, 61));
  const LogPriorVector flat{Vector::Constant(30, 0.7), 0.0};
  const PenaltyReport r = penalties(l, &flat);
  EXPECT_NEAR(*r.pcic_penalty, r.waic_penalty, 1e-15);
  EXPECT_FALSE(r.tic_penalty.has_value());
  EXPECT_NEAR(r.waic_penalty, build_w(l).trace(), 1e-12);
  EXPECT_FALSE(penalties(l).pcic_penalty.has_value());
}

TEST(Penalties, WaicTicNormalMean) {
  NormalMeanConfig cfg;
  cfg.n = 500;
  cfg.M = 20000;
  const ModelBundle b = run_normal_mean(cfg);
  const InfoMatrices info = build_info_matrices(*b.scores);
  const PenaltyReport r = penalties(b.loglik, &b.logprior, &info);
  ASSERT_TRUE(r.tic_penalty.has_value());
  EXPECT_LT(std::abs(r.waic_penalty - *r.tic_penalty) / *r.tic_penalty, 0.15);
}

TEST(KlQuadratic, ScalingAndZero) {
  const WMatrix w = build_w(LogLikMatrix(random_matrix(20, 5, 71)));
  const Vector eta = random_matrix(5, 1, 72).col(0);
  EXPECT_EQ(kl_quadratic(w, Vector(Vector::Zero(5))), 0.0);
  EXPECT_NEAR(kl_quadratic(w, Vector(2.0 * eta)), 4.0 * kl_quadratic(w, eta), 1e-12);
  EXPECT_GE(kl_quadratic(w, eta), 0.0);
  EXPECT_NEAR(kl_quadratic(w, WeightVector::from_eta(eta)), kl_quadratic(w, eta), 1e-15);
}

TEST(KlQuadratic, BetaBinomialExactKl) {
  const BetaBinomialConfig cfg = exact_bb(50000);
  const ModelBundle b = run_betabinomial(cfg);
  const WMatrix w = build_w(b.loglik);
  std::vector<int> x(b.data.size());
  for (Index i = 0; i < b.data.size(); ++i) x[static_cast<std::size_t>(i)] = static_cast<int>(b.data[i]);
  for (std::uint64_t s = 1; s <= 5; ++s) {
    Vector eta = random_matrix(b.data.size(), 1, s).col(0);
    eta *= 0.1 / eta.norm();
    const auto [a0, b0] = betabinom_posterior(cfg, x, Vector::Ones(b.data.size()));
    const auto [a1, b1] = betabinom_posterior(cfg, x, WeightVector::from_eta(eta).w);
    const double exact = beta_kl(a1, b1, a0, b0);
    EXPECT_NEAR(kl_quadratic(w, eta), exact, 0.1 * exact);
  }
}

TEST(Centering, ConstantAndShrinkage) {
  const LogLikMatrix l(random_matrix(20, 4, 81));
  EXPECT_TRUE(centering_diagnostic(StatMatrix(Matrix::Constant(20, 1, 2.0)), l).value.isZero(1e-14));
  std::vector<double> meds;
  for (Index n : {50, 200}) {
    std::vector<double> r;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      NormalMeanConfig cfg;
      cfg.n = n;
      cfg.M = 4000;
      cfg.seed = seed;
      const ModelBundle b = run_normal_mean(cfg);
      const CenteringReport rep = centering_diagnostic(b.param_stats(), b.loglik);
      r.push_back(std::abs(rep.value[0]) / rep.scale[0]);
    }
    meds.push_back(median(r));
  }
  EXPECT_GT(meds[0], meds[1]);
}

TEST(Centering, StrongPriorAdjustment) {
  BetaBinomialConfig cfg = exact_bb(20000);
  cfg.alpha = 20.0;
  cfg.rho = 0.0;
  const ModelBundle b = run_betabinomial(cfg);
  const double unadj = std::abs(centering_diagnostic(b.param_stats(), b.loglik).value[0]);
  const double adj = std::abs(centering_diagnostic(b.param_stats(), b.loglik, &b.logprior).value[0]);
  EXPECT_LT(adj, 0.1 * unadj);
}
