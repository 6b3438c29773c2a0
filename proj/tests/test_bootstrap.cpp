#include <gtest/gtest.h>

#include <cmath>

#include "bayesij/bootstrap.hpp"
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

std::vector<ResampleDraw> ones(Index n, Index nb) {
  ResampleDraw r;
  r.counts.assign(static_cast<std::size_t>(n), 1);
  return std::vector<ResampleDraw>(static_cast<std::size_t>(nb), r);
}

struct Fixture {
  LogLikMatrix loglik{0.3 * random_matrix(60, 8, 1)};
  StatMatrix stats{random_matrix(60, 2, 2)};
};

}  // namespace

TEST(Resamples, Basics) {
  for (const auto& r : draw_resamples(1, 10, 3)) EXPECT_EQ(r.counts[0], 1);
  const auto a = draw_resamples(7, 50, 9), b = draw_resamples(7, 50, 9);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].counts, b[k].counts);
    int s = 0;
    for (int c : a[k].counts) {
      EXPECT_GE(c, 0);
      s += c;
    }
    EXPECT_EQ(s, 7);
  }
  EXPECT_NE(draw_resamples(7, 5, 9)[0].counts, draw_resamples(7, 5, 10)[0].counts);
}

TEST(Resamples, CellMeans) {
  const auto rs = draw_resamples(10, 100000, 123);
  std::vector<double> mean(10, 0.0);
  for (const auto& r : rs)
    for (std::size_t i = 0; i < 10; ++i) mean[i] += r.counts[i] / 1e5;
  for (double m : mean) EXPECT_NEAR(m, 1.0, 0.02);
}

TEST(BootFirst, HandGrid) {
  Matrix l(2, 2), a(2, 1);
  l << 0, 1, 1, 0;
  a << 0, 1;
  ResampleDraw r;
  r.counts = {2, 0};
  const double mean = 0.5;
  const Matrix g = cov_grid(a, l);
  EXPECT_NEAR(g(0, 0), 0.25, 1e-15);
  const StatMatrix s(2.0 * a);
  const Matrix g2 = cov_grid(s.values(), l);
  EXPECT_NEAR(g2(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(g2(0, 1), -0.5, 1e-15);
  const BootstrapRun run = boot_first(s, LogLikMatrix(l), {r});
  EXPECT_NEAR(run.estimates(0, 0), 2.0 * mean + 1.0, 1e-14);
}

TEST(Bootstrap, AllOnesGivesPosteriorMean) {
  Fixture f;
  const auto rs = ones(8, 3);
  const Vector mean = posterior_mean(f.stats);
  const ProjectedLogLik proj = project_loglik(f.loglik, full_eigen(build_w(f.loglik)), 4);
  std::vector<BootstrapRun> runs = {boot_first(f.stats, f.loglik, rs), boot_first(f.stats, f.loglik, rs, {}, &proj),
                                    boot_second(f.stats, f.loglik, rs, SecondMode::direct),
                                    boot_second(f.stats, f.loglik, rs, SecondMode::efficient),
                                    boot_second(f.stats, f.loglik, rs, SecondMode::projected, &proj),
                                    boot_importance(f.stats, f.loglik, rs).run};
  for (const auto& run : runs)
    for (Index b = 0; b < 3; ++b) EXPECT_LT((run.estimates.row(b).transpose() - mean).cwiseAbs().maxCoeff(), 1e-12) << to_string(run.method);
}

TEST(Bootstrap, SecondOrderVariantsAgree) {
  Fixture f;
  const auto rs = draw_resamples(8, 100, 5);
  const BootstrapRun d = boot_second(f.stats, f.loglik, rs, SecondMode::direct);
  const BootstrapRun e = boot_second(f.stats, f.loglik, rs, SecondMode::efficient);
  const ProjectedLogLik proj = project_loglik(f.loglik, full_eigen(build_w(f.loglik)), 8);
  const BootstrapRun p = boot_second(f.stats, f.loglik, rs, SecondMode::projected, &proj);
  const double scale = d.estimates.cwiseAbs().maxCoeff();
  EXPECT_LT((d.estimates - e.estimates).cwiseAbs().maxCoeff(), 1e-9 * scale);
  EXPECT_LT((d.estimates - p.estimates).cwiseAbs().maxCoeff(), 1e-9 * scale);
  EXPECT_EQ(d.method, BootMethod::second_direct);
  EXPECT_EQ(e.method, BootMethod::second_efficient);
  EXPECT_EQ(p.rank_used.value(), 8);
  BootOptions small;
  small.tensor_budget = 10;
  EXPECT_EQ(boot_second(f.stats, f.loglik, rs, SecondMode::automatic, nullptr, small).method, BootMethod::second_efficient);
  EXPECT_EQ(boot_second(f.stats, f.loglik, rs, SecondMode::automatic).method, BootMethod::second_direct);
  EXPECT_THROW(boot_second(f.stats, f.loglik, rs, SecondMode::projected), Error);
}

TEST(Bootstrap, ProjectedSecondOrderWithinBound) {
  WeibullConfig cfg;
  cfg.mcmc.iters = 1000;
  const ModelBundle b = run_weibull(cfg);
  const StatMatrix st(predictive_tail_stat(b, 40.0));
  const auto rs = draw_resamples(b.loglik.n(), 50, 3);
  const SpectralBasis basis = full_eigen(build_w(b.loglik));
  const ProjectedLogLik proj = project_loglik(b.loglik, basis, 2);
  const BootstrapRun direct = boot_second(st, b.loglik, rs, SecondMode::direct);
  const BootstrapRun projected = boot_second(st, b.loglik, rs, SecondMode::projected, &proj);
  const Vector a = st.values().col(0);
  const double sup = (a.array() - a.mean()).abs().maxCoeff();
  const double tail = basis.tail_sum(2);
  const Matrix w = build_w(b.loglik).values;
  for (std::size_t r = 0; r < rs.size(); ++r) {
    const Vector eta = rs[r].eta();
    double bound = 0.0;
    for (Index i = 0; i < eta.size(); ++i)
      for (Index j = 0; j < eta.size(); ++j) {
        if (eta[i] == 0.0 || eta[j] == 0.0) continue;
        bound += 0.5 * std::abs(eta[i] * eta[j]) * third_cumulant_error_bound(sup, w(i, i), w(j, j), tail);
      }
    EXPECT_LE(std::abs(direct.estimates(static_cast<Index>(r), 0) - projected.estimates(static_cast<Index>(r), 0)), bound + 1e-12);
  }
}

TEST(Bootstrap, FirstOrderGaussianEtaMatchesSigma) {
  Fixture f;
  const Index nb = 100000;
  Rng rng(77);
  std::vector<ResampleDraw> rs;
  Matrix eta(8, nb);
  for (Index b = 0; b < nb; ++b)
    for (Index i = 0; i < 8; ++i) eta(i, b) = rng.normal();
  const Matrix g = cov_grid(f.stats.values(), f.loglik.values());
  const Matrix est = (g * eta).transpose();
  const Matrix c = est.rowwise() - est.colwise().mean();
  const Matrix cov = c.transpose() * c / static_cast<double>(nb);
  const Matrix sigma = freq_cov(f.stats, f.loglik, CovEstimator::plain).values;
  EXPECT_NEAR(cov(0, 0), sigma(0, 0), 0.1 * sigma(0, 0));
  EXPECT_NEAR(cov(1, 1), sigma(1, 1), 0.1 * sigma(1, 1));
}

TEST(Bootstrap, DrawPermutationInvariance) {
  Fixture f;
  const auto rs = draw_resamples(8, 20, 4);
  std::vector<Index> perm(60);
  for (Index u = 0; u < 60; ++u) perm[static_cast<std::size_t>(u)] = (u * 7) % 60;
  Matrix lp(60, 8), sp(60, 2);
  for (Index u = 0; u < 60; ++u) {
    lp.row(u) = f.loglik.values().row(perm[static_cast<std::size_t>(u)]);
    sp.row(u) = f.stats.values().row(perm[static_cast<std::size_t>(u)]);
  }
  const LogLikMatrix l2(lp);
  const StatMatrix s2(sp);
  auto same = [](const BootstrapRun& a, const BootstrapRun& b) {
    return (a.estimates - b.estimates).cwiseAbs().maxCoeff() < 1e-12;
  };
  EXPECT_TRUE(same(boot_first(f.stats, f.loglik, rs), boot_first(s2, l2, rs)));
  EXPECT_TRUE(same(boot_second(f.stats, f.loglik, rs, SecondMode::direct), boot_second(s2, l2, rs, SecondMode::direct)));
  EXPECT_TRUE(same(boot_importance(f.stats, f.loglik, rs).run, boot_importance(s2, l2, rs).run));
}

TEST(Importance, HandWeights) {
  Matrix l(2, 1), a(2, 1);
  l << 0, std::log(3.0);
  a << 0, 1;
  ResampleDraw r;
  r.counts = {2};
  const ImportanceResult res = boot_importance(StatMatrix(a), LogLikMatrix(l), {r});
  EXPECT_NEAR(res.run.estimates(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(res.diagnostics.max_weight[0], 0.75, 1e-15);
  EXPECT_NEAR(res.diagnostics.ess[0], 1.0 / (0.0625 + 0.5625), 1e-12);
}

TEST(Importance, Diagnostics) {
  Fixture f;
  const auto rs = draw_resamples(8, 50, 6);
  const ImportanceResult res = boot_importance(f.stats, f.loglik, rs);
  for (Index b = 0; b < 50; ++b) {
    EXPECT_GT(res.diagnostics.max_weight[b], 0.0);
    EXPECT_LE(res.diagnostics.max_weight[b], 1.0);
    EXPECT_GE(res.diagnostics.ess[b], 1.0 - 1e-12);
    EXPECT_LE(res.diagnostics.ess[b], 60.0 + 1e-9);
    EXPECT_FALSE(res.run.degenerate[static_cast<std::size_t>(b)]);
  }
  const BootSummary all_ones = summarize(boot_importance(f.stats, f.loglik, ones(8, 2)).run);
  EXPECT_EQ(all_ones.flagged, 0);
}

TEST(Importance, ExtremeLogLikStaysFinite) {
  Matrix l(3, 2);
  l << -1e6, -2e6, -1e6 + 5, -2e6, -1e6, -2e6 - 3;
  ResampleDraw r;
  r.counts = {2, 0};
  const ImportanceResult res = boot_importance(StatMatrix(Matrix(Vector{{1.0, 2.0, 3.0}})), LogLikMatrix(l), {r});
  EXPECT_TRUE(std::isfinite(res.run.estimates(0, 0)));
  EXPECT_NEAR(res.diagnostics.max_weight[0], 1.0 / (1.0 + std::exp(-5.0) + std::exp(-2.0)), 1e-12);
}

TEST(Gold, ConstantAndErrors) {
  const auto rs = draw_resamples(4, 5, 1);
  const BootstrapRun run = boot_gold([](const ResampleDraw&) { return Vector(Vector{{1.0, 2.0}}); }, rs);
  for (Index b = 0; b < 5; ++b) {
    EXPECT_EQ(run.estimates(b, 0), 1.0);
    EXPECT_EQ(run.estimates(b, 1), 2.0);
  }
  try {
    boot_gold([](const ResampleDraw& r) -> Vector {
      if (r.counts[0] >= 0) fail(ErrorCode::NumericalFailure, "refit diverged");
      return Vector();
    }, rs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("replicate"), std::string::npos);
  }
}

TEST(Gold, BetaBinomialCorrelatesWithFirstOrder) {
  BetaBinomialConfig cfg;
  cfg.M = 5000;
  cfg.scheme = DrawScheme::stratified;
  const ModelBundle b = run_betabinomial(cfg);
  const auto rs = draw_resamples(b.loglik.n(), 200, 8);
  const BootstrapRun gold = boot_gold(conjugate_refitter(b, StatId::q_mean), rs, b.loglik.M());
  const BootstrapRun gold2 = boot_gold(conjugate_refitter(b, StatId::q_mean), rs, b.loglik.M());
  EXPECT_EQ(gold.estimates, gold2.estimates);
  const BootstrapRun first = boot_first(b.param_stats(), b.loglik, rs);
  const Vector x = gold.estimates.col(0), y = first.estimates.col(0);
  const double r = posterior_cov(x, y) / std::sqrt(posterior_var(x) * posterior_var(y));
  EXPECT_GT(r, 0.9);
}

TEST(Parallel, ThreadCountDoesNotChangeResults) {
  Fixture f;
  const auto rs = draw_resamples(8, 64, 12);
  BootOptions one, four;
  four.threads = 4;
  EXPECT_EQ(boot_first(f.stats, f.loglik, rs, one).estimates, boot_first(f.stats, f.loglik, rs, four).estimates);
  EXPECT_EQ(boot_second(f.stats, f.loglik, rs, SecondMode::efficient, nullptr, one).estimates,
            boot_second(f.stats, f.loglik, rs, SecondMode::efficient, nullptr, four).estimates);
  EXPECT_EQ(boot_importance(f.stats, f.loglik, rs, one).run.estimates, boot_importance(f.stats, f.loglik, rs, four).run.estimates);
}

TEST(Summary, QuantilesType7) {
  const std::vector<double> xs = {1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(quantile_type7(xs, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(quantile_type7(xs, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile_type7(xs, 0.9), 4.6);
  BootstrapRun run;
  run.estimates = Matrix(5, 1);
  run.estimates << 5, 1, 4, 2, 3;
  run.degenerate.assign(5, 0);
  BootSummary s = summarize(run);
  EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(s.var[0], 2.0);
  EXPECT_DOUBLE_EQ(s.q75[0], 4.0);
  run.degenerate[0] = 1;
  s = summarize(run);
  EXPECT_EQ(s.flagged, 1);
  EXPECT_EQ(s.used, 4);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.5);
}
