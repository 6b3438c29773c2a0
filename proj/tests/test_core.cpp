#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bayesij/core.hpp"
#include "bayesij/random.hpp"

using namespace bayesij;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST(PosteriorMean, ConstantColumn) {
  Matrix m = Matrix::Constant(5, 1, 2.5);
  EXPECT_DOUBLE_EQ(posterior_mean(m)[0], 2.5);
}

TEST(PosteriorMean, Examples) {
  Matrix a(2, 1);
  a << 0, 2;
  EXPECT_DOUBLE_EQ(posterior_mean(a)[0], 1.0);
  Matrix b(3, 1);
  b << 1, 2, 6;
  EXPECT_DOUBLE_EQ(posterior_mean(StatMatrix(b))[0], 3.0);
}

TEST(PosteriorMean, EmptyIsInvalid) {
  try {
    posterior_mean(Matrix(0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
  }
}

TEST(PosteriorCov, Examples) {
  EXPECT_DOUBLE_EQ(posterior_cov(vec({3, 3, 3}), vec({1, 2, 5})), 0.0);
  EXPECT_DOUBLE_EQ(posterior_cov(vec({0, 2}), vec({0, 4})), 2.0);
  EXPECT_DOUBLE_EQ(posterior_var(vec({-1, 1})), 1.0);
}

TEST(PosteriorCov, LengthMismatch) {
  EXPECT_THROW(posterior_cov(vec({1, 2}), vec({1, 2, 3})), Error);
}

TEST(PosteriorCov, BilinearSymmetricCauchySchwarz) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    Vector a(20), b(20), c(20);
    for (Index u = 0; u < 20; ++u) {
      a[u] = rng.normal();
      b[u] = rng.normal() + 0.5 * a[u];
      c[u] = rng.normal();
    }
    EXPECT_NEAR(posterior_cov(a, b), posterior_cov(b, a), 1e-14);
    EXPECT_NEAR(posterior_cov(Vector(2.0 * a + c), b), 2.0 * posterior_cov(a, b) + posterior_cov(c, b), 1e-12);
    EXPECT_GE(posterior_var(a), 0.0);
    const double cab = posterior_cov(a, b);
    EXPECT_LE(cab * cab, posterior_var(a) * posterior_var(b) * (1 + 1e-12));
  }
}

TEST(PosteriorCov, LargeOffsetStable) {
  Vector a = vec({1e9 + 1, 1e9 - 1, 1e9 + 1, 1e9 - 1});
  EXPECT_NEAR(posterior_var(a), 1.0, 1e-6);
}

TEST(ThirdCumulant, Examples) {
  EXPECT_DOUBLE_EQ(third_cumulant(vec({1, 1, 1}), vec({1, 2, 3}), vec({4, 0, 2})), 0.0);
  const Vector s = vec({-1, 1, -1, 1});
  EXPECT_NEAR(third_cumulant(s, s, s), 0.0, 1e-15);
  const Vector z = vec({0, 0, 3});
  EXPECT_NEAR(third_cumulant(z, z, z), 2.0, 1e-14);
}

TEST(ThirdCumulant, SymmetricAndShiftInvariant) {
  Rng rng(11);
  Vector a(30), b(30), c(30);
  for (Index u = 0; u < 30; ++u) {
    a[u] = rng.normal();
    b[u] = rng.gamma(2.0);
    c[u] = rng.normal() * a[u];
  }
  const double k = third_cumulant(a, b, c);
  EXPECT_NEAR(third_cumulant(b, a, c), k, 1e-14);
  EXPECT_NEAR(third_cumulant(c, b, a), k, 1e-14);
  EXPECT_NEAR(third_cumulant(Vector(a.array() + 5.0), b, c), k, 1e-12);
  EXPECT_THROW(third_cumulant(vec({1, 2}), vec({1, 2}), vec({1, 2})), Error);
  EXPECT_THROW(third_cumulant(a, b, vec({1, 2, 3})), Error);
}

TEST(EmpiricalCov, Examples) {
  EXPECT_DOUBLE_EQ(empirical_cov_over_obs(vec({2, 2}), vec({1, 5})), 0.0);
  EXPECT_DOUBLE_EQ(empirical_cov_over_obs(vec({0, 2}), vec({0, 2})), 1.0);
  EXPECT_THROW(empirical_cov_over_obs(vec({0, 2}), vec({0})), Error);
}

TEST(EmpiricalCov, BruteForce) {
  Rng rng(3);
  Vector f(9), g(9);
  for (Index i = 0; i < 9; ++i) {
    f[i] = rng.normal();
    g[i] = rng.normal();
  }
  double fm = 0, gm = 0;
  for (Index i = 0; i < 9; ++i) {
    fm += f[i] / 9;
    gm += g[i] / 9;
  }
  double s = 0;
  for (Index i = 0; i < 9; ++i) s += (f[i] - fm) * (g[i] - gm) / 9;
  EXPECT_NEAR(empirical_cov_over_obs(f, g), s, 1e-14);
}

TEST(CenteredCovStar, SingleObservationIsZero) {
  LogLikMatrix l(random_matrix(6, 1, 1));
  EXPECT_NEAR(centered_cov_star(random_matrix(6, 1, 2).col(0), l, 0), 0.0, 1e-15);
}

TEST(CenteredCovStar, SumsToZeroAndMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Matrix lv = random_matrix(4, 3, seed);
    const LogLikMatrix l(lv);
    const Vector a = random_matrix(4, 1, seed + 100).col(0);
    double total = 0.0;
    for (Index i = 0; i < 3; ++i) {
      const double v = centered_cov_star(a, l, i);
      total += v;
      double avg = 0.0;
      for (Index j = 0; j < 3; ++j) avg += posterior_cov(a, lv.col(j)) / 3.0;
      EXPECT_NEAR(v, posterior_cov(a, lv.col(i)) - avg, 1e-13);
    }
    EXPECT_NEAR(total, 0.0, 1e-12);
  }
  LogLikMatrix l(random_matrix(4, 3, 1));
  EXPECT_THROW(centered_cov_star(Vector::Zero(4), l, 3), Error);
  EXPECT_THROW(centered_cov_star(Vector::Zero(4), l, -1), Error);
}

TEST(LogLikMatrix, Validation) {
  EXPECT_THROW(LogLikMatrix(Matrix::Zero(1, 3)), Error);
  EXPECT_THROW(LogLikMatrix(Matrix::Zero(3, 0)), Error);
  Matrix bad = Matrix::Zero(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(LogLikMatrix{bad}, Error);
  bad(1, 1) = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(LogLikMatrix{bad}, Error);
  LogLikMatrix ok(Matrix::Zero(3, 2));
  EXPECT_EQ(ok.M(), 3);
  EXPECT_EQ(ok.n(), 2);
}

TEST(StatMatrix, NamesAndPairCheck) {
  StatMatrix s(Matrix::Zero(4, 2));
  EXPECT_EQ(s.names()[0], "A1");
  EXPECT_EQ(s.names()[1], "A2");
  EXPECT_THROW(check_pair(s, LogLikMatrix(Matrix::Zero(5, 2))), Error);
}

TEST(WeightVector, EtaRoundTrip) {
  const Vector eta = vec({-1, 0, 2});
  const WeightVector w = WeightVector::from_eta(eta);
  EXPECT_DOUBLE_EQ(w.w[0], 0.0);
  EXPECT_DOUBLE_EQ(w.w[2], 3.0);
  EXPECT_TRUE(w.eta().isApprox(eta));
  EXPECT_TRUE(WeightVector::ones(3).eta().isZero());
}

TEST(Rng, StreamsDeterministicAndDistinct) {
  Rng a = Rng::stream(42, 3), b = Rng::stream(42, 3), c = Rng::stream(42, 4);
  std::set<std::uint64_t> seen;
  for (int k = 0; k < 100; ++k) {
    const auto x = a();
    EXPECT_EQ(x, b());
    seen.insert(x);
    seen.insert(c());
  }
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Rng, DistributionMoments) {
  Rng rng(2024);
  const int m = 200000;
  double sn = 0, sn2 = 0, sg = 0, sb = 0, sbin = 0, su = 0;
  for (int k = 0; k < m; ++k) {
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sg += rng.gamma(0.5);
    sb += rng.beta(2.0, 3.0);
    sbin += rng.binomial(100, 0.3);
    su += static_cast<double>(rng.uniform_index(10));
  }
  EXPECT_NEAR(sn / m, 0.0, 0.01);
  EXPECT_NEAR(sn2 / m, 1.0, 0.01);
  EXPECT_NEAR(sg / m, 0.5, 0.01);
  EXPECT_NEAR(sb / m, 0.4, 0.005);
  EXPECT_NEAR(sbin / m, 30.0, 0.05);
  EXPECT_NEAR(su / m, 4.5, 0.03);
}
