#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lecam/coupling.hpp"

using namespace lecam;

namespace {

// Direct pmf summation in long double.
double smoothed_cdf_oracle(long long m, double p, double x) {
  const long double t = x + 0.5L;
  const long long k = static_cast<long long>(std::floor(t));
  const long double frac = t - k;
  long double s = 0;
  for (long long i = 0; i <= m && i <= k; ++i) {
    const long double lp = std::lgamma(m + 1.0L) - std::lgamma(i + 1.0L) - std::lgamma(m - i + 1.0L) +
                           i * std::log((long double)p) + (m - i) * std::log1p(-(long double)p);
    s += std::exp(lp) * (i == k ? frac : 1.0L);
  }
  return static_cast<double>(s);
}

CountTensor random_tensor(Engine& g, std::size_t m, int J, long long maxcount) {
  CountTensor c(m, J);
  for (std::size_t i = 0; i < m; ++i) {
    const auto total = static_cast<long long>(uniform01(g) * static_cast<double>(maxcount));
    c.at(i, 0, 0) = total;
    for (int j = 0; j <= J; ++j)
      for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) {
        const long long par = c.at(i, j, k);
        // Mix balanced and extreme splits.
        const double u = uniform01(g);
        long long left;
        if (u < 0.1)
          left = 0;
        else if (u < 0.2)
          left = par;
        else
          left = binomial_draw(g, par, uniform01(g));
        c.at(i, j + 1, 2 * k) = left;
        c.at(i, j + 1, 2 * k + 1) = par - left;
      }
  }
  return c;
}

}  // namespace

TEST(SmoothedCdf, HandValues) {
  EXPECT_DOUBLE_EQ(binom_cdf_smoothed_value(2, 0.5, 1.0), 0.5);
  // mpmath reference values
  EXPECT_NEAR(binom_cdf_smoothed_value(10, 0.3, 2.7), 0.4361483728000001, 1e-14);
  EXPECT_NEAR(binom_cdf_smoothed_value(100, 0.5, 50.2), 0.515917847477436, 1e-14);
  EXPECT_NEAR(binom_cdf_smoothed_value(1000, 0.45, 430.9), 0.11236660257013724, 1e-13);
  EXPECT_NEAR(binom_cdf_smoothed_value(7, 0.9, 6.1), 0.3728996199999998, 1e-14);
}

TEST(SmoothedCdf, MatchesSummation) {
  for (long long m : {1LL, 5LL, 40LL, 300LL})
    for (double p : {0.1, 0.5, 0.77})
      for (double x = -0.7; x < m + 0.7; x += 0.37 + m / 50.0)
        EXPECT_NEAR(binom_cdf_smoothed_value(m, p, x), smoothed_cdf_oracle(m, p, x), 1e-12) << m << " " << p << " " << x;
}

TEST(SmoothedCdf, DegenerateTrials) {
  for (double x : {-1.0, -0.5, -0.2, 0.0, 0.3, 0.5, 2.0})
    EXPECT_DOUBLE_EQ(binom_cdf_smoothed_value(0, 0.5, x), std::clamp(x + 0.5, 0.0, 1.0));
}

TEST(SmoothedCdf, SymmetryAtHalf) {
  for (long long m : {3LL, 10LL, 501LL})
    for (double x = 0.1; x < m; x += 0.9)
      EXPECT_NEAR(binom_cdf_smoothed_value(m, 0.5, x) + binom_cdf_smoothed_value(m, 0.5, m - x), 1.0, 1e-13);
}

TEST(SmoothedCdf, DeepTailsInLogSpace) {
  const auto t = binom_cdf_smoothed(1000000, 0.5, 10.3);
  EXPECT_EQ(t.lower, 0.0);
  EXPECT_TRUE(std::isfinite(t.log_lower));
  EXPECT_LT(t.log_lower, -690000);
  EXPECT_TRUE(std::isfinite(quantile_map(1000000, 10, 0.3)));
  EXPECT_LT(quantile_map(1000000, 10, 0.3), -1000);
  EXPECT_GT(quantile_map(1000000, 999990, 0.3), 1000);
}

TEST(QuantileMap, ZeroParentIsUniformToNormal) {
  for (double u : {-0.4, -0.1, 0.0, 0.25, 0.49}) EXPECT_NEAR(quantile_map(0, 0, u), normal_quantile(u + 0.5), 1e-14);
}

TEST(QuantileMap, StandardNormalAtHalf) {
  // Child of a Bin(m, 1/2) split, dithered: exact N(0, 1).
  const int R = 100000;
  Engine g = make_engine(17);
  std::vector<double> z(R);
  for (auto& v : z) {
    const long long m = 37;
    v = quantile_map(m, binomial_draw(g, m, 0.5), dither(g));
  }
  std::sort(z.begin(), z.end());
  double d = 0;
  for (int i = 0; i < R; ++i) d = std::max(d, std::fabs((i + 0.5) / R - normal_cdf(z[i])));
  EXPECT_LT(d, 0.01);
}

TEST(BinCounts, EmptyAndSinglePoint) {
  const auto p = build_partition(uniform_density(), 1000, 1.0);
  const auto e = bin_counts(std::vector<double>{}, p, 3);
  EXPECT_TRUE(std::all_of(e.values.begin(), e.values.end(), [](long long v) { return v == 0; }));
  const double x = p.x[0] + 1e-9;
  const auto c = bin_counts(std::vector<double>{x}, p, 3);
  for (int j = 0; j <= 4; ++j)
    for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) EXPECT_EQ(c.at(0, j, k), k == 0 ? 1 : 0);
  long long total = 0;
  for (std::size_t i = 0; i < p.m(); ++i) total += c.at(i, 0, 0);
  EXPECT_EQ(total, 1);
}

TEST(BinCounts, ConsistentAndMatchesCells) {
  const auto f = cosine_density(0.5);
  const auto p = build_partition(f, 2000, 1.0);
  const auto s = sample_poisson_process(f, 2000, 3);
  const int J = 4;
  const auto c = bin_counts(s, p, J);
  EXPECT_TRUE(c.consistent());
  for (std::size_t i = 0; i < p.m(); i += 3)
    for (std::size_t k = 0; k < 32; k += 5) {
      auto [a, b] = haar_cell(p, i, J + 1, k);
      const bool last = i + 1 == p.m() && k == 31;
      const auto n = std::count_if(s.points.begin(), s.points.end(),
                                   [&](double x) { return x >= a && (x < b || (last && x <= b)); });
      EXPECT_EQ(c.at(i, J + 1, k), n);
    }
}

TEST(BinCounts, MeanCountMatchesIntensity) {
  const auto u = uniform_density();
  const auto p = build_partition(u, 10000, 1.0);
  const int R = 400;
  double s = 0;
  for (int r = 0; r < R; ++r) s += static_cast<double>(bin_counts(sample_poisson_process(u, 10000, r), p, 0).at(2, 0, 0));
  const double lam = 10000 * p.delta[2];
  EXPECT_NEAR(s / R, lam, 3 * std::sqrt(lam / R));
}

TEST(Transform, RoundTripRandomTensors) {
  Engine g = make_engine(99);
  for (int rep = 0; rep < 200; ++rep) {
    const auto c = random_tensor(g, 3, 3, rep % 2 ? 1000000 : 50);
    const auto st = quantile_transform(c, 3, derive_seed(5, rep));
    EXPECT_EQ(invert_transform(st), c);
  }
}

TEST(Transform, EmptyProcessUsesPureDithers) {
  const CountTensor c(2, 2);
  const auto st = quantile_transform(c, 2, 8);
  st.z.for_each_index([&](std::size_t i, int j, std::size_t k) {
    const double u = st.dithers.at(i, j, k);
    if (j < 0)
      EXPECT_DOUBLE_EQ(st.z.at(i, j, k), u);
    else
      EXPECT_NEAR(st.z.at(i, j, k), normal_quantile(u + 0.5), 1e-14);
  });
  EXPECT_EQ(invert_transform(st), c);
}

TEST(Transform, NearestIntegerTotal) {
  EXPECT_EQ(count_from_smoothed(7.3), 7);
  EXPECT_EQ(count_from_smoothed(6.6), 7);
  EXPECT_THROW(count_from_smoothed(6.5), NumericalError);
}

TEST(Transform, CorruptCoefficientRejected) {
  CountTensor c(1, 0);
  c.at(0, 0, 0) = 4;
  c.at(0, 1, 0) = 1;
  c.at(0, 1, 1) = 3;
  auto st = quantile_transform(c, 0, 3);
  st.z.at(0, 0, 0) += 0.0123;
  EXPECT_THROW(invert_transform(st), NumericalError);
  auto st2 = quantile_transform(c, 0, 3);
  st2.z.at(0, -1, 0) += 0.3;
  EXPECT_THROW(invert_transform(st2), NumericalError);
}

TEST(Transform, InconsistentTensorRejected) {
  CountTensor c(1, 0);
  c.at(0, 0, 0) = 2;
  c.at(0, 1, 0) = 2;
  c.at(0, 1, 1) = 2;
  EXPECT_THROW(quantile_transform(c, 0, 1), ConfigError);
}

TEST(Poissonize, MarginValues) {
  EXPECT_NEAR(poisson_margin(4), std::sqrt(8 * std::log(4.0)), 1e-14);
  EXPECT_LT(poisson_margin(4), 4.0);
  EXPECT_NEAR(poisson_margin(2), 1.6651092223153954, 1e-12);
  for (std::size_t n = 2; n < 100000; n = n * 3 / 2 + 1) EXPECT_LT(poisson_margin(n), static_cast<double>(n));
  const auto ds = sample_density(uniform_density(), 2, 1);
  EXPECT_NO_THROW(poissonize(ds, uniform_density(), 1.0, 1.0, 1));
}

TEST(Poissonize, CountMeanWithAndWithoutAugmentation) {
  const std::size_t n = 10000;
  const auto u = uniform_density();
  const double kappa = poisson_margin(n);
  const int R = 300;
  double full = 0, none = 0;
  for (int r = 0; r < R; ++r) {
    const auto ds = sample_density(u, n, r);
    full += static_cast<double>(poissonize(ds, u, 1.0, 1.0, r).points.size());
    // C large pushes the threshold above fhat = 1 everywhere.
    none += static_cast<double>(poissonize(ds, u, 1.0, 1000.0, r).points.size());
  }
  EXPECT_NEAR(full / R, n, 4 * std::sqrt(n / R));
  EXPECT_NEAR(none / R, n - kappa, 4 * std::sqrt(n / R));
}

TEST(Depoissonize, SizeContract) {
  const auto u = uniform_density();
  PointProcessSample big;
  big.n = 10;
  for (int i = 0; i < 15; ++i) big.points.push_back(i / 15.0);
  const auto a = depoissonize(big, u, 1.0, 1.0, 1);
  ASSERT_EQ(a.points.size(), 10u);
  EXPECT_TRUE(std::equal(a.points.begin(), a.points.end(), big.points.begin()));
  PointProcessSample small;
  small.n = 10;
  small.points = {0.1, 0.2};
  const auto b = depoissonize(small, u, 1.0, 1.0, 1);
  EXPECT_EQ(b.points.size(), 10u);
  EXPECT_EQ(b.points[1], 0.2);
}

TEST(Depoissonize, PaddedPointsFollowPilot) {
  PointProcessSample empty;
  empty.n = 10000;
  auto d = depoissonize(empty, uniform_density(), 1.0, 1.0, 4);
  std::sort(d.points.begin(), d.points.end());
  double ks = 0;
  for (std::size_t i = 0; i < d.points.size(); ++i) ks = std::max(ks, std::fabs((i + 0.5) / 1e4 - d.points[i]));
  EXPECT_LT(ks, 0.02);
}
