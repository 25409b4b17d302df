#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lecam/core.hpp"
#include "lecam/normal.hpp"

using namespace lecam;

// scipy.stats.norm.ppf
TEST(Normal, QuantileMatchesReference) {
  const std::pair<double, double> ref[] = {{1e-300, -37.0470962993612},  {1e-20, -9.262340089798409},
                                           {1e-05, -4.264890793922825},  {0.025, -1.9599639845400545},
                                           {0.3, -0.5244005127080409},   {0.5, 0.0},
                                           {0.975, 1.959963984540054},   {1 - 1e-12, 7.0344869100478356}};
  for (auto [p, z] : ref) EXPECT_NEAR(normal_quantile(p), z, 1e-12 * (1 + std::fabs(z))) << p;
}

TEST(Normal, QuantileInvertsCdf) {
  for (double x = -8; x <= 8; x += 0.37) {
    // Invert through whichever tail carries the precision.
    if (x <= 0)
      EXPECT_NEAR(normal_quantile(normal_cdf(x)), x, 1e-9);
    else
      EXPECT_NEAR(normal_quantile_upper(normal_sf(x)), x, 1e-9);
  }
}

TEST(Normal, QuantileFromLogFarTail) {
  EXPECT_NEAR(normal_quantile_from_log(std::log(1e-300)), -37.0470962993612, 1e-9);
  // log Phi(-50) = -1254.8313...; beyond double range for Phi itself.
  const double z = -50.0;
  const double logp = -0.5 * z * z - std::log(-z) - 0.5 * std::log(2 * std::numbers::pi) +
                      std::log1p(-1 / (z * z) + 3 / std::pow(z, 4) - 15 / std::pow(z, 6));
  EXPECT_NEAR(normal_quantile_from_log(logp), z, 1e-6);
}

TEST(Normal, SplitUsesSmallerTail) {
  EXPECT_NEAR(normal_quantile_split(1 - 1e-17, 1e-17), -normal_quantile(1e-17), 1e-9);
  EXPECT_NEAR(normal_quantile_split(0.3, 0.7), normal_quantile(0.3), 1e-14);
}

TEST(Seeds, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  std::set<std::uint64_t> s;
  for (std::uint64_t i = 0; i < 1000; ++i) s.insert(derive_seed(7, 0, i));
  EXPECT_EQ(s.size(), 1000u);
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

TEST(Rng, Uniform01OpenInterval) {
  Engine g = make_engine(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(g);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double d = dither(g);
    ASSERT_GT(d, -0.5);
    ASSERT_LE(d, 0.5);
  }
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  auto run = [](unsigned threads) {
    std::vector<double> out(200);
    parallel_for(
        out.size(),
        [&](std::size_t i) {
          Engine g = make_engine(11, 0, i);
          out[i] = std_normal(g);
        },
        threads);
    return out;
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 7) throw NumericalError("x"); }, 3), NumericalError);
}

TEST(Quadrature, SmoothAndTinyPanels) {
  EXPECT_NEAR(integrate([](double x) { return std::exp(x); }, 0, 1), std::exp(1.0) - 1, 1e-13);
  // Narrow panels with a nearly-vanishing integrand must not stall.
  const double v = integrate([](double x) { return std::pow(x - 0.04572, 4); }, 0.0457, 0.0458, 1e-11);
  EXPECT_NEAR(v, (std::pow(0.0458 - 0.04572, 5) - std::pow(0.0457 - 0.04572, 5)) / 5, 1e-25);
  EXPECT_NEAR(integrate_pieces([](double x) { return x < 0.3 ? 1.0 : 2.0; }, 0, 1, {0.3}), 1.7, 1e-13);
}

TEST(LineFitTest, ExactLine) {
  std::vector<double> x{1, 2, 3, 4, 5}, y;
  for (double v : x) y.push_back(2 - 0.5 * v);
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, 2, 1e-12);
  EXPECT_NEAR(f.slope_se, 0, 1e-12);
}

TEST(LineFitTest, ConfidenceIntervalCoversSlope) {
  // y = 1 + 2x + e with e = (+1, -1, +1, -1, +1, -1); slope estimate by hand.
  std::vector<double> x{0, 1, 2, 3, 4, 5}, y;
  for (int i = 0; i < 6; ++i) y.push_back(1 + 2 * x[i] + (i % 2 ? -1 : 1));
  const auto f = fit_line(x, y);
  // Sxx = 17.5, Sxe = -3 -> slope = 2 - 3/17.5
  EXPECT_NEAR(f.slope, 2 - 3 / 17.5, 1e-12);
  EXPECT_LT(f.ci_low, f.slope);
  EXPECT_GT(f.ci_high, f.slope);
}
