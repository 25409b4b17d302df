#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "lecam/experiments.hpp"
#include "lecam/partition_haar.hpp"

using namespace lecam;

namespace {

double ks_distance(std::vector<double> x, const std::function<double(double)>& F) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    d = std::max({d, std::fabs((i + 1) / n - F(x[i])), std::fabs(i / n - F(x[i]))});
  return d;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("lecam_ut_" + name)).string();
}

}  // namespace

TEST(SampleDensity, Reproducible) {
  const auto a = sample_density(uniform_density(), 5, 42);
  const auto b = sample_density(uniform_density(), 5, 42);
  ASSERT_EQ(a.points.size(), 5u);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, sample_density(uniform_density(), 5, 43).points);
}

TEST(SampleDensity, PowerFloorKolmogorov) {
  const auto s = sample_density(power_floor_density(1.0, 0.5), 100000, 7);
  EXPECT_LT(ks_distance(s.points, [](double x) { return x * x / 2 + x / 2; }), 0.01);
}

TEST(SampleDensity, ZeroSizeRejected) { EXPECT_THROW(sample_density(uniform_density(), 0, 1), ConfigError); }

TEST(SamplePoisson, CountMeanAndVariance) {
  const int R = 4000;
  double s = 0, s2 = 0;
  for (int r = 0; r < R; ++r) {
    const double N = static_cast<double>(sample_poisson_process(uniform_density(), 100, 1000 + r).points.size());
    s += N, s2 += N * N;
  }
  const double mean = s / R, var = s2 / R - mean * mean;
  EXPECT_NEAR(mean, 100, 3 * std::sqrt(100.0 / R) + 0.5);
  EXPECT_NEAR(var, 100, 10);
}

TEST(SamplePoisson, EmptyProbabilityAtUnitIntensity) {
  const int R = 20000;
  int zero = 0;
  for (int r = 0; r < R; ++r) zero += sample_poisson_process(uniform_density(), 1, r).points.empty();
  const double p = std::exp(-1.0);
  EXPECT_NEAR(static_cast<double>(zero) / R, p, 4 * std::sqrt(p * (1 - p) / R));
}

TEST(SampleGwn, UnitModeCellMoments) {
  // Each increment ~ N(2 * 0.25, 0.25 / 100).
  const int R = 10000;
  double s = 0, s2 = 0;
  for (int r = 0; r < R; ++r) {
    const auto y = sample_gwn(uniform_density(), 100, 4, VarianceMode::Unit, nullptr, r);
    s += y.increments[0], s2 += y.increments[0] * y.increments[0];
  }
  const double mean = s / R, var = s2 / R - mean * mean;
  EXPECT_NEAR(mean, 0.5, 4 * std::sqrt(0.0025 / R));
  EXPECT_NEAR(var / 0.0025, 1.0, 0.05);
}

TEST(SampleGwn, StepModeWithConstantProfile) {
  const auto f0 = uniform_density();
  const auto prof = step_approx(f0, build_partition(f0, 64, 1.0));
  const int R = 10000;
  double s = 0, s2 = 0;
  for (int r = 0; r < R; ++r) {
    const auto y = sample_gwn(f0, 64, 8, VarianceMode::Step, &prof, r);
    s += y.increments[3], s2 += y.increments[3] * y.increments[3];
  }
  const double mean = s / R, var = s2 / R - mean * mean;
  EXPECT_NEAR(mean, 1.0 / 8, 4 * std::sqrt(1.0 / (64 * 8) / R));
  EXPECT_NEAR(var * 64 * 8, 1.0, 0.05);
}

TEST(SampleGwn, StepModeNeedsProfile) {
  EXPECT_THROW(sample_gwn(uniform_density(), 10, 4, VarianceMode::Step, nullptr, 1), ConfigError);
}

TEST(SampleGwn, ZeroNoiseGivesDrift) {
  const auto f = cosine_density(0.5);
  const auto grid = uniform_grid(16);
  const auto y = sample_gwn(f, 10, grid, VarianceMode::Step, &f, 3, 0.0);
  for (std::size_t k = 0; k < y.cells(); ++k) EXPECT_DOUBLE_EQ(y.increments[k], f.integral(grid[k], grid[k + 1]));
}

TEST(Split, DensityHalves) {
  const auto s = sample_density(uniform_density(), 10, 1);
  auto [a, b] = split_sample(s);
  EXPECT_EQ(a.points.size(), 5u);
  EXPECT_EQ(b.points.size(), 5u);
  const auto s2 = sample_density(uniform_density(), 11, 1);
  auto [c, d] = split_sample(s2);
  EXPECT_EQ(c.n, 5u);
  EXPECT_EQ(d.n, 6u);
}

TEST(Split, PoissonThinningIsBinomial) {
  PointProcessSample s;
  s.n = 100;
  for (int i = 0; i < 100; ++i) s.points.push_back(i / 100.0);
  const int R = 4000;
  double m = 0, v = 0;
  for (int r = 0; r < R; ++r) {
    const double a = static_cast<double>(split_sample(s, r).first.points.size());
    m += a, v += a * a;
  }
  m /= R;
  v = v / R - m * m;
  EXPECT_NEAR(m, 50, 4 * std::sqrt(25.0 / R));
  EXPECT_NEAR(v, 25, 2.5);
}

TEST(Split, GwnWeightedSumRecoversPath) {
  const auto y = sample_gwn(uniform_density(), 101, 32, VarianceMode::Unit, nullptr, 9);
  auto [a, b] = split_sample(y, nullptr, 5);
  EXPECT_EQ(a.n, 50u);
  EXPECT_EQ(b.n, 51u);
  for (std::size_t k = 0; k < y.cells(); ++k)
    EXPECT_NEAR((50 * a.increments[k] + 51 * b.increments[k]) / 101, y.increments[k], 1e-14);
}

TEST(Split, GwnHalvesIndependentWithRightVariance) {
  const int R = 20000;
  double saa = 0, sbb = 0, sab = 0;
  for (int r = 0; r < R; ++r) {
    const auto y = sample_gwn(uniform_density(), 10, 1, VarianceMode::Unit, nullptr, r);
    auto [a, b] = split_sample(y, nullptr, 100000 + r);
    const double da = a.increments[0] - 2, db = b.increments[0] - 2;
    saa += da * da, sbb += db * db, sab += da * db;
  }
  EXPECT_NEAR(saa / R * 5, 1.0, 0.05);
  EXPECT_NEAR(sbb / R * 5, 1.0, 0.05);
  EXPECT_NEAR(sab / R * 5, 0.0, 0.05);
}

TEST(Io, PointsRoundTrip) {
  const auto s = sample_density(cosine_density(0.3), 50, 2);
  const auto p = tmp_path("points.csv");
  write_points_csv(p, s.points);
  EXPECT_EQ(read_points_csv(p), s.points);
}

TEST(Io, RejectsOutOfRange) {
  const auto p = tmp_path("bad.csv");
  write_points_csv(p, {0.2, 1.5});
  EXPECT_THROW(read_points_csv(p), ConfigError);
  EXPECT_THROW(read_points_csv(tmp_path("does_not_exist.csv")), ConfigError);
}

TEST(Io, GwnJsonRoundTrip) {
  const auto y = sample_gwn(uniform_density(), 10, 4, VarianceMode::Unit, nullptr, 1);
  const auto z = gwn_from_json(to_json(y));
  EXPECT_EQ(z.increments, y.increments);
  EXPECT_EQ(z.grid, y.grid);
  EXPECT_EQ(z.mode, y.mode);
}
