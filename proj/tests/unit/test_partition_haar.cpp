#include <gtest/gtest.h>

#include <cmath>

#include "lecam/partition_haar.hpp"

using namespace lecam;

TEST(Partition, UniformExample) {
  const auto p = build_partition(uniform_density(), 1024, 1.0);
  ASSERT_EQ(p.m(), 10u);
  const double step = std::cbrt(1.0 / 1024);
  EXPECT_NEAR(step, 0.099213, 1e-6);
  for (std::size_t i = 0; i + 1 < p.m(); ++i) EXPECT_NEAR(p.delta[i], step, 1e-15);
  EXPECT_NEAR(p.delta.back(), 1 - 9 * step, 1e-14);
  EXPECT_NEAR(p.delta.back(), 0.10708, 1e-5);
}

TEST(Partition, ExactDyadicStep) {
  // 4096^{-1/3} = 1/16 exactly; rounding must not drop the last point.
  EXPECT_EQ(build_partition(uniform_density(), 4096, 1.0).m(), 16u);
}

TEST(Partition, SumsToOneAndRecursion) {
  for (const auto& f : {cosine_density(0.5), power_floor_density(1.0, 0.5), power_floor_density(2.0, 0.2)}) {
    for (std::size_t n : {1000u, 50000u}) {
      const auto p = build_partition(f, n, f.beta());
      double s = 0;
      for (double d : p.delta) s += d;
      EXPECT_NEAR(s, 1.0, 1e-12);
      const double e = 1 / (2 * f.beta() + 1);
      for (std::size_t i = 0; i + 1 < p.m(); ++i)
        EXPECT_NEAR(p.delta[i], std::pow(f(p.x[i]) / n, e), 1e-14);
      const double last = std::pow(f(p.x[p.m() - 1]) / n, e);
      EXPECT_GE(p.delta.back(), last * (1 - 1e-12));
      EXPECT_LE(p.delta.back(), 3 * last);
    }
  }
}

TEST(Partition, Errors) {
  EXPECT_THROW(build_partition(uniform_density(), 1, 1.0), ConfigError);
  EXPECT_THROW(build_partition(uniform_density(), 10, 0.0), ConfigError);
  EXPECT_THROW(build_partition(piecewise_constant_density({0, 0.5, 1}, {0.0, 2.0}), 10, 1.0), ConfigError);
}

TEST(Partition, LocateIntervals) {
  const auto p = build_partition(uniform_density(), 1024, 1.0);
  EXPECT_EQ(p.locate(0.0), 0u);
  EXPECT_EQ(p.locate(1.0), p.m() - 1);
  EXPECT_EQ(p.locate(p.x[3]), 3u);
  EXPECT_EQ(p.locate(p.x[3] - 1e-12), 2u);
}

TEST(StepApprox, ValuesAndHolderBound) {
  const auto f0 = cosine_density(0.5);
  const auto p = build_partition(f0, 1024, 1.0);
  const auto T = step_approx(f0, p);
  double dmax = 0;
  for (double d : p.delta) dmax = std::max(dmax, d);
  for (std::size_t i = 0; i < p.m(); ++i) EXPECT_DOUBLE_EQ(T(p.x[i]), f0(p.x[i]));
  for (int k = 0; k <= 5000; ++k) {
    const double x = k / 5000.0;
    EXPECT_LE(std::fabs(T(x) - f0(x)), f0.radius() * dmax);
  }
  const auto u = step_approx(uniform_density(), build_partition(uniform_density(), 100, 1.0));
  EXPECT_DOUBLE_EQ(u(0.77), 1.0);
}

TEST(Haar, ConstantDensity) {
  const auto p = build_partition(uniform_density(), 512, 1.0);
  const auto c = haar_coeffs(uniform_density(), p, 4);
  c.for_each_index([&](std::size_t i, int j, std::size_t k) {
    if (j < 0)
      EXPECT_NEAR(c.at(i, j, k), std::sqrt(p.delta[i]), 1e-14);
    else
      EXPECT_NEAR(c.at(i, j, k), 0.0, 1e-14);
  });
}

TEST(Haar, LinearDensityClosedForm) {
  // f(x) = x + 1/2: d = -(h/2)^2 / sqrt(h) for a cell of width h.
  const auto f = power_floor_density(1.0, 0.5);
  const auto p = build_partition(f, 256, 1.0);
  const auto c = haar_coeffs(f, p, 3);
  c.for_each_index([&](std::size_t i, int j, std::size_t k) {
    if (j < 0) return;
    const double h = std::ldexp(p.delta[i], -j);
    EXPECT_NEAR(c.at(i, j, k), -(h / 2) * (h / 2) / std::sqrt(h), 1e-13);
  });
}

TEST(Haar, DecayBound) {
  for (const auto& f : {cosine_density(0.5), cosine_density(0.3, 0.5), power_floor_density(1.0, 0.1)}) {
    const auto p = build_partition(f, 1024, f.beta());
    const auto c = haar_coeffs(f, p, 8);
    c.for_each_index([&](std::size_t i, int j, std::size_t k) {
      if (j < 0) return;
      EXPECT_LE(std::fabs(c.at(i, j, k)), f.radius() * std::pow(std::ldexp(p.delta[i], -j), f.beta() + 0.5));
    });
  }
}

TEST(Haar, TruncationErrorBound) {
  const auto f = cosine_density(0.5);
  const auto p = build_partition(f, 256, 1.0);
  const int J = 3;
  const auto c = haar_coeffs(f, p, J);
  double kept = 0;
  c.for_each_index([&](std::size_t i, int j, std::size_t k) { kept += c.at(i, j, k) * c.at(i, j, k); });
  const double l2 = integrate([&](double x) { return f(x) * f(x); }, 0, 1, 1e-14);
  double bound = 0;
  for (double d : p.delta) bound += f.radius() * f.radius() * std::pow(d, 3);
  bound *= std::pow(2.0, -2.0 * J) / 3.0;
  EXPECT_GE(l2 - kept, -1e-12);
  EXPECT_LE(l2 - kept, bound);
}

TEST(Haar, DefaultJmaxRespectsCaps) {
  const auto p = build_partition(cosine_density(0.5), 4096, 1.0);
  const int J = default_jmax(p, cosine_density(0.5).radius());
  EXPECT_GE(J, 0);
  EXPECT_LE(J, 10);
  EXPECT_LE(default_jmax(p, 1e6, 4), 4);
}

TEST(GaussianCoeffs, ZeroNoiseEqualsMeans) {
  const auto f0 = cosine_density(0.4);
  const auto f = cosine_density(0.5);
  const std::size_t n = 300;
  const auto p = build_partition(f0, n, 1.0);
  const int J = 3;
  const auto prof = step_approx(f0, p);
  const auto y = sample_gwn(f, n, haar_grid(p, J + 1), VarianceMode::Step, &prof, 1, 0.0);
  const auto z = gwn_to_coeffs(y, p, f0, J);
  const auto d = haar_coeffs(f, p, J);
  z.for_each_index([&](std::size_t i, int j, std::size_t k) {
    if (j < 0)
      EXPECT_NEAR(z.at(i, j, k), n * f.integral(p.x[i], p.x[i + 1]), 1e-9);
    else
      EXPECT_NEAR(z.at(i, j, k), std::sqrt(n / f0(p.x[i])) * d.at(i, j, k), 1e-10);
  });
}

TEST(GaussianCoeffs, UnitVarianceUnderConstantDensity) {
  const auto f0 = uniform_density();
  const std::size_t n = 64;
  const auto p = build_partition(f0, n, 1.0);
  const auto prof = step_approx(f0, p);
  const auto grid = haar_grid(p, 2);
  const int R = 10000;
  double s = 0, s2 = 0;
  for (int r = 0; r < R; ++r) {
    const auto y = sample_gwn(f0, n, grid, VarianceMode::Step, &prof, r);
    const double z = gwn_to_coeffs(y, p, f0, 1).at(0, 0, 0);
    s += z, s2 += z * z;
  }
  const double var = s2 / R - (s / R) * (s / R);
  EXPECT_NEAR(s / R, 0.0, 4 / std::sqrt(R));
  EXPECT_NEAR(var, 1.0, 3 * std::sqrt(2.0 / R));
}

TEST(GaussianCoeffs, MisalignedGridRejected) {
  const auto f0 = uniform_density();
  const auto p = build_partition(f0, 1000, 1.0);
  const auto y = sample_gwn(f0, 1000, 7, VarianceMode::Unit, nullptr, 1);
  EXPECT_THROW(gwn_to_coeffs(y, p, f0, 2), ConfigError);
}

TEST(CoeffIo, CsvRoundTrip) {
  const auto f = cosine_density(0.5);
  const auto p = build_partition(f, 128, 1.0);
  const auto c = haar_coeffs(f, p, 3);
  const std::string path = testing::TempDir() + "lecam_coeffs.csv";
  write_coeffs_csv(path, c);
  const auto r = read_coeffs_csv(path, CoeffKind::Density);
  ASSERT_EQ(r.m, c.m);
  ASSERT_EQ(r.jmax, c.jmax);
  for (std::size_t k = 0; k < c.values.size(); ++k) EXPECT_DOUBLE_EQ(r.values[k], c.values[k]);
}
