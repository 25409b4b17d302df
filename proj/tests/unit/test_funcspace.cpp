#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lecam/funcspace.hpp"

using namespace lecam;

namespace {

std::vector<DensityModel> families() {
  return {uniform_density(),
          cosine_density(0.5),
          cosine_density(0.3, 0.5),
          cosine_density(0.2, 1.5),
          power_floor_density(1.0, 0.5),
          power_floor_density(1.0, 0.1),
          power_floor_density(2.0, 0.2),
          piecewise_linear_density({0, 0.3, 1}, {0.5, 1.5, 0.9}, true),
          piecewise_constant_density({0, 0.5, 1}, {0.5, 1.5})};
}

}  // namespace

TEST(Funcspace, UnitMassAndPositivity) {
  for (const auto& f : families()) {
    EXPECT_NEAR(f.integral(0, 1), 1.0, 1e-10) << f.family();
    for (int k = 0; k <= 1000; ++k) ASSERT_GE(f(k / 1000.0), 0.0);
  }
}

TEST(Funcspace, IntegralAdditive) {
  for (const auto& f : families())
    for (double b : {0.1, 0.37, 0.5, 0.81})
      EXPECT_NEAR(f.integral(0.05, 0.93), f.integral(0.05, b) + f.integral(b, 0.93), 1e-12) << f.family();
}

TEST(Funcspace, IntegralMatchesQuadrature) {
  for (const auto& f : families()) {
    const double q = integrate_pieces([&](double x) { return f(x); }, 0.2, 0.7, f.breakpoints(), 1e-13);
    EXPECT_NEAR(f.integral(0.2, 0.7), q, 1e-11) << f.family();
  }
}

TEST(Funcspace, FloorBelowGridMinimum) {
  for (const auto& f : families()) {
    double mn = INFINITY;
    for (int k = 0; k <= 10000; ++k) mn = std::min(mn, f(k / 1e4));
    EXPECT_LE(f.floor(), mn + 1e-12) << f.family();
  }
}

TEST(Funcspace, FamilyFormulas) {
  const auto u = make_family("uniform");
  EXPECT_DOUBLE_EQ(u(0.3), 1.0);
  EXPECT_DOUBLE_EQ(u.floor(), 1.0);
  const auto p = make_family("power_floor", {{"beta", 1.0}, {"c", 0.5}});
  for (double x : {0.0, 0.25, 0.9}) EXPECT_NEAR(p(x), x + 0.5, 1e-15);
  EXPECT_NEAR(p.cdf(0.4), 0.4 * 0.4 / 2 + 0.2, 1e-15);
  const auto c = make_family("cosine", {{"a", 0.5}});
  EXPECT_NEAR(c(0.125), 1 + 0.5 * std::cos(std::numbers::pi / 4), 1e-15);
  EXPECT_DOUBLE_EQ(c.floor(), 0.5);
}

TEST(Funcspace, QuantileInvertsCdf) {
  for (const auto& f : families())
    for (double u : {1e-9, 0.01, 0.3, 0.5, 0.77, 0.999999}) EXPECT_NEAR(f.cdf(f.quantile(u)), u, 1e-12) << f.family();
}

TEST(Funcspace, DescriptorRoundTrip) {
  const json d{{"family", "cosine"}, {"params", {{"a", 0.25}}}, {"beta", 0.5}, {"R", 7.0}};
  const auto f = density_from_descriptor(d);
  EXPECT_EQ(f.family(), "cosine");
  EXPECT_DOUBLE_EQ(f.beta(), 0.5);
  EXPECT_DOUBLE_EQ(f.radius(), 7.0);
  const auto g = density_from_descriptor(f.descriptor());
  EXPECT_DOUBLE_EQ(g(0.3), f(0.3));
}

TEST(Funcspace, DescriptorErrors) {
  EXPECT_THROW(density_from_descriptor(json{{"params", {}}}), ConfigError);
  EXPECT_THROW(density_from_descriptor(json{{"family", "nope"}}), ConfigError);
  EXPECT_THROW(density_from_descriptor(json{{"family", "cosine"}, {"params", {{"a", 1.5}}}}), ConfigError);
  EXPECT_THROW(density_from_descriptor(json{{"family", "piecewise_linear"}, {"params", {{"knots", "x"}}}}),
               ConfigError);
  EXPECT_THROW(density_from_descriptor(json{{"family", "uniform"}, {"R", -1.0}}), ConfigError);
}

TEST(CheckClass, ConstantIsMember) {
  const auto r = check_class(uniform_density());
  EXPECT_DOUBLE_EQ(r.holder_seminorm, 0.0);
  EXPECT_TRUE(r.member_C);
  EXPECT_TRUE(r.member_H);
}

TEST(CheckClass, CosineLipschitzConstant) {
  // sup |f'| = 2 pi a = pi for a = 1/2.
  const auto r = check_class(cosine_density(0.5));
  EXPECT_NEAR(r.holder_seminorm, std::numbers::pi, 1e-3);
  EXPECT_LE(r.holder_seminorm, std::numbers::pi + 1e-12);
  EXPECT_TRUE(r.member_C);
}

TEST(CheckClass, FlatnessZeroForBetaAtMostOne) {
  for (double c : {0.5, 0.1, 0.01}) {
    const auto r = check_class(power_floor_density(1.0, c));
    EXPECT_DOUBLE_EQ(r.flat_seminorm, 0.0);
    EXPECT_EQ(r.member_C, r.member_H);
  }
}

TEST(CheckClass, DeclaredRadiiHold) {
  for (const auto& f : families()) {
    if (!std::isfinite(f.radius())) continue;
    const auto r = check_class(f);
    EXPECT_TRUE(r.member_C) << f.family() << " " << to_json(r).dump();
    if (r.member_H) EXPECT_TRUE(r.member_C);
  }
}

TEST(CheckClass, SmallRadiusRejected) {
  const auto f = cosine_density(0.5).with_smoothness(1.0, 3.0);
  EXPECT_FALSE(check_class(f).member_C);
}
