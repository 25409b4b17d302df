#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace lecam {

using json = nlohmann::json;

/// Pointwise model of a nonnegative function on [0, 1].
class DensityImpl {
 public:
  virtual ~DensityImpl() = default;
  virtual double eval(double x) const = 0;
  /// Integral over [a, b], 0 <= a <= b <= 1.
  virtual double integral(double a, double b) const = 0;
  /// Points where the model is not smooth. Used to split quadrature.
  virtual std::vector<double> breakpoints() const { return {}; }
  virtual double quantile(double u) const;
};

/// Immutable handle to a function on [0, 1] together with its smoothness
/// class metadata.
class DensityModel {
 public:
  struct Meta {
    std::string family;
    json params = json::object();
    double beta = 1.0;
    double radius = std::numeric_limits<double>::infinity();
    double floor = 0.0;
  };

  DensityModel() = default;
  DensityModel(std::shared_ptr<const DensityImpl> impl, Meta meta) : impl_(std::move(impl)), meta_(std::move(meta)) {}

  double operator()(double x) const { return impl_->eval(std::clamp(x, 0.0, 1.0)); }
  double integral(double a, double b) const {
    a = std::clamp(a, 0.0, 1.0);
    b = std::clamp(b, 0.0, 1.0);
    if (b <= a) return 0.0;
    return impl_->integral(a, b);
  }
  double cdf(double x) const { return integral(0.0, x); }
  /// Inverse of the normalized CDF.
  double quantile(double u) const { return impl_->quantile(std::clamp(u, 0.0, 1.0)); }
  std::vector<double> breakpoints() const { return impl_->breakpoints(); }

  double beta() const { return meta_.beta; }
  double radius() const { return meta_.radius; }
  double floor() const { return meta_.floor; }
  const std::string& family() const { return meta_.family; }
  const json& params() const { return meta_.params; }
  const Meta& meta() const { return meta_; }
  bool valid() const { return static_cast<bool>(impl_); }

  DensityModel with_smoothness(double beta, double radius) const {
    Meta m = meta_;
    m.beta = beta;
    m.radius = radius;
    return DensityModel(impl_, m);
  }

  json descriptor() const {
    return json{{"family", meta_.family}, {"params", meta_.params}, {"beta", meta_.beta}, {"R", meta_.radius}};
  }

 private:
  std::shared_ptr<const DensityImpl> impl_;
  Meta meta_;
};

inline double DensityImpl::quantile(double u) const {
  const double total = integral(0.0, 1.0);
  if (!(total > 0)) throw NumericalError("quantile: model has no mass");
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  const double target = u * total;
  double lo = 0, hi = 1, x = u;
  for (int it = 0; it < 200; ++it) {
    const double F = integral(0.0, x) - target;
    if (std::fabs(F) <= 1e-15 * total) return x;
    if (F > 0)
      hi = x;
    else
      lo = x;
    if (hi - lo < 1e-16) break;
    const double d = eval(x);
    double xn = d > 0 ? x - F / d : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    x = xn;
  }
  if (integral(0.0, lo) > integral(0.0, hi) + 1e-12 * total) throw NumericalError("quantile: CDF not monotone");
  return 0.5 * (lo + hi);
}

namespace detail {

struct UniformImpl final : DensityImpl {
  double eval(double) const override { return 1.0; }
  double integral(double a, double b) const override { return b - a; }
  double quantile(double u) const override { return u; }
};

struct CosineImpl final : DensityImpl {
  double a;
  explicit CosineImpl(double a_) : a(a_) {}
  double eval(double x) const override { return 1.0 + a * std::cos(2 * std::numbers::pi * x); }
  double antider(double x) const { return x + a / (2 * std::numbers::pi) * std::sin(2 * std::numbers::pi * x); }
  double integral(double lo, double hi) const override { return antider(hi) - antider(lo); }
};

struct PowerFloorImpl final : DensityImpl {
  double b, c, z;
  PowerFloorImpl(double b_, double c_) : b(b_), c(c_), z(1.0 / (b_ + 1.0) + c_) {}
  double eval(double x) const override { return (std::pow(x, b) + c) / z; }
  double antider(double x) const { return (std::pow(x, b + 1) / (b + 1) + c * x) / z; }
  double integral(double lo, double hi) const override { return antider(hi) - antider(lo); }
};

struct PiecewiseLinearImpl final : DensityImpl {
  std::vector<double> t, v, cum;
  PiecewiseLinearImpl(std::vector<double> t_, std::vector<double> v_) : t(std::move(t_)), v(std::move(v_)) {
    cum.assign(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i) cum[i] = cum[i - 1] + 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
  }
  std::size_t seg(double x) const {
    auto it = std::upper_bound(t.begin(), t.end(), x);
    std::size_t k = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
    return std::min(k, t.size() - 2);
  }
  double eval(double x) const override {
    const std::size_t k = seg(x);
    const double w = (x - t[k]) / (t[k + 1] - t[k]);
    return v[k] + w * (v[k + 1] - v[k]);
  }
  double prim(double x) const {
    const std::size_t k = seg(x);
    const double fx = eval(x);
    return cum[k] + 0.5 * (v[k] + fx) * (x - t[k]);
  }
  double integral(double a, double b) const override { return prim(b) - prim(a); }
  std::vector<double> breakpoints() const override { return t; }
};

struct PiecewiseConstantImpl final : DensityImpl {
  std::vector<double> b, v, cum;
  PiecewiseConstantImpl(std::vector<double> b_, std::vector<double> v_) : b(std::move(b_)), v(std::move(v_)) {
    cum.assign(b.size(), 0.0);
    for (std::size_t i = 1; i < b.size(); ++i) cum[i] = cum[i - 1] + v[i - 1] * (b[i] - b[i - 1]);
  }
  std::size_t seg(double x) const {
    auto it = std::upper_bound(b.begin(), b.end(), x);
    std::size_t k = it == b.begin() ? 0 : static_cast<std::size_t>(it - b.begin()) - 1;
    return std::min(k, v.size() - 1);
  }
  double eval(double x) const override { return v[seg(x)]; }
  double prim(double x) const {
    const std::size_t k = seg(x);
    return cum[k] + v[k] * (x - b[k]);
  }
  double integral(double lo, double hi) const override { return prim(hi) - prim(lo); }
  std::vector<double> breakpoints() const override { return b; }
  double quantile(double u) const override {
    const double target = u * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    std::size_t k = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
    k = std::min(k, v.size() - 1);
    while (k + 1 < v.size() && v[k] <= 0) ++k;
    if (v[k] <= 0) return b[k];
    return std::clamp(b[k] + (target - cum[k]) / v[k], b[k], b[k + 1]);
  }
};

inline void check_knots(const std::vector<double>& t, const std::vector<double>& v, std::size_t extra,
                        const char* who) {
  require(t.size() >= 2 && v.size() + extra == t.size(), std::string(who) + ": knot/value size mismatch");
  require(std::fabs(t.front()) < 1e-12 && std::fabs(t.back() - 1.0) < 1e-12,
          std::string(who) + ": knots must span [0,1]");
  for (std::size_t i = 1; i < t.size(); ++i) require(t[i] > t[i - 1], std::string(who) + ": knots must increase");
  for (double y : v) require(y >= 0 && std::isfinite(y), std::string(who) + ": values must be finite and >= 0");
}

}  // namespace detail

inline DensityModel uniform_density() {
  return DensityModel(std::make_shared<detail::UniformImpl>(),
                      {"uniform", json::object(), 1.0, 2.0, 1.0});
}

/// f(x) = 1 + a cos(2 pi x), 0 <= a < 1. Supported smoothness 0 < beta <= 2.
inline DensityModel cosine_density(double a, double beta = 1.0) {
  require(a >= 0 && a < 1, "cosine: need 0 <= a < 1");
  require(beta > 0 && beta <= 2, "cosine: beta must lie in (0, 2]");
  const double pi = std::numbers::pi;
  double R;
  // Holder bounds use |g(x)-g(y)| <= min(2A, L|x-y|).
  if (beta == 1.0)
    R = 2 * (1 + a) + 2 * pi * a;
  else if (beta < 1.0)
    R = 2 * (1 + a) + 2 * a * std::pow(pi, beta);
  else
    R = 1 + a + 2 * pi * a + 4 * std::pow(pi, beta) * a;
  return DensityModel(std::make_shared<detail::CosineImpl>(a), {"cosine", json{{"a", a}}, beta, R, 1 - a});
}

/// f(x) = (x^b + c) / (1/(b+1) + c).
inline DensityModel power_floor_density(double b, double c) {
  require(b > 0, "power_floor: exponent must be positive");
  require(c > 0, "power_floor: floor constant must be positive");
  const double z = 1.0 / (b + 1.0) + c;
  // ||f||_inf + ||f^(r)||_inf + |f^(r)|_{b-r}, r = ceil(b) - 1.
  const int r = static_cast<int>(std::ceil(b)) - 1;
  double coef = 1.0;
  for (int i = 0; i < r; ++i) coef *= (b - i);
  const double sup = (1.0 + c) / z;
  const double R = sup + (r == 0 ? sup : coef / z) + coef / z;
  return DensityModel(std::make_shared<detail::PowerFloorImpl>(b, c),
                      {"power_floor", json{{"beta", b}, {"c", c}}, b, R, c / z});
}

/// Continuous piecewise-linear interpolant. Smoothness class beta = 1.
inline DensityModel piecewise_linear_density(std::vector<double> knots, std::vector<double> values,
                                             bool normalize = false) {
  detail::check_knots(knots, values, 0, "piecewise_linear");
  if (normalize) {
    double mass = 0;
    for (std::size_t i = 1; i < knots.size(); ++i) mass += 0.5 * (values[i] + values[i - 1]) * (knots[i] - knots[i - 1]);
    require(mass > 0, "piecewise_linear: zero mass");
    for (double& y : values) y /= mass;
  }
  double sup = 0, slope = 0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    sup = std::max(sup, values[i]);
    if (i) slope = std::max(slope, std::fabs(values[i] - values[i - 1]) / (knots[i] - knots[i - 1]));
  }
  const double fl = *std::min_element(values.begin(), values.end());
  json p{{"knots", knots}, {"values", values}};
  return DensityModel(std::make_shared<detail::PiecewiseLinearImpl>(std::move(knots), std::move(values)),
                      {"piecewise_linear", std::move(p), 1.0, 2 * sup + slope, fl});
}

/// Step function with values[k] on [breaks[k], breaks[k+1]).
inline DensityModel piecewise_constant_density(std::vector<double> breaks, std::vector<double> values,
                                               double beta = 0.0) {
  detail::check_knots(breaks, values, 1, "piecewise_constant");
  const double fl = *std::min_element(values.begin(), values.end());
  json p{{"breaks", breaks}, {"values", values}};
  return DensityModel(std::make_shared<detail::PiecewiseConstantImpl>(std::move(breaks), std::move(values)),
                      {"piecewise_constant", std::move(p), beta, std::numeric_limits<double>::infinity(), fl});
}

/// Builds a model from {"family", "params", "beta"?, "R"?}.
inline DensityModel density_from_descriptor(const json& d) {
  require(d.is_object() && d.contains("family"), "density descriptor needs a 'family' field");
  const std::string fam = d.at("family").get<std::string>();
  const json p = d.value("params", json::object());
  DensityModel m;
  try {
    if (fam == "uniform") {
      m = uniform_density();
    } else if (fam == "cosine") {
      m = cosine_density(p.value("a", 0.5), d.value("beta", 1.0));
    } else if (fam == "power_floor") {
      m = power_floor_density(p.value("beta", 1.0), p.value("c", 0.5));
    } else if (fam == "piecewise_linear") {
      m = piecewise_linear_density(p.at("knots").get<std::vector<double>>(), p.at("values").get<std::vector<double>>(),
                                   p.value("normalize", false));
    } else if (fam == "piecewise_constant") {
      m = piecewise_constant_density(p.at("breaks").get<std::vector<double>>(),
                                     p.at("values").get<std::vector<double>>());
    } else {
      throw ConfigError("unknown density family '" + fam + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad parameters for family '" + fam + "': " + e.what());
  }
  const double beta = d.value("beta", m.beta());
  const double R = d.contains("R") && d.at("R").is_number() ? d.at("R").get<double>() : m.radius();
  require(beta > 0 || fam == "piecewise_constant", "beta must be positive");
  require(R > 0, "R must be positive");
  return m.with_smoothness(beta, R);
}

inline DensityModel make_family(const std::string& family, const json& params = json::object()) {
  return density_from_descriptor(json{{"family", family}, {"params", params}});
}

/// Grid diagnostics of Holder and flatness norms.
struct ClassReport {
  double sup_norm = 0;
  double deriv_sup = 0;
  double holder_seminorm = 0;
  double flat_seminorm = 0;
  double norm_C = 0;
  double norm_H = 0;
  bool member_C = false;
  bool member_H = false;
  int grid_size = 0;
};

namespace detail {

inline std::vector<double> finite_diff(const std::vector<double>& a, double step) {
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0)
      d[k] = (a[1] - a[0]) / step;
    else if (k + 1 == n)
      d[k] = (a[k] - a[k - 1]) / step;
    else
      d[k] = (a[k + 1] - a[k - 1]) / (2 * step);
  }
  return d;
}

inline double dyadic_holder(const std::vector<double>& a, double step, double s) {
  double best = 0;
  const std::size_t n = a.size();
  for (std::size_t gap = 1; gap < n; gap *= 2) {
    const double scale = std::pow(gap * step, s);
    for (std::size_t k = 0; k + gap < n; ++k) best = std::max(best, std::fabs(a[k + gap] - a[k]) / scale);
  }
  return best;
}

}  // namespace detail

/// Estimates the norms of f on the uniform grid {k/G}. Holder quotients are
/// maximized over dyadic pairs; derivatives come from finite differences.
inline ClassReport check_class(const DensityModel& f, int grid_size = 1 << 13) {
  require(grid_size >= 2, "check_class: grid too small");
  const double beta = f.beta();
  require(beta > 0, "check_class: beta must be positive");
  const double step = 1.0 / grid_size;
  std::vector<double> vals(grid_size + 1);
  for (int k = 0; k <= grid_size; ++k) vals[k] = f(k * step);

  const int r = static_cast<int>(std::ceil(beta)) - 1;
  ClassReport rep;
  rep.grid_size = grid_size;
  for (double v : vals) rep.sup_norm = std::max(rep.sup_norm, std::fabs(v));

  std::vector<std::vector<double>> derivs{vals};
  for (int j = 1; j <= r; ++j) derivs.push_back(detail::finite_diff(derivs.back(), step));
  for (double v : derivs[r]) rep.deriv_sup = std::max(rep.deriv_sup, std::fabs(v));
  rep.holder_seminorm = detail::dyadic_holder(derivs[r], step, beta - r);

  for (int j = 1; j <= r; ++j) {
    double m = 0;
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double num = std::pow(std::fabs(derivs[j][k]), beta);
      if (num == 0) continue;
      const double den = std::pow(std::fabs(vals[k]), beta - j);
      m = den > 0 ? std::max(m, num / den) : std::numeric_limits<double>::infinity();
    }
    rep.flat_seminorm = std::max(rep.flat_seminorm, std::pow(m, 1.0 / j));
  }

  rep.norm_C = rep.sup_norm + rep.deriv_sup + rep.holder_seminorm;
  rep.norm_H = rep.norm_C + rep.flat_seminorm;
  const double R = f.radius() * (1 + 1e-9);
  rep.member_C = rep.norm_C <= R;
  rep.member_H = rep.member_C && rep.norm_H <= R;
  return rep;
}

inline json to_json(const ClassReport& r) {
  return json{{"sup_norm", r.sup_norm},       {"deriv_sup", r.deriv_sup}, {"holder_seminorm", r.holder_seminorm},
              {"flat_seminorm", r.flat_seminorm}, {"norm_C", r.norm_C},   {"norm_H", r.norm_H},
              {"member_C", r.member_C},       {"member_H", r.member_H},  {"grid_size", r.grid_size}};
}

}  // namespace lecam
