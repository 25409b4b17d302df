#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace lecam {

/// Bad input: malformed config, unknown family, violated precondition.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A numerical contract could not be met (inversion failure, overflow, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for replicate `index` of stream `stream`. Independent of thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) + index);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::uint64_t stream = 0, std::uint64_t index = 0) {
  return Engine(derive_seed(master, stream, index));
}

inline double uniform01(Engine& g) {
  const double u = std::generate_canonical<double, 64>(g);
  return u < 1.0 ? u : 0x1.fffffffffffffp-1;
}

/// Uniform on (-1/2, 1/2].
inline double dither(Engine& g) { return 0.5 - uniform01(g); }

inline double std_normal(Engine& g) { return std::normal_distribution<double>(0.0, 1.0)(g); }

inline long long poisson_draw(Engine& g, double mean) {
  if (mean <= 0) return 0;
  return std::poisson_distribution<long long>(mean)(g);
}

inline long long binomial_draw(Engine& g, long long trials, double p) {
  if (trials <= 0 || p <= 0) return 0;
  if (p >= 1) return trials;
  return std::binomial_distribution<long long>(trials, p)(g);
}

inline unsigned worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(i) for i in [0, n). Each index writes its own slot, so results do
/// not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = 0) {
  if (threads == 0) threads = worker_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

namespace detail {

// The single-panel error estimate comes back on the [-1, 1] scale; rescale it.
inline double gk_panel(const std::function<double(double)>& f, double a, double b, double* err, double* l1) {
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, err, l1);
  *err *= 0.5 * (b - a);
  return v;
}

inline double gk_adapt(const std::function<double(double)>& f, double a, double b, double est, double err,
                       double tol, double abs_tol, int depth, double* total_err) {
  if (depth == 0 || !(err > std::max(tol * std::fabs(est), abs_tol))) {
    *total_err += err;
    return est;
  }
  const double mid = 0.5 * (a + b);
  double e1 = 0, e2 = 0, l = 0;
  const double v1 = gk_panel(f, a, mid, &e1, &l);
  const double v2 = gk_panel(f, mid, b, &e2, &l);
  return gk_adapt(f, a, mid, v1, e1, tol, abs_tol / 2, depth - 1, total_err) +
         gk_adapt(f, mid, b, v2, e2, tol, abs_tol / 2, depth - 1, total_err);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod quadrature on [a, b]. Converged when the error
/// estimate is below tol * |I| or tol * 1e-3 * int |f|.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                        double* error = nullptr) {
  if (b <= a) return 0.0;
  double err = 0, l1 = 0, total_err = 0;
  const double v = detail::gk_panel(f, a, b, &err, &l1);
  const double r = detail::gk_adapt(f, a, b, v, err, tol, tol * 1e-3 * l1, 15, &total_err);
  if (error) *error = total_err;
  return r;
}

/// Adaptive quadrature split at the given breakpoints.
inline double integrate_pieces(const std::function<double(double)>& f, double a, double b,
                               const std::vector<double>& breaks, double tol = 1e-10) {
  double total = 0, lo = a;
  for (double x : breaks) {
    if (x <= lo || x >= b) continue;
    total += integrate(f, lo, x, tol);
    lo = x;
  }
  return total + integrate(f, lo, b, tol);
}

/// Fixed 10-point Gauss-Legendre rule.
template <class F>
double gauss_legendre(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

inline std::vector<double> linspace(double a, double b, std::size_t points) {
  std::vector<double> v(points);
  if (points == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < points; ++i) v[i] = a + (b - a) * static_cast<double>(i) / (points - 1);
  v.back() = b;
  return v;
}

/// Ordinary least squares fit of y on x.
struct LineFit {
  double slope = 0, intercept = 0;
  double slope_se = 0;
  double ci_low = 0, ci_high = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, double level = 0.95) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const double k = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= k, my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  require(sxx > 0, "fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  if (x.size() > 2) {
    f.slope_se = std::sqrt(rss / (k - 2) / sxx);
    const double t = boost::math::quantile(boost::math::students_t(k - 2), 0.5 + level / 2);
    f.ci_low = f.slope - t * f.slope_se;
    f.ci_high = f.slope + t * f.slope_se;
  } else {
    f.ci_low = f.ci_high = f.slope;
  }
  return f;
}

}  // namespace lecam
