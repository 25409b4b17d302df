#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core.hpp"
#include "coupling.hpp"
#include "experiments.hpp"
#include "funcspace.hpp"
#include "partition_haar.hpp"

namespace lecam {

enum class Kernel { Epanechnikov, Box };

struct KernelConstants {
  double sup;      ///< ||K||_inf
  double l2sq;     ///< ||K||_2^2
};

inline KernelConstants kernel_constants(Kernel k) {
  return k == Kernel::Epanechnikov ? KernelConstants{0.75, 0.6} : KernelConstants{0.5, 0.5};
}

/// Kernel density estimate with a pointwise bandwidth h(x), evaluated on
/// `grid` and returned as the piecewise-linear interpolant. Mass near 0 and 1
/// is reflected back into [0, 1].
inline DensityModel kernel_estimate(const std::vector<double>& sample, std::size_t n,
                                    const std::function<double(double)>& bandwidth, Kernel kernel,
                                    std::vector<double> grid) {
  require(n >= 1 && !sample.empty(), "kernel_estimate: empty sample");
  require(grid.size() >= 2, "kernel_estimate: grid too small");
  std::vector<double> pts;
  pts.reserve(3 * sample.size());
  for (double x : sample) {
    pts.push_back(x);
    pts.push_back(-x);
    pts.push_back(2.0 - x);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> s1(pts.size() + 1, 0.0), s2(pts.size() + 1, 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s1[i + 1] = s1[i] + pts[i];
    s2[i + 1] = s2[i] + pts[i] * pts[i];
  }
  const double nd = static_cast<double>(n);
  std::vector<double> vals(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    const double h = bandwidth(x);
    require(h > 0 && std::isfinite(h), "kernel_estimate: bandwidth must be positive");
    const auto lo = static_cast<std::size_t>(std::lower_bound(pts.begin(), pts.end(), x - h) - pts.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(pts.begin(), pts.end(), x + h) - pts.begin());
    const double cnt = static_cast<double>(hi - lo);
    double v;
    if (kernel == Kernel::Box) {
      v = 0.5 * cnt;
    } else {
      const double a1 = s1[hi] - s1[lo], a2 = s2[hi] - s2[lo];
      const double quad = a2 - 2 * x * a1 + x * x * cnt;  // sum (X - x)^2
      v = 0.75 * (cnt - quad / (h * h));
    }
    vals[g] = std::max(0.0, v / (nd * h));
  }
  if (grid.front() > 0) {
    grid.insert(grid.begin(), 0.0);
    vals.insert(vals.begin(), vals.front());
  }
  if (grid.back() < 1) {
    grid.push_back(1.0);
    vals.push_back(vals.back());
  }
  auto m = piecewise_linear_density(std::move(grid), std::move(vals));
  return m;
}

/// Grid {k/G : k = 0..G}.
inline std::vector<double> eval_grid(std::size_t G) { return linspace(0.0, 1.0, G + 1); }

struct TwoStageOptions {
  Kernel kernel = Kernel::Epanechnikov;
  std::size_t grid = 0;  ///< evaluation cells; 0 means n
  bool snap = true;
};

struct TwoStageResult {
  DensityModel pilot;
  DensityModel estimate;
  double L = 0;        ///< log(n*) / n*
  std::size_t n_star = 0;
};

/// Two-stage estimator: a pilot with h1 = L^{1/(b+1)} on the first half, then a
/// refit on the second half with h(x) = L^{1/(b+1)} v (L fhat1(x))^{1/(2b+1)}.
/// The result is normalized and rounded to the lattice n^{-2} Z, a finite
/// sup-norm net of mesh n^{-2}.
inline TwoStageResult two_stage_estimate(const std::vector<double>& points, std::size_t n, double beta,
                                         const TwoStageOptions& opt = {}) {
  require(beta > 0, "two_stage_estimate: beta must be positive");
  require(n >= 4 && points.size() >= 4, "two_stage_estimate: need at least four observations");
  const std::size_t ns = n / 2;
  const double L = std::log(static_cast<double>(ns)) / static_cast<double>(ns);
  const std::size_t half = std::min(ns, points.size() / 2);
  std::vector<double> first(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<double> second(points.begin() + static_cast<std::ptrdiff_t>(half), points.end());
  if (second.size() > ns) second.resize(ns);
  const auto grid = eval_grid(opt.grid ? opt.grid : n);
  const double h1 = std::pow(L, 1.0 / (beta + 1));
  TwoStageResult r;
  r.L = L;
  r.n_star = ns;
  r.pilot = kernel_estimate(first, ns, [&](double) { return h1; }, opt.kernel, grid);
  const DensityModel& pilot = r.pilot;
  auto hx = [&](double x) { return std::max(h1, std::pow(L * pilot(x), 1.0 / (2 * beta + 1))); };
  DensityModel est = kernel_estimate(second, ns, hx, opt.kernel, grid);
  const double mass = est.integral(0.0, 1.0);
  require(mass > 0, "two_stage_estimate: estimate has no mass");
  const auto& p = est.params();
  auto knots = p.at("knots").get<std::vector<double>>();
  auto vals = p.at("values").get<std::vector<double>>();
  const double q = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (double& v : vals) {
    v /= mass;
    if (opt.snap) v = std::nearbyint(v / q) * q;
  }
  r.estimate = piecewise_linear_density(std::move(knots), std::move(vals)).with_smoothness(beta, est.radius());
  return r;
}

inline TwoStageResult two_stage_estimate(const DensitySample& s, double beta, const TwoStageOptions& opt = {}) {
  return two_stage_estimate(s.points, s.n, beta, opt);
}

/// Poisson data: given N the points are i.i.d., so the density estimator runs
/// on the N points.
inline TwoStageResult two_stage_estimate(const PointProcessSample& s, double beta, const TwoStageOptions& opt = {}) {
  require(s.points.size() >= 4, "two_stage_estimate: fewer than four Poisson points");
  return two_stage_estimate(s.points, s.points.size(), beta, opt);
}

/// Histogram sum_i N_i / (n Delta_i) 1_{I_i}, clamped into [ref/2, 2 ref]
/// evaluated at the left endpoint of each interval.
inline DensityModel histogram_on_partition(const std::vector<double>& points, double n, const Partition& p,
                                           const DensityModel* ref = nullptr) {
  require(n > 0, "histogram_on_partition: n must be positive");
  std::vector<double> cnt(p.m(), 0.0);
  for (double x : points) cnt[p.locate(x)] += 1.0;
  std::vector<double> v(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) {
    v[i] = cnt[i] / (n * p.delta[i]);
    if (ref) {
      const double r = (*ref)(p.x[i]);
      v[i] = std::clamp(v[i], 0.5 * r, 2.0 * r);
    }
  }
  return piecewise_constant_density(p.x, v, p.beta);
}

struct PilotHistogram {
  TwoStageResult pilot;
  Partition partition;
  DensityModel estimate;
};

/// Pilot on one half of a Poisson sample, partition built from the pilot,
/// clamped histogram on the other half.
inline PilotHistogram pilot_histogram_estimate(const PointProcessSample& s, double beta, std::uint64_t seed,
                                               const TwoStageOptions& opt = {}) {
  auto [a, b] = split_sample(s, seed);
  PilotHistogram out;
  out.pilot = two_stage_estimate(a, beta, opt);
  // Keep the partition recursion away from zero.
  const double fl = std::pow(static_cast<double>(s.n), -beta / (beta + 1));
  const auto& pp = out.pilot.estimate.params();
  auto vals = pp.at("values").get<std::vector<double>>();
  for (double& v : vals) v = std::max(v, fl);
  const DensityModel floored = piecewise_linear_density(pp.at("knots").get<std::vector<double>>(), vals);
  out.partition = build_partition(floored, s.n, beta);
  out.estimate = histogram_on_partition(b.points, static_cast<double>(b.n), out.partition, &out.pilot.estimate);
  return out;
}

// --- membership of the local parameter spaces ---

struct MembershipReport {
  bool member = false;
  double margin = 0;  ///< worst slack; negative when violated
  json details = json::object();
};

/// f in Theta_1(center): |f - center| <= C L^{b/(b+1)} + C (L center)^{b/(2b+1)}
/// on a uniform grid, L = log n / n.
inline MembershipReport theta1_membership(const DensityModel& f, const DensityModel& center, std::size_t n,
                                          double beta, double C, std::size_t grid = 4096) {
  const double nd = static_cast<double>(n);
  const double L = std::log(nd) / nd;
  double margin = INFINITY, worst_ratio = 0;
  for (std::size_t k = 0; k <= grid; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(grid);
    const double c = center(x);
    const double rhs = C * std::pow(L, beta / (beta + 1)) + C * std::pow(L * std::max(c, 0.0), beta / (2 * beta + 1));
    const double lhs = std::fabs(f(x) - c);
    margin = std::min(margin, rhs - lhs);
    worst_ratio = std::max(worst_ratio, lhs / rhs * C);
  }
  MembershipReport r;
  r.margin = margin;
  r.member = margin >= 0;
  // Smallest C for which the condition holds on this grid.
  r.details = json{{"C", C}, {"C_needed", worst_ratio}, {"L", L}};
  return r;
}

/// f in Theta(center): band lo*center <= f <= hi*center and
/// n int (f - center)^4 / center^3 <= C2 n^{(1-2b)/(2b+1)} int center^{-(2b+3)/(2b+1)}.
inline MembershipReport theta_membership(const DensityModel& f, const DensityModel& center, std::size_t n, double beta,
                                         double C2, double band_lo = 1.0 / 32, double band_hi = 32.0,
                                         std::size_t grid = 4096) {
  const double nd = static_cast<double>(n);
  double band = INFINITY;
  for (std::size_t k = 0; k <= grid; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(grid);
    const double c = center(x), v = f(x);
    if (!(c > 0)) {
      band = -INFINITY;
      break;
    }
    band = std::min({band, v / c - band_lo, band_hi - v / c});
  }
  auto brk = f.breakpoints();
  const auto b2 = center.breakpoints();
  brk.insert(brk.end(), b2.begin(), b2.end());
  std::sort(brk.begin(), brk.end());
  const double quart = nd * integrate_pieces(
                                [&](double x) {
                                  const double c = center(x), d = f(x) - c;
                                  return d * d * d * d / (c * c * c);
                                },
                                0.0, 1.0, brk, 1e-11);
  const double e = (2 * beta + 3) / (2 * beta + 1);
  const double rate = std::pow(nd, (1 - 2 * beta) / (2 * beta + 1)) *
                      integrate_pieces([&](double x) { return std::pow(center(x), -e); }, 0.0, 1.0, brk, 1e-11);
  MembershipReport r;
  const double qslack = 1.0 - quart / (C2 * rate);
  r.margin = std::min(band, qslack);
  r.member = band >= 0 && qslack >= 0;
  r.details = json{{"band_slack", band}, {"quartic", quart}, {"rate", rate}, {"C2", C2},
                   {"C2_needed", quart / rate}};
  return r;
}

/// I_n = 1 ^ n^{(1-2b)/(2b+1)} int fhat^{-(2b+3)/(2b+1)}.
inline double pretest_In(const DensityModel& fhat, std::size_t n, double beta) {
  require(beta > 0, "pretest_In: beta must be positive");
  const double e = (2 * beta + 3) / (2 * beta + 1);
  bool zero = false;
  const double I = integrate_pieces(
      [&](double x) {
        const double v = fhat(x);
        if (!(v > 0)) {
          zero = true;
          return 0.0;
        }
        return std::pow(v, -e);
      },
      0.0, 1.0, fhat.breakpoints(), 1e-10);
  if (zero) return 1.0;
  return std::min(1.0, std::pow(static_cast<double>(n), (1 - 2 * beta) / (2 * beta + 1)) * I);
}

// --- switching relation between centre and estimate ---

/// Constant of the switched relation. C is first raised to max(C, 1).
inline double switch_constant(double C, double beta) {
  const double c = std::max(C, 1.0);
  return std::max(c * (1 + std::pow(4 * c, beta / (beta + 1))), std::pow(2.0, beta / (2 * beta + 1)) * c + c);
}

/// |a - b| <= C r^{b/(b+1)} + C (a r)^{b/(2b+1)} for the given right-hand centre.
inline bool local_relation(double a, double b, double r, double C, double beta) {
  const double rhs = C * std::pow(r, beta / (beta + 1)) + C * std::pow(a * r, beta / (2 * beta + 1));
  return std::fabs(a - b) <= rhs * (1 + 1e-12);
}

/// Constant a(beta) with (e^a - 1) + a^beta / r! <= 1/2, r = ceil(beta) - 1.
inline double local_bound_constant(double beta) {
  const int r = static_cast<int>(std::ceil(beta)) - 1;
  double fact = 1;
  for (int i = 2; i <= r; ++i) fact *= i;
  double lo = 0, hi = 1;
  for (int it = 0; it < 100; ++it) {
    const double a = 0.5 * (lo + hi);
    ((std::exp(a) - 1) + std::pow(a, beta) / fact <= 0.5 ? lo : hi) = a;
  }
  return lo;
}

/// Pointwise deviation bound for a kernel estimate holding with probability
/// at least 1 - 2 n^{1-gamma} on the grid {k/n}.
inline double kernel_deviation_bound(double R, double beta, double gamma, double h, std::size_t n, double fx,
                                     Kernel k = Kernel::Epanechnikov) {
  const auto kc = kernel_constants(k);
  const double a = local_bound_constant(beta);
  const double ln = std::log(static_cast<double>(n)) / (static_cast<double>(n) * h);
  return R * (kc.sup + std::pow(a, -beta)) * std::pow(h, beta) + 2 * gamma * (kc.sup + kc.l2sq) * ln +
         std::sqrt(kc.l2sq) * std::sqrt(8 * gamma * fx * ln);
}

}  // namespace lecam
