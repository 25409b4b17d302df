#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "core.hpp"
#include "experiments.hpp"
#include "normal.hpp"
#include "partition_haar.hpp"

namespace lecam {

/// Counts N_{ijk} for 0 <= j <= jmax + 1. Level -1 aliases N_{i00}.
struct CountTensor {
  std::size_t m = 0;
  int jmax = 0;
  std::vector<long long> values;

  CountTensor() = default;
  CountTensor(std::size_t m_, int jmax_) : m(m_), jmax(jmax_), values(m_ * block(), 0) {}

  std::size_t block() const { return (std::size_t{1} << (jmax + 2)) - 1; }
  static std::size_t slot(int j, std::size_t k) { return j < 0 ? 0 : (std::size_t{1} << j) - 1 + k; }
  long long& at(std::size_t i, int j, std::size_t k) { return values[i * block() + slot(j, k)]; }
  long long at(std::size_t i, int j, std::size_t k) const { return values[i * block() + slot(j, k)]; }
  bool operator==(const CountTensor&) const = default;

  /// Fills levels 0..jmax from the finest level.
  void aggregate() {
    for (std::size_t i = 0; i < m; ++i)
      for (int j = jmax; j >= 0; --j)
        for (std::size_t k = 0; k < (std::size_t{1} << j); ++k)
          at(i, j, k) = at(i, j + 1, 2 * k) + at(i, j + 1, 2 * k + 1);
  }

  bool consistent() const {
    for (std::size_t i = 0; i < m; ++i)
      for (int j = 0; j <= jmax; ++j)
        for (std::size_t k = 0; k < (std::size_t{1} << j); ++k)
          if (at(i, j, k) != at(i, j + 1, 2 * k) + at(i, j + 1, 2 * k + 1) || at(i, j + 1, 2 * k) < 0 ||
              at(i, j + 1, 2 * k + 1) < 0)
            return false;
    return true;
  }
};

/// Counts of the sample in every Haar cell down to level jmax + 1.
inline CountTensor bin_counts(const std::vector<double>& points, const Partition& p, int jmax) {
  require(jmax >= 0 && jmax <= 28, "bin_counts: jmax out of range");
  CountTensor c(p.m(), jmax);
  const std::size_t fine = std::size_t{1} << (jmax + 1);
  for (double t : points) {
    const std::size_t i = p.locate(t);
    auto k = static_cast<std::size_t>(std::floor((t - p.x[i]) / p.delta[i] * static_cast<double>(fine)));
    k = std::min(k, fine - 1);
    // Align with haar_cell endpoints when floating rounding disagrees.
    while (k > 0 && t < haar_cell(p, i, jmax + 1, k).first) --k;
    while (k + 1 < fine && t >= haar_cell(p, i, jmax + 1, k + 1).first) ++k;
    ++c.at(i, jmax + 1, k);
  }
  c.aggregate();
  return c;
}

inline CountTensor bin_counts(const PointProcessSample& s, const Partition& p, int jmax) {
  return bin_counts(s.points, p, jmax);
}

/// G_{m,p}(x) = P(X + U <= x), X ~ Bin(m, p), U ~ Unif(-1/2, 1/2].
/// Both tails are kept, with logarithms, so that extreme values stay usable.
struct TailPair {
  double lower = 0;
  double upper = 1;
  double log_lower = -std::numeric_limits<double>::infinity();
  double log_upper = 0;
};

namespace detail {

inline double log_binom_pmf(long long m, double p, long long k) {
  const double md = static_cast<double>(m), kd = static_cast<double>(k);
  double v = std::lgamma(md + 1) - std::lgamma(kd + 1) - std::lgamma(md - kd + 1);
  if (k > 0) v += kd * std::log(p);
  if (k < m) v += (md - kd) * std::log1p(-p);
  return v;
}

// log(frac * pmf(k0) + sum of pmf beyond k0 in direction dir), deep tails only.
inline double log_tail_series(long long m, double p, long long k0, double frac, int dir) {
  const double q = 1 - p;
  double sum = frac, term = 1.0;
  long long k = k0;
  while (true) {
    double r;
    if (dir < 0) {
      if (k == 0) break;
      r = static_cast<double>(k) * q / (static_cast<double>(m - k + 1) * p);
      --k;
    } else {
      if (k == m) break;
      r = static_cast<double>(m - k) * p / (static_cast<double>(k + 1) * q);
      ++k;
    }
    term *= r;
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return log_binom_pmf(m, p, k0) + std::log(sum);
}

}  // namespace detail

inline TailPair binom_cdf_smoothed(long long m, double p, double x) {
  require(m >= 0, "binom_cdf_smoothed: negative trials");
  require(p >= 0 && p <= 1, "binom_cdf_smoothed: p outside [0,1]");
  const double t = x + 0.5;
  const double k0d = std::floor(t);
  const double ninf = -std::numeric_limits<double>::infinity();
  if (k0d < 0) return {0.0, 1.0, ninf, 0.0};
  if (k0d > static_cast<double>(m)) return {1.0, 0.0, 0.0, ninf};
  auto k0 = static_cast<long long>(k0d);
  double frac = t - k0d;
  if (frac == 0 && k0 > 0) --k0, frac = 1.0;  // G is continuous; keep frac in (0, 1]
  TailPair r;
  if (m == 0 || p == 0 || p == 1) {
    // Degenerate law: all mass at one point.
    const long long at = p == 1 ? m : 0;
    if (k0 < at)
      r.lower = 0, r.upper = 1;
    else if (k0 > at)
      r.lower = 1, r.upper = 0;
    else
      r.lower = frac, r.upper = 1 - frac;
  } else {
    const boost::math::binomial_distribution<double> B(static_cast<double>(m), p);
    const double pk = boost::math::pdf(B, static_cast<double>(k0));
    const double below = k0 == 0 ? 0.0 : boost::math::cdf(B, static_cast<double>(k0 - 1));
    const double above = k0 == m ? 0.0 : boost::math::cdf(boost::math::complement(B, static_cast<double>(k0)));
    r.lower = below + pk * frac;
    r.upper = above + pk * (1.0 - frac);
    if (r.lower < 1e-280 && frac > 0) {
      r.log_lower = detail::log_tail_series(m, p, k0, frac, -1);
      r.log_upper = std::log1p(-r.lower);
      return r;
    }
    if (r.upper < 1e-280 && frac < 1) {
      r.log_upper = detail::log_tail_series(m, p, k0, 1 - frac, +1);
      r.log_lower = std::log1p(-r.upper);
      return r;
    }
  }
  r.log_lower = std::log(r.lower);
  r.log_upper = std::log(r.upper);
  return r;
}

inline double binom_cdf_smoothed_value(long long m, double p, double x) { return binom_cdf_smoothed(m, p, x).lower; }

/// Phi^{-1}(G_{parent,1/2}(child + u)); +-inf when the probability is exactly 0 or 1.
inline double quantile_map_raw(long long parent, long long child, double u) {
  const TailPair g = binom_cdf_smoothed(parent, 0.5, static_cast<double>(child) + u);
  if (g.log_lower == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (g.log_upper == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
  if (g.log_lower <= g.log_upper) return normal_quantile_from_log(g.log_lower);
  return -normal_quantile_from_log(g.log_upper);
}

inline double quantile_map(long long parent, long long child, double u) {
  const double z = quantile_map_raw(parent, child, u);
  if (!std::isfinite(z)) throw NumericalError("quantile_map: probability saturated at 0 or 1");
  return z;
}

/// Transformed coefficients together with the dithers that produced them.
/// The dither tensor shares the index set; its level -1 slot holds the dither
/// of the smoothed total.
struct SmoothedTransform {
  CoeffTensor z;
  CoeffTensor dithers;
  std::uint64_t seed = 0;
};

inline SmoothedTransform quantile_transform(const CountTensor& counts, int jmax, std::uint64_t seed) {
  require(jmax >= 0 && jmax <= counts.jmax, "quantile_transform: jmax exceeds count depth");
  require(counts.consistent(), "quantile_transform: count tensor is not consistent");
  SmoothedTransform st{CoeffTensor(counts.m, jmax, CoeffKind::Transformed),
                       CoeffTensor(counts.m, jmax, CoeffKind::Transformed), seed};
  for (std::size_t i = 0; i < counts.m; ++i) {
    Engine g = make_engine(seed, 0xd17e4, i);
    const double u0 = dither(g);
    st.dithers.at(i, -1, 0) = u0;
    st.z.at(i, -1, 0) = static_cast<double>(counts.at(i, 0, 0)) + u0;
    for (int j = 0; j <= jmax; ++j)
      for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) {
        const double u = dither(g);
        st.dithers.at(i, j, k) = u;
        st.z.at(i, j, k) = quantile_map(counts.at(i, j, k), counts.at(i, j + 1, 2 * k), u);
      }
  }
  return st;
}

/// Nearest integer to a smoothed total N + U.
inline long long count_from_smoothed(double z) {
  const double r = std::nearbyint(z);
  if (std::fabs(std::fabs(z - r) - 0.5) < 1e-9) throw NumericalError("count_from_smoothed: ambiguous rounding");
  return static_cast<long long>(r);
}

/// Recovers the child count from a transformed coefficient and its dither.
inline long long invert_quantile_map(double z, long long parent, double u) {
  if (!std::isfinite(z)) throw NumericalError("invert: non-finite coefficient");
  long long lo = 0, hi = parent;
  while (lo < hi) {
    const long long mid = lo + (hi - lo) / 2;
    if (quantile_map_raw(parent, mid, u) < z)
      lo = mid + 1;
    else
      hi = mid;
  }
  const double tol = 1e-9 * (1.0 + std::fabs(z));
  long long best = lo;
  double err = std::fabs(quantile_map_raw(parent, lo, u) - z);
  if (lo > 0) {
    const double e2 = std::fabs(quantile_map_raw(parent, lo - 1, u) - z);
    if (e2 < err) best = lo - 1, err = e2;
  }
  if (err > tol)
    throw NumericalError("invert: coefficient " + std::to_string(z) + " matches no child count of parent " +
                         std::to_string(parent));
  for (long long c : {best - 1, best + 1})
    if (c >= 0 && c <= parent && std::fabs(quantile_map_raw(parent, c, u) - z) <= tol)
      throw NumericalError("invert: ambiguous child count");
  return best;
}

inline CountTensor invert_transform(const SmoothedTransform& st) {
  const std::size_t m = st.z.m;
  const int J = st.z.jmax;
  CountTensor c(m, J);
  for (std::size_t i = 0; i < m; ++i) {
    const double total = st.z.at(i, -1, 0) - st.dithers.at(i, -1, 0);
    const double r = std::nearbyint(total);
    if (std::fabs(total - r) > 1e-6 || r < 0) throw NumericalError("invert: smoothed total is not N + U");
    c.at(i, 0, 0) = static_cast<long long>(r);
    for (int j = 0; j <= J; ++j)
      for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) {
        const long long parent = c.at(i, j, k);
        const long long left = invert_quantile_map(st.z.at(i, j, k), parent, st.dithers.at(i, j, k));
        c.at(i, j + 1, 2 * k) = left;
        c.at(i, j + 1, 2 * k + 1) = parent - left;
      }
  }
  return c;
}

/// kappa_n = sqrt(2 n log n).
inline double poisson_margin(std::size_t n) {
  const double x = static_cast<double>(n);
  return std::sqrt(2.0 * x * std::log(x));
}

/// Threshold c L_n^{beta/(beta+1)} with c = 4C v (4C)^{(2b+1)/(b+1)}.
inline double poisson_threshold(std::size_t n, double beta, double C) {
  const double L = std::log(static_cast<double>(n)) / static_cast<double>(n);
  const double c = std::max(4 * C, std::pow(4 * C, (2 * beta + 1) / (beta + 1)));
  return c * std::pow(L, beta / (beta + 1));
}

namespace detail {

// Points of a Poisson process with intensity scale * fhat * 1{fhat >= thr}.
inline std::vector<double> thresholded_process(const DensityModel& fhat, double scale, double thr, Engine& g) {
  const double mass = fhat.integral(0.0, 1.0);
  const long long M = poisson_draw(g, scale * mass);
  std::vector<double> out;
  for (long long r = 0; r < M; ++r) {
    const double x = fhat.quantile(uniform01(g));
    if (fhat(x) >= thr) out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// Density sample of size n to a Poisson process with intensity n f, given
/// a pilot estimate fhat with f0 close to fhat.
inline PointProcessSample poissonize(const DensitySample& ds, const DensityModel& fhat, double beta, double C,
                                     std::uint64_t seed) {
  const std::size_t n = ds.n;
  require(n >= 2, "poissonize: n must be at least 2");
  require(ds.points.size() == n, "poissonize: sample size does not match n");
  const double kappa = poisson_margin(n);
  if (kappa >= static_cast<double>(n)) throw ConfigError("poissonize: kappa_n >= n");
  Engine g = make_engine(seed, 0x9015);
  const long long N = poisson_draw(g, static_cast<double>(n) - kappa);
  PointProcessSample out;
  out.n = n;
  const long long keep = std::min<long long>(N, static_cast<long long>(n));
  out.points.assign(ds.points.begin(), ds.points.begin() + keep);
  // N > n has probability O(n^{-1}); the overflow is drawn from the pilot.
  for (long long r = static_cast<long long>(n); r < N; ++r) out.points.push_back(fhat.quantile(uniform01(g)));
  const auto extra = detail::thresholded_process(fhat, kappa, poisson_threshold(n, beta, C), g);
  out.points.insert(out.points.end(), extra.begin(), extra.end());
  return out;
}

/// Poisson process to a density sample of size n: keeps the first min(N, n)
/// points and pads with draws from the thresholded pilot.
inline DensitySample depoissonize(const PointProcessSample& pp, const DensityModel& fhat, double beta, double C,
                                  std::uint64_t seed) {
  const std::size_t n = pp.n;
  require(n >= 2, "depoissonize: n must be at least 2");
  Engine g = make_engine(seed, 0xde9015);
  DensitySample out;
  out.n = n;
  const std::size_t keep = std::min(n, pp.points.size());
  out.points.assign(pp.points.begin(), pp.points.begin() + static_cast<std::ptrdiff_t>(keep));
  const double thr = poisson_threshold(n, beta, C);
  int misses = 0;
  while (out.points.size() < n) {
    const double x = fhat.quantile(uniform01(g));
    if (fhat(x) >= thr || misses > 10000) {
      out.points.push_back(x);
    } else {
      ++misses;
    }
  }
  return out;
}

inline void write_counts_csv(const std::string& path, const CountTensor& c) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << "i,j,k,count\n";
  for (std::size_t i = 0; i < c.m; ++i)
    for (int j = 0; j <= c.jmax + 1; ++j)
      for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) os << i + 1 << ',' << j << ',' << k << ',' << c.at(i, j, k) << '\n';
}

}  // namespace lecam
