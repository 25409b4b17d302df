#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "experiments.hpp"
#include "funcspace.hpp"

namespace lecam {

/// Adaptive partition 0 = x_0 < x_1 < ... < x_m = 1. Intervals are indexed
/// 0..m-1 in code; interval i is [x[i], x[i+1]].
struct Partition {
  std::vector<double> x;
  std::vector<double> delta;
  std::size_t n = 0;
  double beta = 1.0;
  json f0_descriptor;

  std::size_t m() const { return delta.size(); }
  std::size_t locate(double t) const {
    auto it = std::upper_bound(x.begin(), x.end(), t);
    std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
    return std::min(i, m() - 1);
  }
};

inline constexpr std::size_t kMaxIntervals = 10'000'000;

/// z_{i+1} = z_i + (f0(z_i)/n)^{1/(2 beta + 1)}; the last z_i <= 1 is replaced by 1.
inline Partition build_partition(const DensityModel& f0, std::size_t n, double beta) {
  require(n >= 2, "build_partition: n must be at least 2");
  require(beta > 0, "build_partition: beta must be positive");
  require(f0.floor() > 0, "build_partition: f0 must be bounded away from zero");
  const double e = 1.0 / (2 * beta + 1);
  Partition p;
  p.n = n;
  p.beta = beta;
  p.f0_descriptor = f0.descriptor();
  p.x.push_back(0.0);
  double z = 0.0;
  while (true) {
    const double fz = f0(z);
    if (!(fz > 0)) throw NumericalError("build_partition: f0 vanishes at " + std::to_string(z));
    z += std::pow(fz / static_cast<double>(n), e);
    if (z > 1.0 + 1e-12) break;
    p.x.push_back(z);
    if (p.x.size() > kMaxIntervals) throw NumericalError("build_partition: more than 1e7 intervals");
  }
  if (p.x.size() == 1)
    p.x.push_back(1.0);
  else
    p.x.back() = 1.0;
  p.delta.resize(p.x.size() - 1);
  for (std::size_t i = 0; i + 1 < p.x.size(); ++i) p.delta[i] = p.x[i + 1] - p.x[i];
  return p;
}

/// T_n f0: f0(x_{i-1}) on each interval.
inline DensityModel step_approx(const DensityModel& f0, const Partition& p) {
  std::vector<double> v(p.m());
  for (std::size_t i = 0; i < p.m(); ++i) v[i] = f0(p.x[i]);
  return piecewise_constant_density(p.x, v, p.beta);
}

/// Endpoints of cell (j, k) inside interval i: x_i + delta_i [k, k+1] / 2^j.
inline std::pair<double, double> haar_cell(const Partition& p, std::size_t i, int j, std::size_t k) {
  const double s = std::ldexp(p.delta[i], -j);
  const double a = p.x[i] + s * static_cast<double>(k);
  const double b = (k + 1 == (std::size_t{1} << j)) ? p.x[i + 1] : a + s;
  return {a, b};
}

/// Grid with 2^level equal cells inside every interval.
inline std::vector<double> haar_grid(const Partition& p, int level) {
  std::vector<double> g;
  const std::size_t c = std::size_t{1} << level;
  g.reserve(p.m() * c + 1);
  for (std::size_t i = 0; i < p.m(); ++i)
    for (std::size_t k = 0; k < c; ++k) g.push_back(haar_cell(p, i, level, k).first);
  g.push_back(1.0);
  return g;
}

enum class CoeffKind { Density, Gaussian, Transformed };

inline std::string to_string(CoeffKind k) {
  switch (k) {
    case CoeffKind::Density: return "density";
    case CoeffKind::Gaussian: return "gaussian";
    default: return "transformed";
  }
}

/// Values indexed by (i, j, k) with -1 <= j <= jmax, k < 2^j (k = 0 at j = -1).
/// Per interval the block has 2^{jmax+1} slots: slot 0 is level -1 and level
/// j >= 0 starts at slot 2^j.
struct CoeffTensor {
  std::size_t m = 0;
  int jmax = 0;
  CoeffKind kind = CoeffKind::Density;
  std::vector<double> values;

  CoeffTensor() = default;
  CoeffTensor(std::size_t m_, int jmax_, CoeffKind kind_)
      : m(m_), jmax(jmax_), kind(kind_), values(m_ * block(), 0.0) {}

  std::size_t block() const { return std::size_t{1} << (jmax + 1); }
  static std::size_t slot(int j, std::size_t k) { return j < 0 ? 0 : (std::size_t{1} << j) + k; }
  double& at(std::size_t i, int j, std::size_t k) { return values[i * block() + slot(j, k)]; }
  double at(std::size_t i, int j, std::size_t k) const { return values[i * block() + slot(j, k)]; }

  template <class Fn>
  void for_each_index(Fn&& fn) const {
    for (std::size_t i = 0; i < m; ++i) {
      fn(i, -1, std::size_t{0});
      for (int j = 0; j <= jmax; ++j)
        for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) fn(i, j, k);
    }
  }
};

/// Default finest level: min(ceil(3 log2 n), cap, first J whose L2 tail
/// sum_i R^2 delta_i^{2b+1} 2^{-2Jb} / (2^{2b} - 1) is below 1e-3 / n).
inline int default_jmax(const Partition& p, double R, int cap = 10) {
  const double b = p.beta;
  const int hard = static_cast<int>(std::ceil(3.0 * std::log2(static_cast<double>(p.n))));
  double s = 0;
  for (double d : p.delta) s += R * R * std::pow(d, 2 * b + 1);
  s /= (std::pow(2.0, 2 * b) - 1.0);
  int J = 0;
  while (J < std::min(hard, cap) && s * std::pow(2.0, -2.0 * J * b) >= 1e-3 / static_cast<double>(p.n)) ++J;
  return std::max(0, std::min({J, hard, cap}));
}

/// Haar coefficients <f, phi_i> and <f, psi_ijk> with respect to the partition.
inline CoeffTensor haar_coeffs(const DensityModel& f, const Partition& p, int jmax) {
  require(jmax >= 0 && jmax <= 30, "haar_coeffs: jmax out of range");
  CoeffTensor c(p.m(), jmax, CoeffKind::Density);
  const std::size_t fine = std::size_t{1} << (jmax + 1);
  std::vector<double> cell(fine);
  for (std::size_t i = 0; i < p.m(); ++i) {
    for (std::size_t k = 0; k < fine; ++k) {
      auto [a, b] = haar_cell(p, i, jmax + 1, k);
      cell[k] = f.integral(a, b);
    }
    // Aggregate from the finest level upward; level jmax+1 integrals are in `cell`.
    std::vector<double> cur = cell;
    for (int j = jmax; j >= 0; --j) {
      const std::size_t c2 = std::size_t{1} << j;
      const double norm = std::sqrt(std::ldexp(p.delta[i], -j));
      std::vector<double> up(c2);
      for (std::size_t k = 0; k < c2; ++k) {
        c.at(i, j, k) = (cur[2 * k] - cur[2 * k + 1]) / norm;
        up[k] = cur[2 * k] + cur[2 * k + 1];
      }
      cur.swap(up);
    }
    c.at(i, -1, 0) = cur[0] / std::sqrt(p.delta[i]);
  }
  return c;
}

/// Sum of increments over [a, b]; both must lie on the grid.
inline double path_sum(const GwnPath& y, const std::vector<double>& cum, double a, double b) {
  auto idx = [&](double t) {
    auto it = std::lower_bound(y.grid.begin(), y.grid.end(), t - 1e-12);
    if (it == y.grid.end() || std::fabs(*it - t) > 1e-12)
      throw ConfigError("gwn_to_coeffs: grid does not refine the Haar cells");
    return static_cast<std::size_t>(it - y.grid.begin());
  };
  return cum[idx(b)] - cum[idx(a)];
}

/// Rescaled Gaussian coefficients Z*_{i,-1,0} = n * Y(interval i) and
/// Z*_{ijk} = sqrt(n / f0(x_i)) <psi_ijk, dY>.
inline CoeffTensor gwn_to_coeffs(const GwnPath& y, const Partition& p, const DensityModel& f0, int jmax) {
  require(y.n == p.n, "gwn_to_coeffs: path and partition disagree on n");
  const auto cum = y.cumulative();
  CoeffTensor c(p.m(), jmax, CoeffKind::Gaussian);
  const double n = static_cast<double>(p.n);
  for (std::size_t i = 0; i < p.m(); ++i) {
    c.at(i, -1, 0) = n * path_sum(y, cum, p.x[i], p.x[i + 1]);
    const double scale = std::sqrt(n / f0(p.x[i]));
    for (int j = 0; j <= jmax; ++j) {
      const double norm = std::sqrt(std::ldexp(p.delta[i], -j));
      for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) {
        auto [a, mid] = haar_cell(p, i, j + 1, 2 * k);
        auto [mid2, b] = haar_cell(p, i, j + 1, 2 * k + 1);
        c.at(i, j, k) = scale * (path_sum(y, cum, a, mid) - path_sum(y, cum, mid2, b)) / norm;
      }
    }
  }
  return c;
}

// --- serialization; interval indices are written 1-based ---

inline void write_coeffs_csv(const std::string& path, const CoeffTensor& c) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << "i,j,k,value\n";
  os.precision(17);
  c.for_each_index([&](std::size_t i, int j, std::size_t k) {
    os << i + 1 << ',' << j << ',' << k << ',' << c.at(i, j, k) << '\n';
  });
}

inline CoeffTensor read_coeffs_csv(const std::string& path, CoeffKind kind) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  struct Row {
    std::size_t i;
    int j;
    std::size_t k;
    double v;
  };
  std::vector<Row> rows;
  std::string line;
  std::getline(is, line);
  std::size_t m = 0;
  int J = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Row r{};
    if (std::sscanf(line.c_str(), "%zu,%d,%zu,%lf", &r.i, &r.j, &r.k, &r.v) != 4 || r.i == 0)
      throw ConfigError("malformed coefficient row: " + line);
    m = std::max(m, r.i);
    J = std::max(J, r.j);
    rows.push_back(r);
  }
  require(m > 0 && J >= 0, "coefficient file '" + path + "' is empty");
  CoeffTensor c(m, J, kind);
  for (const auto& r : rows) c.at(r.i - 1, r.j, r.k) = r.v;
  return c;
}

inline json to_json(const Partition& p) {
  return json{{"n", p.n}, {"beta", p.beta}, {"m", p.m()}, {"x", p.x}, {"f0", p.f0_descriptor}};
}

}  // namespace lecam
