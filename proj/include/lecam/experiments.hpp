#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "funcspace.hpp"

namespace lecam {

/// n i.i.d. draws from a density on [0, 1], in draw order.
struct DensitySample {
  std::vector<double> points;
  std::size_t n = 0;
};

/// Poisson point process with intensity n f. `n` is the intensity scale.
struct PointProcessSample {
  std::vector<double> points;
  std::size_t n = 0;
};

enum class VarianceMode { Unit, Step };

inline std::string to_string(VarianceMode m) { return m == VarianceMode::Unit ? "unit" : "step"; }

inline VarianceMode variance_mode_from_string(const std::string& s) {
  if (s == "unit") return VarianceMode::Unit;
  if (s == "step" || s == "step_f0") return VarianceMode::Step;
  throw ConfigError("unknown variance mode '" + s + "'");
}

/// Increments of a Gaussian white noise path over cells [grid[k], grid[k+1]].
///   Unit: dY = 2 sqrt(f) dt + n^{-1/2} dW.
///   Step: dY = f dt + n^{-1/2} sqrt(T_n f0) dW.
struct GwnPath {
  std::vector<double> grid;
  std::vector<double> increments;
  std::size_t n = 0;
  VarianceMode mode = VarianceMode::Unit;

  std::size_t cells() const { return increments.size(); }
  /// Y(t) at grid points, Y(0) = 0.
  std::vector<double> cumulative() const {
    std::vector<double> y(grid.size(), 0.0);
    for (std::size_t k = 0; k < increments.size(); ++k) y[k + 1] = y[k] + increments[k];
    return y;
  }
};

inline DensitySample sample_density(const DensityModel& f, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample_density: n must be positive");
  Engine g = make_engine(seed, 0x5eed0001);
  DensitySample s;
  s.n = n;
  s.points.resize(n);
  for (auto& x : s.points) x = f.quantile(uniform01(g));
  return s;
}

inline PointProcessSample sample_poisson_process(const DensityModel& f, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample_poisson_process: n must be positive");
  Engine g = make_engine(seed, 0x5eed0002);
  const double mass = f.integral(0.0, 1.0);
  const long long N = poisson_draw(g, static_cast<double>(n) * mass);
  PointProcessSample s;
  s.n = n;
  s.points.resize(static_cast<std::size_t>(N));
  for (auto& x : s.points) x = f.quantile(uniform01(g));
  return s;
}

/// Uniform grid with `cells` cells.
inline std::vector<double> uniform_grid(std::size_t cells) {
  require(cells >= 1, "grid must have at least one cell");
  return linspace(0.0, 1.0, cells + 1);
}

/// Path with given per-cell drift and noise variance (variance already
/// divided by n).
inline GwnPath gwn_from_drift(std::vector<double> grid, const std::vector<double>& drift,
                              const std::vector<double>& noise_var, std::size_t n, VarianceMode mode, Engine& g,
                              double noise_scale = 1.0) {
  GwnPath p;
  p.grid = std::move(grid);
  p.n = n;
  p.mode = mode;
  p.increments.resize(drift.size());
  for (std::size_t k = 0; k < drift.size(); ++k)
    p.increments[k] = drift[k] + noise_scale * std::sqrt(noise_var[k]) * std_normal(g);
  return p;
}

/// Per-cell drift of the path.
inline std::vector<double> gwn_drift(const DensityModel& f, const std::vector<double>& grid, VarianceMode mode) {
  std::vector<double> d(grid.size() - 1);
  const auto brk = f.breakpoints();
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    if (mode == VarianceMode::Step) {
      d[k] = f.integral(grid[k], grid[k + 1]);
    } else {
      auto root = [&](double x) { return 2.0 * std::sqrt(std::max(0.0, f(x))); };
      d[k] = brk.empty() ? gauss_legendre(root, grid[k], grid[k + 1])
                         : integrate_pieces(root, grid[k], grid[k + 1], brk, 1e-12);
    }
  }
  return d;
}

/// Samples the white noise path on an arbitrary increasing grid over [0, 1].
/// In step mode `variance_profile` is T_n f0 (for instance step_approx(f0, p)).
inline GwnPath sample_gwn(const DensityModel& f, std::size_t n, std::vector<double> grid, VarianceMode mode,
                          const DensityModel* variance_profile, std::uint64_t seed, double noise_scale = 1.0) {
  require(n >= 1, "sample_gwn: n must be positive");
  require(grid.size() >= 2 && std::fabs(grid.front()) < 1e-14 && std::fabs(grid.back() - 1) < 1e-14,
          "sample_gwn: grid must span [0,1]");
  for (std::size_t k = 1; k < grid.size(); ++k) require(grid[k] > grid[k - 1], "sample_gwn: grid must increase");
  require(mode == VarianceMode::Unit || variance_profile != nullptr,
          "sample_gwn: step mode needs a variance profile (T_n f0)");
  std::vector<double> var(grid.size() - 1);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double w = mode == VarianceMode::Unit ? grid[k + 1] - grid[k]
                                                : variance_profile->integral(grid[k], grid[k + 1]);
    var[k] = w / static_cast<double>(n);
  }
  const auto drift = gwn_drift(f, grid, mode);
  Engine g = make_engine(seed, 0x5eed0003);
  return gwn_from_drift(std::move(grid), drift, var, n, mode, g, noise_scale);
}

inline GwnPath sample_gwn(const DensityModel& f, std::size_t n, std::size_t grid_cells, VarianceMode mode,
                          const DensityModel* variance_profile, std::uint64_t seed) {
  return sample_gwn(f, n, uniform_grid(grid_cells), mode, variance_profile, seed);
}

/// Two independent halves of sizes floor(n/2) and ceil(n/2).
inline std::pair<DensitySample, DensitySample> split_sample(const DensitySample& s) {
  const std::size_t n1 = s.n / 2;
  require(s.points.size() == s.n, "split_sample: sample size does not match n");
  DensitySample a, b;
  a.n = n1;
  b.n = s.n - n1;
  a.points.assign(s.points.begin(), s.points.begin() + static_cast<std::ptrdiff_t>(n1));
  b.points.assign(s.points.begin() + static_cast<std::ptrdiff_t>(n1), s.points.end());
  return {a, b};
}

/// Thinning: each point goes to the first half with probability floor(n/2)/n.
inline std::pair<PointProcessSample, PointProcessSample> split_sample(const PointProcessSample& s, std::uint64_t seed) {
  const std::size_t n1 = s.n / 2;
  const double keep = static_cast<double>(n1) / static_cast<double>(s.n);
  Engine g = make_engine(seed, 0x5eed0004);
  PointProcessSample a, b;
  a.n = n1;
  b.n = s.n - n1;
  for (double x : s.points) (uniform01(g) < keep ? a : b).points.push_back(x);
  return {a, b};
}

/// Splits Y (noise level 1/n) into Y1, Y2 with noise levels 1/n1, 1/n2 and
/// independent noises. An auxiliary path V with the same noise structure is
/// drawn; (n1 Y1 + n2 Y2) / n = Y.
inline std::pair<GwnPath, GwnPath> split_sample(const GwnPath& y, const DensityModel* variance_profile,
                                                std::uint64_t seed) {
  require(y.n >= 2, "split_sample: need n >= 2 to split a path");
  const double n = static_cast<double>(y.n);
  const double n1 = static_cast<double>(y.n / 2), n2 = n - n1;
  Engine g = make_engine(seed, 0x5eed0005);
  GwnPath a = y, b = y;
  a.n = y.n / 2;
  b.n = y.n - a.n;
  const double w1 = std::sqrt(n2 / (n * n1)), w2 = std::sqrt(n1 / (n * n2));
  for (std::size_t k = 0; k < y.cells(); ++k) {
    const double h = y.mode == VarianceMode::Unit || variance_profile == nullptr
                         ? y.grid[k + 1] - y.grid[k]
                         : variance_profile->integral(y.grid[k], y.grid[k + 1]);
    const double v = std::sqrt(h) * std_normal(g);
    a.increments[k] = y.increments[k] + w1 * v;
    b.increments[k] = y.increments[k] - w2 * v;
  }
  return {a, b};
}

// --- serialization ---

inline void write_points_csv(const std::string& path, const std::vector<double>& pts) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << "x\n";
  os.precision(17);
  for (double x : pts) os << x << '\n';
}

inline std::vector<double> read_points_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  std::vector<double> pts;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = line.find(',');
    const std::string cell = c == std::string::npos ? line : line.substr(0, c);
    try {
      std::size_t used = 0;
      const double x = std::stod(cell, &used);
      pts.push_back(x);
    } catch (const std::exception&) {
      if (!pts.empty()) throw ConfigError("malformed number in '" + path + "': " + line);
    }
  }
  for (double x : pts) require(x >= 0 && x <= 1, "point outside [0,1] in '" + path + "'");
  return pts;
}

inline void write_gwn_csv(const std::string& path, const GwnPath& p) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << "t_left,t_right,increment\n";
  os.precision(17);
  for (std::size_t k = 0; k < p.cells(); ++k) os << p.grid[k] << ',' << p.grid[k + 1] << ',' << p.increments[k] << '\n';
}

inline json to_json(const GwnPath& p) {
  return json{{"n", p.n}, {"mode", to_string(p.mode)}, {"grid", p.grid}, {"increments", p.increments}};
}

inline GwnPath gwn_from_json(const json& j) {
  GwnPath p;
  p.n = j.at("n").get<std::size_t>();
  p.mode = variance_mode_from_string(j.at("mode").get<std::string>());
  p.grid = j.at("grid").get<std::vector<double>>();
  p.increments = j.at("increments").get<std::vector<double>>();
  require(p.grid.size() == p.increments.size() + 1, "gwn path: grid/increment size mismatch");
  return p;
}

}  // namespace lecam
