#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "divergences.hpp"
#include "estimators.hpp"
#include "funcspace.hpp"
#include "partition_haar.hpp"

namespace lecam {

inline constexpr const char* kVersion = "0.3.0";

struct RatePoint {
  std::size_t n = 0;
  double value = 0;
  double error = 0;
  std::size_t m = 0;
  double In = 0;
  int jmax = 0;
};

struct RateStudy {
  std::vector<RatePoint> points;
  LineFit fit;  ///< log value against log n
};

inline void check_grid(const std::vector<std::size_t>& ns, std::size_t min_len) {
  require(ns.size() >= min_len, "n-grid needs at least " + std::to_string(min_len) + " points");
  for (std::size_t i = 1; i < ns.size(); ++i) require(ns[i] > ns[i - 1], "n-grid must be strictly increasing");
}

inline std::vector<std::size_t> dyadic_grid(int lo, int hi) {
  std::vector<std::size_t> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::size_t{1} << e);
  return g;
}

/// Hellinger budget of the coupling for each n, with a log-log slope fit.
inline RateStudy rate_study(const DensityModel& f, const DensityModel& f0, const std::vector<std::size_t>& ns,
                            double beta, const BudgetOptions& opt = {}) {
  check_grid(ns, 4);
  RateStudy s;
  std::vector<double> lx, ly;
  for (std::size_t n : ns) {
    const auto b = coupling_hellinger_budget(f, f0, n, beta, opt);
    s.points.push_back({n, b.total.value, b.total.error, b.m, pretest_In(f0, n, beta), b.jmax});
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(b.total.value));
  }
  s.fit = fit_line(lx, ly);
  return s;
}

/// Poissonization bound divided by log^2 n, fitted against log n.
inline RateStudy poissonization_study(const DensityModel& f0, const std::vector<std::size_t>& ns, double beta,
                                      double C) {
  check_grid(ns, 4);
  RateStudy s;
  std::vector<double> lx, ly;
  for (std::size_t n : ns) {
    const double v = poissonization_bound(f0, n, beta, C);
    const double ln = std::log(static_cast<double>(n));
    s.points.push_back({n, v / (ln * ln), 0.0, build_partition(f0, n, beta).m(), pretest_In(f0, n, beta), 0});
    lx.push_back(ln);
    ly.push_back(std::log(v / (ln * ln)));
  }
  s.fit = fit_line(lx, ly);
  return s;
}

/// FNV-1a, used to fingerprint configs in manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* d = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = d[v & 15];
  return s;
}

}  // namespace lecam
