#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "core.hpp"
#include "coupling.hpp"
#include "funcspace.hpp"
#include "normal.hpp"
#include "partition_haar.hpp"

namespace lecam {

// Hellinger convention: H^2(P, Q) = int (sqrt p - sqrt q)^2, so 0 <= H^2 <= 2.

enum class DivKind { TV, Hellinger2, KL };
enum class Method { Closed, Quadrature, MonteCarlo };

inline std::string to_string(DivKind k) {
  return k == DivKind::TV ? "tv" : k == DivKind::Hellinger2 ? "hellinger2" : "kl";
}
inline std::string to_string(Method m) {
  return m == Method::Closed ? "closed_form" : m == Method::Quadrature ? "quadrature" : "monte_carlo";
}

struct DivergenceReport {
  DivKind kind = DivKind::Hellinger2;
  double value = 0;
  Method method = Method::Closed;
  double error = 0;
  json params = json::object();
};

inline json to_json(const DivergenceReport& r) {
  return json{{"kind", to_string(r.kind)}, {"value", r.value}, {"method", to_string(r.method)},
              {"error", r.error}, {"params", r.params}};
}

struct DivergenceTriple {
  double tv = 0, hellinger2 = 0, kl = 0;
  double error = 0;
};

/// TV <= H <= sqrt(KL) up to `tol`. `error` bounds the error of each
/// component and is carried through the square roots.
inline bool ordering_holds(const DivergenceTriple& t, double tol = 1e-8) {
  const double e = t.error;
  const double h_hi = std::sqrt(std::max(0.0, t.hellinger2 + e));
  const double h_lo = std::sqrt(std::max(0.0, t.hellinger2 - e));
  return t.tv - e <= h_hi + tol && h_lo <= std::sqrt(std::max(0.0, t.kl + e)) + tol;
}

namespace detail {

// Phi(b) - Phi(a) for a <= b without cancellation in the tails.
inline double normal_mass(double a, double b) {
  if (a >= 0) return normal_sf(a) - normal_sf(b);
  return normal_cdf(b) - normal_cdf(a);
}

inline double log_poisson_pmf(double lambda, long long k) {
  const double kd = static_cast<double>(k);
  return kd * std::log(lambda) - lambda - std::lgamma(kd + 1);
}

struct Window {
  long long lo, hi;
};

inline Window poisson_window(double lambda) {
  const double w = 14 * std::sqrt(lambda) + 30;
  return {std::max<long long>(0, static_cast<long long>(std::floor(lambda - w))),
          static_cast<long long>(std::ceil(lambda + w))};
}

}  // namespace detail

/// Closed-form divergences between N(b1, sigma^2 I) and N(b2, sigma^2 I) given
/// the distance ||b1 - b2||.
inline DivergenceTriple gauss_shift_divergences(double dist, double sigma) {
  require(sigma > 0, "gauss_shift_divergences: sigma must be positive");
  const double r = std::fabs(dist) / sigma;
  DivergenceTriple t;
  t.tv = 1.0 - 2.0 * normal_cdf(-r / 2);
  t.hellinger2 = -2.0 * std::expm1(-r * r / 8);
  t.kl = r * r / 2;
  return t;
}

/// Same for white-noise drifts b1, b2 on [0, 1] with noise level sigma.
inline DivergenceTriple gauss_shift_divergences(const std::function<double(double)>& b1,
                                                const std::function<double(double)>& b2, double sigma) {
  const double d2 = integrate([&](double x) { const double d = b1(x) - b2(x); return d * d; }, 0.0, 1.0, 1e-12);
  return gauss_shift_divergences(std::sqrt(d2), sigma);
}

/// H^2 between Poisson processes on [0, 1] with intensities l1, l2.
inline DivergenceReport hellinger2_poisson_processes(const std::function<double(double)>& l1,
                                                     const std::function<double(double)>& l2,
                                                     const std::vector<double>& breaks = {}) {
  double err = 0;
  auto g = [&](double x) {
    const double d = std::sqrt(std::max(0.0, l1(x))) - std::sqrt(std::max(0.0, l2(x)));
    return d * d;
  };
  double v = 0;
  if (breaks.empty())
    v = integrate(g, 0.0, 1.0, 1e-12, &err);
  else
    v = integrate_pieces(g, 0.0, 1.0, breaks, 1e-12);
  return {DivKind::Hellinger2, v, Method::Quadrature, err, json::object()};
}

/// H^2 between two densities on [0, 1] by quadrature.
inline DivergenceReport hellinger2_densities(const DensityModel& p, const DensityModel& q) {
  auto brk = p.breakpoints();
  const auto b2 = q.breakpoints();
  brk.insert(brk.end(), b2.begin(), b2.end());
  std::sort(brk.begin(), brk.end());
  auto r = hellinger2_poisson_processes([&](double x) { return p(x); }, [&](double x) { return q(x); }, brk);
  return r;
}

/// Divergences between the law of N + U (N ~ Poi(lambda), U ~ Unif(-1/2, 1/2])
/// and Normal(lambda, sigma2), cell by cell.
inline DivergenceTriple poisson_dither_vs_gauss(double lambda, double sigma2) {
  require(lambda > 0 && sigma2 > 0, "poisson_dither_vs_gauss: parameters must be positive");
  require(lambda <= 1e9, "poisson_dither_vs_gauss: lambda above 1e9 is not supported");
  const double s = std::sqrt(sigma2);
  const auto w = detail::poisson_window(lambda);
  const boost::math::poisson_distribution<double> P(lambda);
  const double bc_pref = std::pow(8 * std::numbers::pi * sigma2, 0.25);
  double bc = 0, ent = 0, mass = 0, m2 = 0, tv_overlap = 0;
  for (long long k = w.lo; k <= w.hi; ++k) {
    // boost's pdf keeps relative accuracy where lgamma differences do not.
    const double p = boost::math::pdf(P, static_cast<double>(k));
    if (p == 0) continue;
    const double lp = std::log(p);
    const double a = (k - 0.5 - lambda) / s, b = (k + 0.5 - lambda) / s;
    bc += std::sqrt(p) * bc_pref * detail::normal_mass(a / std::numbers::sqrt2, b / std::numbers::sqrt2);
    ent += p * lp;
    mass += p;
    const double dk = static_cast<double>(k) - lambda;
    m2 += p * dk * dk;
    // min(p, phi) on the cell; p >= phi outside |x - lambda| <= s r.
    const double c = -2.0 * std::log(p * s * std::sqrt(2 * std::numbers::pi));
    double overlap;
    if (c <= 0) {
      overlap = detail::normal_mass(a, b);
    } else {
      const double r = std::sqrt(c);
      const double lo = std::max(a, -r), hi = std::min(b, r);
      // Gaussian is below p outside [-r, r] and above it inside.
      overlap = detail::normal_mass(a, std::min(b, -r)) * (a < -r) + detail::normal_mass(std::max(a, r), b) * (b > r);
      if (hi > lo) overlap += p * (hi - lo) * s;
    }
    tv_overlap += overlap;
  }
  DivergenceTriple t;
  t.hellinger2 = std::max(0.0, 2.0 - 2.0 * bc);
  // KL(P || Q) with P piecewise constant: -H(P) + E[-log q].
  const double var = m2 + 1.0 / 12.0;
  t.kl = ent + 0.5 * std::log(2 * std::numbers::pi * sigma2) + (var) / (2 * sigma2);
  t.kl = std::max(0.0, t.kl);
  t.tv = std::max(0.0, 1.0 - tv_overlap);
  t.error = 1e-12 * (1 + std::fabs(ent)) + std::fabs(1 - mass);
  return t;
}

/// H^2(N + U, Normal(lambda, lambda0)); params carry 1/(4 lambda) + 4 (lambda/lambda0 - 1)^2.
inline DivergenceReport hellinger2_mismatched_gauss(double lambda, double lambda0) {
  const auto t = poisson_dither_vs_gauss(lambda, lambda0);
  const double bound = 1.0 / (4 * lambda) + 4 * (lambda / lambda0 - 1) * (lambda / lambda0 - 1);
  return {DivKind::Hellinger2, t.hellinger2, Method::Closed, t.error,
          json{{"lambda", lambda}, {"lambda0", lambda0}, {"bound", bound}}};
}

/// KL(N + U, Normal(lambda, lambda)); 8 lambda KL -> 1.
inline DivergenceReport kl_poisson_uniform_vs_gauss(double lambda) {
  const auto t = poisson_dither_vs_gauss(lambda, lambda);
  return {DivKind::KL, t.kl, Method::Closed, t.error, json{{"lambda", lambda}}};
}

/// Divergences between Normal(mu, 1) and Phi^{-1}(G_{m,1/2}(X + U)),
/// X ~ Bin(m, p). On [t_k, t_{k+1}] the second law has density (b_k/a_k) phi.
inline DivergenceTriple quantile_coupling_divergences(long long m, double p, double mu) {
  require(m >= 0, "quantile coupling: m must be nonnegative");
  require(p >= 0 && p <= 1, "quantile coupling: p outside [0,1]");
  DivergenceTriple t;
  if (m == 0) {
    t = gauss_shift_divergences(mu, 1.0);
    return t;
  }
  const double md = static_cast<double>(m);
  const double sd = std::sqrt(md) * 0.5;
  const double centre_lo = std::min(md * 0.5, md * p), centre_hi = std::max(md * 0.5, md * p);
  const double w = 15 * sd + 15;
  const long long lo = std::max<long long>(0, static_cast<long long>(std::floor(centre_lo - w)));
  const long long hi = std::min<long long>(m, static_cast<long long>(std::ceil(centre_hi + w)));
  const boost::math::binomial_distribution<double> A(md, 0.5);
  const std::size_t K = static_cast<std::size_t>(hi - lo + 1);
  std::vector<double> la(K), lb(K), lower(K + 1), upper(K + 1);
  for (std::size_t r = 0; r < K; ++r) {
    const long long k = lo + static_cast<long long>(r);
    la[r] = detail::log_binom_pmf(m, 0.5, k);
    if (p == 0)
      lb[r] = k == 0 ? 0.0 : -INFINITY;
    else if (p == 1)
      lb[r] = k == m ? 0.0 : -INFINITY;
    else
      lb[r] = detail::log_binom_pmf(m, p, k);
  }
  // lower[r] = P(X <= lo + r - 1), upper[r] = P(X >= lo + r), accumulated from
  // the nearer end so both tails keep relative precision.
  lower[0] = lo == 0 ? 0.0 : boost::math::cdf(A, static_cast<double>(lo - 1));
  for (std::size_t r = 0; r < K; ++r) lower[r + 1] = lower[r] + std::exp(la[r]);
  upper[K] = hi == m ? 0.0 : boost::math::cdf(boost::math::complement(A, static_cast<double>(hi)));
  for (std::size_t r = K; r-- > 0;) upper[r] = upper[r + 1] + std::exp(la[r]);
  std::vector<double> tb(K + 1);
  for (std::size_t r = 0; r <= K; ++r) {
    if (lower[r] <= 0)
      tb[r] = -INFINITY;
    else if (upper[r] <= 0)
      tb[r] = INFINITY;
    else
      tb[r] = normal_quantile_split(lower[r], upper[r]);
  }
  double bc = 0, kl = 0, tv_overlap = 0;
  const double e = std::exp(-mu * mu / 8);
  // exp(lr) * x without inf * 0 when a cell's Bin(m, 1/2) mass underflows.
  auto times = [](double lr, double x) { return x > 0 ? std::exp(lr + std::log(x)) : 0.0; };
  for (std::size_t r = 0; r < K; ++r) {
    const double t_k = tb[r], t_next = tb[r + 1];
    const double llr = lb[r] - la[r];
    const double b = std::exp(lb[r]);
    bc += times(0.5 * llr, detail::normal_mass(t_k - mu / 2, t_next - mu / 2));
    if (b > 0) {
      const double pa = std::isinf(t_k) ? 0.0 : normal_pdf(t_k);
      const double pb = std::isinf(t_next) ? 0.0 : normal_pdf(t_next);
      kl += b * (llr + mu * mu / 2) - mu * (times(llr, pa) - times(llr, pb));
    }
    // Overlap int min(ratio phi(z), phi(z - mu)); phi(z - mu)/phi(z) is monotone in z.
    if (mu == 0) {
      const double q = detail::normal_mass(t_k, t_next);
      tv_overlap += std::min(times(llr, q), q);
    } else if (b > 0) {
      const double c = std::clamp((llr + mu * mu / 2) / mu, t_k, t_next);
      if (mu > 0)
        tv_overlap += detail::normal_mass(t_k - mu, c - mu) + times(llr, detail::normal_mass(c, t_next));
      else
        tv_overlap += times(llr, detail::normal_mass(t_k, c)) + detail::normal_mass(c - mu, t_next - mu);
    }
  }
  t.hellinger2 = std::max(0.0, 2.0 - 2.0 * e * bc);
  t.kl = std::max(0.0, kl);
  t.tv = std::clamp(1.0 - tv_overlap, 0.0, 1.0);
  t.error = 1e-12;
  return t;
}

inline double hellinger2_quantile_coupling(long long m, double p, double mu) {
  return quantile_coupling_divergences(m, p, mu).hellinger2;
}

/// Monte Carlo TV(P, Q) = E_P[(1 - q/p)^+], averaged with the mirror estimate
/// E_Q[(1 - p/q)^+]. `ratio(x)` returns q(x)/p(x).
template <class SamplerA, class SamplerB, class Ratio>
DivergenceReport tv_monte_carlo(SamplerA&& sample_a, SamplerB&& sample_b, Ratio&& ratio, std::size_t reps,
                                std::uint64_t seed) {
  require(reps >= 2, "tv_monte_carlo: need at least two replicates");
  std::vector<double> v(reps);
  parallel_for(reps, [&](std::size_t r) {
    Engine g = make_engine(seed, 0x7f, r);
    const double xa = sample_a(g);
    const double xb = sample_b(g);
    const double ra = ratio(xa), rb = ratio(xb);
    const double ea = std::max(0.0, 1.0 - ra);
    const double eb = rb > 0 ? std::max(0.0, 1.0 - 1.0 / rb) : 1.0;
    v[r] = 0.5 * (ea + eb);
  });
  double mean = 0, m2 = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(reps);
  for (double x : v) m2 += (x - mean) * (x - mean);
  const double se = std::sqrt(m2 / static_cast<double>(reps - 1) / static_cast<double>(reps));
  return {DivKind::TV, mean, Method::MonteCarlo, se, json{{"reps", reps}}};
}

// --- coupling budget ---

/// Per-level Monte Carlo Hellinger mass and the three analytic terms that
/// bound it: (i) mean mismatch, (ii) sum (p - 1/2)^2, (iii) sum sqrt(E N^2)(p - 1/2)^4.
struct LevelTerms {
  int j = 0;
  double mc = 0;
  double mc_se = 0;
  double term_i = 0, term_ii = 0, term_iii = 0;
  double bound_sum() const { return term_i + term_ii + term_iii; }
};

struct BudgetReport {
  DivergenceReport total;
  double level_minus1 = 0;
  double level_minus1_bound = 0;
  std::vector<LevelTerms> levels;
  int jmax = 0;
  std::size_t m = 0;
  double truncation_tail = 0;
};

inline json to_json(const BudgetReport& b) {
  json lv = json::array();
  for (const auto& l : b.levels)
    lv.push_back({{"j", l.j}, {"mc", l.mc}, {"mc_se", l.mc_se}, {"term_i", l.term_i}, {"term_ii", l.term_ii},
                  {"term_iii", l.term_iii}});
  return json{{"total", to_json(b.total)},     {"level_minus1", b.level_minus1},
              {"level_minus1_bound", b.level_minus1_bound}, {"levels", lv},
              {"jmax", b.jmax},                {"m", b.m},
              {"truncation_tail", b.truncation_tail}};
}

struct BudgetOptions {
  int jmax = -1;       ///< -1 selects default_jmax
  int jmax_cap = 10;
  std::size_t draws = 256;
  std::uint64_t seed = 1;
};

namespace detail {

// Stratified draws from Poi(lambda): quantiles at (r + V_r) / R.
inline std::vector<long long> stratified_poisson(double lambda, std::size_t R, Engine& g) {
  std::vector<long long> out(R, 0);
  if (lambda <= 0) return out;
  const auto w = poisson_window(lambda);
  std::vector<double> cdf;
  cdf.reserve(static_cast<std::size_t>(w.hi - w.lo + 1));
  double acc = w.lo == 0 ? 0.0 : boost::math::cdf(boost::math::poisson_distribution<double>(lambda), w.lo - 1.0);
  for (long long k = w.lo; k <= w.hi; ++k) {
    acc += std::exp(log_poisson_pmf(lambda, k));
    cdf.push_back(acc);
  }
  for (std::size_t r = 0; r < R; ++r) {
    const double u = (static_cast<double>(r) + uniform01(g)) / static_cast<double>(R);
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const auto idx = it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
    out[r] = w.lo + static_cast<long long>(idx);
  }
  return out;
}

}  // namespace detail

/// Hellinger budget of the coupling between the Poisson coefficient tensor and
/// its Gaussian counterpart for true density f and centre f0.
inline BudgetReport coupling_hellinger_budget(const DensityModel& f, const DensityModel& f0, std::size_t n, double beta,
                                              const BudgetOptions& opt = {}) {
  const Partition p = build_partition(f0, n, beta);
  const int J = opt.jmax >= 0 ? opt.jmax : default_jmax(p, f.radius(), opt.jmax_cap);
  const CoeffTensor d = haar_coeffs(f, p, J);
  const double nd = static_cast<double>(n);
  BudgetReport rep;
  rep.jmax = J;
  rep.m = p.m();

  std::vector<double> lm1(p.m());
  double bnd1 = 0, bnd2 = 0;
  parallel_for(p.m(), [&](std::size_t i) {
    const double lam = nd * f.integral(p.x[i], p.x[i + 1]);
    const double lam0 = nd * p.delta[i] * f0(p.x[i]);
    lm1[i] = lam > 0 ? poisson_dither_vs_gauss(lam, lam0).hellinger2 : 2.0;
  });
  for (std::size_t i = 0; i < p.m(); ++i) {
    rep.level_minus1 += lm1[i];
    bnd1 += 1.0 / (nd * f.integral(p.x[i], p.x[i + 1]));
    const double r = (f.integral(p.x[i], p.x[i + 1]) - p.delta[i] * f0(p.x[i])) / (p.delta[i] * f0(p.x[i]));
    bnd2 += r * r;
  }
  rep.level_minus1_bound = bnd1 + 16 * bnd2;

  double var_total = 0;
  for (int j = 0; j <= J; ++j) {
    const std::size_t cells = p.m() << j;
    std::vector<double> mc(cells), var(cells), ti(cells), tii(cells), tiii(cells);
    parallel_for(cells, [&](std::size_t c) {
      const std::size_t i = c >> j, k = c & ((std::size_t{1} << j) - 1);
      auto [a, b] = haar_cell(p, i, j, k);
      auto [a2, mid] = haar_cell(p, i, j + 1, 2 * k);
      const double mass = f.integral(a, b);
      const double lam = nd * mass;
      const double plus = f.integral(a2, mid);
      const double pr = mass > 0 ? std::clamp(plus / mass, 0.0, 1.0) : 0.5;
      const double mu = std::sqrt(nd / f0(p.x[i])) * d.at(i, j, k);
      const double dev = pr - 0.5;
      const double h = std::ldexp(p.delta[i], -j);
      const double shape = mass > 0 ? 1.0 / std::sqrt(f0(p.x[i])) - std::sqrt(h) / std::sqrt(mass) : 0.0;
      ti[c] = nd * d.at(i, j, k) * d.at(i, j, k) * shape * shape;
      tii[c] = dev * dev;
      tiii[c] = std::sqrt(lam + lam * lam) * dev * dev * dev * dev;
      // Numerically constant cells: p = 1/2 and mu = 0 give an exact identity.
      if (std::fabs(dev) < 1e-12 && std::fabs(mu) < 1e-12) {
        mc[c] = 0, var[c] = 0;
        return;
      }
      Engine g = make_engine(opt.seed, 0xb0d6e7 + static_cast<std::uint64_t>(j), c);
      const auto draws = detail::stratified_poisson(lam, opt.draws, g);
      std::map<long long, double> cache;
      double s = 0, s2 = 0;
      for (long long N : draws) {
        auto it = cache.find(N);
        if (it == cache.end()) it = cache.emplace(N, hellinger2_quantile_coupling(N, pr, mu)).first;
        s += it->second;
        s2 += it->second * it->second;
      }
      const double R = static_cast<double>(opt.draws);
      mc[c] = s / R;
      var[c] = std::max(0.0, s2 / R - mc[c] * mc[c]) / R;
    });
    LevelTerms lt;
    lt.j = j;
    double v = 0;
    for (std::size_t c = 0; c < cells; ++c) {
      lt.mc += mc[c];
      v += var[c];
      lt.term_i += ti[c];
      lt.term_ii += tii[c];
      lt.term_iii += tiii[c];
    }
    lt.mc_se = std::sqrt(v);
    var_total += v;
    rep.levels.push_back(lt);
  }
  double tail = 0;
  for (double dl : p.delta) tail += f.radius() * f.radius() * std::pow(dl, 2 * beta + 1);
  rep.truncation_tail = tail * std::pow(2.0, -2.0 * (J + 1) * beta) / (std::pow(2.0, 2 * beta) - 1.0);

  double total = rep.level_minus1;
  for (const auto& l : rep.levels) total += l.mc;
  rep.total = {DivKind::Hellinger2, total, Method::MonteCarlo, std::sqrt(var_total),
               json{{"n", n}, {"beta", beta}, {"jmax", J}, {"m", p.m()}, {"draws", opt.draws}}};
  return rep;
}

// --- Poissonization step (III) ---

/// Worst case over the Theta_1 band of
///   int (sqrt((n - kappa) f + kappa f0~) - sqrt(n f))^2,
/// with the band |f - f0| <= C L^{b/(b+1)} + C (L f0)^{b/(2b+1)}, L = log n / n.
inline double poissonization_bound(const DensityModel& f0, std::size_t n, double beta, double C) {
  const double nd = static_cast<double>(n);
  const double kappa = poisson_margin(n);
  const double L = std::log(nd) / nd;
  const double thr = poisson_threshold(n, beta, C);
  auto g = [&](double x) {
    const double v0 = f0(x);
    const double dev = C * std::pow(L, beta / (beta + 1)) + C * std::pow(L * v0, beta / (2 * beta + 1));
    const double ft = v0 >= thr ? v0 : 0.0;
    auto h = [&](double fv) {
      const double a = std::sqrt((nd - kappa) * fv + kappa * ft) - std::sqrt(nd * fv);
      return a * a;
    };
    // The integrand is monotone on each side of f = f0~, so the band endpoints bound it.
    return std::max(h(std::max(v0 - dev, 1e-300)), h(v0 + dev));
  };
  return integrate_pieces(g, 0.0, 1.0, f0.breakpoints(), 1e-12);
}

}  // namespace lecam
