#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "core.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "funcspace.hpp"
#include "normal.hpp"
#include "partition_haar.hpp"

namespace lecam {

/// L2-normalized bump u -> -(4/3) h((4/3)u) + 4 h(4u - 3) on [0, 1], with h the
/// Beta(b+1, b+1) density and b = max(beta, 2).
class BumpKernel {
 public:
  explicit BumpKernel(double beta = 1.0) : b_(std::max(beta, 2.0)) {
    inv_beta_ = 1.0 / boost::math::beta(b_ + 1, b_ + 1);
    hmax_ = std::pow(0.25, b_) * inv_beta_;
    auto g2 = [this](double u) { const double v = raw(u); return v * v; };
    norm_ = std::sqrt(integrate(g2, 0.0, 0.75, 1e-14) + integrate(g2, 0.75, 1.0, 1e-14));
  }

  double operator()(double u) const { return raw(u) / norm_; }
  /// int_0^u K.
  double primitive(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    const double a = boost::math::ibeta(b_ + 1, b_ + 1, std::min(4.0 * u / 3.0, 1.0));
    const double c = u > 0.75 ? boost::math::ibeta(b_ + 1, b_ + 1, std::min(4.0 * u - 3.0, 1.0)) : 0.0;
    return (c - a) / norm_;
  }
  double sup() const { return 4.0 * hmax_ / norm_; }
  double beta_prime() const { return b_; }
  double moment(int r) const {
    auto g = [&](double u) { return std::pow((*this)(u), r); };
    return integrate(g, 0.0, 0.75, 1e-14) + integrate(g, 0.75, 1.0, 1e-14);
  }

 private:
  double h(double x) const {
    if (x <= 0 || x >= 1) return 0.0;
    return std::pow(x * (1 - x), b_) * inv_beta_;
  }
  double raw(double u) const {
    if (u < 0 || u > 1) return 0.0;
    return u <= 0.75 ? -(4.0 / 3.0) * h(4.0 * u / 3.0) : 4.0 * h(4.0 * u - 3.0);
  }
  double b_;
  double inv_beta_ = 1;
  double hmax_ = 0;
  double norm_ = 1;
};

/// Everything needed to generate f_theta = f0 (1 + sum_j theta_j psi_j).
struct PerturbationKit {
  DensityModel f0;
  Partition partition;
  double alpha = 0.3;
  double beta = 1.0;
  std::size_t n = 0;
  BumpKernel K;
  std::vector<double> F;      ///< F0 mass of each interval
  std::vector<double> F0left; ///< F0(x_j)
  std::vector<double> gamma;
  std::vector<double> amp;    ///< c_j = alpha gamma_j Delta_j^beta / f0(x_j) = alpha / sqrt(n F_j)
  std::vector<double> mu3;    ///< c_j^3 F_j int K^3
  double K3 = 0;
  double sup_perturbation = 0;
  bool admissible = false;    ///< sup |sum theta_j psi_j| < 1/2
  // White-noise discretization: `cells` equal cells per interval.
  std::size_t cells = 64;
  std::vector<double> grid;
  std::vector<double> drift_plus, drift_minus;  ///< int_cell 2 sqrt(f0 (1 +- psi))

  std::size_t m() const { return partition.m(); }
  double psi(std::size_t j, double u) const { return amp[j] * K(u); }
  double u_of(std::size_t j, double x) const { return (f0.cdf(x) - F0left[j]) / F[j]; }
};

/// alpha may be 0 (no perturbation); the floor of f0 must exceed 10 n^{-b/(b+1)}.
inline PerturbationKit build_kit(const DensityModel& f0, std::size_t n, double beta, double alpha,
                                 std::size_t cells_per_interval = 64) {
  require(alpha >= 0 && alpha <= 1, "build_kit: alpha must lie in [0, 1]");
  require(f0.floor() >= 10.0 * std::pow(static_cast<double>(n), -beta / (beta + 1)),
          "build_kit: f0 floor too small for this n");
  require(cells_per_interval >= 1, "build_kit: need at least one cell per interval");
  PerturbationKit kit;
  kit.f0 = f0;
  kit.partition = build_partition(f0, n, beta);
  kit.alpha = alpha;
  kit.beta = beta;
  kit.n = n;
  kit.K = BumpKernel(beta);
  kit.K3 = kit.K.moment(3);
  kit.cells = cells_per_interval;
  const auto& p = kit.partition;
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < p.m(); ++j) {
    const double Fj = f0.integral(p.x[j], p.x[j + 1]);
    const double fl = f0(p.x[j]);
    kit.F.push_back(Fj);
    kit.F0left.push_back(f0.cdf(p.x[j]));
    const double g = fl / std::sqrt(nd * std::pow(p.delta[j], 2 * beta) * Fj);
    kit.gamma.push_back(g);
    const double c = alpha * g * std::pow(p.delta[j], beta) / fl;
    kit.amp.push_back(c);
    kit.mu3.push_back(c * c * c * Fj * kit.K3);
    kit.sup_perturbation = std::max(kit.sup_perturbation, c * kit.K.sup());
  }
  kit.admissible = kit.sup_perturbation < 0.5;
  kit.grid.push_back(0.0);
  for (std::size_t j = 0; j < p.m(); ++j) {
    for (std::size_t k = 0; k < kit.cells; ++k) {
      const double a = p.x[j] + p.delta[j] * static_cast<double>(k) / static_cast<double>(kit.cells);
      const double b = k + 1 == kit.cells ? p.x[j + 1] : p.x[j] + p.delta[j] * static_cast<double>(k + 1) / static_cast<double>(kit.cells);
      auto root = [&](double s, double x) {
        return 2.0 * std::sqrt(std::max(0.0, f0(x) * (1.0 + s * kit.psi(j, kit.u_of(j, x)))));
      };
      // Split at u = 3/4 where K changes lobe.
      double plus = 0, minus = 0;
      const double xb = f0.quantile(kit.F0left[j] + 0.75 * kit.F[j]);
      auto gl = [&](double s, double lo, double hi) {
        if (hi <= lo) return 0.0;
        return gauss_legendre([&](double x) { return root(s, x); }, lo, hi);
      };
      if (xb > a && xb < b) {
        plus = gl(1, a, xb) + gl(1, xb, b);
        minus = gl(-1, a, xb) + gl(-1, xb, b);
      } else {
        plus = gl(1, a, b);
        minus = gl(-1, a, b);
      }
      kit.drift_plus.push_back(plus);
      kit.drift_minus.push_back(minus);
      kit.grid.push_back(b);
    }
  }
  kit.grid.back() = 1.0;
  return kit;
}

namespace detail {

struct ThetaDensity final : DensityImpl {
  std::shared_ptr<const PerturbationKit> kit;
  std::vector<int> theta;
  double eval(double x) const override {
    const std::size_t j = kit->partition.locate(x);
    return kit->f0(x) * (1.0 + theta[j] * kit->psi(j, kit->u_of(j, x)));
  }
  double integral(double a, double b) const override {
    double total = 0;
    const auto& p = kit->partition;
    for (std::size_t j = p.locate(a); j < p.m() && p.x[j] < b; ++j) {
      const double lo = std::max(a, p.x[j]), hi = std::min(b, p.x[j + 1]);
      if (hi <= lo) continue;
      total += kit->f0.integral(lo, hi) +
               theta[j] * kit->amp[j] * kit->F[j] * (kit->K.primitive(kit->u_of(j, hi)) - kit->K.primitive(kit->u_of(j, lo)));
    }
    return total;
  }
  std::vector<double> breakpoints() const override { return kit->partition.x; }
};

}  // namespace detail

/// f_theta = f0 (1 + sum_j theta_j psi_j).
inline DensityModel test_density(const PerturbationKit& kit, const std::vector<int>& theta) {
  require(theta.size() == kit.m(), "test_density: theta has the wrong length");
  for (int t : theta) require(t == 1 || t == -1, "test_density: theta entries must be +-1");
  if (kit.sup_perturbation >= 1.0) throw ConfigError("test_density: perturbation reaches 1, alpha too large");
  auto impl = std::make_shared<detail::ThetaDensity>();
  impl->kit = std::make_shared<const PerturbationKit>(kit);
  impl->theta = theta;
  DensityModel::Meta meta{"lb_test", json{{"theta", theta}, {"alpha", kit.alpha}}, kit.beta, kit.f0.radius(),
                          kit.f0.floor() * (1 - kit.sup_perturbation)};
  return DensityModel(impl, meta);
}

/// Prior pi_s(theta_j = +1) = e^{2 alpha s} / (1 + e^{2 alpha s}); s = 0 is uniform.
inline double prior_plus(double alpha, int sign) {
  return 1.0 / (1.0 + std::exp(-2.0 * alpha * sign));
}

inline std::vector<int> draw_theta(const PerturbationKit& kit, int sign, Engine& g) {
  const double pp = prior_plus(kit.alpha, sign);
  std::vector<int> t(kit.m());
  for (auto& v : t) v = uniform01(g) < pp ? 1 : -1;
  return t;
}

namespace detail {

// u ~ density 1 + s c K(u) by rejection.
inline double draw_u(const PerturbationKit& kit, std::size_t j, int s, Engine& g) {
  const double env = 1.0 + kit.amp[j] * kit.K.sup();
  while (true) {
    const double u = uniform01(g);
    if (uniform01(g) * env <= 1.0 + s * kit.psi(j, u)) return u;
  }
}

inline double point_llr(const PerturbationKit& kit, std::size_t j, double u) {
  const double ps = kit.psi(j, u);
  if (!(1.0 - std::fabs(ps) > 0)) throw NumericalError("bayes_estimate_poisson: 1 +- psi <= 0");
  return std::log1p(ps) - std::log1p(-ps);
}

inline int decide(double llr, double alpha, int sign) { return llr + 2.0 * alpha * sign >= 0 ? 1 : -1; }

}  // namespace detail

/// Poisson process with intensity n f_theta, simulated interval by interval
/// in the F0 scale.
inline PointProcessSample sample_poisson_theta(const PerturbationKit& kit, const std::vector<int>& theta,
                                               std::uint64_t seed) {
  Engine g = make_engine(seed, 0x7e7a);
  PointProcessSample s;
  s.n = kit.n;
  for (std::size_t j = 0; j < kit.m(); ++j) {
    const long long N = poisson_draw(g, static_cast<double>(kit.n) * kit.F[j]);
    for (long long r = 0; r < N; ++r) {
      const double u = detail::draw_u(kit, j, theta[j], g);
      s.points.push_back(kit.f0.quantile(kit.F0left[j] + kit.F[j] * u));
    }
  }
  return s;
}

/// Coordinate-wise Bayes rule for the Poisson experiment. prior_sign is +1,
/// -1, or 0 for the uniform prior. Ties go to +1.
inline std::vector<int> bayes_estimate_poisson(const PointProcessSample& pp, const PerturbationKit& kit,
                                               int prior_sign) {
  std::vector<double> llr(kit.m(), 0.0);
  for (double x : pp.points) {
    const std::size_t j = kit.partition.locate(x);
    llr[j] += detail::point_llr(kit, j, std::clamp(kit.u_of(j, x), 0.0, 1.0));
  }
  std::vector<int> t(kit.m());
  for (std::size_t j = 0; j < kit.m(); ++j) t[j] = detail::decide(llr[j], kit.alpha, prior_sign);
  return t;
}

/// White-noise path dY = 2 sqrt(f_theta) dt + n^{-1/2} dW on the kit grid.
inline GwnPath sample_gwn_theta(const PerturbationKit& kit, const std::vector<int>& theta, std::uint64_t seed,
                                double noise_scale = 1.0) {
  Engine g = make_engine(seed, 0x6a55);
  std::vector<double> drift(kit.grid.size() - 1), var(drift.size());
  for (std::size_t c = 0; c < drift.size(); ++c) {
    const std::size_t j = c / kit.cells;
    drift[c] = theta[j] > 0 ? kit.drift_plus[c] : kit.drift_minus[c];
    var[c] = (kit.grid[c + 1] - kit.grid[c]) / static_cast<double>(kit.n);
  }
  return gwn_from_drift(kit.grid, drift, var, kit.n, VarianceMode::Unit, g, noise_scale);
}

/// Per-interval log-likelihood ratio of theta_j = +1 against -1 for a path on
/// the kit grid.
inline std::vector<double> gauss_llr(const GwnPath& y, const PerturbationKit& kit) {
  if (y.grid.size() != kit.grid.size()) throw ConfigError("bayes_estimate_gauss: path grid does not match kit grid");
  for (std::size_t c = 0; c < y.grid.size(); ++c)
    if (std::fabs(y.grid[c] - kit.grid[c]) > 1e-12) throw ConfigError("bayes_estimate_gauss: grid misalignment");
  require(y.n == kit.n, "bayes_estimate_gauss: path noise level does not match kit n");
  std::vector<double> llr(kit.m(), 0.0);
  const double nd = static_cast<double>(kit.n);
  for (std::size_t c = 0; c < y.cells(); ++c) {
    const double h = y.grid[c + 1] - y.grid[c];
    const double a = kit.drift_plus[c], b = kit.drift_minus[c];
    llr[c / kit.cells] += nd / h * (y.increments[c] * (a - b) - 0.5 * (a * a - b * b));
  }
  return llr;
}

inline std::vector<int> bayes_estimate_gauss(const GwnPath& y, const PerturbationKit& kit, int prior_sign) {
  const auto llr = gauss_llr(y, kit);
  std::vector<int> t(kit.m());
  for (std::size_t j = 0; j < kit.m(); ++j) t[j] = detail::decide(llr[j], kit.alpha, prior_sign);
  return t;
}

/// D_j = (n/4) sum_cells (a - b)^2 / h for the discretized path.
inline std::vector<double> gauss_information(const PerturbationKit& kit) {
  std::vector<double> D(kit.m(), 0.0);
  for (std::size_t c = 0; c + 1 < kit.grid.size(); ++c) {
    const double h = kit.grid[c + 1] - kit.grid[c];
    const double d = kit.drift_plus[c] - kit.drift_minus[c];
    D[c / kit.cells] += 0.25 * static_cast<double>(kit.n) * d * d / h;
  }
  return D;
}

/// Misclassification probability Phi(-sqrt(D) - alpha theta0 s / sqrt(D)).
inline double gauss_misclassification(double D, double alpha, int theta0, int prior_sign) {
  if (D <= 0) return (detail::decide(0.0, alpha, prior_sign) != theta0) ? 1.0 : 0.0;
  const double sd = std::sqrt(D);
  return normal_cdf(-sd - alpha * theta0 * prior_sign / sd);
}

// --- loss ---

struct LossThreshold {
  std::size_t j1 = 0, j2 = 0;  ///< window (j1, j2] in 1-based terms; intervals j1..j2-1 here
  std::vector<double> rho;
  double r_alpha = 0;
  double A = 0;
  double sum_rho = 0;
  double rho_l2 = 0;
  double rate = 0;
};

inline double r_alpha(double alpha) {
  const double pp = prior_plus(alpha, 1);
  return normal_cdf(-alpha - 1) * pp + normal_cdf(-alpha + 1) * (1 - pp);
}

inline LossThreshold loss_threshold(const PerturbationKit& kit) {
  const auto& p = kit.partition;
  const double b = kit.beta;
  const double nd = static_cast<double>(kit.n);
  const double e = (2 * b + 3) / (2 * b + 1);
  const double scale = std::pow(nd, (1 - 2 * b) / (2 * b + 1));
  std::vector<double> part(p.m());
  double total = 0;
  for (std::size_t j = 0; j < p.m(); ++j) {
    part[j] = scale * integrate([&](double x) { return std::pow(kit.f0(x), -e); }, p.x[j], p.x[j + 1], 1e-10);
    total += part[j];
  }
  LossThreshold L;
  L.rate = total;
  std::size_t lo = 0, hi = p.m();
  if (total > 1.0) {
    // Grow around the interval with the largest f0 until the window holds about one unit.
    std::size_t best = 0;
    for (std::size_t j = 0; j < p.m(); ++j)
      if (kit.f0(p.x[j]) > kit.f0(p.x[best])) best = j;
    if (!(kit.f0(p.x[best]) >= 1.0 || kit.f0(p.x[best + 1]) >= 1.0))
      throw NumericalError("loss_threshold: no interval with f0 >= 1");
    lo = best, hi = best + 1;
    double acc = part[best];
    while (true) {
      const double left = lo > 0 ? part[lo - 1] : INFINITY;
      const double right = hi < p.m() ? part[hi] : INFINITY;
      const double add = std::min(left, right);
      if (!std::isfinite(add) || acc + add > 2.0) break;
      acc += add;
      if (left <= right)
        --lo;
      else
        ++hi;
    }
  }
  L.j1 = lo;
  L.j2 = hi;
  L.rho.assign(p.m(), 0.0);
  double s2 = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    L.rho[j] = 1.0 / std::sqrt(nd * kit.F[j]);
    L.sum_rho += L.rho[j];
    s2 += L.rho[j] * L.rho[j];
  }
  L.rho_l2 = std::sqrt(s2);
  L.r_alpha = r_alpha(kit.alpha);
  L.A = L.r_alpha * L.sum_rho + 4.0 * L.rho_l2;
  return L;
}

inline double weighted_loss(const std::vector<int>& est, const std::vector<int>& truth, const std::vector<double>& rho) {
  double s = 0;
  for (std::size_t j = 0; j < est.size(); ++j)
    if (est[j] != truth[j]) s += rho[j];
  return s;
}

// --- Bernoulli sums ---

/// P(sum_j w_j Z_j > A) (or >= A) for independent Z_j ~ Ber(a_j), by
/// enumeration over all 2^m outcomes.
inline double bernoulli_sum_tail_enum(const std::vector<double>& w, const std::vector<double>& a, double A,
                                      bool strict = true) {
  require(w.size() == a.size() && w.size() <= 24, "bernoulli_sum_tail_enum: need m <= 24");
  const std::size_t m = w.size();
  double total = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double s = 0, pr = 1;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask >> j & 1) {
        s += w[j];
        pr *= a[j];
      } else {
        pr *= 1 - a[j];
      }
    }
    if (strict ? s > A : s >= A) total += pr;
  }
  return total;
}

/// Same tail through a distribution of partial sums; equal weights collapse.
inline double bernoulli_sum_tail(const std::vector<double>& w, const std::vector<double>& a, double A,
                                 bool strict = true) {
  require(w.size() == a.size(), "bernoulli_sum_tail: size mismatch");
  double total_w = 0;
  for (double x : w) total_w += x;
  const double q = 1e-12 * std::max(1.0, total_w);
  std::map<long long, double> dist{{0, 1.0}};
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] == 0) continue;
    std::map<long long, double> next;
    const long long step = std::llround(w[j] / q);
    for (auto [k, pr] : dist) {
      next[k] += pr * (1 - a[j]);
      next[k + step] += pr * a[j];
    }
    dist.swap(next);
  }
  double t = 0;
  for (auto [k, pr] : dist) {
    const double s = static_cast<double>(k) * q;
    if (strict ? s > A + 0.5 * q : s >= A - 0.5 * q) t += pr;
  }
  return t;
}

struct ChangeOfMeasure {
  double lhs = 0, rhs = 0;
  bool holds = false;
};

/// Checks P(sum b Z(p) > A) >= exp(wA - w sum b q - 2 w^2 sum b^2) P(sum b Z(q) > A)
/// with p_j = q_j + q_j (1 - q_j) w b_j unless p is given.
inline ChangeOfMeasure bern_change_of_measure_check(const std::vector<double>& bw, const std::vector<double>& q,
                                                    double omega, double A, std::vector<double> p = {}) {
  require(bw.size() == q.size() && bw.size() <= 20, "bern_change_of_measure_check: need m <= 20");
  require(omega >= 0 && omega <= 0.5, "bern_change_of_measure_check: omega must lie in [0, 1/2]");
  if (p.empty()) {
    p.resize(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) p[j] = std::min(1.0, q[j] + q[j] * (1 - q[j]) * omega * bw[j]);
  }
  double sbq = 0, sb2 = 0;
  for (std::size_t j = 0; j < q.size(); ++j) sbq += bw[j] * q[j], sb2 += bw[j] * bw[j];
  ChangeOfMeasure r;
  r.lhs = bernoulli_sum_tail_enum(bw, p, A);
  r.rhs = std::exp(omega * A - omega * sbq - 2 * omega * omega * sb2) * bernoulli_sum_tail_enum(bw, q, A);
  r.holds = r.lhs >= r.rhs * (1 - 1e-12);
  return r;
}

// --- Bayes-risk gap ---

struct GapOptions {
  std::size_t reps = 10000;
  std::uint64_t seed = 1;
  double A_override = std::numeric_limits<double>::quiet_NaN();
};

struct GapResult {
  double gap = 0, se = 0;
  double risk_poisson = 0, risk_gauss = 0;
  double target_scale = 0;  ///< (sum rho_j^2)^{1/2}
  LossThreshold loss;
  double A = 0;
  int prior_sign = 1;
  std::size_t reps = 0;
  // Per-interval counts, index by interval; suffix p/m for theta0_j = +1 / -1.
  std::vector<long long> trials_p, trials_m, pois_err_p, pois_err_m, gauss_err_p, gauss_err_m;
  std::vector<double> q_p, q_m;  ///< closed-form Gaussian misclassification
  // Variance-reduced diagnostics: exact Gaussian risk and plug-in Poisson risk.
  double plugin_gap = 0;
  double mean_p_minus_q = 0, mean_p_minus_q_se = 0;
};

inline json to_json(const GapResult& r) {
  return json{{"gap", r.gap},
              {"se", r.se},
              {"risk_poisson", r.risk_poisson},
              {"risk_gauss", r.risk_gauss},
              {"target_scale", r.target_scale},
              {"A", r.A},
              {"sum_rho", r.loss.sum_rho},
              {"rho_l2", r.loss.rho_l2},
              {"r_alpha", r.loss.r_alpha},
              {"prior_sign", r.prior_sign},
              {"reps", r.reps},
              {"plugin_gap", r.plugin_gap},
              {"mean_p_minus_q", r.mean_p_minus_q},
              {"mean_p_minus_q_se", r.mean_p_minus_q_se}};
}

/// Monte Carlo difference of Bayes risks under l_A between the Poisson and
/// the white-noise experiment: R_P - R_G under pi_+, R_G - R_P under pi_-.
inline GapResult bayes_risk_gap(const PerturbationKit& kit, int prior_sign, const GapOptions& opt = {}) {
  require(prior_sign == 1 || prior_sign == -1, "bayes_risk_gap: prior sign must be +1 or -1");
  require(opt.reps >= 100, "bayes_risk_gap: need at least 100 replicates");
  const std::size_t m = kit.m();
  GapResult res;
  res.loss = loss_threshold(kit);
  res.A = std::isnan(opt.A_override) ? res.loss.A : opt.A_override;
  res.prior_sign = prior_sign;
  res.reps = opt.reps;
  res.target_scale = res.loss.rho_l2;

  struct Rep {
    std::vector<int> theta, ep, eg;  // errors per interval
    double lp = 0, lg = 0;
  };
  std::vector<Rep> reps(opt.reps);
  parallel_for(opt.reps, [&](std::size_t r) {
    Engine g = make_engine(opt.seed, 0x6a9, r);
    Rep& out = reps[r];
    out.theta = draw_theta(kit, prior_sign, g);
    // Poisson experiment in the F0 scale.
    std::vector<int> tp(m);
    for (std::size_t j = 0; j < m; ++j) {
      const long long N = poisson_draw(g, static_cast<double>(kit.n) * kit.F[j]);
      double llr = 0;
      for (long long i = 0; i < N; ++i) llr += detail::point_llr(kit, j, detail::draw_u(kit, j, out.theta[j], g));
      tp[j] = detail::decide(llr, kit.alpha, prior_sign);
    }
    const GwnPath y = sample_gwn_theta(kit, out.theta, derive_seed(opt.seed, 0x6aa, r));
    const auto tg = bayes_estimate_gauss(y, kit, prior_sign);
    out.ep.resize(m);
    out.eg.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      out.ep[j] = tp[j] != out.theta[j];
      out.eg[j] = tg[j] != out.theta[j];
    }
    out.lp = weighted_loss(tp, out.theta, res.loss.rho) >= res.A ? 1.0 : 0.0;
    out.lg = weighted_loss(tg, out.theta, res.loss.rho) >= res.A ? 1.0 : 0.0;
  });

  res.trials_p.assign(m, 0), res.trials_m.assign(m, 0);
  res.pois_err_p.assign(m, 0), res.pois_err_m.assign(m, 0);
  res.gauss_err_p.assign(m, 0), res.gauss_err_m.assign(m, 0);
  double sd = 0, sd2 = 0;
  const double sgn = prior_sign;
  for (const auto& r : reps) {
    res.risk_poisson += r.lp;
    res.risk_gauss += r.lg;
    const double d = sgn * (r.lp - r.lg);
    sd += d, sd2 += d * d;
    for (std::size_t j = 0; j < m; ++j) {
      if (r.theta[j] > 0) {
        ++res.trials_p[j];
        res.pois_err_p[j] += r.ep[j];
        res.gauss_err_p[j] += r.eg[j];
      } else {
        ++res.trials_m[j];
        res.pois_err_m[j] += r.ep[j];
        res.gauss_err_m[j] += r.eg[j];
      }
    }
  }
  const double R = static_cast<double>(opt.reps);
  res.risk_poisson /= R;
  res.risk_gauss /= R;
  res.gap = sd / R;
  res.se = std::sqrt(std::max(0.0, sd2 / R - res.gap * res.gap) / (R - 1));

  const auto D = gauss_information(kit);
  const double pp = prior_plus(kit.alpha, prior_sign);
  std::vector<double> pbar(m), qbar(m);
  double diff = 0, var = 0;
  for (std::size_t j = 0; j < m; ++j) {
    res.q_p.push_back(gauss_misclassification(D[j], kit.alpha, 1, prior_sign));
    res.q_m.push_back(gauss_misclassification(D[j], kit.alpha, -1, prior_sign));
    qbar[j] = pp * res.q_p[j] + (1 - pp) * res.q_m[j];
    pbar[j] = static_cast<double>(res.pois_err_p[j] + res.pois_err_m[j]) / R;
    diff += pbar[j] - qbar[j];
    var += pbar[j] * (1 - pbar[j]) / R;
  }
  res.mean_p_minus_q = diff / static_cast<double>(m);
  res.mean_p_minus_q_se = std::sqrt(var) / static_cast<double>(m);
  const double tp = bernoulli_sum_tail(res.loss.rho, pbar, res.A, false);
  const double tg = bernoulli_sum_tail(res.loss.rho, qbar, res.A, false);
  res.plugin_gap = sgn * (tp - tg);
  return res;
}

// --- Poisson moment and tail facts ---

/// E|N - lambda|^r for N ~ Poi(lambda), by summation.
inline double poisson_abs_central_moment(double lambda, int r) {
  const double w = 40 * std::sqrt(lambda) + 60;
  const auto hi = static_cast<long long>(std::ceil(lambda + w));
  double s = 0;
  for (long long k = 0; k <= hi; ++k) {
    const double lp = static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1);
    s += std::exp(lp) * std::pow(std::fabs(static_cast<double>(k) - lambda), r);
  }
  return s;
}

/// P(|N - lambda| > x), exact.
inline double poisson_two_sided_tail(double lambda, double x) {
  const boost::math::poisson_distribution<double> P(lambda);
  // N > lambda + x  <=>  N >= floor(lambda + x) + 1
  const double up = std::floor(lambda + x);
  const double upper = boost::math::cdf(boost::math::complement(P, up));
  // N < lambda - x  <=>  N <= ceil(lambda - x) - 1
  const double lo = std::ceil(lambda - x) - 1;
  const double lower = lo < 0 ? 0.0 : boost::math::cdf(P, lo);
  return upper + lower;
}

inline double poisson_tail_bound(double lambda, double x) {
  return 2.0 * std::exp(-x * x / (2 * lambda) + x * x * x / (2 * lambda * lambda));
}

/// Threshold 2e (2Ap)^p max(||w||_2, ||w||_inf t^p) t.
inline double weighted_power_threshold(const std::vector<double>& w, double A, int p, double t) {
  double l2 = 0, linf = 0;
  for (double x : w) l2 += x * x, linf = std::max(linf, std::fabs(x));
  return 2 * std::numbers::e * std::pow(2 * A * p, p) * std::max(std::sqrt(l2), linf * std::pow(t, p)) * t;
}

}  // namespace lecam
