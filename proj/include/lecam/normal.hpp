#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lecam {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

// Wichura, AS241 (PPND16). Relative accuracy about 1e-16 before refinement.
inline double ppnd16(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

}  // namespace detail

/// Inverse of the standard normal CDF. One Newton step on top of AS241.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0,1]");
  }
  double x = detail::ppnd16(p);
  const double d = normal_pdf(x);
  if (d > 0) {
    const double err = (x < 0 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x));
    x -= err / d;
  }
  return x;
}

/// Quantile from an upper-tail probability, i.e. the x with 1 - Phi(x) = q.
inline double normal_quantile_upper(double q) { return -normal_quantile(q); }

/// x with log Phi(x) = logp, for logp <= log(1/2). Handles probabilities far
/// below the double range through the asymptotic Mills ratio.
inline double normal_quantile_from_log(double logp) {
  if (logp > -600.0) return normal_quantile(std::exp(logp));
  // log Phi(x) ~ -x^2/2 - log(-x) - log(2 pi)/2 + log(1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
  auto logcdf = [](double x) {
    const double y = 1.0 / (x * x);
    const double s = 1 - y * (1 - y * (3 - y * (15 - 105 * y)));
    return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2 * std::numbers::pi) + std::log(s);
  };
  const double t = -2.0 * logp;
  double x = -std::sqrt(t - std::log(t) - std::log(2 * std::numbers::pi));
  for (int it = 0; it < 50; ++it) {
    const double h = logcdf(x) - logp;
    // d/dx log Phi(x) = phi/Phi ~ -x / (1 - 1/x^2 + 3/x^4)
    const double y = 1.0 / (x * x);
    const double d = -x / (1 - y + 3 * y * y);
    const double step = h / d;
    x -= step;
    if (std::fabs(step) < 1e-15 * std::fabs(x)) break;
  }
  return x;
}

/// Phi^{-1} from a probability given as (lower, upper) with lower + upper = 1.
/// Uses whichever tail is smaller to keep relative precision.
inline double normal_quantile_split(double lower, double upper) {
  return lower <= upper ? normal_quantile(lower) : normal_quantile_upper(upper);
}

}  // namespace lecam
