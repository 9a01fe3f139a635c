#pragma once

// Normal and chi-square quantiles plus the online confidence constructions
// for averaged SGD dropout: per-coordinate intervals, projection intervals,
// the joint Mahalanobis region, and coverage tallies.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ranges>
#include <string>

#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/linalg.hpp"

namespace dsgd {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Standard normal quantile, Wichura's AS 241 (PPND16). Relative accuracy
// about 1e-16 across (0,1), no refinement step needed.
inline double inv_norm_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw ParameterError("inv_norm_cdf: u must lie in (0,1)");
  const double q = u - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
             1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
          4.6303378461565452959) * r + 1.42343711074968357734) /
        (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
             0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
          2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
             0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
          5.4637849111641143699) * r + 6.6579046435011037772) /
        (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
             7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
          0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -x : x;
}

// Regularized lower incomplete gamma P(a, x): series for x < a+1, Lentz
// continued fraction for the complement otherwise.
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw ParameterError("regularized_gamma_p: a must be positive");
  if (x <= 0.0) return 0.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  constexpr double eps = 1e-16;
  if (x < a + 1.0) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * eps) break;
    }
    return sum * std::exp(log_prefix);
  }
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return 1.0 - std::exp(log_prefix) * h;
}

inline double chi2_cdf(int dof, double x) {
  if (dof < 1) throw ParameterError("chi2_cdf: degrees of freedom must be >= 1");
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

inline double chi2_pdf(int dof, double x) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 - std::lgamma(k));
}

// Wilson-Hilferty start, then safeguarded Newton on the CDF.
inline double chi2_quantile(int dof, double u) {
  if (dof < 1) throw ParameterError("chi2_quantile: degrees of freedom must be >= 1");
  if (!(u > 0.0 && u < 1.0)) throw ParameterError("chi2_quantile: u must lie in (0,1)");
  const double k = dof;
  const double z = inv_norm_cdf(u);
  const double h = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1.0 - h + z * std::sqrt(h), 0.05), 3);
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(dof, x) - u;
    if (f > 0.0) hi = std::min(hi, x); else lo = std::max(lo, x);
    const double pdf = chi2_pdf(dof, x);
    double next = pdf > 0.0 ? x - f / pdf : x;
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * x + 1.0;
    if (std::abs(next - x) <= 1e-14 * std::max(x, 1e-300)) return next;
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------

struct ConfidenceInterval {
  double lower;
  double upper;
  double level;  // 1 - omega

  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
  double length() const noexcept { return upper - lower; }
};

namespace detail {
inline void require_omega(double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw ParameterError("confidence: omega must lie in (0,1)");
}
inline void require_count(std::size_t n) {
  if (n < 1) throw ContractError("confidence: n must be >= 1");
}
}  // namespace detail

// z_{1-omega/2}
inline double two_sided_z(double omega) {
  detail::require_omega(omega);
  return inv_norm_cdf(1.0 - 0.5 * omega);
}

// mean_j ± z_{1-ω/2} sqrt(σ̂_jj / n)
inline ConfidenceInterval ci_coordinate(double mean_j, double sigma_jj, std::size_t n, double omega) {
  detail::require_count(n);
  if (sigma_jj < 0.0) throw ContractError("ci_coordinate: negative variance");
  const double half = two_sided_z(omega) * std::sqrt(sigma_jj / static_cast<double>(n));
  return {mean_j - half, mean_j + half, 1.0 - omega};
}

// v'mean ± z_{1-ω/2} sqrt(v'Σ̂v / n) for a unit direction v.
inline ConfidenceInterval ci_projection(const Vector& mean, const Matrix& sigma, std::size_t n, double omega,
                                        const Vector& v) {
  detail::require_count(n);
  if (mean.dim() != v.dim() || sigma.rows() != v.dim() || sigma.cols() != v.dim())
    throw DimensionError("ci_projection: dimension mismatch");
  if (std::abs(norm2(v) - 1.0) > 1e-10) throw ParameterError("ci_projection: direction must have unit length");
  const double var = quadratic_form(v, sigma, v);
  if (var < 0.0) throw ContractError("ci_projection: negative projected variance");
  const double centre = dot(v, mean);
  const double half = two_sided_z(omega) * std::sqrt(var / static_cast<double>(n));
  return {centre - half, centre + half, 1.0 - omega};
}

// Which chi-square percentile bounds the joint region.
enum class JointQuantile {
  HalfOmega,     // χ²_{d,1-ω/2} (default)
  Conventional,  // χ²_{d,1-ω}
};

struct JointRegion {
  Vector center;
  Matrix scale;
  std::size_t n;
  double threshold;
};

inline JointRegion make_joint_region(Vector center, Matrix scale, std::size_t n, double omega,
                                     JointQuantile rule = JointQuantile::HalfOmega) {
  detail::require_count(n);
  detail::require_omega(omega);
  if (scale.rows() != center.dim() || scale.cols() != center.dim())
    throw DimensionError("make_joint_region: scale shape mismatch");
  if (!is_symmetric(scale, 1e-9)) throw ContractError("make_joint_region: scale must be symmetric");
  const int d = static_cast<int>(center.dim());
  const double u = rule == JointQuantile::HalfOmega ? 1.0 - 0.5 * omega : 1.0 - omega;
  const double thr = chi2_quantile(d, u);
  return {std::move(center), std::move(scale), n, thr};
}

struct Membership {
  bool contained;
  double statistic;
};

// n (center-β)' Σ̂^{-1} (center-β) compared with the region threshold.
inline Membership joint_region_contains(const JointRegion& region, const Vector& beta) {
  if (beta.dim() != region.center.dim()) throw DimensionError("joint_region_contains: dimension mismatch");
  const Vector diff = region.center - beta;
  const Vector w = solve(region.scale, diff);
  const double stat = static_cast<double>(region.n) * dot(diff, w);
  return {stat <= region.threshold, stat};
}

struct CoverageTally {
  double rate;
  double se;
};

template <std::ranges::input_range Range>
CoverageTally coverage_tally(const Range& indicators) {
  std::size_t hits = 0, count = 0;
  for (bool b : indicators) {
    hits += b ? 1 : 0;
    ++count;
  }
  if (count == 0) throw ContractError("coverage_tally: no indicators");
  const double r = static_cast<double>(count);
  const double rate = static_cast<double>(hits) / r;
  return {rate, std::sqrt(rate * (1.0 - rate) / r)};
}

// Same tally from a precomputed mean indicator (e.g. per-coordinate coverage
// averaged over coordinates) over R replications.
inline CoverageTally coverage_from_rate(double rate, std::size_t replications) {
  if (replications == 0) throw ContractError("coverage_from_rate: no replications");
  return {rate, std::sqrt(rate * (1.0 - rate) / static_cast<double>(replications))};
}

}  // namespace dsgd
