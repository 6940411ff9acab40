#pragma once

// Marchenko-Pastur law for the spectrum of XX^T/p with i.i.d. unit-variance
// entries and aspect ratio gamma = n/p < 1 (unit mean).

#include "eigenprism/core_model.hpp"
#include "eigenprism/error.hpp"
#include "eigenprism/weight_solver.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace eigenprism {

struct MPModel {
  double gamma = 0.0;
  double support_lo = 0.0;
  double support_hi = 0.0;
  double median = 0.0;
  /// E[Y (1{Y >= M} - 1{Y < M})].
  double A = 0.0;
  /// E[Y^2].
  double B = 0.0;

  double sd() const { return std::sqrt(B - 1.0); }
};

namespace detail {

inline void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::InvalidGamma, "gamma must lie in (0,1), got " + std::to_string(gamma));
  }
}

inline constexpr double kMpTol = 1e-13;

// With x = m + h cos(phi) the square-root edges vanish:
// pdf(x) dx = h^2 sin^2(phi) / (2 pi gamma x) dphi, smooth on [0, pi].
// Integrates x^k * pdf over x in [lo, t], i.e. phi in [phi(t), pi].
inline double mp_moment_below(double gamma, double t, int k) {
  const double m = 1.0 + gamma;
  const double h = 2.0 * std::sqrt(gamma);
  const double lo = m - h;
  const double hi = m + h;
  if (t <= lo) return 0.0;
  const double phi0 = t >= hi ? 0.0 : std::acos(std::clamp((t - m) / h, -1.0, 1.0));
  auto f = [&](double phi) {
    const double s = std::sin(phi);
    const double x = m + h * std::cos(phi);
    return h * h * s * s * std::pow(x, k - 1) / (2.0 * std::numbers::pi * gamma);
  };
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, phi0, std::numbers::pi, 15, kMpTol);
}

}  // namespace detail

inline double mp_pdf(double gamma, double x) {
  detail::check_gamma(gamma);
  const double lo = std::pow(1.0 - std::sqrt(gamma), 2);
  const double hi = std::pow(1.0 + std::sqrt(gamma), 2);
  if (x <= lo || x >= hi) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * gamma * x);
}

inline double mp_cdf(double gamma, double x) {
  detail::check_gamma(gamma);
  return detail::mp_moment_below(gamma, x, 0);
}

/// E[Y^k 1{Y <= t}]; t = +inf gives the raw moment.
inline double mp_partial_moment(double gamma, double t, int k) {
  detail::check_gamma(gamma);
  return detail::mp_moment_below(gamma, t, k);
}

inline double mp_quantile(double gamma, double q) {
  detail::check_gamma(gamma);
  const double lo = std::pow(1.0 - std::sqrt(gamma), 2);
  const double hi = std::pow(1.0 + std::sqrt(gamma), 2);
  if (q <= 0.0) return lo;
  if (q >= 1.0) return hi;
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve([&](double x) { return detail::mp_moment_below(gamma, x, 0) - q; }, lo,
                                             hi, -q, 1.0 - q, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

inline MPModel mp_model(double gamma) {
  detail::check_gamma(gamma);
  MPModel out;
  out.gamma = gamma;
  out.support_lo = std::pow(1.0 - std::sqrt(gamma), 2);
  out.support_hi = std::pow(1.0 + std::sqrt(gamma), 2);
  out.median = mp_quantile(gamma, 0.5);
  const double below = detail::mp_moment_below(gamma, out.median, 1);
  const double mean = detail::mp_moment_below(gamma, out.support_hi, 1);
  out.A = mean - 2.0 * below;
  out.B = detail::mp_moment_below(gamma, out.support_hi, 2);
  return out;
}

/// Closed-form asymptotic bound on the width ratio of EigenPrism to the
/// known-noise chi-square interval.
inline double are_upper_bound(double gamma) {
  const MPModel m = mp_model(gamma);
  return std::sqrt(2.0) * std::max(1.0 / m.A, std::sqrt(m.B) / m.A);
}

/// Lower bound on the summed type I and type II error of any test between
/// rho = 0 and rho = 1/2. Requires sum(lambda) = n.
inline double indistinguishability_bound(const Vector& lambda, Index n, Index p) {
  if (lambda.size() != n) throw Error(ErrorCode::DimensionMismatch, "lambda must have length n");
  if (p < n) throw Error(ErrorCode::DimensionError, "need p >= n");
  const double sum = lambda.sum();
  if (std::abs(sum - static_cast<double>(n)) > 1e-6) {
    throw Error(ErrorCode::NormalizationError, "sum(lambda) = " + std::to_string(sum) + " but n = " + std::to_string(n));
  }
  const double dev = (lambda.array() - 1.0).square().sum();
  const double ratio = static_cast<double>(n) / static_cast<double>(p);
  const double b = 1.0 - (std::sqrt(dev / 8.0) + std::sqrt(ratio / (4.0 * std::numbers::pi)));
  return std::max(b, 0.0);
}

/// Deterministic n-point MP spectrum at the mid-quantiles (i - 1/2)/n, sorted
/// non-increasing.
inline Vector mp_quantile_spectrum(double gamma, Index n) {
  detail::check_gamma(gamma);
  Vector lam(n);
  for (Index i = 0; i < n; ++i) {
    lam[n - 1 - i] = mp_quantile(gamma, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  }
  return lam;
}

struct AREPoint {
  double gamma = 0.0;
  double bound = 0.0;
  /// sqrt(n * val(P1)) on an MP spectrum: finite-n width ratio.
  double minmax_ratio = 0.0;
};

inline AREPoint are_point(double gamma, Index n = 1000) {
  AREPoint pt;
  pt.gamma = gamma;
  pt.bound = are_upper_bound(gamma);
  const Vector lam = mp_quantile_spectrum(gamma, n);
  const auto sol = solve_minmax(lam, ConstraintSet::for_target(Target::ThetaSquared));
  pt.minmax_ratio = std::sqrt(static_cast<double>(n) * sol.objective);
  return pt;
}

inline std::vector<AREPoint> are_curve(const std::vector<double>& gammas, Index n = 1000) {
  std::vector<AREPoint> out;
  out.reserve(gammas.size());
  for (double g : gammas) out.push_back(are_point(g, n));
  return out;
}

}  // namespace eigenprism
