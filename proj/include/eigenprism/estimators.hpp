#pragma once

// Interval estimators for the signal magnitude, the noise level, the
// signal-to-noise ratio and the l2 error of an external coefficient estimate.

#include "eigenprism/core_model.hpp"
#include "eigenprism/distributions.hpp"
#include "eigenprism/error.hpp"
#include "eigenprism/weight_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace eigenprism {

enum class Estimand { ThetaSquared, SigmaSquared, SNR, RegressionErrorL2 };

constexpr std::string_view to_string(Estimand e) noexcept {
  switch (e) {
    case Estimand::ThetaSquared: return "theta2";
    case Estimand::SigmaSquared: return "sigma2";
    case Estimand::SNR: return "snr";
    case Estimand::RegressionErrorL2: return "error";
  }
  return "unknown";
}

struct SolverDiagnostics {
  double objective = 0.0;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
  /// Plug-in signal fraction used by the 2-step refinement.
  std::optional<double> rho_hat;
};

struct IntervalEstimate {
  Estimand estimand = Estimand::ThetaSquared;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  double sd_bound = 0.0;
  bool clipped_lower = false;
  bool clipped_upper = false;
  /// Statistic before clipping into the admissible range.
  double raw_point = 0.0;
  /// Set when a 2-step request fell back to the standard interval.
  bool two_step_fallback = false;
  std::optional<SolverDiagnostics> solver;

  double width() const noexcept { return upper - lower; }
  bool covers(double truth) const noexcept { return lower <= truth && truth <= upper; }
};

struct EigenPrismOptions {
  /// Pin the weights of the K largest eigenvalues to zero.
  Index zero_first = 0;
  /// Pin the last weight when the smallest eigenvalue is exactly zero.
  bool zero_last_if_null = true;
  double alpha = 0.05;
  bool two_step = false;
};

namespace detail {

inline IntervalEstimate make_interval(Estimand e, double alpha, double raw, double lo_raw, double hi_raw, double sd,
                                      double lo_adm, double hi_adm) {
  IntervalEstimate out;
  out.estimand = e;
  out.alpha = alpha;
  out.raw_point = raw;
  out.sd_bound = sd;
  out.point = std::clamp(raw, lo_adm, hi_adm);
  out.lower = std::clamp(lo_raw, lo_adm, hi_adm);
  out.upper = std::clamp(hi_raw, lo_adm, hi_adm);
  out.clipped_lower = out.lower != lo_raw;
  out.clipped_upper = out.upper != hi_raw;
  return out;
}

inline ConstraintSet build_constraints(const DesignSpectrum& spec, Target target, const EigenPrismOptions& opts) {
  const Index n = spec.lambda.size();
  if (opts.zero_first < 0 || opts.zero_first + 2 > n) {
    throw Error(ErrorCode::InvalidArgument, "zero_first + 2 must not exceed n");
  }
  std::vector<Index> pinned;
  for (Index i = 0; i < opts.zero_first; ++i) pinned.push_back(i);
  if (opts.zero_last_if_null && spec.lambda[n - 1] == 0.0 && opts.zero_first < n) {
    if (pinned.empty() || pinned.back() != n - 1) pinned.push_back(n - 1);
  }
  return ConstraintSet::for_target(target, std::move(pinned));
}

inline double weighted_sum_sq(const Vector& w, const Vector& z) { return w.dot(z.cwiseAbs2()); }

inline void check_spectrum(const DesignSpectrum& spec) {
  if (spec.lambda.size() != spec.z.size() || spec.lambda.size() != spec.n || spec.n < 1) {
    throw Error(ErrorCode::DimensionMismatch, "inconsistent design spectrum");
  }
}

inline Estimand to_estimand(Target t) { return t == Target::ThetaSquared ? Estimand::ThetaSquared : Estimand::SigmaSquared; }

inline IntervalEstimate standard_estimate(const DesignSpectrum& spec, Target target, const EigenPrismOptions& opts) {
  check_spectrum(spec);
  detail::check_alpha(opts.alpha);
  const auto cons = build_constraints(spec, target, opts);
  const auto sol = solve_minmax(spec.lambda, cons);
  const double raw = weighted_sum_sq(sol.w, spec.z);
  const double sd = std::sqrt(2.0 * sol.objective) * spec.response_scale();
  const double zc = dist::normal_critical(opts.alpha);
  auto out = make_interval(to_estimand(target), opts.alpha, raw, raw - zc * sd, raw + zc * sd, sd, 0.0,
                           std::numeric_limits<double>::infinity());
  SolverDiagnostics diag;
  diag.objective = sol.objective;
  diag.delta = sol.delta;
  diag.kappa1 = sol.kappa1;
  diag.kappa2 = sol.kappa2;
  diag.duality_gap = sol.duality_gap;
  diag.kkt_residual = kkt_residual(spec.lambda, sol, cons);
  out.solver = diag;
  return out;
}

}  // namespace detail

/// Weights for the 2-step refinement: minimize sum w_i^2 (lambda_i rho + 1 - rho)^2.
inline WeightSolution two_step_weights(const Vector& lambda, double rho, const ConstraintSet& cons) {
  Vector c(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i) {
    const double a = lambda[i] * rho + 1.0 - rho;
    c[i] = std::max(a * a, 1e-12);
  }
  return solve_weighted_quadratic(lambda, c, cons);
}

/// 2-step interval: plug the first-pass signal fraction into the
/// rho-dependent variance bound and re-optimize the weights.
inline IntervalEstimate two_step_interval(const DesignSpectrum& spec, Target target, const EigenPrismOptions& opts) {
  auto first = detail::standard_estimate(spec, target, opts);
  if (first.width() <= 0.0) {
    first.two_step_fallback = true;
    return first;
  }
  const auto theta = target == Target::ThetaSquared ? first : detail::standard_estimate(spec, Target::ThetaSquared, opts);
  const double scale = spec.response_scale();
  const double rho = scale > 0.0 ? std::clamp(theta.raw_point / scale, 0.0, 1.0) : 0.0;

  const auto cons = detail::build_constraints(spec, target, opts);
  const auto sol = two_step_weights(spec.lambda, rho, cons);
  const double raw = detail::weighted_sum_sq(sol.w, spec.z);
  const double sd = std::sqrt(2.0) * scale * std::sqrt(sol.objective);
  const double zc = dist::normal_critical(opts.alpha);
  auto out = detail::make_interval(detail::to_estimand(target), opts.alpha, raw, raw - zc * sd, raw + zc * sd, sd,
                                   0.0, std::numeric_limits<double>::infinity());
  SolverDiagnostics diag;
  diag.objective = sol.objective;
  diag.kappa1 = sol.kappa1;
  diag.kappa2 = sol.kappa2;
  Vector c(spec.lambda.size());
  for (Index i = 0; i < c.size(); ++i) {
    const double a = spec.lambda[i] * rho + 1.0 - rho;
    c[i] = std::max(a * a, 1e-12);
  }
  diag.kkt_residual = kkt_residual(spec.lambda, c, sol, cons);
  diag.rho_hat = rho;
  out.solver = diag;
  return out;
}

/// EigenPrism interval for theta^2 (T2) or sigma^2 (T3).
inline IntervalEstimate eigenprism_estimate(const DesignSpectrum& spec, Target target,
                                            const EigenPrismOptions& opts = {}) {
  if (opts.two_step) return two_step_interval(spec, target, opts);
  return detail::standard_estimate(spec, target, opts);
}

/// Interval for theta^2 / (theta^2 + sigma^2), clamped to [0,1].
inline IntervalEstimate snr_interval(const DesignSpectrum& spec, const EigenPrismOptions& opts = {}) {
  if (!(spec.y_sq_norm > 0.0)) throw Error(ErrorCode::ZeroResponse, "response has zero norm");
  const auto theta = eigenprism_estimate(spec, Target::ThetaSquared, opts);
  const double scale = spec.response_scale();
  const double zc = dist::normal_critical(opts.alpha);
  const double raw = theta.raw_point / scale;
  const double sd = theta.sd_bound / scale;
  auto out = detail::make_interval(Estimand::SNR, opts.alpha, raw, raw - zc * sd, raw + zc * sd, sd, 0.0, 1.0);
  out.two_step_fallback = theta.two_step_fallback;
  out.solver = theta.solver;
  return out;
}

/// Interval for ||beta - beta_hat||_2 (restricted to `subset` when given, and
/// Sigma-weighted when `cov` is explicit) from a holdout sample that played
/// no part in fitting beta_hat.
inline IntervalEstimate regression_error_interval(const Dataset& holdout, const Vector& beta_hat,
                                                  const std::optional<std::vector<Index>>& subset = std::nullopt,
                                                  const CovarianceSpec& cov = CovarianceSpec::identity(),
                                                  const EigenPrismOptions& opts = {}) {
  if (beta_hat.size() != holdout.p()) {
    throw Error(ErrorCode::DimensionMismatch, "beta_hat has length " + std::to_string(beta_hat.size()) +
                                                  " but p=" + std::to_string(holdout.p()));
  }
  const Vector resid = holdout.y() - holdout.X() * beta_hat;
  Dataset design = holdout.with_response(resid);
  if (subset) {
    std::set<Index> uniq(subset->begin(), subset->end());
    if (uniq.size() != subset->size() || subset->empty()) {
      throw Error(ErrorCode::InvalidArgument, "subset must be a nonempty set of distinct indices");
    }
    design = design.select_columns(*subset);
  }
  design = whiten(design, cov);
  SpectralOptions sopts;
  sopts.allow_wide = subset.has_value();
  const auto spec = spectral_decompose(design, sopts);
  const auto theta = eigenprism_estimate(spec, Target::ThetaSquared, opts);

  IntervalEstimate out = theta;
  out.estimand = Estimand::RegressionErrorL2;
  const double zc = dist::normal_critical(opts.alpha);
  const double lo_raw = theta.raw_point - zc * theta.sd_bound;
  const double hi_raw = theta.raw_point + zc * theta.sd_bound;
  out.point = std::sqrt(std::max(theta.raw_point, 0.0));
  out.lower = std::sqrt(std::max(lo_raw, 0.0));
  out.upper = std::sqrt(std::max(hi_raw, 0.0));
  out.clipped_lower = lo_raw < 0.0;
  out.clipped_upper = hi_raw < 0.0;
  return out;
}

/// Exact chi-square interval for theta^2 when sigma^2 is known.
inline IntervalEstimate t1_interval(const Vector& y, double sigma2, double alpha) {
  detail::check_alpha(alpha);
  if (y.size() < 1) throw Error(ErrorCode::DimensionError, "need n >= 1");
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be non-negative");
  const double n = static_cast<double>(y.size());
  const double ss = y.squaredNorm();
  const double q_hi = dist::chi2_quantile(n, 1.0 - 0.5 * alpha);
  const double q_lo = dist::chi2_quantile(n, 0.5 * alpha);
  const double sd = std::sqrt(2.0 / n) * ss / n;
  return detail::make_interval(Estimand::ThetaSquared, alpha, ss / n - sigma2, ss / q_hi - sigma2, ss / q_lo - sigma2,
                               sd, 0.0, std::numeric_limits<double>::infinity());
}

/// Bias-corrected and accelerated bootstrap interval for T1 = ||y||^2/n - sigma^2,
/// resampling the entries of y.
inline IntervalEstimate bootstrap_t1_interval(const Vector& y, double sigma2, double alpha, Index B,
                                              std::uint64_t seed) {
  detail::check_alpha(alpha);
  if (B < 1000) throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 1000");
  const Index n = y.size();
  if (n < 2) throw Error(ErrorCode::DimensionError, "bootstrap needs n >= 2");
  const Vector y2 = y.cwiseAbs2();
  const double total = y2.sum();
  const double nd = static_cast<double>(n);
  const double stat = total / nd - sigma2;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<double> reps(static_cast<std::size_t>(B));
  for (auto& r : reps) {
    double acc = 0.0;
    for (Index k = 0; k < n; ++k) acc += y2[pick(rng)];
    r = acc / nd - sigma2;
  }
  std::sort(reps.begin(), reps.end());
  if (reps.front() == reps.back()) {
    throw Error(ErrorCode::DegenerateBootstrap, "all bootstrap statistics are identical");
  }

  double below = 0.0;
  for (double r : reps) {
    if (r < stat) below += 1.0;
    else if (r == stat) below += 0.5;
  }
  const double bd = static_cast<double>(B);
  const double prop = std::clamp(below / bd, 0.5 / bd, 1.0 - 0.5 / bd);
  const double z0 = dist::normal_quantile(prop);

  // Jackknife acceleration; leave-one-out statistic is (total - y_i^2)/(n-1).
  double jmean = 0.0;
  Vector jack(n);
  for (Index i = 0; i < n; ++i) {
    jack[i] = (total - y2[i]) / (nd - 1.0);
    jmean += jack[i];
  }
  jmean /= nd;
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = jmean - jack[i];
    num += d * d * d;
    den += d * d;
  }
  const double accel = den > 0.0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

  auto adjusted = [&](double q) {
    const double zq = dist::normal_quantile(q);
    return dist::normal_cdf(z0 + (z0 + zq) / (1.0 - accel * (z0 + zq)));
  };
  auto quantile = [&](double q) {
    const double pos = std::clamp(q, 0.0, 1.0) * (bd - 1.0);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(k);
    if (k + 1 >= reps.size()) return reps.back();
    return reps[k] + frac * (reps[k + 1] - reps[k]);
  };
  const double lo = quantile(adjusted(0.5 * alpha));
  const double hi = quantile(adjusted(1.0 - 0.5 * alpha));

  double mean = 0.0;
  for (double r : reps) mean += r;
  mean /= bd;
  double var = 0.0;
  for (double r : reps) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / (bd - 1.0));

  return detail::make_interval(Estimand::ThetaSquared, alpha, stat, lo, hi, sd, 0.0,
                               std::numeric_limits<double>::infinity());
}

/// Var(sum w_i z_i^2 | d) under Gaussian design and noise.
inline double exact_conditional_variance(const Vector& w, const Vector& lambda, double theta2, double sigma2, Index p) {
  if (w.size() != lambda.size()) throw Error(ErrorCode::DimensionMismatch, "w and lambda differ in length");
  if (p < 1) throw Error(ErrorCode::InvalidArgument, "p must be positive");
  const double pd = static_cast<double>(p);
  const Vector w2 = w.cwiseAbs2();
  const double s_w2 = w2.sum();
  const double s_w2l = w2.dot(lambda);
  const double s_w2l2 = w2.dot(lambda.cwiseAbs2());
  const double s_wl = w.dot(lambda);
  return 2.0 * sigma2 * sigma2 * s_w2 + 4.0 * sigma2 * theta2 * s_w2l +
         2.0 * theta2 * theta2 * (pd / (pd + 2.0) * s_w2l2 - s_wl * s_wl / (pd + 2.0));
}

}  // namespace eigenprism
