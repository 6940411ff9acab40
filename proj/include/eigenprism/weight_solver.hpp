#pragma once

// Weight optimization for the EigenPrism statistic S = sum_i w_i z_i^2.
//
// The min-max program
//
//   minimize   max( sum w_i^2, sum w_i^2 lambda_i^2 )
//   subject to sum w_i = s,  sum w_i lambda_i = l,  w_i = 0 for pinned i
//
// is solved through its scalar dual. For fixed delta in [0,1] the inner
// problem min sum c_i w_i^2 with c_i = delta + (1 - delta) lambda_i^2 has a
// closed form, and its value f(delta) is concave with derivative
// sum w_i^2 - sum w_i^2 lambda_i^2. The maximizing delta yields the primal
// weights.

#include "eigenprism/core_model.hpp"
#include "eigenprism/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace eigenprism {

enum class Target { ThetaSquared, SigmaSquared };

/// Right-hand sides of the two unbiasedness constraints plus pinned indices
/// (0-based).
struct ConstraintSet {
  double sum_target = 0.0;
  double lam_target = 1.0;
  std::vector<Index> forced_zero;

  static ConstraintSet for_target(Target t, std::vector<Index> forced = {}) {
    if (t == Target::ThetaSquared) return {0.0, 1.0, std::move(forced)};
    return {1.0, 0.0, std::move(forced)};
  }

  void validate(Index n) const {
    const bool theta = sum_target == 0.0 && lam_target == 1.0;
    const bool sigma = sum_target == 1.0 && lam_target == 0.0;
    if (!theta && !sigma) {
      throw Error(ErrorCode::InvalidArgument, "constraint targets must be (0,1) or (1,0)");
    }
    for (Index i : forced_zero) {
      if (i < 0 || i >= n) {
        throw Error(ErrorCode::InvalidArgument, "pinned index " + std::to_string(i) + " out of range");
      }
    }
  }
};

enum class SolveMode { MinMax, Quadratic };

struct WeightSolution {
  Vector w;
  /// max(sum w^2, sum w^2 lambda^2) in min-max mode; sum c w^2 in quadratic mode.
  double objective = 0.0;
  /// Dual weight on sum w^2 (min-max mode only, NaN otherwise).
  double delta = std::numeric_limits<double>::quiet_NaN();
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  /// Primal objective minus dual value (min-max mode).
  double duality_gap = 0.0;
  SolveMode mode = SolveMode::MinMax;
};

namespace detail {

struct FreeSystem {
  std::vector<Index> index;
  Vector lambda;
};

inline FreeSystem free_system(const Vector& lambda, const ConstraintSet& cons) {
  cons.validate(lambda.size());
  std::set<Index> pinned(cons.forced_zero.begin(), cons.forced_zero.end());
  FreeSystem fs;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (!pinned.count(i)) fs.index.push_back(i);
  }
  fs.lambda.resize(static_cast<Index>(fs.index.size()));
  for (std::size_t k = 0; k < fs.index.size(); ++k) fs.lambda[static_cast<Index>(k)] = lambda[fs.index[k]];
  if (fs.index.size() < 2) {
    throw Error(ErrorCode::SingularSystem, "fewer than two free weights remain after pinning");
  }
  return fs;
}

struct InnerSolve {
  double value = 0.0;    // sum c w^2
  double sum_w2 = 0.0;   // sum w^2
  double sum_wl2 = 0.0;  // sum w^2 lambda^2
  double mu1 = 0.0;      // w_i = (mu1 + mu2 lambda_i) / (2 c_i)
  double mu2 = 0.0;
};

// Closed-form minimizer of sum c_i w_i^2 under the two linear constraints.
// Works in centered coordinates w_i = (nu1 + nu2 (lambda_i - lbar)) / (2 c_i),
// where lbar is the 1/c-weighted mean of lambda, which decouples the 2x2
// moment system.
template <class CoefFn>
InnerSolve inner_solve(const Vector& lam, CoefFn&& coef, double s, double l, Vector* w_out = nullptr) {
  const Index n = lam.size();
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double h = 0.5 / coef(i);
    a0 += h;
    a1 += h * lam[i];
    a2 += h * lam[i] * lam[i];
  }
  const double lbar = a1 / a0;
  double m2 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = lam[i] - lbar;
    m2 += 0.5 * d * d / coef(i);
  }
  if (!(m2 > 1e-14 * a2) || !std::isfinite(m2)) {
    throw Error(ErrorCode::SingularSystem, "free eigenvalues are effectively constant");
  }
  const double nu1 = s / a0;
  const double nu2 = (l - lbar * s) / m2;

  InnerSolve r;
  r.mu1 = nu1 - nu2 * lbar;
  r.mu2 = nu2;
  if (w_out) w_out->resize(n);
  for (Index i = 0; i < n; ++i) {
    const double wi = (nu1 + nu2 * (lam[i] - lbar)) * 0.5 / coef(i);
    if (w_out) (*w_out)[i] = wi;
    r.sum_w2 += wi * wi;
    r.sum_wl2 += wi * wi * lam[i] * lam[i];
  }
  r.value = 0.5 * (nu1 * nu1 * a0 + nu2 * nu2 * m2);
  return r;
}

inline InnerSolve dual_eval(const Vector& lam, double delta, double s, double l, Vector* w_out = nullptr) {
  return inner_solve(
      lam, [&](Index i) { return delta + (1.0 - delta) * lam[i] * lam[i]; }, s, l, w_out);
}

inline Vector scatter(const FreeSystem& fs, const Vector& w_free, Index n) {
  Vector w = Vector::Zero(n);
  for (std::size_t k = 0; k < fs.index.size(); ++k) w[fs.index[k]] = w_free[static_cast<Index>(k)];
  return w;
}

inline constexpr double kDeltaMin = 1e-10;
inline constexpr int kDualGrid = 1024;

}  // namespace detail

/// Minimize sum c_i w_i^2 subject to the constraints.
inline WeightSolution solve_weighted_quadratic(const Vector& lambda, const Vector& c, const ConstraintSet& cons) {
  if (c.size() != lambda.size()) throw Error(ErrorCode::DimensionMismatch, "c and lambda differ in length");
  auto fs = detail::free_system(lambda, cons);
  Vector c_free(fs.lambda.size());
  for (std::size_t k = 0; k < fs.index.size(); ++k) {
    const double ci = c[fs.index[k]];
    if (!(ci > 0.0) || !std::isfinite(ci)) {
      throw Error(ErrorCode::InvalidArgument, "quadratic weights must be positive on free indices");
    }
    c_free[static_cast<Index>(k)] = ci;
  }
  Vector w_free;
  auto r = detail::inner_solve(
      fs.lambda, [&](Index i) { return c_free[i]; }, cons.sum_target, cons.lam_target, &w_free);
  WeightSolution sol;
  sol.mode = SolveMode::Quadratic;
  sol.w = detail::scatter(fs, w_free, lambda.size());
  sol.objective = r.value;
  sol.kappa1 = -r.mu1;
  sol.kappa2 = -r.mu2;
  return sol;
}

/// Dual function f(delta) of the min-max program.
inline double minmax_dual(const Vector& lambda, const ConstraintSet& cons, double delta) {
  auto fs = detail::free_system(lambda, cons);
  return detail::dual_eval(fs.lambda, delta, cons.sum_target, cons.lam_target).value;
}

/// Solve min max(sum w^2, sum w^2 lambda^2) under the constraints. `grid` is
/// the size of the bracketing grid on the dual interval.
inline WeightSolution solve_minmax(const Vector& lambda, const ConstraintSet& cons, int grid = detail::kDualGrid) {
  if (grid < 3) throw Error(ErrorCode::InvalidArgument, "dual grid needs at least 3 points");
  auto fs = detail::free_system(lambda, cons);
  const double s = cons.sum_target;
  const double l = cons.lam_target;
  const double dmin = detail::kDeltaMin;

  {
    // Singularity does not depend on delta; surface it before the search.
    (void)detail::dual_eval(fs.lambda, 1.0, s, l);
  }

  // Coarse grid on [dmin, 1] brackets the maximizer of the concave dual.
  int best = -1;
  double best_val = -std::numeric_limits<double>::infinity();
  auto grid_pt = [&](int k) { return dmin + (1.0 - dmin) * static_cast<double>(k) / (grid - 1); };
  for (int k = 0; k < grid; ++k) {
    double v;
    try {
      v = detail::dual_eval(fs.lambda, grid_pt(k), s, l).value;
    } catch (const Error&) {
      continue;
    }
    if (std::isfinite(v) && v > best_val) {
      best_val = v;
      best = k;
    }
  }
  if (best < 0) throw Error(ErrorCode::DegenerateDual, "dual function is not finite anywhere on [0,1]");

  double lo = grid_pt(std::max(best - 1, 0));
  double hi = grid_pt(std::min(best + 1, grid - 1));

  // Golden-section refinement of the bracket.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double d) { return detail::dual_eval(fs.lambda, d, s, l).value; };
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-7) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    }
  }
  // Widen by the golden tolerance, then locate the leftmost point where the
  // dual derivative sum w^2 - sum w^2 lambda^2 turns non-positive.
  lo = std::max(dmin, lo - 1e-7);
  hi = std::min(1.0, hi + 1e-7);
  auto slope = [&](double d) {
    auto r = detail::dual_eval(fs.lambda, d, s, l);
    return r.sum_w2 - r.sum_wl2;
  };
  double delta;
  if (slope(lo) <= 0.0) {
    delta = lo;
  } else if (slope(hi) > 0.0) {
    delta = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (slope(mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    auto rl = detail::dual_eval(fs.lambda, lo, s, l);
    auto rh = detail::dual_eval(fs.lambda, hi, s, l);
    delta = std::max(rl.sum_w2, rl.sum_wl2) <= std::max(rh.sum_w2, rh.sum_wl2) ? lo : hi;
  }

  Vector w_free;
  auto r = detail::dual_eval(fs.lambda, delta, s, l, &w_free);
  WeightSolution sol;
  sol.mode = SolveMode::MinMax;
  sol.w = detail::scatter(fs, w_free, lambda.size());
  sol.objective = std::max(r.sum_w2, r.sum_wl2);
  sol.delta = delta;
  sol.kappa1 = -r.mu1;
  sol.kappa2 = -r.mu2;
  sol.duality_gap = sol.objective - r.value;
  return sol;
}

namespace detail {

inline double constraint_violation(const Vector& lambda, const Vector& w, const ConstraintSet& cons) {
  double r = std::abs(w.sum() - cons.sum_target) + std::abs(w.dot(lambda) - cons.lam_target);
  for (Index i : cons.forced_zero) r += std::abs(w[i]);
  return r;
}

}  // namespace detail

/// KKT residual of a min-max solution: worst stationarity violation over free
/// indices, plus equality and pinning violations, plus complementary
/// slackness of the two epigraph constraints.
inline double kkt_residual(const Vector& lambda, const WeightSolution& sol, const ConstraintSet& cons) {
  if (sol.w.size() != lambda.size()) throw Error(ErrorCode::DimensionMismatch, "solution length differs from lambda");
  const std::set<Index> pinned(cons.forced_zero.begin(), cons.forced_zero.end());
  const double d1 = sol.delta;
  const double d2 = 1.0 - d1;
  double stat = 0.0;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (pinned.count(i)) continue;
    const double li = lambda[i];
    stat = std::max(stat, std::abs(sol.w[i] * (2.0 * d1 + 2.0 * d2 * li * li) + sol.kappa1 + sol.kappa2 * li));
  }
  const double q1 = sol.w.squaredNorm();
  const double q2 = sol.w.cwiseProduct(lambda).squaredNorm();
  const double t = std::max(q1, q2);
  const double slack = d1 * (t - q1) + d2 * (t - q2);
  return stat + detail::constraint_violation(lambda, sol.w, cons) + std::abs(slack);
}

/// KKT residual of a weighted-quadratic solution.
inline double kkt_residual(const Vector& lambda, const Vector& c, const WeightSolution& sol, const ConstraintSet& cons) {
  const std::set<Index> pinned(cons.forced_zero.begin(), cons.forced_zero.end());
  double stat = 0.0;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (pinned.count(i)) continue;
    stat = std::max(stat, std::abs(2.0 * c[i] * sol.w[i] + sol.kappa1 + sol.kappa2 * lambda[i]));
  }
  return stat + detail::constraint_violation(lambda, sol.w, cons);
}

}  // namespace eigenprism
