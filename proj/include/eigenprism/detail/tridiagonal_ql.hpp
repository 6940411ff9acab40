#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace eigenprism::detail {

// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
//
// `diag` holds the diagonal, `off` the off-diagonal with off[i] coupling rows
// i and i+1 (off has the same length as diag; the last entry is ignored).
// Every plane rotation that the eigenvector accumulation would apply to the
// columns of the basis is instead applied to `v`, so on exit `v` holds the
// coordinates of the input vector in the eigenbasis. This avoids forming the
// n x n eigenvector matrix when only one projection is needed.
inline bool tridiagonal_ql_project(Eigen::VectorXd& diag, Eigen::VectorXd& off, Eigen::VectorXd& v,
                                   int max_sweeps = 64) {
  const Eigen::Index n = diag.size();
  if (n <= 1) return true;
  off[n - 1] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  // Absolute floor so that tiny couplings between (near-)zero diagonal entries
  // of rank-deficient inputs still deflate; the perturbation is eps * ||T||.
  const double tnorm = diag.cwiseAbs().maxCoeff() + 2.0 * off.head(n - 1).cwiseAbs().maxCoeff();

  for (Eigen::Index l = 0; l < n; ++l) {
    int iter = 0;
    for (;;) {
      Eigen::Index m = l;
      for (; m < n - 1; ++m) {
        const double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(off[m]) <= eps * dd || std::abs(off[m]) <= eps * tnorm) break;
      }
      if (m == l) break;
      if (++iter > max_sweeps) return false;

      double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
      double r = std::hypot(g, 1.0);
      g = diag[m] - diag[l] + off[l] / (g + std::copysign(r, g));
      double s = 1.0;
      double c = 1.0;
      double p = 0.0;
      bool deflated = false;
      for (Eigen::Index i = m - 1; i >= l; --i) {
        const double f = s * off[i];
        const double b = c * off[i];
        r = std::hypot(f, g);
        off[i + 1] = r;
        if (r == 0.0) {
          diag[i + 1] -= p;
          off[m] = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = diag[i + 1] - p;
        r = (diag[i] - g) * s + 2.0 * c * b;
        p = s * r;
        diag[i + 1] = g + p;
        g = c * r - b;

        const double vi1 = v[i + 1];
        v[i + 1] = s * v[i] + c * vi1;
        v[i] = c * v[i] - s * vi1;
      }
      if (deflated) continue;
      diag[l] -= p;
      off[l] = g;
      off[m] = 0.0;
    }
  }
  return true;
}

}  // namespace eigenprism::detail
