#pragma once

// Data containers and the transformations that take a raw (X, y) pair into
// the rotated eigen-coordinates consumed by every estimator.

#include "eigenprism/detail/tridiagonal_ql.hpp"
#include "eigenprism/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace eigenprism {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Observed design and response. Rows of X are observations.
class Dataset {
 public:
  Dataset(Matrix X, Vector y) : X_(std::move(X)), y_(std::move(y)) {
    if (X_.rows() != y_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X_.rows()) +
                                                    " rows but y has length " + std::to_string(y_.size()));
    }
    if (X_.rows() < 1 || X_.cols() < 1) {
      throw Error(ErrorCode::DimensionError, "dataset needs n >= 1 and p >= 1");
    }
    if (!X_.allFinite() || !y_.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "dataset contains non-finite entries");
    }
  }

  const Matrix& X() const noexcept { return X_; }
  const Vector& y() const noexcept { return y_; }
  Index n() const noexcept { return X_.rows(); }
  Index p() const noexcept { return X_.cols(); }

  Dataset select_rows(std::span<const Index> rows) const {
    Matrix X(static_cast<Index>(rows.size()), p());
    Vector y(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      X.row(static_cast<Index>(k)) = X_.row(rows[k]);
      y[static_cast<Index>(k)] = y_[rows[k]];
    }
    return Dataset(std::move(X), std::move(y));
  }

  Dataset select_columns(std::span<const Index> cols) const {
    Matrix X(n(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] < 0 || cols[k] >= p()) {
        throw Error(ErrorCode::DimensionMismatch, "column index " + std::to_string(cols[k]) + " out of range");
      }
      X.col(static_cast<Index>(k)) = X_.col(cols[k]);
    }
    return Dataset(std::move(X), y_);
  }

  Dataset with_response(Vector y) const { return Dataset(X_, std::move(y)); }

 private:
  Matrix X_;
  Vector y_;
};

/// Known column covariance of the design: either the identity or an explicit
/// symmetric positive definite matrix.
class CovarianceSpec {
 public:
  static CovarianceSpec identity() { return CovarianceSpec(); }

  static CovarianceSpec explicit_matrix(Matrix sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
      throw Error(ErrorCode::DimensionMismatch, "covariance must be square and nonempty");
    }
    if (!sigma.allFinite()) throw Error(ErrorCode::NotPositiveDefinite, "covariance has non-finite entries");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw Error(ErrorCode::NotPositiveDefinite, "covariance is not symmetric");
    }
    Matrix sym = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    const double min_eig = es.eigenvalues().minCoeff();
    const double max_eig = es.eigenvalues().maxCoeff();
    if (!(min_eig > 1e-12 * std::max(1.0, max_eig))) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "smallest eigenvalue " + std::to_string(min_eig) + " is not positive");
    }
    CovarianceSpec out;
    out.sigma_ = std::move(sym);
    out.inv_sqrt_ = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
    return out;
  }

  bool is_identity() const noexcept { return !sigma_.has_value(); }
  Index dimension() const noexcept { return sigma_ ? sigma_->rows() : 0; }

  const Matrix& matrix() const {
    if (!sigma_) throw Error(ErrorCode::InvalidArgument, "identity covariance has no stored matrix");
    return *sigma_;
  }

  /// Symmetric inverse square root.
  const Matrix& inverse_sqrt() const {
    if (!inv_sqrt_) throw Error(ErrorCode::InvalidArgument, "identity covariance has no stored matrix");
    return *inv_sqrt_;
  }

  /// ||Sigma^{1/2} b||^2.
  double weighted_sq_norm(const Vector& b) const {
    if (!sigma_) return b.squaredNorm();
    if (b.size() != sigma_->rows()) throw Error(ErrorCode::DimensionMismatch, "vector length does not match covariance");
    return b.dot(*sigma_ * b);
  }

 private:
  CovarianceSpec() = default;
  std::optional<Matrix> sigma_;
  std::optional<Matrix> inv_sqrt_;
};

/// Eigenvalues of XX^T/p (non-increasing) and the rotated response z = U^T y.
struct DesignSpectrum {
  Vector lambda;
  Vector z;
  Index n = 0;
  Index p = 0;
  double y_sq_norm = 0.0;
  /// Left singular vectors, only kept when requested.
  std::optional<Matrix> U;

  double response_scale() const { return y_sq_norm / static_cast<double>(n); }
};

struct SpectralOptions {
  bool keep_vectors = false;
  /// Permit n > p. The trailing n - p eigenvalues are then zero. Only used
  /// internally for column subsets narrower than the sample.
  bool allow_wide = false;
};

namespace detail {

inline void clamp_and_sort(Vector& eig, Vector& proj, Matrix* vectors) {
  const Index n = eig.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return eig[a] > eig[b]; });
  Vector e2(n), p2(n);
  Matrix v2;
  if (vectors) v2.resize(vectors->rows(), n);
  for (Index k = 0; k < n; ++k) {
    e2[k] = eig[order[static_cast<std::size_t>(k)]];
    p2[k] = proj[order[static_cast<std::size_t>(k)]];
    if (vectors) v2.col(k) = vectors->col(order[static_cast<std::size_t>(k)]);
  }
  const double floor = 1e-12 * std::max(e2[0], 0.0);
  for (Index k = 0; k < n; ++k) {
    if (e2[k] < floor) e2[k] = 0.0;
  }
  eig = std::move(e2);
  proj = std::move(p2);
  if (vectors) *vectors = std::move(v2);
}

}  // namespace detail

/// SVD reduction through the n x n Gram matrix XX^T.
inline DesignSpectrum spectral_decompose(const Dataset& data, const SpectralOptions& opts = {}) {
  const Index n = data.n();
  const Index p = data.p();
  if (n > p && !opts.allow_wide) {
    throw Error(ErrorCode::DimensionError,
                "need n <= p, got n=" + std::to_string(n) + " p=" + std::to_string(p));
  }
  Matrix gram = Matrix::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(data.X());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  DesignSpectrum out;
  out.n = n;
  out.p = p;
  out.y_sq_norm = data.y().squaredNorm();

  Vector eig;
  Vector proj;
  if (opts.keep_vectors) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "eigendecomposition did not converge");
    Matrix U = es.eigenvectors();
    for (Index k = 0; k < n; ++k) {
      Index arg = 0;
      U.col(k).cwiseAbs().maxCoeff(&arg);
      if (U(arg, k) < 0.0) U.col(k) = -U.col(k);
    }
    eig = es.eigenvalues();
    proj = U.transpose() * data.y();
    detail::clamp_and_sort(eig, proj, &U);
    out.U = std::move(U);
  } else {
    Eigen::Tridiagonalization<Matrix> tri(gram);
    eig = tri.diagonal();
    Vector off = Vector::Zero(n);
    if (n > 1) off.head(n - 1) = tri.subDiagonal();
    proj = tri.matrixQ().adjoint() * data.y();
    if (!detail::tridiagonal_ql_project(eig, off, proj)) {
      throw Error(ErrorCode::SingularSystem, "tridiagonal QL iteration did not converge");
    }
    detail::clamp_and_sort(eig, proj, nullptr);
  }
  out.lambda = eig / static_cast<double>(p);
  out.z = std::move(proj);
  return out;
}

/// Center each column and scale to unit sample variance (divisor n - 1).
inline Dataset standardize_columns(const Dataset& data) {
  const Index n = data.n();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "standardization needs at least two rows");
  Matrix X = data.X();
  for (Index j = 0; j < X.cols(); ++j) {
    auto col = X.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double var = col.squaredNorm() / static_cast<double>(n - 1);
    const double scale = std::max(std::abs(mean), data.X().col(j).cwiseAbs().maxCoeff());
    if (!(var > 0.0) || std::sqrt(var) <= 1e-14 * scale) {
      throw Error(ErrorCode::ConstantColumn, "column " + std::to_string(j) + " has zero variance");
    }
    col /= std::sqrt(var);
  }
  return Dataset(std::move(X), data.y());
}

/// Right-multiply the design by Sigma^{-1/2}.
inline Dataset whiten(const Dataset& data, const CovarianceSpec& cov) {
  if (cov.is_identity()) return data;
  if (cov.dimension() != data.p()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance is " + std::to_string(cov.dimension()) +
                                                  "x" + std::to_string(cov.dimension()) + " but p=" +
                                                  std::to_string(data.p()));
  }
  return Dataset(data.X() * cov.inverse_sqrt(), data.y());
}

/// Random disjoint row partition. The first part receives round(fraction*n)
/// rows with halves rounded up; row order inside each part is preserved.
inline std::pair<Dataset, Dataset> split_sample(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "split fraction must lie in (0,1)");
  }
  const Index n = data.n();
  const auto first = static_cast<Index>(std::floor(fraction * static_cast<double>(n) + 0.5));
  if (first <= 0 || first >= n) {
    throw Error(ErrorCode::EmptySplit, "split of n=" + std::to_string(n) + " at fraction " +
                                           std::to_string(fraction) + " leaves an empty part");
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Index> a(perm.begin(), perm.begin() + first);
  std::vector<Index> b(perm.begin() + first, perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {data.select_rows(a), data.select_rows(b)};
}

}  // namespace eigenprism
