#pragma once

// Monte-Carlo harness: design and coefficient generators, a parallel trial
// runner with per-trial random streams, and coverage aggregation.

#include "eigenprism/core_model.hpp"
#include "eigenprism/distributions.hpp"
#include "eigenprism/error.hpp"
#include "eigenprism/estimators.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace eigenprism {

enum class DesignFamily { GaussianIID, BernoulliIID, StudentT, CorrelatedGaussian };
enum class CorrelationKind { Dense, Sparse };

struct DesignSpec {
  DesignFamily family = DesignFamily::GaussianIID;
  /// Success probability for Bernoulli, degrees of freedom for Student t.
  double param = 0.0;
  CorrelationKind corr = CorrelationKind::Dense;
  /// Off-diagonal value r (dense) or magnitude P (sparse).
  double corr_param = 0.0;

  static DesignSpec gaussian() { return {}; }
  static DesignSpec bernoulli(double q) { return {DesignFamily::BernoulliIID, q, CorrelationKind::Dense, 0.0}; }
  static DesignSpec student_t(double df) { return {DesignFamily::StudentT, df, CorrelationKind::Dense, 0.0}; }
  static DesignSpec dense_correlated(double r) {
    return {DesignFamily::CorrelatedGaussian, 0.0, CorrelationKind::Dense, r};
  }
  static DesignSpec sparse_correlated(double P) {
    return {DesignFamily::CorrelatedGaussian, 0.0, CorrelationKind::Sparse, P};
  }
};

struct BetaSpec {
  /// 1 gives a dense direction; smaller values keep ceil(f*p) coordinates.
  double fraction_nonzero = 1.0;

  static BetaSpec dense() { return {}; }
  static BetaSpec sparse(double f) { return {f}; }
  bool is_sparse() const { return fraction_nonzero < 1.0; }
};

struct NoiseSpec {
  /// 0 means Gaussian; otherwise Student t with this many degrees of freedom,
  /// rescaled to variance sigma2.
  double t_df = 0.0;
};

enum class Method { EigenPrism, ExactT1, BootstrapT1 };

struct SimulationScenario {
  Index n = 100;
  Index p = 500;
  DesignSpec design;
  BetaSpec beta;
  NoiseSpec noise;
  double theta2 = 1.0;
  double sigma2 = 1.0;
  double alpha = 0.05;
  Index trials = 1000;
  std::uint64_t seed = 1;
  Estimand target = Estimand::ThetaSquared;
  Method method = Method::EigenPrism;
  EigenPrismOptions options;
  /// Whiten correlated designs with the known covariance; the estimand then
  /// becomes beta' Sigma beta.
  bool whiten_known_cov = false;
  Index bootstrap_B = 10000;
  /// Flag for regimes where undercoverage is the expected outcome.
  bool expected_undercoverage = false;

  void validate() const {
    if (n < 1 || p < 1) throw Error(ErrorCode::DimensionError, "scenario needs n, p >= 1");
    if (trials < 1) throw Error(ErrorCode::InvalidArgument, "scenario needs trials >= 1");
    if (!(theta2 >= 0.0) || !(sigma2 >= 0.0) || !(theta2 + sigma2 > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "need theta2, sigma2 >= 0 with positive sum");
    }
    detail::check_alpha(alpha);
    if (design.family == DesignFamily::BernoulliIID && !(design.param > 0.0 && design.param < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "Bernoulli rate must lie in (0,1)");
    }
    if (design.family == DesignFamily::StudentT && !(design.param > 2.0)) {
      throw Error(ErrorCode::InvalidArgument, "Student t design needs df > 2 for unit variance");
    }
    if (noise.t_df != 0.0 && !(noise.t_df > 2.0)) {
      throw Error(ErrorCode::InvalidArgument, "Student t noise needs df > 2");
    }
    if (!(beta.fraction_nonzero > 0.0 && beta.fraction_nonzero <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "beta fraction must lie in (0,1]");
    }
    if (method != Method::EigenPrism && target != Estimand::ThetaSquared) {
      throw Error(ErrorCode::InvalidArgument, "chi-square methods only target theta2");
    }
    if (target == Estimand::RegressionErrorL2) {
      throw Error(ErrorCode::InvalidArgument, "the harness does not simulate the regression-error target");
    }
  }
};

struct CoverageReport {
  SimulationScenario scenario;
  double empirical_coverage = 0.0;
  double mean_width = 0.0;
  double mean_point = 0.0;
  double se_coverage = 0.0;
  Index completed = 0;
  Index failure_count = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Design = 0, Beta = 1, Noise = 2, Estimator = 3 };

/// Independent generator for (seed, trial, purpose).
inline std::mt19937_64 trial_rng(std::uint64_t seed, Index trial, Stream s) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(trial));
  h = splitmix64(h ^ static_cast<std::uint64_t>(s));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

/// Eigenvalue clipping onto the PSD cone.
inline Matrix psd_project(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Equicorrelation matrix with unit diagonal and off-diagonal r.
inline Matrix dense_correlation(Index p, double r) {
  const double lo = p > 1 ? -1.0 / static_cast<double>(p - 1) : -1.0;
  if (!(r >= lo && r < 1.0)) {
    throw Error(ErrorCode::InvalidCorrelation,
                "equicorrelation " + std::to_string(r) + " is not PSD for p=" + std::to_string(p));
  }
  Matrix C = Matrix::Constant(p, p, r);
  C.diagonal().setOnes();
  return C;
}

/// Sign-alternating sparse pattern (+P between odd-indexed columns, -P between
/// even-indexed columns, 0 across parities) mapped to the nearest correlation
/// matrix by alternating projections with Dykstra's correction.
inline Matrix sparse_correlation(Index p, double P, int max_iter = 2000) {
  if (!(P >= 0.0 && P < 1.0)) throw Error(ErrorCode::InvalidCorrelation, "P must lie in [0,1)");
  Matrix C = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (i == j) C(i, j) = 1.0;
      else if ((i % 2) == (j % 2)) C(i, j) = (i % 2 == 0) ? P : -P;
    }
  }
  Matrix Y = C;
  Matrix dS = Matrix::Zero(p, p);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix R = Y - dS;
    const Matrix X = detail::psd_project(R);
    dS = X - R;
    Y = X;
    Y.diagonal().setOnes();
    Eigen::SelfAdjointEigenSolver<Matrix> es(Y, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() >= -1e-12) return Y;
  }
  throw Error(ErrorCode::InvalidCorrelation, "correlation projection did not converge");
}

/// Scenario plus precomputed covariance factor, shared read-only by workers.
class ScenarioSampler {
 public:
  explicit ScenarioSampler(SimulationScenario sc) : sc_(std::move(sc)) {
    sc_.validate();
    if (sc_.design.family == DesignFamily::CorrelatedGaussian) {
      Matrix C = sc_.design.corr == CorrelationKind::Dense ? dense_correlation(sc_.p, sc_.design.corr_param)
                                                           : sparse_correlation(sc_.p, sc_.design.corr_param);
      Eigen::SelfAdjointEigenSolver<Matrix> es(C);
      // Rows are drawn as g' F' with F F' = C.
      factor_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
      cov_ = std::move(C);
    }
  }

  const SimulationScenario& scenario() const { return sc_; }
  const std::optional<Matrix>& covariance() const { return cov_; }

  Matrix design(Index trial) const {
    auto rng = detail::trial_rng(sc_.seed, trial, detail::Stream::Design);
    const Index n = sc_.n, p = sc_.p;
    Matrix X(n, p);
    switch (sc_.design.family) {
      case DesignFamily::GaussianIID: {
        std::normal_distribution<double> g;
        for (Index j = 0; j < p; ++j)
          for (Index i = 0; i < n; ++i) X(i, j) = g(rng);
        break;
      }
      case DesignFamily::BernoulliIID: {
        const double q = sc_.design.param;
        const double lo = -q / std::sqrt(q * (1.0 - q));
        const double hi = (1.0 - q) / std::sqrt(q * (1.0 - q));
        std::bernoulli_distribution b(q);
        for (Index j = 0; j < p; ++j)
          for (Index i = 0; i < n; ++i) X(i, j) = b(rng) ? hi : lo;
        break;
      }
      case DesignFamily::StudentT: {
        const double df = sc_.design.param;
        const double s = std::sqrt((df - 2.0) / df);
        std::student_t_distribution<double> t(df);
        for (Index j = 0; j < p; ++j)
          for (Index i = 0; i < n; ++i) X(i, j) = s * t(rng);
        break;
      }
      case DesignFamily::CorrelatedGaussian: {
        std::normal_distribution<double> g;
        Matrix G(n, p);
        for (Index j = 0; j < p; ++j)
          for (Index i = 0; i < n; ++i) G(i, j) = g(rng);
        X.noalias() = G * factor_.transpose();
        break;
      }
    }
    return X;
  }

  Vector beta(Index trial) const {
    const Index p = sc_.p;
    if (sc_.theta2 == 0.0) return Vector::Zero(p);
    auto rng = detail::trial_rng(sc_.seed, trial, detail::Stream::Beta);
    std::normal_distribution<double> g;
    Vector b(p);
    for (Index j = 0; j < p; ++j) b[j] = g(rng);
    if (sc_.beta.is_sparse()) {
      const auto k = std::max<Index>(
          1, static_cast<Index>(std::ceil(sc_.beta.fraction_nonzero * static_cast<double>(p) - 1e-9)));
      std::vector<Index> idx(static_cast<std::size_t>(p));
      std::iota(idx.begin(), idx.end(), Index{0});
      for (Index j = 0; j < k; ++j) {
        std::uniform_int_distribution<Index> pick(j, p - 1);
        std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick(rng))]);
      }
      Vector s = Vector::Zero(p);
      for (Index j = 0; j < k; ++j) s[idx[static_cast<std::size_t>(j)]] = b[idx[static_cast<std::size_t>(j)]];
      b = std::move(s);
    }
    return b * std::sqrt(sc_.theta2 / b.squaredNorm());
  }

  Vector noise(Index trial) const {
    auto rng = detail::trial_rng(sc_.seed, trial, detail::Stream::Noise);
    Vector e(sc_.n);
    const double sd = std::sqrt(sc_.sigma2);
    if (sc_.noise.t_df == 0.0) {
      std::normal_distribution<double> g(0.0, sd);
      for (Index i = 0; i < sc_.n; ++i) e[i] = g(rng);
    } else {
      const double df = sc_.noise.t_df;
      std::student_t_distribution<double> t(df);
      const double s = sd * std::sqrt((df - 2.0) / df);
      for (Index i = 0; i < sc_.n; ++i) e[i] = s * t(rng);
    }
    return e;
  }

  std::uint64_t estimator_seed(Index trial) const {
    auto rng = detail::trial_rng(sc_.seed, trial, detail::Stream::Estimator);
    return rng();
  }

 private:
  SimulationScenario sc_;
  std::optional<Matrix> cov_;
  Matrix factor_;
};

inline Matrix gen_design(const SimulationScenario& sc, Index trial) { return ScenarioSampler(sc).design(trial); }
inline Vector gen_beta(const SimulationScenario& sc, Index trial) { return ScenarioSampler(sc).beta(trial); }

/// Everything one trial produces before an estimator is applied.
struct TrialData {
  Index trial = 0;
  Dataset data;
  Vector beta;
  /// Signal magnitude the estimators target on this design.
  double theta2 = 0.0;
  double sigma2 = 0.0;
  std::optional<DesignSpectrum> spectrum;

  double truth(Estimand e) const {
    switch (e) {
      case Estimand::ThetaSquared: return theta2;
      case Estimand::SigmaSquared: return sigma2;
      case Estimand::SNR: return theta2 / (theta2 + sigma2);
      case Estimand::RegressionErrorL2: return std::sqrt(theta2);
    }
    return 0.0;
  }
};

inline unsigned default_threads() {
  if (const char* env = std::getenv("EIGENPRISM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct RunOptions {
  /// 0 selects default_threads().
  unsigned threads = 0;
  /// Skip the eigendecomposition when the callback does not need it.
  bool need_spectrum = true;
};

inline TrialData make_trial(const ScenarioSampler& s, Index trial, bool need_spectrum) {
  const auto& sc = s.scenario();
  Matrix X = s.design(trial);
  Vector beta = s.beta(trial);
  Vector y = X * beta + s.noise(trial);
  double theta2 = sc.theta2;
  Dataset data(std::move(X), std::move(y));
  if (sc.whiten_known_cov && s.covariance()) {
    const auto cov = CovarianceSpec::explicit_matrix(*s.covariance());
    theta2 = cov.weighted_sq_norm(beta);
    data = whiten(data, cov);
  }
  TrialData td{trial, std::move(data), std::move(beta), theta2, sc.sigma2, std::nullopt};
  if (need_spectrum) td.spectrum = spectral_decompose(td.data);
  return td;
}

/// Runs fn(TrialData) -> R for every trial; slot k holds trial k's result, or
/// nullopt when the trial threw. Output is independent of the thread count.
template <class R, class Fn>
std::vector<std::optional<R>> run_trials(const ScenarioSampler& sampler, Fn&& fn, const RunOptions& ro = {}) {
  const Index trials = sampler.scenario().trials;
  std::vector<std::optional<R>> out(static_cast<std::size_t>(trials));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index t = next++; t < trials; t = next++) {
      try {
        const TrialData td = make_trial(sampler, t, ro.need_spectrum);
        out[static_cast<std::size_t>(t)] = fn(td);
      } catch (const std::exception&) {
        out[static_cast<std::size_t>(t)].reset();
      }
    }
  };
  const unsigned nt = std::min<unsigned>(ro.threads ? ro.threads : default_threads(),
                                         static_cast<unsigned>(std::max<Index>(trials, 1)));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (unsigned k = 0; k < nt; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// The configured estimator applied to one trial.
inline IntervalEstimate apply_estimator(const ScenarioSampler& s, const TrialData& td) {
  const auto& sc = s.scenario();
  switch (sc.method) {
    case Method::ExactT1:
      return t1_interval(td.data.y(), sc.sigma2, sc.alpha);
    case Method::BootstrapT1:
      return bootstrap_t1_interval(td.data.y(), sc.sigma2, sc.alpha, sc.bootstrap_B, s.estimator_seed(td.trial));
    case Method::EigenPrism:
      break;
  }
  EigenPrismOptions opts = sc.options;
  opts.alpha = sc.alpha;
  switch (sc.target) {
    case Estimand::SigmaSquared: return eigenprism_estimate(*td.spectrum, Target::SigmaSquared, opts);
    case Estimand::SNR: return snr_interval(*td.spectrum, opts);
    default: return eigenprism_estimate(*td.spectrum, Target::ThetaSquared, opts);
  }
}

struct TrialRecord {
  bool covered = false;
  double width = 0.0;
  double point = 0.0;
};

inline CoverageReport summarize(const SimulationScenario& sc, const std::vector<std::optional<TrialRecord>>& recs) {
  CoverageReport rep;
  rep.scenario = sc;
  double hits = 0.0, width = 0.0, point = 0.0;
  for (const auto& r : recs) {
    if (!r) {
      ++rep.failure_count;
      continue;
    }
    ++rep.completed;
    hits += r->covered ? 1.0 : 0.0;
    width += r->width;
    point += r->point;
  }
  if (rep.completed > 0) {
    const double m = static_cast<double>(rep.completed);
    rep.empirical_coverage = hits / m;
    rep.mean_width = width / m;
    rep.mean_point = point / m;
    rep.se_coverage = std::sqrt(rep.empirical_coverage * (1.0 - rep.empirical_coverage) / m);
  }
  return rep;
}

inline CoverageReport run_scenario(const SimulationScenario& sc, const RunOptions& ro = {}) {
  const ScenarioSampler sampler(sc);
  RunOptions r = ro;
  r.need_spectrum = sc.method == Method::EigenPrism;
  auto recs = run_trials<TrialRecord>(
      sampler,
      [&](const TrialData& td) {
        const auto est = apply_estimator(sampler, td);
        return TrialRecord{est.covers(td.truth(sc.target)), est.width(), est.point};
      },
      r);
  return summarize(sc, recs);
}

/// P(|N(0,1)| <= z* W/n) with W ~ chi2_n: the coverage of a normal interval
/// whose half-width uses the observed rather than expected ||y||^2.
inline double chi2_width_adjustment_coverage(Index n, double alpha) {
  detail::check_alpha(alpha);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need n >= 1");
  const double nd = static_cast<double>(n);
  const double zc = dist::normal_critical(alpha);
  const double lo = dist::chi2_quantile(nd, 1e-15);
  const double hi = dist::chi2_quantile(nd, 1.0 - 1e-15);
  auto f = [&](double w) { return (2.0 * dist::normal_cdf(zc * w / nd) - 1.0) * dist::chi2_pdf(nd, w); };
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

}  // namespace eigenprism
