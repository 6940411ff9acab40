#include "eigenprism/sim_harness.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace eigenprism;

namespace {

SimulationScenario small(Index n, Index p) {
  SimulationScenario sc;
  sc.n = n;
  sc.p = p;
  sc.trials = 50;
  sc.seed = 99;
  return sc;
}

}  // namespace

TEST(Design, DeterministicPerTrial) {
  auto sc = small(3, 4);
  EXPECT_EQ(gen_design(sc, 0), gen_design(sc, 0));
  EXPECT_NE(gen_design(sc, 0), gen_design(sc, 1));
  sc.seed = 100;
  EXPECT_NE(gen_design(small(3, 4), 0), gen_design(sc, 0));
}

TEST(Design, StandardizedInDistribution) {
  for (auto spec : {DesignSpec::bernoulli(0.05), DesignSpec::student_t(5.0), DesignSpec::gaussian()}) {
    auto sc = small(4000, 50);
    sc.design = spec;
    const Matrix X = gen_design(sc, 3);
    const double mean = X.mean();
    const double var = (X.array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.03);
  }
}

TEST(Design, DenseCorrelationIsReproduced) {
  auto sc = small(10000, 50);
  sc.design = DesignSpec::dense_correlated(0.1);
  const Matrix X = gen_design(sc, 0);
  const Matrix centered = X.rowwise() - X.colwise().mean();
  const Matrix cov = centered.transpose() * centered / 9999.0;
  const Vector sd = cov.diagonal().cwiseSqrt();
  // Each sample correlation has sd about 0.01; 1225 pairs keep the max below 5 sd.
  double worst = 0.0, mean = 0.0;
  for (Index i = 0; i < 50; ++i) {
    for (Index j = 0; j < i; ++j) {
      const double r = cov(i, j) / (sd[i] * sd[j]);
      worst = std::max(worst, std::abs(r - 0.1));
      mean += r / 1225.0;
    }
  }
  EXPECT_LT(worst, 0.05);
  EXPECT_NEAR(mean, 0.1, 0.005);
  try {
    dense_correlation(50, -0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCorrelation);
  }
}

TEST(Design, SparseCorrelationIsACorrelationMatrix) {
  const Matrix C = sparse_correlation(50, 0.1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(C);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  for (Index i = 0; i < 50; ++i) EXPECT_EQ(C(i, i), 1.0);
  EXPECT_LT((C - C.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  // Columns 1 and 3 (1-based, odd) start at +P; columns 2 and 4 at -P.
  EXPECT_GT(C(0, 2), 0.0);
  EXPECT_LT(C(1, 3), 0.0);
}

TEST(Beta, NormAndSparsity) {
  auto sc = small(10, 1000);
  sc.theta2 = 0.0;
  EXPECT_EQ(gen_beta(sc, 0), Vector::Zero(1000));
  sc.theta2 = 7.3;
  for (Index t = 0; t < 5; ++t) EXPECT_NEAR(gen_beta(sc, t).squaredNorm(), 7.3, 1e-12);
  sc.beta = BetaSpec::sparse(0.01);
  for (Index t = 0; t < 5; ++t) {
    const Vector b = gen_beta(sc, t);
    EXPECT_EQ((b.array() != 0.0).count(), 10);
    EXPECT_NEAR(b.squaredNorm(), 7.3, 1e-12);
  }
}

TEST(Runner, SingleTrialCoverageIsBinary) {
  auto sc = small(40, 100);
  sc.trials = 1;
  const auto r = run_scenario(sc);
  EXPECT_TRUE(r.empirical_coverage == 0.0 || r.empirical_coverage == 1.0);
  EXPECT_EQ(r.completed, 1);
}

TEST(Runner, ThreadCountDoesNotChangeResults) {
  auto sc = small(30, 90);
  sc.trials = 40;
  sc.target = Estimand::SigmaSquared;
  RunOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = run_scenario(sc, one);
  const auto b = run_scenario(sc, four);
  EXPECT_EQ(a.empirical_coverage, b.empirical_coverage);
  EXPECT_EQ(a.mean_width, b.mean_width);
  EXPECT_EQ(a.mean_point, b.mean_point);
  const auto c = run_scenario(sc, one);
  EXPECT_EQ(a.mean_width, c.mean_width);
}

TEST(Runner, ExactIntervalCalibratesHarness) {
  auto sc = small(50, 60);
  sc.method = Method::ExactT1;
  sc.trials = 4000;
  sc.theta2 = 2.0;
  sc.sigma2 = 1.0;
  const auto r = run_scenario(sc);
  EXPECT_NEAR(r.empirical_coverage, 0.95, 3 * std::sqrt(0.95 * 0.05 / 4000));
  EXPECT_NEAR(r.se_coverage, std::sqrt(r.empirical_coverage * (1 - r.empirical_coverage) / 4000), 1e-15);
}

TEST(Runner, WhitenedCorrelatedDesignTargetsWeightedNorm) {
  auto sc = small(80, 200);
  sc.design = DesignSpec::dense_correlated(0.3);
  sc.whiten_known_cov = true;
  sc.trials = 300;
  sc.theta2 = 1.0;
  const ScenarioSampler s(sc);
  auto recs = run_trials<double>(s, [](const TrialData& td) {
    return eigenprism_estimate(*td.spectrum, Target::ThetaSquared).raw_point - td.theta2;
  });
  std::vector<double> err;
  for (const auto& r : recs) err.push_back(*r);
  const auto m = oracle::moments(err);
  EXPECT_LT(std::abs(m.mean), 3 * m.se);
}

TEST(Runner, FailuresAreCountedSeparately) {
  SimulationScenario sc = small(5, 5);
  std::vector<std::optional<TrialRecord>> recs{TrialRecord{true, 1.0, 0.5}, std::nullopt, TrialRecord{false, 3.0, 1.5}};
  const auto r = summarize(sc, recs);
  EXPECT_EQ(r.failure_count, 1);
  EXPECT_EQ(r.completed, 2);
  EXPECT_DOUBLE_EQ(r.empirical_coverage, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_width, 2.0);
}

TEST(Runner, ValidatesScenario) {
  auto sc = small(10, 20);
  sc.theta2 = 0.0;
  sc.sigma2 = 0.0;
  EXPECT_THROW(run_scenario(sc), Error);
  sc = small(10, 20);
  sc.method = Method::ExactT1;
  sc.target = Estimand::SNR;
  EXPECT_THROW(run_scenario(sc), Error);
}

TEST(Chi2Adjustment, TableValues) {
  EXPECT_NEAR(chi2_width_adjustment_coverage(10, 0.05), 0.875, 0.001);
  EXPECT_NEAR(chi2_width_adjustment_coverage(100, 0.05), 0.941, 0.001);
  EXPECT_NEAR(chi2_width_adjustment_coverage(5000, 0.05), 0.950, 0.001);
  // Reference values from 30-digit quadrature.
  EXPECT_NEAR(chi2_width_adjustment_coverage(20, 0.05), 0.9098628163314536, 1e-9);
  EXPECT_NEAR(chi2_width_adjustment_coverage(500, 0.05), 0.9482474028952776, 1e-9);
}

TEST(Chi2Adjustment, MonotoneAndConvergent) {
  double prev = 0.0;
  for (Index n : {1, 2, 5, 10, 20, 50, 100, 500, 1000, 5000, 20000}) {
    const double c = chi2_width_adjustment_coverage(n, 0.05);
    EXPECT_GE(c, prev - 1e-12) << n;
    prev = c;
  }
  EXPECT_NEAR(prev, 0.95, 5e-4);
  EXPECT_THROW(chi2_width_adjustment_coverage(10, 1.2), Error);
}

TEST(Chi2Adjustment, MonteCarloCrossCheck) {
  std::mt19937_64 rng(5);
  std::chi_squared_distribution<double> w(20.0);
  std::normal_distribution<double> g;
  const double z = oracle::normal_quantile(0.975);
  const int draws = 1000000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += std::abs(g(rng)) <= z * w(rng) / 20.0 ? 1 : 0;
  const double mc = static_cast<double>(hits) / draws;
  EXPECT_NEAR(mc, chi2_width_adjustment_coverage(20, 0.05), 4 * std::sqrt(0.09 / draws));
}
