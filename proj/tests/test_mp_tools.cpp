#include "eigenprism/mp_tools.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace eigenprism;

namespace {

// Composite Simpson on x = lo + (hi - lo) sin^2(t), t in [0, pi/2]; the
// Jacobian cancels both square-root edges. Independent of the library's
// cosine substitution and adaptive rule.
double simpson_moment(double gamma, int k, double upto = 1e300, int m = 20000) {
  const double lo = std::pow(1 - std::sqrt(gamma), 2), hi = std::pow(1 + std::sqrt(gamma), 2);
  auto f = [&](double t) {
    const double s = std::sin(t), c = std::cos(t);
    const double x = lo + (hi - lo) * s * s;
    if (x > upto) return 0.0;
    const double dens = (hi - lo) * s * c / (2 * std::numbers::pi * gamma * x);
    return std::pow(x, k) * dens * 2 * (hi - lo) * s * c;
  };
  const double h = (std::numbers::pi / 2) / m;
  double acc = f(0) + f(std::numbers::pi / 2);
  for (int i = 1; i < m; ++i) acc += f(i * h) * (i % 2 ? 4 : 2);
  return acc * h / 3;
}

double gamma_grid(int i) { return 0.1 * i; }

}  // namespace

TEST(MPPdf, ZeroOutsideSupport) {
  EXPECT_EQ(mp_pdf(0.5, 0.0), 0.0);
  EXPECT_EQ(mp_pdf(0.5, 3.0), 0.0);
  EXPECT_EQ(mp_pdf(0.5, -1.0), 0.0);
  EXPECT_GT(mp_pdf(0.5, 1.0), 0.0);
  EXPECT_THROW(mp_pdf(0.0, 1.0), Error);
  EXPECT_THROW(mp_pdf(1.0, 1.0), Error);
  try {
    mp_model(1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidGamma);
  }
}

TEST(MPPdf, MassAndMoments) {
  for (int i = 1; i <= 9; ++i) {
    const double g = gamma_grid(i);
    const double hi = std::pow(1 + std::sqrt(g), 2);
    EXPECT_NEAR(mp_cdf(g, hi), 1.0, 1e-8) << g;
    EXPECT_NEAR(mp_partial_moment(g, hi, 1), 1.0, 1e-8) << g;
    EXPECT_NEAR(mp_partial_moment(g, hi, 2), 1.0 + g, 1e-8) << g;
    EXPECT_NEAR(simpson_moment(g, 0), 1.0, 1e-8) << g;
  }
  EXPECT_NEAR(mp_partial_moment(0.2, 10.0, 2), 1.2, 1e-8);
}

TEST(MPPdf, CdfAgreesWithIndependentQuadrature) {
  for (double g : {0.1, 0.37, 0.8}) {
    for (double x : {0.3, 0.9, 1.4}) {
      EXPECT_NEAR(mp_cdf(g, x), simpson_moment(g, 0, x, 200000), 2e-5) << g << " " << x;
    }
  }
}

TEST(MPModel, IdentitiesOnGrid) {
  for (int i = 1; i <= 9; ++i) {
    const double g = gamma_grid(i);
    const auto m = mp_model(g);
    EXPECT_LT(m.support_lo, m.median);
    EXPECT_LT(m.median, m.support_hi);
    EXPECT_NEAR(m.B, 1 + g, 1e-3);
    EXPECT_NEAR(m.sd(), std::sqrt(g), 1e-3);
    EXPECT_GT(m.A, 0.0);
    EXPECT_NEAR(mp_cdf(g, m.median), 0.5, 1e-8);
  }
}

TEST(MPModel, ReferenceConstants) {
  // Values from an independent arbitrary-precision computation.
  struct Ref {
    double g, median, A;
  };
  for (const auto& r : {Ref{0.01, 0.996665676338658, 0.0848260089017419},
                        Ref{0.1, 0.966565147402822, 0.266620458058429},
                        Ref{0.25, 0.916004070686612, 0.417212484156379},
                        Ref{0.5, 0.830465881581364, 0.579449105864166},
                        Ref{0.9, 0.689222098354093, 0.753369977264489}}) {
    const auto m = mp_model(r.g);
    EXPECT_NEAR(m.median, r.median, 1e-9) << r.g;
    EXPECT_NEAR(m.A, r.A, 1e-9) << r.g;
  }
}

TEST(MPModel, RandomMatrixMedianAndA) {
  std::mt19937_64 rng(2);
  const Index n = 2000;
  const double g = 0.2;
  const Vector lam = oracle::gaussian_spectrum(n, static_cast<Index>(n / g), rng);
  std::vector<double> v(lam.begin(), lam.end());
  std::sort(v.begin(), v.end());
  const double med = 0.5 * (v[n / 2 - 1] + v[n / 2]);
  const auto m = mp_model(g);
  EXPECT_NEAR(med / m.median, 1.0, 0.02);
  double a = 0.0;
  for (double x : v) a += x >= med ? x : -x;
  a /= static_cast<double>(n);
  EXPECT_NEAR(a / m.A, 1.0, 0.01);
}

TEST(ARE, BoundShapeAndReferenceValues) {
  for (int i = 1; i <= 9; ++i) {
    const double g = gamma_grid(i);
    const auto m = mp_model(g);
    EXPECT_NEAR(are_upper_bound(g), std::sqrt(2.0) * std::sqrt(m.B) / m.A, 1e-14);
  }
  EXPECT_NEAR(are_upper_bound(0.25), 3.78976873925841, 1e-8);
  EXPECT_NEAR(are_upper_bound(0.01), 16.7550856011806, 1e-7);
  EXPECT_GT(are_upper_bound(0.01), 3 * are_upper_bound(0.5));
}

TEST(ARE, OptimizedRatioBelowClosedFormAndDecreasing) {
  const auto curve = are_curve({0.05, 0.1, 0.25, 0.5, 0.9}, 400);
  for (std::size_t k = 0; k < curve.size(); ++k) {
    EXPECT_LT(curve[k].minmax_ratio, curve[k].bound);
    EXPECT_GT(curve[k].minmax_ratio, 1.0);
    if (k) EXPECT_LT(curve[k].minmax_ratio, curve[k - 1].minmax_ratio);
  }
}

TEST(Indistinguishability, FlatSpectrum) {
  const Vector ones = Vector::Ones(100);
  EXPECT_NEAR(indistinguishability_bound(ones, 100, 10000), 1 - std::sqrt(0.01 / (4 * std::numbers::pi)), 1e-12);
  EXPECT_NEAR(indistinguishability_bound(ones, 100, 10000), 0.9718, 1e-4);
  EXPECT_GT(indistinguishability_bound(ones, 100, 100000000), 0.999);
}

TEST(Indistinguishability, SpreadSpectrumGivesNoObstruction) {
  std::mt19937_64 rng(4);
  Vector lam = oracle::gaussian_spectrum(200, 400, rng);
  lam *= 200.0 / lam.sum();
  EXPECT_EQ(indistinguishability_bound(lam, 200, 400), 0.0);
}

TEST(Indistinguishability, MonotoneInDeviation) {
  double prev = 2.0;
  for (double a : {0.0, 0.01, 0.02, 0.05, 0.1}) {
    Vector lam(100);
    for (Index i = 0; i < 100; ++i) lam[i] = i < 50 ? 1 + a : 1 - a;
    const double b = indistinguishability_bound(lam, 100, 5000);
    EXPECT_LE(b, prev);
    prev = b;
  }
  try {
    indistinguishability_bound(Vector::Constant(10, 1.1), 10, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NormalizationError);
  }
}
