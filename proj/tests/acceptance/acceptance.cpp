// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and a
// summary. Exit status is 0 when every failure is in kKnownUnattainable.
//
// Thread count follows EIGENPRISM_THREADS (default: all cores). Results do
// not depend on it.
#include "eigenprism/eigenprism.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

using namespace eigenprism;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Criterion 11 asks for the closed-form efficiency bound to be <= 2 at
// gamma = 0.25; the bound evaluates to 3.79 there (and the optimized-weight
// ratio to 2.25), so that half of the check cannot hold.
const std::set<int> kKnownUnattainable{11};

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

SimulationScenario scenario(Index n, Index p, double theta2, double sigma2, Index trials, std::uint64_t seed) {
  SimulationScenario sc;
  sc.n = n;
  sc.p = p;
  sc.theta2 = theta2;
  sc.sigma2 = sigma2;
  sc.trials = trials;
  sc.seed = seed;
  return sc;
}

double coverage(const std::vector<bool>& hits) {
  return static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

// ------------------------------------------------------------------ 1

Outcome table_one() {
  struct Row {
    Index n;
    double pct;
  };
  Outcome o{true, ""};
  for (const auto& r : {Row{10, 87.5}, Row{20, 91.0}, Row{50, 93.3}, Row{100, 94.1}, Row{500, 94.8}, Row{1000, 94.9},
                        Row{5000, 95.0}}) {
    const double got = 100.0 * chi2_width_adjustment_coverage(r.n, 0.05);
    o.pass = o.pass && std::abs(got - r.pct) <= 0.2;
    o.detail += fmt("n=%ld %.3f%% ", static_cast<long>(r.n), got);
  }
  return o;
}

// ------------------------------------------------------------------ 2

Outcome closed_form_solver() {
  double worst = 0.0;
  for (double a : {0.1, 0.5, 0.9}) {
    for (Index n : {10, 100, 1000}) {
      Vector lam(n);
      for (Index i = 0; i < n; ++i) lam[i] = i < n / 2 ? 1 + a : 1 - a;
      const double expect = (1 + a * a) / (a * a * static_cast<double>(n));
      const auto sol = solve_minmax(lam, ConstraintSet::for_target(Target::ThetaSquared));
      worst = std::max(worst, std::abs(sol.objective / expect - 1.0));
    }
  }
  return {worst <= 1e-8, fmt("max relative error %.2e over 9 cells", worst)};
}

// ------------------------------------------------------------------ 3

Outcome solver_equivalence() {
  double worst_rel = 0.0, worst_kkt = 0.0;
  const auto cons = ConstraintSet::for_target(Target::ThetaSquared);
  for (int k = 0; k < 20; ++k) {
    std::mt19937_64 rng(3000 + k);
    const double gamma = k % 3 == 0 ? 0.1 : (k % 3 == 1 ? 0.5 : 0.9);
    const Index n = 200;
    const Vector lam = oracle::gaussian_spectrum(n, static_cast<Index>(std::lround(n / gamma)), rng);
    const auto sol = solve_minmax(lam, cons);
    const double ref = oracle::minmax_grid_value(lam, cons.sum_target, cons.lam_target, 100000);
    worst_rel = std::max(worst_rel, std::abs(sol.objective / ref - 1.0));
    worst_kkt = std::max(worst_kkt, kkt_residual(lam, sol, cons));
  }
  return {worst_rel <= 1e-6 && worst_kkt < 1e-8,
          fmt("max relative gap %.2e, max KKT residual %.2e over 20 spectra", worst_rel, worst_kkt)};
}

// ------------------------------------------------------------------ 4

Outcome exact_variance() {
  std::mt19937_64 rng(4000);
  std::normal_distribution<double> g;
  const Index n = 50, p = 200;
  const double theta2 = 1.0, sigma2 = 1.0;
  const Vector lam = oracle::gaussian_spectrum(n, p, rng);
  Outcome o{true, ""};
  for (auto target : {Target::ThetaSquared, Target::SigmaSquared}) {
    const Vector w = solve_minmax(lam, ConstraintSet::for_target(target)).w;
    std::vector<double> s;
    s.reserve(100000);
    Vector z(n);
    for (int t = 0; t < 100000; ++t) {
      const Vector u = oracle::haar_column(p, rng);
      for (Index i = 0; i < n; ++i) {
        z[i] = std::sqrt(static_cast<double>(p) * lam[i] * theta2) * u[i] + std::sqrt(sigma2) * g(rng);
      }
      s.push_back(w.dot(z.cwiseAbs2()));
    }
    const auto m = oracle::moments(s);
    const double exact = exact_conditional_variance(w, lam, theta2, sigma2, p);
    const double rel = m.sd * m.sd / exact - 1.0;
    o.pass = o.pass && std::abs(rel) <= 0.05;
    o.detail += fmt("%s MC/exact-1 = %+.4f  ", target == Target::ThetaSquared ? "P1" : "P2", rel);
  }
  return o;
}

// ------------------------------------------------------------------ 5

Outcome unbiasedness() {
  Outcome o{true, ""};
  for (double rho : {0.0, 0.5, 1.0}) {
    const ScenarioSampler s(scenario(100, 500, rho, 1.0 - rho, 5000, 5000 + static_cast<std::uint64_t>(rho * 10)));
    const auto recs = run_trials<std::pair<double, double>>(s, [](const TrialData& td) {
      return std::pair{eigenprism_estimate(*td.spectrum, Target::ThetaSquared).raw_point - td.theta2,
                       eigenprism_estimate(*td.spectrum, Target::SigmaSquared).raw_point - td.sigma2};
    });
    std::vector<double> e2, e3;
    for (const auto& r : recs) {
      if (!r) return {false, "trial failed"};
      e2.push_back(r->first);
      e3.push_back(r->second);
    }
    const auto m2 = oracle::moments(e2), m3 = oracle::moments(e3);
    const double t2 = std::abs(m2.mean) / m2.se, t3 = std::abs(m3.mean) / m3.se;
    o.pass = o.pass && t2 <= 3.0 && t3 <= 3.0;
    o.detail += fmt("rho=%.1f |bias|/se T2 %.2f T3 %.2f  ", rho, t2, t3);
  }
  return o;
}

// ------------------------------------------------------------------ 6, 7

struct CoverageGrid {
  Outcome theta, sigma;
};

CoverageGrid theta_sigma_coverage() {
  CoverageGrid out{{true, ""}, {true, ""}};
  double min_t = 1.0, min_s = 1.0;
  for (double rho : {0.1, 0.5, 0.9}) {
    for (Index n : {100, 200, 500}) {
      const ScenarioSampler s(scenario(n, 2000, rho, 1.0 - rho, 1000, 6000 + static_cast<std::uint64_t>(n + rho * 10)));
      const auto recs = run_trials<std::pair<bool, bool>>(s, [](const TrialData& td) {
        return std::pair{eigenprism_estimate(*td.spectrum, Target::ThetaSquared).covers(td.theta2),
                         eigenprism_estimate(*td.spectrum, Target::SigmaSquared).covers(td.sigma2)};
      });
      std::vector<bool> ht, hs;
      for (const auto& r : recs) {
        if (!r) return {{false, "trial failed"}, {false, "trial failed"}};
        ht.push_back(r->first);
        hs.push_back(r->second);
      }
      const double ct = coverage(ht), cs = coverage(hs);
      min_t = std::min(min_t, ct);
      min_s = std::min(min_s, cs);
      out.theta.detail += fmt("(%.1f,%ld) %.3f ", rho, static_cast<long>(n), ct);
      out.sigma.detail += fmt("(%.1f,%ld) %.3f ", rho, static_cast<long>(n), cs);
    }
  }
  out.theta.pass = min_t >= 0.935;
  out.sigma.pass = min_s >= 0.935;
  out.theta.detail = fmt("min %.3f; ", min_t) + out.theta.detail;
  out.sigma.detail = fmt("min %.3f; ", min_s) + out.sigma.detail;
  return out;
}

// ------------------------------------------------------------------ 8

Outcome snr_coverage() {
  Outcome o{true, ""};
  for (double snr : {0.1, 0.3, 0.7}) {
    auto sc = scenario(1000, 5000, snr, 1.0 - snr, 500, 8000 + static_cast<std::uint64_t>(snr * 10));
    sc.design = DesignSpec::bernoulli(0.01);
    sc.beta = BetaSpec::sparse(0.1);
    sc.target = Estimand::SNR;
    const auto r = run_scenario(sc);
    o.pass = o.pass && r.failure_count == 0 && r.empirical_coverage >= 0.935;
    o.detail += fmt("snr=%.1f %.3f (width %.3f)  ", snr, r.empirical_coverage, r.mean_width);
  }
  return o;
}

// ------------------------------------------------------------------ 9

Outcome bootstrap_coverage() {
  auto sc = scenario(800, 1500, 10.0, 10.0, 1000, 9000);
  sc.design = DesignSpec::bernoulli(0.05);
  sc.noise.t_df = 5.0;
  sc.method = Method::BootstrapT1;
  sc.bootstrap_B = 10000;
  RunOptions ro;
  ro.need_spectrum = false;
  const auto r = run_scenario(sc, ro);
  const bool ok = r.failure_count == 0 && r.empirical_coverage >= 0.92 && r.empirical_coverage <= 0.965;
  return {ok, fmt("coverage %.3f over %ld trials (se %.3f), mean width %.2f", r.empirical_coverage,
                  static_cast<long>(r.completed), r.se_coverage, r.mean_width)};
}

// ------------------------------------------------------------------ 10

Outcome mp_identities() {
  double wb = 0.0, wsd = 0.0, wmass = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const double g = 0.1 * i;
    const auto m = mp_model(g);
    wb = std::max(wb, std::abs(m.B - (1 + g)));
    wsd = std::max(wsd, std::abs(m.sd() - std::sqrt(g)));
    wmass = std::max(wmass, std::abs(mp_cdf(g, m.support_hi) - 1.0));
  }
  return {wb <= 1e-3 && wsd <= 1e-3 && wmass <= 1e-8,
          fmt("max |B-(1+g)| %.1e, max |SD-sqrt(g)| %.1e, max |mass-1| %.1e", wb, wsd, wmass)};
}

// ------------------------------------------------------------------ 11

Outcome are_check() {
  const double b25 = are_upper_bound(0.25), b01 = are_upper_bound(0.01), b50 = are_upper_bound(0.5);
  bool mono = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double g : {0.01, 0.02, 0.05, 0.1, 0.2, 0.25, 0.5, 0.9}) {
    const double b = are_upper_bound(g);
    mono = mono && b < prev;
    prev = b;
  }
  const auto opt = are_point(0.25, 1000);
  return {b25 <= 2.0 && b01 > 3 * b50 && mono,
          fmt("bound(0.25)=%.4f (needs <= 2); bound(0.01)/bound(0.5)=%.2f; monotone=%s; "
              "optimized-weight ratio at 0.25 = %.4f",
              b25, b01 / b50, mono ? "yes" : "no", opt.minmax_ratio)};
}

// ------------------------------------------------------------------ 12

Outcome two_step_gain() {
  const ScenarioSampler s(scenario(500, 5000, 0.5, 0.5, 1000, 12000));
  struct Rec {
    double w1, w2;
    bool c2;
  };
  const auto recs = run_trials<Rec>(s, [](const TrialData& td) {
    EigenPrismOptions two;
    two.two_step = true;
    const auto a = eigenprism_estimate(*td.spectrum, Target::ThetaSquared);
    const auto b = eigenprism_estimate(*td.spectrum, Target::ThetaSquared, two);
    return Rec{a.width(), b.width(), b.covers(td.theta2)};
  });
  double w1 = 0, w2 = 0;
  std::vector<bool> hits;
  for (const auto& r : recs) {
    if (!r) return {false, "trial failed"};
    w1 += r->w1;
    w2 += r->w2;
    hits.push_back(r->c2);
  }
  const double c = coverage(hits);
  return {w2 < w1 && c >= 0.92,
          fmt("mean width 2-step %.4f vs %.4f (ratio %.3f), 2-step coverage %.3f", w2 / 1000, w1 / 1000, w2 / w1, c)};
}

// ------------------------------------------------------------------ 13

Outcome normality() {
  const ScenarioSampler s(scenario(500, 2500, 0.5, 0.5, 5000, 13000));
  const auto recs = run_trials<double>(s, [](const TrialData& td) {
    const auto e = eigenprism_estimate(*td.spectrum, Target::ThetaSquared);
    return (e.raw_point - td.theta2) / e.sd_bound;
  });
  std::vector<double> z;
  for (const auto& r : recs) {
    if (!r) return {false, "trial failed"};
    z.push_back(*r);
  }
  const auto m = oracle::moments(z);
  return {std::abs(m.mean) <= 0.1 && m.sd >= 0.8 && m.sd <= 1.05, fmt("mean %+.4f, sd %.4f", m.mean, m.sd)};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  std::vector<std::pair<int, Outcome>> results;
  auto run = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = clock::now();
    Outcome o = fn();
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("[%s] criterion %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    results.emplace_back(id, std::move(o));
  };

  std::printf("acceptance: %u worker thread(s)\n", default_threads());
  run(1, "chi-square width adjustment table", table_one);
  run(2, "two-level closed-form solver", closed_form_solver);
  run(3, "solver vs dense dual grid", solver_equivalence);
  run(4, "exact conditional variance", exact_variance);
  run(5, "unbiasedness of T2 and T3", unbiasedness);
  {
    const auto t0 = clock::now();
    const auto grid = theta_sigma_coverage();
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("[%s] criterion  6 theta2 coverage: %s (shared, %.1fs)\n", grid.theta.pass ? "PASS" : "FAIL",
                grid.theta.detail.c_str(), secs);
    std::printf("[%s] criterion  7 sigma2 coverage: %s (shared)\n", grid.sigma.pass ? "PASS" : "FAIL",
                grid.sigma.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(6, grid.theta);
    results.emplace_back(7, grid.sigma);
  }
  run(8, "SNR coverage, sparse Bernoulli design", snr_coverage);
  run(9, "BCa bootstrap coverage", bootstrap_coverage);
  run(10, "Marchenko-Pastur identities", mp_identities);
  run(11, "efficiency bound", are_check);
  run(12, "2-step width gain", two_step_gain);
  run(13, "standardized T2 normality", normality);

  int passed = 0;
  bool unexpected = false;
  std::ostringstream failed;
  for (const auto& [id, o] : results) {
    if (o.pass) {
      ++passed;
    } else {
      failed << ' ' << id << (kKnownUnattainable.count(id) ? "(known)" : "");
      unexpected = unexpected || !kKnownUnattainable.count(id);
    }
  }
  std::printf("summary: %d/%zu passed; failed:%s\n", passed, results.size(), failed.str().empty() ? " none" : failed.str().c_str());
  return unexpected ? 1 : 0;
}
