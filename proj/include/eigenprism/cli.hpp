#pragma once

// Command-line front end: fit, simulate, mp and weights subcommands.

#include "eigenprism/core_model.hpp"
#include "eigenprism/error.hpp"
#include "eigenprism/estimators.hpp"
#include "eigenprism/io.hpp"
#include "eigenprism/mp_tools.hpp"
#include "eigenprism/sim_harness.hpp"
#include "eigenprism/weight_solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace eigenprism::cli {

using Json = nlohmann::ordered_json;

/// Flag combination that parses but makes no sense.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void flatten(const Json& j, const std::string& prefix, Json& out) {
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) flatten(v, prefix + k + ".", out);
    else if (!v.is_array()) out[prefix + k] = v;
  }
}

inline std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(6) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

inline void print_table(std::ostream& out, const std::vector<Json>& records) {
  if (records.empty()) return;
  std::vector<Json> flat;
  std::vector<std::string> keys;
  for (const auto& r : records) {
    Json f = Json::object();
    flatten(r, "", f);
    for (const auto& [k, v] : f.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    flat.push_back(std::move(f));
  }
  std::vector<std::size_t> width(keys.size());
  for (std::size_t c = 0; c < keys.size(); ++c) {
    width[c] = keys[c].size();
    for (const auto& f : flat) width[c] = std::max(width[c], cell(f.value(keys[c], Json())).size());
  }
  for (std::size_t c = 0; c < keys.size(); ++c) out << std::left << std::setw(static_cast<int>(width[c] + 2)) << keys[c];
  out << '\n';
  for (const auto& f : flat) {
    for (std::size_t c = 0; c < keys.size(); ++c) {
      out << std::left << std::setw(static_cast<int>(width[c] + 2)) << cell(f.value(keys[c], Json()));
    }
    out << '\n';
  }
}

inline void emit(std::ostream& out, const std::vector<Json>& records, const std::string& format) {
  if (format == "table") {
    print_table(out, records);
    return;
  }
  for (const auto& r : records) out << r.dump() << '\n';
}

inline Target parse_target2(const std::string& s) {
  if (s == "theta2") return Target::ThetaSquared;
  if (s == "sigma2") return Target::SigmaSquared;
  throw UsageError("target must be theta2 or sigma2");
}

inline Estimand parse_estimand(const std::string& s) {
  if (s == "theta2") return Estimand::ThetaSquared;
  if (s == "sigma2") return Estimand::SigmaSquared;
  if (s == "snr") return Estimand::SNR;
  if (s == "error") return Estimand::RegressionErrorL2;
  throw UsageError("unknown target '" + s + "'");
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string response;
  std::optional<std::string> response_file;
  std::string target = "theta2";
  double alpha = 0.05;
  std::optional<double> sigma2;
  std::optional<Index> bootstrap;
  bool two_step = false;
  Index zero_first = 0;
  bool keep_null = false;
  std::optional<std::string> covariance;
  std::optional<std::string> beta_hat;
  std::optional<std::string> subset;
  std::optional<double> split;
  bool standardize = false;
  std::string standardize_order = "after-split";
  std::optional<std::string> write_fit_part;
  std::uint64_t seed = 1;
};

inline void add_fit(CLI::App& app, FitArgs& a) {
  auto* s = app.add_subcommand("fit", "Interval estimate from a dataset");
  s->add_option("--data", a.data, "Delimited design file (comma or tab)")->required();
  s->add_option("--response", a.response, "Response column name (default: last column)");
  s->add_option("--response-file", a.response_file, "Response in a separate single-column file");
  s->add_option("--target", a.target, "theta2 | sigma2 | snr | error")
      ->check(CLI::IsMember({"theta2", "sigma2", "snr", "error"}));
  s->add_option("--alpha", a.alpha, "Miscoverage level")->check(CLI::Range(0.0, 1.0));
  s->add_option("--sigma2", a.sigma2, "Known noise variance; selects the chi-square interval");
  s->add_option("--bootstrap", a.bootstrap, "BCa bootstrap with B resamples (needs --sigma2)");
  s->add_flag("--two-step", a.two_step, "2-step refinement of the weights");
  s->add_option("--zero-first", a.zero_first, "Pin the weights of the K largest eigenvalues")
      ->check(CLI::NonNegativeNumber);
  s->add_flag("--keep-null-weight", a.keep_null, "Do not pin the last weight when the smallest eigenvalue is 0");
  s->add_option("--covariance", a.covariance, "Known column covariance (p x p) used for whitening");
  s->add_option("--beta-hat", a.beta_hat, "Coefficient estimate for --target error");
  s->add_option("--subset", a.subset, "1-based column indices restricting the error target");
  s->add_option("--split", a.split, "Evaluate on a random holdout; the first part gets this fraction")
      ->check(CLI::Range(0.0, 1.0));
  s->add_flag("--standardize", a.standardize, "Standardize design columns");
  s->add_option("--standardize-order", a.standardize_order, "after-split | before-split")
      ->check(CLI::IsMember({"after-split", "before-split"}));
  s->add_option("--write-fit-part", a.write_fit_part, "Write the first split part to this file");
  s->add_option("--seed", a.seed, "Seed for splitting and bootstrap");
}

inline Json run_fit(const FitArgs& a) {
  const Estimand target = parse_estimand(a.target);
  if (a.sigma2 && target != Estimand::ThetaSquared) throw UsageError("--sigma2 is only valid with --target theta2");
  if (a.bootstrap && !a.sigma2) throw UsageError("--bootstrap needs --sigma2");
  if (a.sigma2 && (a.two_step || a.covariance)) throw UsageError("--sigma2 excludes --two-step and --covariance");
  if (target == Estimand::RegressionErrorL2 && !a.beta_hat) throw UsageError("--target error needs --beta-hat");
  if (target != Estimand::RegressionErrorL2 && (a.beta_hat || a.subset)) {
    throw UsageError("--beta-hat and --subset need --target error");
  }
  if (a.write_fit_part && !a.split) throw UsageError("--write-fit-part needs --split");

  Dataset data = io::load_dataset(a.data, a.response, a.response_file);
  const bool before = a.standardize && a.standardize_order == "before-split";
  const bool after = a.standardize && !before;
  if (before) data = standardize_columns(data);
  if (a.split) {
    auto [fit_part, holdout] = split_sample(data, *a.split, a.seed);
    if (a.write_fit_part) io::write_table(*a.write_fit_part, after ? standardize_columns(fit_part) : fit_part);
    data = std::move(holdout);
  }
  if (after) data = standardize_columns(data);

  EigenPrismOptions opts;
  opts.alpha = a.alpha;
  opts.zero_first = a.zero_first;
  opts.zero_last_if_null = !a.keep_null;
  opts.two_step = a.two_step;
  const CovarianceSpec cov =
      a.covariance ? CovarianceSpec::explicit_matrix(io::read_table(*a.covariance).values) : CovarianceSpec::identity();

  IntervalEstimate est;
  if (a.sigma2) {
    est = a.bootstrap ? bootstrap_t1_interval(data.y(), *a.sigma2, a.alpha, *a.bootstrap, a.seed)
                      : t1_interval(data.y(), *a.sigma2, a.alpha);
  } else if (target == Estimand::RegressionErrorL2) {
    std::optional<std::vector<Index>> subset;
    if (a.subset) subset = io::read_indices(*a.subset);
    est = regression_error_interval(data, io::read_vector(*a.beta_hat), subset, cov, opts);
  } else {
    const auto spec = spectral_decompose(whiten(data, cov));
    if (target == Estimand::SNR) est = snr_interval(spec, opts);
    else est = eigenprism_estimate(spec, target == Estimand::ThetaSquared ? Target::ThetaSquared : Target::SigmaSquared, opts);
  }
  Json j = io::to_json(est);
  j["n"] = data.n();
  j["p"] = data.p();
  return j;
}

// ----------------------------------------------------------- simulate

struct SimArgs {
  std::vector<Index> n{200};
  Index p = 2000;
  std::string design = "gaussian";
  double design_param = 0.0;
  std::string beta = "dense";
  double beta_fraction = 1.0;
  std::optional<double> theta2;
  std::optional<double> sigma2;
  std::vector<double> rho;
  double total = 1.0;
  double alpha = 0.05;
  Index trials = 1000;
  std::uint64_t seed = 1;
  std::string target = "theta2";
  std::string method = "eigenprism";
  bool two_step = false;
  Index zero_first = 0;
  double noise_df = 0.0;
  bool whiten = false;
  Index bootstrap = 10000;
  unsigned threads = 0;
  bool allow_failures = false;
  std::optional<std::string> config;
};

inline void add_simulate(CLI::App& app, SimArgs& a) {
  auto* s = app.add_subcommand("simulate", "Monte-Carlo coverage study");
  s->add_option("--n", a.n, "Sample size(s)")->expected(1, -1);
  s->add_option("--p", a.p, "Number of features");
  s->add_option("--design", a.design, "gaussian | bernoulli | t | dense-corr | sparse-corr")
      ->check(CLI::IsMember({"gaussian", "bernoulli", "t", "dense-corr", "sparse-corr"}));
  s->add_option("--design-param", a.design_param, "Bernoulli rate, t df, or correlation parameter");
  s->add_option("--beta", a.beta, "dense | sparse")->check(CLI::IsMember({"dense", "sparse"}));
  s->add_option("--beta-fraction", a.beta_fraction, "Fraction of nonzero coefficients for sparse beta");
  s->add_option("--theta2", a.theta2, "Signal magnitude");
  s->add_option("--sigma2", a.sigma2, "Noise variance");
  s->add_option("--rho", a.rho, "Signal fraction(s); sets theta2 = rho*total, sigma2 = (1-rho)*total")
      ->expected(1, -1);
  s->add_option("--total", a.total, "theta2 + sigma2 when --rho is used");
  s->add_option("--alpha", a.alpha, "Miscoverage level");
  s->add_option("--trials", a.trials, "Trials per scenario");
  s->add_option("--seed", a.seed, "Master seed");
  s->add_option("--target", a.target, "theta2 | sigma2 | snr")->check(CLI::IsMember({"theta2", "sigma2", "snr"}));
  s->add_option("--method", a.method, "eigenprism | t1 | bootstrap")
      ->check(CLI::IsMember({"eigenprism", "t1", "bootstrap"}));
  s->add_flag("--two-step", a.two_step, "2-step refinement");
  s->add_option("--zero-first", a.zero_first, "Pin the K largest-eigenvalue weights");
  s->add_option("--noise-df", a.noise_df, "Student t noise with this df (0 = Gaussian)");
  s->add_flag("--whiten", a.whiten, "Whiten correlated designs with the known covariance");
  s->add_option("--bootstrap", a.bootstrap, "Bootstrap resamples for --method bootstrap");
  s->add_option("--threads", a.threads, "Worker threads (default: EIGENPRISM_THREADS or all cores)");
  s->add_flag("--allow-failures", a.allow_failures, "Exit 0 even when some trials fail");
  s->add_option("--config", a.config, "JSON scenario object or array; keys mirror the flags");
}

inline DesignSpec make_design(const std::string& name, double param) {
  if (name == "gaussian") return DesignSpec::gaussian();
  if (name == "bernoulli") return DesignSpec::bernoulli(param);
  if (name == "t") return DesignSpec::student_t(param);
  if (name == "dense-corr") return DesignSpec::dense_correlated(param);
  if (name == "sparse-corr") return DesignSpec::sparse_correlated(param);
  throw UsageError("unknown design '" + name + "'");
}

inline std::vector<SimulationScenario> scenarios_from(const SimArgs& a) {
  if (a.rho.empty() && !(a.theta2 && a.sigma2)) throw UsageError("give --rho or both --theta2 and --sigma2");
  if (!a.rho.empty() && (a.theta2 || a.sigma2)) throw UsageError("--rho excludes --theta2/--sigma2");
  if (a.beta == "dense" && a.beta_fraction != 1.0) throw UsageError("--beta-fraction needs --beta sparse");
  const Estimand target = parse_estimand(a.target);
  Method method = Method::EigenPrism;
  if (a.method == "t1") method = Method::ExactT1;
  if (a.method == "bootstrap") method = Method::BootstrapT1;

  std::vector<std::pair<double, double>> levels;
  if (a.rho.empty()) levels.emplace_back(*a.theta2, *a.sigma2);
  for (double r : a.rho) {
    if (!(r >= 0.0 && r <= 1.0)) throw UsageError("--rho values must lie in [0,1]");
    levels.emplace_back(r * a.total, (1.0 - r) * a.total);
  }
  std::vector<SimulationScenario> out;
  for (Index n : a.n) {
    for (auto [t2, s2] : levels) {
      SimulationScenario sc;
      sc.n = n;
      sc.p = a.p;
      sc.design = make_design(a.design, a.design_param);
      sc.beta = a.beta == "sparse" ? BetaSpec::sparse(a.beta_fraction) : BetaSpec::dense();
      sc.noise.t_df = a.noise_df;
      sc.theta2 = t2;
      sc.sigma2 = s2;
      sc.alpha = a.alpha;
      sc.trials = a.trials;
      sc.seed = a.seed;
      sc.target = target;
      sc.method = method;
      sc.options.two_step = a.two_step;
      sc.options.zero_first = a.zero_first;
      sc.whiten_known_cov = a.whiten;
      sc.bootstrap_B = a.bootstrap;
      sc.expected_undercoverage = sc.design.family == DesignFamily::BernoulliIID && sc.design.param <= 0.1 &&
                                  sc.beta.fraction_nonzero <= 0.01;
      out.push_back(sc);
    }
  }
  return out;
}

inline SimArgs merge_config(SimArgs base, const Json& j) {
  auto get = [&](const char* k, auto& dst) {
    if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
  };
  if (j.contains("n")) {
    base.n = j.at("n").is_array() ? j.at("n").get<std::vector<Index>>() : std::vector<Index>{j.at("n").get<Index>()};
  }
  if (j.contains("rho")) {
    base.rho = j.at("rho").is_array() ? j.at("rho").get<std::vector<double>>()
                                      : std::vector<double>{j.at("rho").get<double>()};
  }
  if (j.contains("theta2")) base.theta2 = j.at("theta2").get<double>();
  if (j.contains("sigma2")) base.sigma2 = j.at("sigma2").get<double>();
  get("p", base.p);
  get("design", base.design);
  get("design_param", base.design_param);
  get("beta", base.beta);
  get("beta_fraction", base.beta_fraction);
  get("total", base.total);
  get("alpha", base.alpha);
  get("trials", base.trials);
  get("seed", base.seed);
  get("target", base.target);
  get("method", base.method);
  get("two_step", base.two_step);
  get("zero_first", base.zero_first);
  get("noise_df", base.noise_df);
  get("whiten", base.whiten);
  get("bootstrap", base.bootstrap);
  return base;
}

inline Json report_json(const CoverageReport& r, const std::string& design, const std::string& method) {
  const auto& sc = r.scenario;
  Json j;
  j["n"] = sc.n;
  j["p"] = sc.p;
  j["design"] = design;
  j["design_param"] = sc.design.family == DesignFamily::CorrelatedGaussian ? sc.design.corr_param : sc.design.param;
  j["beta_fraction"] = sc.beta.fraction_nonzero;
  j["theta2"] = sc.theta2;
  j["sigma2"] = sc.sigma2;
  j["target"] = std::string(to_string(sc.target));
  j["method"] = method;
  j["two_step"] = sc.options.two_step;
  j["alpha"] = sc.alpha;
  j["trials"] = sc.trials;
  j["seed"] = sc.seed;
  j["empirical_coverage"] = r.empirical_coverage;
  j["se_coverage"] = r.se_coverage;
  j["mean_width"] = r.mean_width;
  j["mean_point"] = r.mean_point;
  j["completed"] = r.completed;
  j["failure_count"] = r.failure_count;
  if (sc.expected_undercoverage) j["expected_undercoverage"] = true;
  return j;
}

// ----------------------------------------------------------------- mp

struct MpArgs {
  std::optional<double> gamma;
  bool are_curve = false;
  Index grid_n = 1000;
};

inline void add_mp(CLI::App& app, MpArgs& a) {
  auto* s = app.add_subcommand("mp", "Marchenko-Pastur constants and the efficiency curve");
  auto* g = s->add_option("--gamma", a.gamma, "Aspect ratio n/p in (0,1)");
  auto* c = s->add_flag("--are-curve", a.are_curve, "Emit the width-ratio curve over a gamma grid");
  g->excludes(c);
  s->add_option("--grid-n", a.grid_n, "Spectrum size for the optimized-weight ratio");
}

inline Json mp_record(double gamma, Index grid_n) {
  const MPModel m = mp_model(gamma);
  const AREPoint pt = are_point(gamma, grid_n);
  Json j;
  j["gamma"] = gamma;
  j["lo"] = m.support_lo;
  j["hi"] = m.support_hi;
  j["median"] = m.median;
  j["A"] = m.A;
  j["B"] = m.B;
  j["sd"] = m.sd();
  j["are_bound"] = pt.bound;
  j["are_minmax"] = pt.minmax_ratio;
  return j;
}

// ------------------------------------------------------------ weights

struct WeightsArgs {
  std::optional<std::string> lambda;
  std::optional<std::string> data;
  std::string response;
  std::string target = "theta2";
  Index zero_first = 0;
  Index zero_last = 0;
  std::optional<double> rho;
};

inline void add_weights(CLI::App& app, WeightsArgs& a) {
  auto* s = app.add_subcommand("weights", "Optimal weights for a spectrum");
  auto* l = s->add_option("--lambda", a.lambda, "Eigenvalues of XX^T/p, one per line");
  auto* d = s->add_option("--data", a.data, "Dataset whose spectrum is used");
  l->excludes(d);
  s->add_option("--response", a.response, "Response column name when --data is given");
  s->add_option("--target", a.target, "theta2 | sigma2")->check(CLI::IsMember({"theta2", "sigma2"}));
  s->add_option("--zero-first", a.zero_first, "Pin the K largest-eigenvalue weights")->check(CLI::NonNegativeNumber);
  s->add_option("--zero-last", a.zero_last, "Pin the K smallest-eigenvalue weights")->check(CLI::NonNegativeNumber);
  s->add_option("--two-step-rho", a.rho, "Solve the 2-step program at this signal fraction")
      ->check(CLI::Range(0.0, 1.0));
}

inline Json run_weights(const WeightsArgs& a) {
  if (!a.lambda && !a.data) throw UsageError("give --lambda or --data");
  Vector lambda;
  if (a.lambda) {
    lambda = io::read_vector(*a.lambda);
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
  } else {
    lambda = spectral_decompose(io::load_dataset(*a.data, a.response)).lambda;
  }
  const Index n = lambda.size();
  if (a.zero_first + a.zero_last + 2 > n) throw UsageError("pinning leaves fewer than two free weights");
  std::vector<Index> pinned;
  for (Index i = 0; i < a.zero_first; ++i) pinned.push_back(i);
  for (Index i = n - a.zero_last; i < n; ++i) pinned.push_back(i);
  const auto cons = ConstraintSet::for_target(parse_target2(a.target), pinned);

  WeightSolution sol;
  double kkt = 0.0;
  if (a.rho) {
    sol = two_step_weights(lambda, *a.rho, cons);
    Vector c(n);
    for (Index i = 0; i < n; ++i) c[i] = std::max(std::pow(lambda[i] * *a.rho + 1.0 - *a.rho, 2), 1e-12);
    kkt = kkt_residual(lambda, c, sol, cons);
  } else {
    sol = solve_minmax(lambda, cons);
    kkt = kkt_residual(lambda, sol, cons);
  }
  Json j;
  j["target"] = a.target;
  j["mode"] = a.rho ? "two-step" : "minmax";
  j["n"] = n;
  j["objective"] = sol.objective;
  if (!a.rho) j["delta"] = sol.delta;
  j["kappa1"] = sol.kappa1;
  j["kappa2"] = sol.kappa2;
  if (!a.rho) j["duality_gap"] = sol.duality_gap;
  j["kkt_residual"] = kkt;
  j["lambda"] = std::vector<double>(lambda.begin(), lambda.end());
  j["w"] = std::vector<double>(sol.w.begin(), sol.w.end());
  return j;
}

inline std::vector<Json> weights_rows(const Json& rec) {
  std::vector<Json> rows;
  const auto& lam = rec.at("lambda");
  const auto& w = rec.at("w");
  for (std::size_t i = 0; i < lam.size(); ++i) {
    Json r;
    r["i"] = i + 1;
    r["lambda"] = lam[i];
    r["w"] = w[i];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns 0 on success, 2 on usage errors and 1 on data or
/// solver errors.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"EigenPrism interval estimation for high-dimensional linear models", "eigenprism"};
  app.require_subcommand(1);
  std::string format = "json";
  app.add_option("--format", format, "json | table")->check(CLI::IsMember({"json", "table"}));
  int verbose = 0;
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  std::optional<std::string> output;
  app.add_option("-o,--output", output, "Write records to this file instead of stdout");

  detail::FitArgs fit;
  detail::SimArgs sim;
  detail::MpArgs mp;
  detail::WeightsArgs wts;
  detail::add_fit(app, fit);
  detail::add_simulate(app, sim);
  detail::add_mp(app, mp);
  detail::add_weights(app, wts);

  std::vector<std::string> storage{"eigenprism"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  std::ofstream file;
  if (output) {
    file.open(*output);
    if (!file) {
      err << nlohmann::json{{"error", "ParseError"}, {"message", "cannot write " + *output}}.dump() << '\n';
      return 1;
    }
  }
  std::ostream& sink = output ? static_cast<std::ostream&>(file) : out;

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "fit") {
      detail::emit(sink, {detail::run_fit(fit)}, format);
      return 0;
    }
    if (sub == "mp") {
      if (!mp.gamma && !mp.are_curve) throw UsageError("give --gamma or --are-curve");
      std::vector<Json> recs;
      if (mp.gamma) {
        recs.push_back(detail::mp_record(*mp.gamma, mp.grid_n));
      } else {
        for (double g : {0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95}) {
          recs.push_back(detail::mp_record(g, mp.grid_n));
        }
      }
      detail::emit(sink, recs, format);
      return 0;
    }
    if (sub == "weights") {
      const Json rec = detail::run_weights(wts);
      if (format == "table") detail::print_table(sink, detail::weights_rows(rec));
      else sink << rec.dump() << '\n';
      return 0;
    }
    // simulate
    std::vector<detail::SimArgs> jobs;
    if (sim.config) {
      std::ifstream in(*sim.config);
      if (!in) throw Error(ErrorCode::ParseError, "cannot open " + *sim.config);
      Json cfg;
      try {
        cfg = Json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
      }
      if (cfg.is_array()) {
        for (const auto& c : cfg) jobs.push_back(detail::merge_config(sim, c));
      } else {
        jobs.push_back(detail::merge_config(sim, cfg));
      }
    } else {
      jobs.push_back(sim);
    }
    RunOptions ro;
    ro.threads = sim.threads;
    std::vector<Json> recs;
    Index failures = 0;
    for (const auto& job : jobs) {
      for (const auto& sc : detail::scenarios_from(job)) {
        if (verbose) err << "simulate n=" << sc.n << " p=" << sc.p << " theta2=" << sc.theta2 << '\n';
        const CoverageReport rep = run_scenario(sc, ro);
        failures += rep.failure_count;
        recs.push_back(detail::report_json(rep, job.design, job.method));
        if (format == "json") sink << recs.back().dump() << '\n' << std::flush;
      }
    }
    if (format == "table") detail::print_table(sink, recs);
    if (failures > 0 && !sim.allow_failures) {
      err << nlohmann::json{{"error", "TrialFailures"}, {"message", std::to_string(failures) + " trials failed"}}.dump()
          << '\n';
      return 1;
    }
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << nlohmann::json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << nlohmann::json{{"error", "ParseError"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
}

}  // namespace eigenprism::cli
