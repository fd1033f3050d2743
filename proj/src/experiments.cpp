#include "impspec/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "impspec/baselines.hpp"
#include "impspec/rng.hpp"
#include "impspec/simulators.hpp"
#include "impspec/svg.hpp"

namespace impspec {

namespace {

using nlohmann::json;

// Seed streams. Every trial derives its randomness from (master, trial) so
// results do not depend on scheduling order or on other trials failing.
constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kProfileStream = 2;
constexpr std::uint64_t kDataBase = 0x10000;
constexpr std::uint64_t kCalBase = 0x20000;
constexpr std::uint64_t kEffectBase = 0x30000;

Eigen::VectorXd linspace(double lo, double hi, int n) {
  Eigen::VectorXd out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

std::vector<double> interior_alphas() {
  std::vector<double> a(99);
  for (int i = 1; i <= 99; ++i) a[i - 1] = i / 100.0;
  return a;
}

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// One (trial, method) cell of an estimation benchmark.
struct EstCell {
  TrialRecord rec;
  TrialIntervals intervals;
  bool has_intervals = false;
};

struct EstSetup {
  DgpSpec dgp;
  CausalQuery query;
  Eigen::MatrixXd w_points;
  Eigen::MatrixXd z_points;
  Eigen::VectorXd truth;
  Eigen::Index n_in = 0;  // leading points are in-distribution
  Eigen::VectorXd plot_x;
  std::string plot_xlabel;
  std::vector<std::string> methods;
  std::vector<double> omegas{0.0625, 0.25, 1.0, 4.0, 16.0};
  bool collapse_probe = false;  // variance check far outside the data
};

int method_index(const std::vector<std::string>& methods, const std::string& name) {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i] == name) return static_cast<int>(i);
  }
  return -1;
}

EstSetup make_est_setup(const BenchmarkConfig& cfg) {
  EstSetup s;
  if (cfg.experiment == "ablation") {
    s.dgp = DgpSpec{"ablation", cfg.n > 0 ? cfg.n : 100, 0, false};
    s.query = default_query(s.dgp);
    const Eigen::VectorXd grid = linspace(0.0, 1.0, 100);
    s.w_points.resize(grid.size(), 0);
    s.z_points = grid;
    s.n_in = grid.size();
    s.plot_x = grid;
    s.plot_xlabel = "z";
    s.methods = {"impspec", "impspec-nocal",
                 cfg.opt_varsigma ? "bayesimp-opt" : "bayesimp", "sampling-gp"};
  } else if (cfg.experiment == "synthetic") {
    s.dgp = DgpSpec{"synthetic", cfg.n > 0 ? cfg.n : 100, 0, false};
    s.query = default_query(s.dgp);
    const Eigen::VectorXd d_in = linspace(-2.5, 2.5, 50);
    const Eigen::VectorXd d_ood = linspace(6.0, 10.0, 20);
    Eigen::VectorXd d(d_in.size() + d_ood.size());
    d << d_in, d_ood;
    s.w_points.setZero(d.size(), 2);
    s.w_points.col(0) = d;
    s.z_points.setZero(d.size(), 1);
    s.n_in = d_in.size();
    s.plot_x = d;
    s.plot_xlabel = "d";
    s.methods = {"impspec", cfg.opt_varsigma ? "bayesimp-opt" : "bayesimp",
                 "sampling-gp"};
    s.collapse_probe = true;
  } else {
    throw std::invalid_argument("unknown experiment: " + cfg.experiment);
  }
  return s;
}

Eigen::MatrixXd est_oracle_points(const EstSetup& s) {
  if (s.w_points.cols() == 0) return s.z_points;
  // CATE layout: treatment dims then the conditioning value.
  Eigen::MatrixXd pts(s.w_points.rows(), s.w_points.cols());
  pts = s.w_points;
  return pts;
}

TrialIntervals eval_intervals(const EffectEvaluator& eval, const Eigen::MatrixXd& w_points,
                              const Eigen::MatrixXd& z_points) {
  const Eigen::Index np = z_points.rows();
  TrialIntervals out;
  out.mean.resize(np);
  out.sd.resize(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    const Eigen::VectorXd w = w_points.cols() > 0
                                  ? Eigen::VectorXd(w_points.row(p).transpose())
                                  : Eigen::VectorXd(0);
    const PosteriorMoments m = eval.moments(w, z_points.row(p).transpose());
    out.mean[p] = m.mean;
    out.sd[p] = std::sqrt(std::max(m.variance, 0.0));
  }
  return out;
}

double rmse_head(const Eigen::VectorXd& mean, const Eigen::VectorXd& truth, Eigen::Index n) {
  return std::sqrt((mean.head(n) - truth.head(n)).squaredNorm() / static_cast<double>(n));
}

double rmse_tail(const Eigen::VectorXd& mean, const Eigen::VectorXd& truth, Eigen::Index n) {
  return std::sqrt((mean.tail(n) - truth.tail(n)).squaredNorm() / static_cast<double>(n));
}

void add_metric(TrialRecord& rec, const std::string& name, double value) {
  rec.metrics.emplace_back(name, value);
}

void mark_failed(EstCell& cell, const std::string& what) {
  cell.rec.failed = true;
  cell.rec.error = what;
}

std::vector<EstCell> run_est_trial(const EstSetup& s, const BenchmarkConfig& cfg, int trial) {
  std::vector<EstCell> cells(s.methods.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].rec.trial = trial;
    cells[i].rec.method = s.methods[i];
  }

  DgpSpec dgp = s.dgp;
  dgp.seed = sub_seed(cfg.seed, kDataBase + static_cast<std::uint64_t>(trial));
  Dataset data;
  try {
    data = simulate(dgp);
  } catch (const std::exception& e) {
    for (auto& c : cells) mark_failed(c, e.what());
    return cells;
  }

  const Eigen::Index n_ood = s.z_points.rows() - s.n_in;
  auto record_fit = [&](EstCell& cell, const TrialIntervals& ti) {
    cell.intervals = ti;
    cell.has_intervals = true;
    add_metric(cell.rec, "rmse", rmse_head(ti.mean, s.truth, s.n_in));
    if (n_ood > 0) add_metric(cell.rec, "rmse_ood", rmse_tail(ti.mean, s.truth, n_ood));
  };

  const int i_imp = method_index(s.methods, "impspec");
  const int i_nocal = method_index(s.methods, "impspec-nocal");
  const int i_bi = method_index(s.methods, "bayesimp") >= 0
                       ? method_index(s.methods, "bayesimp")
                       : method_index(s.methods, "bayesimp-opt");
  const int i_samp = method_index(s.methods, "sampling-gp");

  std::optional<FittedModel> two_stage;
  std::optional<SpectralMeasure> selected;
  try {
    two_stage = fit_two_stage(data, s.query);
  } catch (const std::exception& e) {
    if (i_imp >= 0) mark_failed(cells[i_imp], e.what());
    if (i_nocal >= 0) mark_failed(cells[i_nocal], e.what());
  }

  if (two_stage && i_nocal >= 0) {
    try {
      Eigen::MatrixXd v = data.d1.columns(data.roles.v);
      if (data.fusion()) {
        const Eigen::MatrixXd v2 = data.d2->columns(data.roles.v);
        Eigen::MatrixXd pooled(v.rows() + v2.rows(), v.cols());
        pooled << v, v2;
        v = pooled;
      }
      const SpectralMeasure base = SpectralMeasure::from_data(v, 1.0);
      record_fit(cells[i_nocal], eval_intervals(EffectEvaluator(*two_stage, base),
                                                s.w_points, s.z_points));
    } catch (const std::exception& e) {
      mark_failed(cells[i_nocal], e.what());
    }
  }

  if (two_stage && i_imp >= 0) {
    try {
      CalibrationGrid grid;
      grid.alphas = interior_alphas();
      grid.w_points = s.w_points;
      grid.z_points = s.z_points;
      grid.omega_candidates = s.omegas;
      CalibrationOptions copts;
      copts.n_boot = cfg.n_boot;
      copts.refit_boot = cfg.refit_boot;
      auto builder = [&s](const Dataset& d) { return fit_two_stage(d, s.query); };
      const SpectralSelection sel = optimize_spectral_measure(
          builder, data, grid, copts,
          sub_seed(cfg.seed, kCalBase + static_cast<std::uint64_t>(trial)));
      selected = sel.measure;
      record_fit(cells[i_imp], eval_intervals(EffectEvaluator(*two_stage, sel.measure),
                                              s.w_points, s.z_points));
      add_metric(cells[i_imp].rec, "omega", sel.omega);
    } catch (const std::exception& e) {
      mark_failed(cells[i_imp], e.what());
    }
  }

  std::optional<BayesimpModel> bayes;
  if (i_bi >= 0) {
    try {
      BayesimpOptions bopts;
      bopts.opt_varsigma = cfg.opt_varsigma;
      bayes = fit_bayesimp(data, s.query, bopts);
      TrialIntervals ti;
      ti.mean.resize(s.z_points.rows());
      ti.sd.resize(s.z_points.rows());
      for (Eigen::Index p = 0; p < s.z_points.rows(); ++p) {
        const Eigen::VectorXd w = s.w_points.cols() > 0
                                      ? Eigen::VectorXd(s.w_points.row(p).transpose())
                                      : Eigen::VectorXd(0);
        const PosteriorMoments m = bayesimp_moments(*bayes, w, s.z_points.row(p).transpose());
        ti.mean[p] = m.mean;
        ti.sd[p] = std::sqrt(std::max(m.variance, 0.0));
      }
      record_fit(cells[i_bi], ti);
    } catch (const std::exception& e) {
      mark_failed(cells[i_bi], e.what());
    }
  }

  if (s.collapse_probe) {
    // Probe the posterior variance far outside the treatment support. The
    // probe point scales with the fitted lengthscales so it stays far out
    // regardless of how the marginal likelihood settles.
    double ls = 0.0;
    if (two_stage) ls = std::max(ls, two_stage->params.stage1.lengthscales[0]);
    if (bayes) ls = std::max(ls, bayes->params.stage1.lengthscales[0]);
    if (ls > 0.0) {
      const double d_max = data.d1.column("D").maxCoeff();
      const double d_star = d_max + 10.0 * ls;
      Eigen::VectorXd w_star(2);
      w_star << d_star, 0.0;
      const Eigen::VectorXd z_star = Eigen::VectorXd::Zero(1);
      if (bayes && i_bi >= 0 && !cells[i_bi].rec.failed) {
        try {
          const PosteriorMoments m = bayesimp_moments(*bayes, w_star, z_star);
          add_metric(cells[i_bi].rec, "var_dstar", m.variance);
          std::vector<double> vars;
          for (Eigen::Index p = 0; p < s.n_in; ++p) {
            vars.push_back(cells[i_bi].intervals.sd[p] * cells[i_bi].intervals.sd[p]);
          }
          add_metric(cells[i_bi].rec, "var_med", median_of(vars));
          add_metric(cells[i_bi].rec, "dstar", d_star);
        } catch (const std::exception& e) {
          mark_failed(cells[i_bi], e.what());
        }
      }
      if (two_stage && selected && i_imp >= 0 && !cells[i_imp].rec.failed) {
        try {
          const EffectEvaluator eval(*two_stage, *selected);
          const PosteriorMoments m = eval.moments(w_star, z_star);
          add_metric(cells[i_imp].rec, "var_dstar", m.variance);
          add_metric(cells[i_imp].rec, "s3_dstar", m.s3);
          add_metric(cells[i_imp].rec, "dstar", d_star);
        } catch (const std::exception& e) {
          mark_failed(cells[i_imp], e.what());
        }
      }
    }
  }

  if (i_samp >= 0) {
    try {
      const SamplingGpModel sm = fit_sampling_gp(data, s.query);
      const std::uint64_t eff_seed =
          sub_seed(cfg.seed, kEffectBase + static_cast<std::uint64_t>(trial));
      TrialIntervals ti;
      ti.mean.resize(s.z_points.rows());
      ti.sd.resize(s.z_points.rows());
      for (Eigen::Index p = 0; p < s.z_points.rows(); ++p) {
        const Eigen::VectorXd w = s.w_points.cols() > 0
                                      ? Eigen::VectorXd(s.w_points.row(p).transpose())
                                      : Eigen::VectorXd(0);
        const SampledEffect se =
            sampling_gp_effect(sm, w, s.z_points.row(p).transpose(), cfg.sampling_draws,
                               sub_seed(eff_seed, static_cast<std::uint64_t>(p)));
        ti.mean[p] = se.mean;
        ti.sd[p] = std::sqrt(std::max(se.variance, 0.0));
      }
      record_fit(cells[i_samp], ti);
    } catch (const std::exception& e) {
      mark_failed(cells[i_samp], e.what());
    }
  }

  return cells;
}

// One (trial, method) cell of a Bayesian optimization benchmark.
struct CboCell {
  TrialRecord rec;
  Eigen::VectorXd best;
  bool has_best = false;
};

struct CboSetup {
  CboTask task;
  Eigen::VectorXd oracle_values;
  double f_star = 0.0;
  std::vector<std::string> methods{"impspec", "bayesimp", "cbo", "bo"};
};

CboSetup make_cbo_setup(const BenchmarkConfig& cfg) {
  std::string task_name;
  if (cfg.experiment == "healthcare-cbo") {
    task_name = "healthcare";
  } else if (cfg.experiment == "synthetic-cbo-frontdoor") {
    task_name = "frontdoor";
  } else if (cfg.experiment == "synthetic-cbo-backdoor") {
    task_name = "backdoor";
  } else {
    throw std::invalid_argument("unknown experiment: " + cfg.experiment);
  }
  CboSetup s;
  s.task = make_cbo_task(task_name, 0, cfg.grid_points);
  if (cfg.n > 0) s.task.dgp.n = cfg.n;
  return s;
}

std::vector<CboCell> run_cbo_trial(const CboSetup& s, const BenchmarkConfig& cfg, int trial) {
  std::vector<CboCell> cells(s.methods.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].rec.trial = trial;
    cells[i].rec.method = s.methods[i];
  }

  CboTask task = s.task;
  task.dgp.seed = sub_seed(cfg.seed, kDataBase + static_cast<std::uint64_t>(trial));
  Dataset data;
  try {
    data = simulate(task.dgp);
  } catch (const std::exception& e) {
    for (auto& c : cells) {
      c.rec.failed = true;
      c.rec.error = e.what();
    }
    return cells;
  }

  auto oracle = [&s](Eigen::Index i) { return s.oracle_values[i]; };
  for (std::size_t i = 0; i < s.methods.size(); ++i) {
    try {
      PriorOptions popts;
      popts.calibrate = cfg.calibrate_cbo_prior;
      popts.cal.n_boot = cfg.n_boot;
      popts.cal.refit_boot = cfg.refit_boot;
      popts.bayesimp.opt_varsigma = cfg.opt_varsigma;
      const SurrogatePrior prior = build_prior(
          prior_kind_from_string(s.methods[i]), task, data, popts,
          sub_seed(cfg.seed, kCalBase + static_cast<std::uint64_t>(trial)));
      BoOptions bopts;
      bopts.iters = cfg.cbo_iters;
      bopts.refit_every = cfg.refit_every;
      bopts.maximize = task.maximize;
      const BoTrace trace = run_cbo(prior, oracle, s.f_star, bopts);
      if (!trace.completed) throw NumericalError("optimization loop aborted");
      cells[i].best = trace.best;
      cells[i].has_best = true;
      add_metric(cells[i].rec, "regret", trace.regret[trace.regret.size() - 1]);
      add_metric(cells[i].rec, "best_final", trace.best[trace.best.size() - 1]);
      if (prior.kind == PriorKind::Impspec) add_metric(cells[i].rec, "omega", prior.omega);
      if (prior.kind == PriorKind::CboPlugin) {
        add_metric(cells[i].rec, "clamps", static_cast<double>(prior.clamp_events));
      }
    } catch (const std::exception& e) {
      cells[i].rec.failed = true;
      cells[i].rec.error = e.what();
    }
  }
  return cells;
}

template <typename Cell, typename Fn>
std::vector<std::vector<Cell>> run_trials(int trials, int jobs, Fn per_trial) {
  std::vector<std::vector<Cell>> out(static_cast<std::size_t>(trials));
  if (jobs <= 1) {
    for (int t = 0; t < trials; ++t) out[static_cast<std::size_t>(t)] = per_trial(t);
    return out;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= trials) return;
      out[static_cast<std::size_t>(t)] = per_trial(t);
    }
  };
  const int n_threads = std::min(jobs, trials);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

// Per-trial metric values for one method, in trial order, failures skipped.
std::vector<double> collect_metric(const std::vector<TrialRecord>& rows,
                                   const std::string& method, const std::string& name) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.method != method || r.failed) continue;
    for (const auto& kv : r.metrics) {
      if (kv.first == name) out.push_back(kv.second);
    }
  }
  return out;
}

std::vector<std::string> metric_names(const std::vector<TrialRecord>& rows,
                                      const std::string& method) {
  std::vector<std::string> names;
  for (const auto& r : rows) {
    if (r.method != method || r.failed) continue;
    for (const auto& kv : r.metrics) {
      if (std::find(names.begin(), names.end(), kv.first) == names.end()) {
        names.push_back(kv.first);
      }
    }
  }
  return names;
}

void aggregate_metrics(BenchmarkResult& result) {
  for (const auto& method : result.methods) {
    for (const auto& name : metric_names(result.rows, method)) {
      const std::vector<double> vals = collect_metric(result.rows, method, name);
      if (vals.empty()) continue;
      result.aggregates.emplace_back(method + "." + name + ".mean", sample_mean(vals));
      result.aggregates.emplace_back(method + "." + name + ".std", sample_std(vals));
    }
  }
}

void check_budget(BenchmarkResult& result) {
  int failed = 0;
  for (const auto& r : result.rows) failed += r.failed ? 1 : 0;
  result.failed_cells = failed;
  result.total_cells = static_cast<int>(result.rows.size());
  if (failed * 5 > result.total_cells) {
    throw FailureBudgetError("too many failed cells: " + std::to_string(failed) + " of " +
                             std::to_string(result.total_cells));
  }
}

TrialIntervals slice_intervals(const TrialIntervals& ti, Eigen::Index start, Eigen::Index len) {
  TrialIntervals out;
  out.mean = ti.mean.segment(start, len);
  out.sd = ti.sd.segment(start, len);
  return out;
}

void add_profile(BenchmarkResult& result, const EstSetup& s,
                 const std::vector<std::vector<EstCell>>& cells, const std::string& method,
                 int m_idx, const std::string& tag, Eigen::Index start, Eigen::Index len,
                 const BenchmarkConfig& cfg) {
  std::vector<TrialIntervals> intervals;
  for (const auto& trial : cells) {
    const EstCell& c = trial[static_cast<std::size_t>(m_idx)];
    if (c.rec.failed || !c.has_intervals) continue;
    intervals.push_back(slice_intervals(c.intervals, start, len));
  }
  if (intervals.size() < 2) return;
  const Eigen::VectorXd truth = s.truth.segment(start, len);
  const CoverageProfile prof =
      coverage_profile(intervals, truth, interior_alphas(), cfg.outer_boot,
                       sub_seed(cfg.seed, kProfileStream));
  const std::string key = tag.empty() ? "cal" : "cal_" + tag;
  result.aggregates.emplace_back(method + "." + key + ".value", prof.total_error);
  result.aggregates.emplace_back(method + "." + key + ".sd", prof.total_sd);
  const std::string pname = tag.empty() ? method : method + "." + tag;
  result.profiles.emplace_back(pname, prof);
}

void add_effect_plot(BenchmarkResult& result, const EstSetup& s,
                     const std::vector<std::vector<EstCell>>& cells, const std::string& name,
                     const std::string& title, Eigen::Index start, Eigen::Index len) {
  PlotGroup plot;
  plot.name = name;
  plot.title = title;
  plot.xlabel = s.plot_xlabel;
  plot.ylabel = "effect";
  CurveData oracle;
  oracle.label = "oracle";
  oracle.color = "#000000";
  oracle.x = s.plot_x.segment(start, len);
  oracle.y = s.truth.segment(start, len);
  oracle.dashed = true;
  plot.curves.push_back(oracle);
  for (std::size_t m = 0; m < s.methods.size(); ++m) {
    for (const auto& trial : cells) {
      const EstCell& c = trial[m];
      if (c.rec.failed || !c.has_intervals) continue;
      CurveData curve;
      curve.label = s.methods[m];
      curve.x = s.plot_x.segment(start, len);
      curve.y = c.intervals.mean.segment(start, len);
      curve.lo = curve.y - 1.96 * c.intervals.sd.segment(start, len);
      curve.hi = curve.y + 1.96 * c.intervals.sd.segment(start, len);
      plot.curves.push_back(curve);
      break;  // first successful trial is representative
    }
  }
  result.plots.push_back(plot);
}

void add_coverage_plot(BenchmarkResult& result, const std::string& name,
                       const std::string& suffix) {
  PlotGroup plot;
  plot.name = name;
  plot.title = "empirical coverage";
  plot.xlabel = "nominal level";
  plot.ylabel = "coverage";
  bool any = false;
  for (const auto& [pname, prof] : result.profiles) {
    const bool tagged = pname.size() > suffix.size() &&
                        pname.compare(pname.size() - suffix.size(), suffix.size(), suffix) == 0;
    if (suffix.empty() ? pname.find('.') != std::string::npos : !tagged) continue;
    CurveData curve;
    curve.label = pname;
    curve.x = Eigen::Map<const Eigen::VectorXd>(prof.alphas.data(),
                                                static_cast<Eigen::Index>(prof.alphas.size()));
    curve.y = prof.coverage;
    curve.lo = prof.band_lo;
    curve.hi = prof.band_hi;
    plot.curves.push_back(curve);
    any = true;
  }
  if (!any) return;
  CurveData diag;
  diag.label = "ideal";
  diag.color = "#000000";
  diag.x = plot.curves[0].x;
  diag.y = diag.x;
  diag.dashed = true;
  plot.curves.push_back(diag);
  result.plots.push_back(plot);
}

BenchmarkResult run_est_benchmark(const BenchmarkConfig& cfg) {
  EstSetup setup = make_est_setup(cfg);
  setup.truth = oracle_effect(setup.dgp, setup.query.estimand, est_oracle_points(setup),
                              cfg.oracle_draws, sub_seed(cfg.seed, kTruthStream));

  const auto cells = run_trials<EstCell>(
      cfg.trials, cfg.jobs, [&](int t) { return run_est_trial(setup, cfg, t); });

  BenchmarkResult result;
  result.config = cfg;
  result.methods = setup.methods;
  for (const auto& trial : cells) {
    for (const auto& c : trial) result.rows.push_back(c.rec);
  }
  check_budget(result);
  aggregate_metrics(result);

  const Eigen::Index n_ood = setup.z_points.rows() - setup.n_in;
  for (std::size_t m = 0; m < setup.methods.size(); ++m) {
    const std::string tag = n_ood > 0 ? "in" : "";
    add_profile(result, setup, cells, setup.methods[m], static_cast<int>(m), tag, 0,
                setup.n_in, cfg);
    if (n_ood > 0) {
      add_profile(result, setup, cells, setup.methods[m], static_cast<int>(m), "ood",
                  setup.n_in, n_ood, cfg);
    }
  }

  if (n_ood > 0) {
    add_effect_plot(result, setup, cells, "effect_in", "posterior effect, in-distribution", 0,
                    setup.n_in);
    add_effect_plot(result, setup, cells, "effect_ood", "posterior effect, extrapolation",
                    setup.n_in, n_ood);
    add_coverage_plot(result, "coverage_in", ".in");
    add_coverage_plot(result, "coverage_ood", ".ood");
  } else {
    add_effect_plot(result, setup, cells, "effect", "posterior effect", 0, setup.n_in);
    add_coverage_plot(result, "coverage", "");
  }
  return result;
}

BenchmarkResult run_cbo_benchmark(const BenchmarkConfig& cfg) {
  CboSetup setup = make_cbo_setup(cfg);
  setup.oracle_values =
      oracle_effect(setup.task.dgp, setup.task.query.estimand, task_oracle_points(setup.task),
                    cfg.oracle_draws, sub_seed(cfg.seed, kTruthStream));
  setup.f_star = setup.task.maximize ? setup.oracle_values.maxCoeff()
                                     : setup.oracle_values.minCoeff();

  const auto cells = run_trials<CboCell>(
      cfg.trials, cfg.jobs, [&](int t) { return run_cbo_trial(setup, cfg, t); });

  BenchmarkResult result;
  result.config = cfg;
  result.methods = setup.methods;
  for (const auto& trial : cells) {
    for (const auto& c : trial) result.rows.push_back(c.rec);
  }
  check_budget(result);
  aggregate_metrics(result);
  result.aggregates.emplace_back("oracle.f_star", setup.f_star);

  PlotGroup plot;
  plot.name = "best_value";
  plot.title = "best observed value";
  plot.xlabel = "iteration";
  plot.ylabel = "effect";
  Eigen::VectorXd iters(cfg.cbo_iters);
  for (int i = 0; i < cfg.cbo_iters; ++i) iters[i] = i + 1;
  for (std::size_t m = 0; m < setup.methods.size(); ++m) {
    std::vector<const Eigen::VectorXd*> traces;
    for (const auto& trial : cells) {
      const CboCell& c = trial[m];
      if (!c.rec.failed && c.has_best && c.best.size() == cfg.cbo_iters) {
        traces.push_back(&c.best);
      }
    }
    if (traces.empty()) continue;
    CurveData curve;
    curve.label = setup.methods[m];
    curve.x = iters;
    curve.y.setZero(cfg.cbo_iters);
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(cfg.cbo_iters);
    for (const auto* tr : traces) curve.y += *tr;
    curve.y /= static_cast<double>(traces.size());
    if (traces.size() > 1) {
      for (const auto* tr : traces) sd += (*tr - curve.y).cwiseAbs2();
      sd = (sd / static_cast<double>(traces.size() - 1)).cwiseSqrt();
    }
    curve.lo = curve.y - sd;
    curve.hi = curve.y + sd;
    plot.curves.push_back(curve);
  }
  CurveData star;
  star.label = "optimum";
  star.color = "#000000";
  star.x = iters;
  star.y = Eigen::VectorXd::Constant(cfg.cbo_iters, setup.f_star);
  star.dashed = true;
  plot.curves.push_back(star);
  result.plots.push_back(plot);
  return result;
}

bool is_cbo_experiment(const std::string& name) {
  return name == "healthcare-cbo" || name == "synthetic-cbo-frontdoor" ||
         name == "synthetic-cbo-backdoor";
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  if (config.trials < 1) throw std::invalid_argument("trials must be positive");
  if (config.jobs < 1) throw std::invalid_argument("jobs must be positive");
  if (is_cbo_experiment(config.experiment)) return run_cbo_benchmark(config);
  return run_est_benchmark(config);
}

std::string config_json(const BenchmarkConfig& config) {
  json j;
  j["experiment"] = config.experiment;
  j["trials"] = config.trials;
  j["n"] = static_cast<long>(config.n);
  j["seed"] = config.seed;
  j["opt_varsigma"] = config.opt_varsigma;
  j["refit_boot"] = config.refit_boot;
  j["n_boot"] = config.n_boot;
  j["outer_boot"] = config.outer_boot;
  j["cbo_iters"] = config.cbo_iters;
  j["refit_every"] = config.refit_every;
  j["grid_points"] = config.grid_points;
  j["sampling_draws"] = config.sampling_draws;
  j["oracle_draws"] = config.oracle_draws;
  j["calibrate_cbo_prior"] = config.calibrate_cbo_prior;
  return j.dump();
}

std::uint64_t config_hash(const BenchmarkConfig& config) {
  const std::string s = config_json(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double aggregate_value(const BenchmarkResult& result, const std::string& key) {
  for (const auto& kv : result.aggregates) {
    if (kv.first == key) return kv.second;
  }
  throw std::out_of_range("no aggregate named " + key);
}

void emit_outputs(const BenchmarkResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> files;

  auto open_out = [&](const std::string& name) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + name + " in " + out_dir);
    return out;
  };

  if (!result.rows.empty()) {
    {
      std::ofstream out = open_out("trials.csv");
      out << "trial,method,metric,value\n";
      for (const auto& r : result.rows) {
        if (r.failed) {
          out << r.trial << "," << r.method << ",failed,1\n";
          continue;
        }
        for (const auto& kv : r.metrics) {
          out << r.trial << "," << r.method << "," << kv.first << ","
              << fmt_double(kv.second) << "\n";
        }
      }
      files.push_back("trials.csv");
    }
    {
      std::ofstream out = open_out("aggregates.csv");
      out << "key,value\n";
      for (const auto& kv : result.aggregates) {
        out << kv.first << "," << fmt_double(kv.second) << "\n";
      }
      files.push_back("aggregates.csv");
    }
    if (!result.profiles.empty()) {
      std::ofstream out = open_out("profiles.csv");
      out << "profile,alpha,coverage,error,band_lo,band_hi\n";
      for (const auto& [name, prof] : result.profiles) {
        for (std::size_t i = 0; i < prof.alphas.size(); ++i) {
          const Eigen::Index k = static_cast<Eigen::Index>(i);
          out << name << "," << fmt_double(prof.alphas[i]) << ","
              << fmt_double(prof.coverage[k]) << "," << fmt_double(prof.error[k]) << ","
              << fmt_double(prof.band_lo[k]) << "," << fmt_double(prof.band_hi[k]) << "\n";
        }
      }
      files.push_back("profiles.csv");
    }
    for (const auto& group : result.plots) {
      SvgPlot plot;
      plot.title = group.title;
      plot.xlabel = group.xlabel;
      plot.ylabel = group.ylabel;
      for (const auto& c : group.curves) {
        SvgSeries series;
        series.label = c.label;
        series.color = c.color;
        series.x = c.x;
        series.y = c.y;
        series.lo = c.lo;
        series.hi = c.hi;
        series.dashed = c.dashed;
        plot.series.push_back(series);
      }
      const std::string fname = group.name + ".svg";
      write_svg(plot, (fs::path(out_dir) / fname).string());
      files.push_back(fname);
    }
  }

  json manifest;
  manifest["config"] = json::parse(config_json(result.config));
  {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(result.config)));
    manifest["config_hash"] = buf;
  }
  manifest["methods"] = result.methods;
  manifest["failed_cells"] = result.failed_cells;
  manifest["total_cells"] = result.total_cells;
  json failures = json::array();
  for (const auto& r : result.rows) {
    if (!r.failed) continue;
    failures.push_back({{"trial", r.trial}, {"method", r.method}, {"error", r.error}});
  }
  manifest["failures"] = failures;
  manifest["files"] = files;
  std::ofstream out = open_out("manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace impspec
