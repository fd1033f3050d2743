// Command-line surface over the library. Every number printed here is the
// untouched return value of a library call.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "impspec/baselines.hpp"
#include "impspec/calibration.hpp"
#include "impspec/cbo.hpp"
#include "impspec/experiments.hpp"
#include "impspec/rng.hpp"
#include "impspec/simulators.hpp"

namespace {

using impspec::Dataset;
using nlohmann::json;

constexpr std::uint64_t kDataStream = 0x10000;
constexpr std::uint64_t kPriorStream = 0x20000;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_hint = -1) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = cols_hint;
  if (cols < 0) cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols) {
      throw std::invalid_argument("ragged matrix in JSON input");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

json table_to_json(const impspec::Table& t) {
  return json{{"names", t.names}, {"rows", matrix_to_json(t.values)}};
}

impspec::Table table_from_json(const json& j) {
  impspec::Table t;
  t.names = j.at("names").get<std::vector<std::string>>();
  t.values = matrix_from_json(j.at("rows"), static_cast<Eigen::Index>(t.names.size()));
  return t;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json roles_to_json(const impspec::RoleMap& r) {
  return json{{"y", r.y}, {"w", r.w}, {"v", r.v}, {"z", r.z}};
}

impspec::RoleMap roles_from_json(const json& j) {
  impspec::RoleMap r;
  r.y = j.at("y").get<std::string>();
  r.w = j.at("w").get<std::vector<std::string>>();
  r.v = j.at("v").get<std::vector<std::string>>();
  r.z = j.at("z").get<std::vector<std::string>>();
  return r;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  json j;
  in >> j;
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << j.dump(2) << "\n";
}

// "2^-4,2^-2,1,4,16" -> {0.0625, 0.25, 1, 4, 16}
std::vector<double> parse_candidates(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    const auto caret = token.find('^');
    double value = 0.0;
    std::size_t used = 0;
    if (caret != std::string::npos) {
      const double base = std::stod(token.substr(0, caret));
      const double expo = std::stod(token.substr(caret + 1), &used);
      if (used != token.size() - caret - 1) {
        throw std::invalid_argument("bad candidate token: " + token);
      }
      value = std::pow(base, expo);
    } else {
      value = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument("bad candidate token: " + token);
    }
    if (!(value > 0.0)) throw std::invalid_argument("candidates must be positive: " + token);
    out.push_back(value);
  }
  if (out.empty()) throw std::invalid_argument("empty candidate list");
  return out;
}

Eigen::MatrixXd pooled_v_rows(const Dataset& data) {
  Eigen::MatrixXd v = data.d1.columns(data.roles.v);
  if (data.fusion()) {
    const Eigen::MatrixXd v2 = data.d2->columns(data.roles.v);
    Eigen::MatrixXd pooled(v.rows() + v2.rows(), v.cols());
    pooled << v, v2;
    return pooled;
  }
  return v;
}

Dataset load_dataset(const std::string& data_csv, const std::string& roles_json,
                     const std::string& fusion_csv) {
  return impspec::read_dataset(
      data_csv, roles_json,
      fusion_csv.empty() ? std::nullopt : std::optional<std::string>(fusion_csv));
}

int cmd_simulate(const std::string& dgp, Eigen::Index n, std::uint64_t seed, bool binary,
                 const std::string& out_dir) {
  impspec::DgpSpec spec{dgp, n, seed, binary};
  const Dataset data = impspec::simulate(spec);
  std::filesystem::create_directories(out_dir);
  impspec::write_dataset(data, out_dir);
  std::cout << "wrote " << out_dir << "/data.csv (" << data.d1.rows() << " rows)";
  if (data.fusion()) std::cout << " and data2.csv (" << data.d2->rows() << " rows)";
  std::cout << "\n";
  return 0;
}

int cmd_fit(const std::string& data_csv, const std::string& roles_json,
            const std::string& fusion_csv, const std::string& out_path) {
  const Dataset data = load_dataset(data_csv, roles_json, fusion_csv);
  impspec::CausalQuery query;
  query.roles = data.roles;
  query.fusion = data.fusion();
  const impspec::FittedModel model = impspec::fit_two_stage(data, query);

  json out;
  out["roles"] = roles_to_json(data.roles);
  out["fusion"] = data.fusion();
  out["params"] = {
      {"stage1",
       {{"lengthscales", vector_to_json(model.params.stage1.lengthscales)},
        {"amplitude", model.params.stage1.amplitude}}},
      {"stage2",
       {{"lengthscales", vector_to_json(model.params.stage2.lengthscales)},
        {"amplitude", model.params.stage2.amplitude}}},
      {"sigma2", model.params.sigma2},
      {"eta2", model.params.eta2}};
  out["data"] = table_to_json(data.d1);
  if (data.fusion()) out["data2"] = table_to_json(*data.d2);
  write_json_file(out, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_effect(const std::string& model_path, const std::string& query_path,
               const std::string& points_csv, double measure_omega) {
  const json mj = read_json_file(model_path);
  Dataset data;
  data.d1 = table_from_json(mj.at("data"));
  data.roles = roles_from_json(mj.at("roles"));
  if (mj.at("fusion").get<bool>()) data.d2 = table_from_json(mj.at("data2"));

  impspec::CausalQuery query;
  query.roles = data.roles;
  query.fusion = data.fusion();
  const json qj = read_json_file(query_path);
  query.estimand = impspec::parse_estimand(qj.at("estimand").get<std::string>());

  impspec::ModelParams params;
  const json& pj = mj.at("params");
  params.stage1.lengthscales = vector_from_json(pj.at("stage1").at("lengthscales"));
  params.stage1.amplitude = pj.at("stage1").at("amplitude").get<double>();
  params.stage2.lengthscales = vector_from_json(pj.at("stage2").at("lengthscales"));
  params.stage2.amplitude = pj.at("stage2").at("amplitude").get<double>();
  params.sigma2 = pj.at("sigma2").get<double>();
  params.eta2 = pj.at("eta2").get<double>();

  const impspec::FittedModel model = impspec::build_fitted(data, query, params);
  const impspec::SpectralMeasure measure =
      impspec::SpectralMeasure::from_data(pooled_v_rows(data), measure_omega);
  const impspec::EffectEvaluator eval(model, measure);

  const impspec::Table points = impspec::read_csv(points_csv);
  const Eigen::MatrixXd wp = points.columns(data.roles.w);
  const Eigen::MatrixXd zp = points.columns(data.roles.z);

  for (const auto& name : data.roles.w) std::cout << name << ",";
  for (const auto& name : data.roles.z) std::cout << name << ",";
  std::cout << "mean,variance,s1,s2,s3\n";
  char buf[40];
  auto emit = [&buf](double x, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    std::cout << buf << sep;
  };
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const impspec::PosteriorMoments m =
        eval.moments(wp.row(i).transpose(), zp.row(i).transpose());
    for (Eigen::Index j = 0; j < wp.cols(); ++j) emit(wp(i, j), ',');
    for (Eigen::Index j = 0; j < zp.cols(); ++j) emit(zp(i, j), ',');
    emit(m.mean, ',');
    emit(m.variance, ',');
    emit(m.s1, ',');
    emit(m.s2, ',');
    emit(m.s3, '\n');
  }
  return 0;
}

int cmd_calibrate(const std::string& data_csv, const std::string& roles_json,
                  const std::string& fusion_csv, const std::string& grid_path,
                  const std::string& candidates, int n_boot, bool refit_boot,
                  std::uint64_t seed) {
  const Dataset data = load_dataset(data_csv, roles_json, fusion_csv);
  impspec::CausalQuery query;
  query.roles = data.roles;
  query.fusion = data.fusion();

  const json gj = read_json_file(grid_path);
  impspec::CalibrationGrid grid;
  grid.alphas = gj.at("alphas").get<std::vector<double>>();
  grid.z_points = matrix_from_json(gj.at("z"));
  if (gj.contains("w")) {
    grid.w_points = matrix_from_json(gj.at("w"));
    if (grid.w_points.rows() == 0) grid.w_points.resize(grid.z_points.rows(), 0);
  } else {
    grid.w_points.resize(grid.z_points.rows(), 0);
  }
  grid.omega_candidates = parse_candidates(candidates);

  impspec::CalibrationOptions opts;
  opts.n_boot = n_boot;
  opts.refit_boot = refit_boot;
  auto builder = [&query](const Dataset& d) { return impspec::fit_two_stage(d, query); };
  const impspec::SpectralSelection sel =
      impspec::optimize_spectral_measure(builder, data, grid, opts, seed);

  json out;
  out["omega"] = sel.omega;
  json errs = json::array();
  for (std::size_t i = 0; i < grid.omega_candidates.size(); ++i) {
    errs.push_back({{"omega", grid.omega_candidates[i]}, {"error", sel.errors[i]}});
  }
  out["errors"] = errs;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_benchmark(const impspec::BenchmarkConfig& config, const std::string& out_dir) {
  const impspec::BenchmarkResult result = impspec::run_benchmark(config);
  impspec::emit_outputs(result, out_dir);
  std::cout << "wrote " << out_dir << " (" << result.total_cells - result.failed_cells << "/"
            << result.total_cells << " cells ok)\n";
  return 0;
}

int cmd_cbo_batch(const std::string& task_name, const std::string& method, int iters,
                  int refit_every, int trials, Eigen::Index n, int grid_points,
                  long oracle_draws, bool calibrate_prior, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be positive");
  impspec::CboTask task = impspec::make_cbo_task(task_name, 0, grid_points);
  if (n > 0) task.dgp.n = n;
  const Eigen::VectorXd values = impspec::oracle_effect(
      task.dgp, task.query.estimand, impspec::task_oracle_points(task), oracle_draws,
      impspec::sub_seed(seed, 1));
  const double f_star = task.maximize ? values.maxCoeff() : values.minCoeff();

  std::vector<double> regrets, bests;
  int failed = 0;
  for (int t = 0; t < trials; ++t) {
    try {
      impspec::CboTask trial_task = task;
      trial_task.dgp.seed = impspec::sub_seed(seed, kDataStream + static_cast<std::uint64_t>(t));
      const Dataset data = impspec::simulate(trial_task.dgp);
      impspec::PriorOptions popts;
      popts.calibrate = calibrate_prior;
      const impspec::SurrogatePrior prior = impspec::build_prior(
          impspec::prior_kind_from_string(method), trial_task, data, popts,
          impspec::sub_seed(seed, kPriorStream + static_cast<std::uint64_t>(t)));
      impspec::BoOptions bopts;
      bopts.iters = iters;
      bopts.refit_every = refit_every;
      bopts.maximize = task.maximize;
      const impspec::BoTrace trace =
          impspec::run_cbo(prior, [&values](Eigen::Index i) { return values[i]; }, f_star, bopts);
      if (!trace.completed) throw impspec::NumericalError("optimization loop aborted");
      regrets.push_back(trace.regret[trace.regret.size() - 1]);
      bests.push_back(trace.best[trace.best.size() - 1]);
    } catch (const impspec::FailureBudgetError&) {
      throw;
    } catch (const std::exception&) {
      ++failed;
    }
  }
  if (failed * 5 > trials) {
    throw impspec::FailureBudgetError("too many failed trials: " + std::to_string(failed) +
                                      " of " + std::to_string(trials));
  }

  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  auto std_of = [&mean_of](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  json out;
  out["task"] = task_name;
  out["method"] = method;
  out["trials"] = trials;
  out["failed"] = failed;
  out["f_star"] = f_star;
  out["regret"] = {{"mean", mean_of(regrets)}, {"std", std_of(regrets)}};
  out["best"] = {{"mean", mean_of(bests)}, {"std", std_of(bests)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

// One suggest/observe step. The trace file accumulates queried indices and
// externally supplied observations; every invocation rebuilds the prior
// deterministically from the recorded seed and replays the loop so far.
int cmd_cbo_resume(const std::string& trace_path, const std::string& task_name,
                   const std::string& method, int iters, int refit_every, Eigen::Index n,
                   int grid_points, bool calibrate_prior, bool have_seed, std::uint64_t seed) {
  json tr;
  if (std::filesystem::exists(trace_path)) {
    tr = read_json_file(trace_path);
  } else {
    if (task_name.empty() || method.empty() || !have_seed) {
      throw std::invalid_argument(
          "new trace needs --task, --method and --seed; " + trace_path + " does not exist");
    }
    tr["task"] = task_name;
    tr["method"] = method;
    tr["seed"] = seed;
    tr["n"] = static_cast<long>(n);
    tr["iters"] = iters;
    tr["refit_every"] = refit_every;
    tr["grid_points"] = grid_points;
    tr["calibrate"] = calibrate_prior;
    tr["queried"] = json::array();
    tr["observed"] = json::array();
  }

  impspec::CboTask task =
      impspec::make_cbo_task(tr.at("task").get<std::string>(), 0,
                             tr.at("grid_points").get<int>());
  const std::uint64_t trace_seed = tr.at("seed").get<std::uint64_t>();
  if (tr.at("n").get<long>() > 0) task.dgp.n = tr.at("n").get<long>();
  task.dgp.seed = impspec::sub_seed(trace_seed, kDataStream);
  const Dataset data = impspec::simulate(task.dgp);
  impspec::PriorOptions popts;
  popts.calibrate = tr.value("calibrate", true);
  const impspec::SurrogatePrior prior = impspec::build_prior(
      impspec::prior_kind_from_string(tr.at("method").get<std::string>()), task, data, popts,
      impspec::sub_seed(trace_seed, kPriorStream));

  std::vector<Eigen::Index> queried;
  for (const auto& q : tr.at("queried")) queried.push_back(q.get<Eigen::Index>());
  std::vector<double> observed = tr.at("observed").get<std::vector<double>>();
  const int total = tr.at("iters").get<int>();
  if (observed.size() > queried.size() || queried.size() > observed.size() + 1) {
    throw std::invalid_argument("trace out of step: queried " + std::to_string(queried.size()) +
                                ", observed " + std::to_string(observed.size()));
  }

  json out;
  if (queried.size() == observed.size() + 1) {
    // previous suggestion still awaiting its observation
    out["iteration"] = static_cast<int>(queried.size());
    out["suggest_index"] = queried.back();
    out["suggest_x"] = task.grid[queried.back()];
    out["pending"] = true;
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  if (static_cast<int>(observed.size()) >= total) {
    double best = observed[0];
    for (double y : observed) best = task.maximize ? std::max(best, y) : std::min(best, y);
    out["completed"] = true;
    out["best"] = best;
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  impspec::BoOptions bopts;
  bopts.iters = total;
  bopts.refit_every = tr.at("refit_every").get<int>();
  bopts.maximize = task.maximize;
  Eigen::Index pending = -1;
  auto probe = [&pending](Eigen::Index i) -> double {
    pending = i;
    throw impspec::NumericalError("awaiting external observation");
  };
  impspec::run_cbo(prior, probe, 0.0, bopts, queried, observed);
  if (pending < 0) throw impspec::NumericalError("no suggestion produced");

  tr["queried"].push_back(pending);
  write_json_file(tr, trace_path);
  out["iteration"] = static_cast<int>(queried.size()) + 1;
  out["suggest_index"] = pending;
  out["suggest_x"] = task.grid[pending];
  out["pending"] = false;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int jobs_or_env(const CLI::App* sub, int jobs) {
  if (sub->count("--jobs") > 0) return jobs;
  const char* env = std::getenv("IMPSPEC_JOBS");
  if (env != nullptr && *env != '\0') {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  return jobs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP posteriors over causal effects"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a dataset from a named simulator");
  std::string sim_dgp, sim_out;
  Eigen::Index sim_n = 100;
  std::uint64_t sim_seed = 0;
  bool sim_binary = false;
  sim->add_option("--dgp", sim_dgp)->required();
  sim->add_option("--n", sim_n)->required();
  sim->add_option("--seed", sim_seed)->required();
  sim->add_flag("--binary", sim_binary);
  sim->add_option("--out", sim_out)->required();

  // fit
  auto* fit = app.add_subcommand("fit", "two-stage hyperparameter fit");
  std::string fit_data, fit_roles, fit_fusion, fit_out;
  fit->add_option("--data", fit_data)->required();
  fit->add_option("--roles", fit_roles)->required();
  fit->add_option("--fusion", fit_fusion);
  fit->add_option("--out", fit_out)->required();

  // effect
  auto* eff = app.add_subcommand("effect", "posterior moments at query points");
  std::string eff_model, eff_query, eff_points;
  double eff_omega = 1.0;
  eff->add_option("--model", eff_model)->required();
  eff->add_option("--query", eff_query)->required();
  eff->add_option("--points", eff_points)->required();
  eff->add_option("--measure-omega", eff_omega);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "bootstrap selection of the measure scale");
  std::string cal_data, cal_roles, cal_fusion, cal_grid;
  std::string cal_candidates = "2^-4,2^-2,1,4,16";
  int cal_boot = 20;
  bool cal_refit = false;
  std::uint64_t cal_seed = 0;
  cal->add_option("--data", cal_data)->required();
  cal->add_option("--roles", cal_roles)->required();
  cal->add_option("--fusion", cal_fusion);
  cal->add_option("--grid", cal_grid)->required();
  cal->add_option("--boot", cal_boot);
  cal->add_option("--candidates", cal_candidates);
  cal->add_flag("--refit-boot", cal_refit);
  cal->add_option("--seed", cal_seed)->required();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "run a named experiment");
  impspec::BenchmarkConfig bc;
  std::string bench_out;
  bool bench_no_cal_prior = false;
  bench->add_option("--experiment", bc.experiment)->required();
  bench->add_option("--trials", bc.trials)->required();
  bench->add_option("--seed", bc.seed)->required();
  bench->add_option("--out", bench_out)->required();
  bench->add_option("--n", bc.n);
  bench->add_option("--jobs", bc.jobs);
  bench->add_flag("--opt-varsigma", bc.opt_varsigma);
  bench->add_flag("--refit-boot", bc.refit_boot);
  bench->add_option("--boot", bc.n_boot);
  bench->add_option("--outer-boot", bc.outer_boot);
  bench->add_option("--iters", bc.cbo_iters);
  bench->add_option("--refit-every", bc.refit_every);
  bench->add_option("--grid-points", bc.grid_points);
  bench->add_option("--sampling-draws", bc.sampling_draws);
  bench->add_option("--oracle-draws", bc.oracle_draws);
  bench->add_flag("--no-calibrate-prior", bench_no_cal_prior);

  // cbo
  auto* cbo = app.add_subcommand("cbo", "Bayesian optimization over a causal task");
  std::string cbo_task, cbo_method, cbo_resume;
  int cbo_iters = 10, cbo_refit = 3, cbo_trials = 1, cbo_grid = 200;
  Eigen::Index cbo_n = 0;
  long cbo_oracle_draws = 100000;
  bool cbo_no_cal = false;
  std::uint64_t cbo_seed = 0;
  cbo->add_option("--task", cbo_task);
  cbo->add_option("--method", cbo_method);
  cbo->add_option("--iters", cbo_iters);
  cbo->add_option("--refit-every", cbo_refit);
  cbo->add_option("--trials", cbo_trials);
  cbo->add_option("--n", cbo_n);
  cbo->add_option("--grid-points", cbo_grid);
  cbo->add_option("--oracle-draws", cbo_oracle_draws);
  cbo->add_flag("--no-calibrate-prior", cbo_no_cal);
  cbo->add_option("--seed", cbo_seed);
  cbo->add_option("--resume", cbo_resume);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_dgp, sim_n, sim_seed, sim_binary, sim_out);
    if (fit->parsed()) return cmd_fit(fit_data, fit_roles, fit_fusion, fit_out);
    if (eff->parsed()) return cmd_effect(eff_model, eff_query, eff_points, eff_omega);
    if (cal->parsed()) {
      return cmd_calibrate(cal_data, cal_roles, cal_fusion, cal_grid, cal_candidates, cal_boot,
                           cal_refit, cal_seed);
    }
    if (bench->parsed()) {
      bc.jobs = jobs_or_env(bench, bc.jobs);
      bc.calibrate_cbo_prior = !bench_no_cal_prior;
      return cmd_benchmark(bc, bench_out);
    }
    if (cbo->parsed()) {
      if (!cbo_resume.empty()) {
        return cmd_cbo_resume(cbo_resume, cbo_task, cbo_method, cbo_iters, cbo_refit, cbo_n,
                              cbo_grid, !cbo_no_cal, cbo->count("--seed") > 0, cbo_seed);
      }
      if (cbo_task.empty() || cbo_method.empty() || cbo->count("--seed") == 0) {
        throw std::invalid_argument("cbo needs --task, --method and --seed");
      }
      return cmd_cbo_batch(cbo_task, cbo_method, cbo_iters, cbo_refit, cbo_trials, cbo_n,
                           cbo_grid, cbo_oracle_draws, !cbo_no_cal, cbo_seed);
    }
    throw std::invalid_argument("no subcommand given");
  } catch (const impspec::FailureBudgetError& e) {
    std::cerr << "failure budget exceeded: " << e.what() << "\n";
    return 4;
  } catch (const impspec::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const impspec::IoError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
