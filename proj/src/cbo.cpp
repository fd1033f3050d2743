#include "impspec/cbo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "impspec/linalg.hpp"

namespace impspec {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143268;
constexpr double kLog2Pi = 1.8378770664093454836;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

Eigen::VectorXd linspace(double lo, double hi, int n) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace

PriorKind prior_kind_from_string(const std::string& name) {
  if (name == "impspec") return PriorKind::Impspec;
  if (name == "bayesimp") return PriorKind::Bayesimp;
  if (name == "cbo" || name == "cbo_plugin") return PriorKind::CboPlugin;
  if (name == "bo" || name == "plain") return PriorKind::Plain;
  throw std::invalid_argument("unknown prior kind: " + name);
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::Impspec: return "impspec";
    case PriorKind::Bayesimp: return "bayesimp";
    case PriorKind::CboPlugin: return "cbo";
    case PriorKind::Plain: return "bo";
  }
  return "unknown";
}

Eigen::VectorXd CboTask::w_point(double x) const {
  if (query.roles.w.empty()) return Eigen::VectorXd(0);
  if (query.estimand == Estimand::Cate) {
    Eigen::VectorXd w(2);
    w << x, 0.0;  // intervened value, conditioning pinned at 0
    return w;
  }
  return Eigen::VectorXd::Zero(1);  // treated-group value pinned at 0
}

Eigen::VectorXd CboTask::z_point(double x) const {
  if (averaged()) {
    Eigen::VectorXd z(1);
    z << x;
    return z;  // grid dimension only; marginal dims averaged separately
  }
  Eigen::VectorXd z(1);
  z << (query.estimand == Estimand::Cate ? 0.0 : x);
  return z;
}

CboTask make_cbo_task(const std::string& name, std::uint64_t seed, int n_grid) {
  if (n_grid < 2) throw std::invalid_argument("make_cbo_task: n_grid must be >= 2");
  CboTask t;
  if (name == "frontdoor" || name == "synthetic-cbo-frontdoor") {
    t.name = "frontdoor";
    t.dgp = DgpSpec{"synthetic", 500, seed, false};
    t.query.estimand = Estimand::Att;
    t.query.roles = RoleMap{"Y", {"B"}, {"C"}, {"B"}};
    t.query.fusion = false;
    t.maximize = true;
    t.grid = linspace(-5.0, 5.0, n_grid);
  } else if (name == "backdoor" || name == "synthetic-cbo-backdoor") {
    t.name = "backdoor";
    t.dgp = DgpSpec{"synthetic", 100, seed, false};
    t.query = default_query(t.dgp);
    t.maximize = false;
    t.grid = linspace(-5.0, 5.0, n_grid);
  } else if (name == "healthcare" || name == "healthcare-cbo") {
    t.name = "healthcare";
    t.dgp = DgpSpec{"healthcare", 100, seed, false};
    t.query = default_query(t.dgp);
    t.maximize = false;
    t.grid = linspace(0.0, 1.0, n_grid);
    t.ate_grid_dims = {0};        // statin
    t.ate_marginal_dims = {1, 2};  // age, bmi
  } else {
    throw std::invalid_argument("unknown cbo task: " + name);
  }
  t.dgp.seed = seed;
  return t;
}

Eigen::MatrixXd task_oracle_points(const CboTask& task) {
  const auto n = task.grid.size();
  if (task.name == "healthcare") {
    return task.grid;
  }
  // synthetic layouts carry (intervened, conditioning) pairs
  Eigen::MatrixXd pts(n, 2);
  pts.col(0) = task.grid;
  pts.col(1).setZero();
  return pts;
}

namespace {

KernelParams default_rbf(const Eigen::VectorXd& grid) {
  KernelParams p;
  p.lengthscales = Eigen::VectorXd::Constant(1, (grid.maxCoeff() - grid.minCoeff()) / 5.0);
  p.amplitude = 1.0;
  return p;
}

Eigen::MatrixXd marginal_rows(const CboTask& task, const Dataset& data) {
  const Table& t2 = data.stage2_table();
  Eigen::MatrixXd z2 = t2.columns(task.query.roles.z);
  Eigen::MatrixXd out(z2.rows(), static_cast<Eigen::Index>(task.ate_marginal_dims.size()));
  for (std::size_t j = 0; j < task.ate_marginal_dims.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = z2.col(task.ate_marginal_dims[j]);
  return out;
}

// Calibration evaluates the pointwise effect on the task grid; averaged tasks
// pin the marginal dimensions at their empirical means.
CalibrationGrid calibration_grid(const CboTask& task, const Dataset& data,
                                 const std::vector<double>& omegas) {
  CalibrationGrid g;
  g.omega_candidates = omegas;
  g.alphas.reserve(99);
  for (int i = 1; i <= 99; ++i) g.alphas.push_back(static_cast<double>(i) / 100.0);
  const auto n = task.grid.size();
  if (task.averaged()) {
    const Eigen::MatrixXd marg = marginal_rows(task, data);
    const Eigen::VectorXd means = marg.colwise().mean();
    g.w_points.resize(n, 0);
    g.z_points.resize(n, 1 + means.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      g.z_points(i, 0) = task.grid[i];
      g.z_points.row(i).tail(means.size()) = means.transpose();
    }
    return g;
  }
  const Eigen::VectorXd w0 = task.w_point(task.grid[0]);
  g.w_points.resize(n, w0.size());
  g.z_points.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.w_points.row(i) = task.w_point(task.grid[i]).transpose();
    g.z_points.row(i) = task.z_point(task.grid[i]).transpose();
  }
  return g;
}

// mean (and optionally covariance) of the effect over the task grid for a
// fitted two-stage model under the given measure
void grid_moments(const CboTask& task, const Dataset& data, const FittedModel& model,
                  const SpectralMeasure& measure, bool want_cov, Eigen::VectorXd& mean,
                  Eigen::MatrixXd& cov) {
  const EffectEvaluator eval(model, measure);
  const auto n = task.grid.size();
  if (task.averaged()) {
    const AteCurve curve = ate_profile(eval, task.grid, task.ate_grid_dims,
                                       marginal_rows(task, data), task.ate_marginal_dims);
    mean = curve.mean;
    if (want_cov) cov = 0.5 * (curve.cov + curve.cov.transpose());
    return;
  }
  mean.resize(n);
  if (want_cov) cov.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PosteriorMoments m = eval.moments(task.w_point(task.grid[i]), task.z_point(task.grid[i]));
    mean[i] = m.mean;
    if (want_cov) cov(i, i) = m.variance;
  }
  if (!want_cov) return;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = eval.cross_cov(task.w_point(task.grid[i]), task.z_point(task.grid[i]),
                                      task.w_point(task.grid[j]), task.z_point(task.grid[j]));
      cov(i, j) = c;
      cov(j, i) = c;
    }
}

Eigen::MatrixXd pooled_v(const Dataset& data) {
  const Eigen::MatrixXd v1 = data.d1.columns(data.roles.v);
  if (!data.fusion()) return v1;
  const Eigen::MatrixXd v2 = data.d2->columns(data.roles.v);
  Eigen::MatrixXd out(v1.rows() + v2.rows(), v1.cols());
  out.topRows(v1.rows()) = v1;
  out.bottomRows(v2.rows()) = v2;
  return out;
}

}  // namespace

SurrogatePrior build_prior(PriorKind kind, const CboTask& task, const Dataset& data,
                           const PriorOptions& opts, std::uint64_t seed) {
  SurrogatePrior prior;
  prior.kind = kind;
  prior.grid = task.grid;
  prior.rbf = default_rbf(task.grid);
  const auto n = task.grid.size();

  if (kind == PriorKind::Plain) {
    prior.mean = Eigen::VectorXd::Zero(n);
    prior.cov = Eigen::MatrixXd::Zero(n, n);
    return prior;
  }

  Dataset fit_data = data;
  fit_data.roles = task.query.roles;

  if (kind == PriorKind::Bayesimp) {
    const BayesimpModel model = fit_bayesimp(fit_data, task.query, opts.bayesimp);
    if (task.averaged()) {
      const AteCurve curve = bayesimp_ate_profile(model, task.grid, task.ate_grid_dims,
                                                  marginal_rows(task, fit_data),
                                                  task.ate_marginal_dims);
      prior.mean = curve.mean;
      prior.cov = 0.5 * (curve.cov + curve.cov.transpose());
      return prior;
    }
    prior.mean.resize(n);
    prior.cov.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const PosteriorMoments m =
          bayesimp_moments(model, task.w_point(task.grid[i]), task.z_point(task.grid[i]));
      prior.mean[i] = m.mean;
      prior.cov(i, i) = m.variance;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double c = bayesimp_cross_cov(
            model, task.w_point(task.grid[i]), task.z_point(task.grid[i]),
            task.w_point(task.grid[j]), task.z_point(task.grid[j]));
        prior.cov(i, j) = c;
        prior.cov(j, i) = c;
      }
    return prior;
  }

  const FittedModel model = fit_two_stage(fit_data, task.query, opts.adam);

  if (kind == PriorKind::CboPlugin) {
    // informed mean plus a rank-1 sd(x) sd(x') covariance from the plug-in
    // second moment; measure choice does not affect posterior means
    const SpectralMeasure measure = SpectralMeasure::from_data(pooled_v(fit_data), 1.0);
    Eigen::VectorXd ey;
    Eigen::MatrixXd unused;
    grid_moments(task, fit_data, model, measure, false, ey, unused);

    Dataset squared = fit_data;
    const Eigen::Index ycol = squared.d1.col_index(task.query.roles.y);
    squared.d1.values.col(ycol) = squared.d1.values.col(ycol).array().square();
    const FittedModel model2 = build_fitted(squared, task.query, model.params);
    Eigen::VectorXd ey2;
    grid_moments(task, squared, model2, measure, false, ey2, unused);

    Eigen::VectorXd sd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double var = ey2[i] - ey[i] * ey[i];
      if (var < 0.0) {
        var = 0.0;
        ++prior.clamp_events;
      }
      sd[i] = std::sqrt(var);
    }
    prior.mean = ey;
    prior.cov = sd * sd.transpose();
    return prior;
  }

  // impspec: posterior mean/covariance under the (optionally calibrated)
  // spectral measure
  SpectralMeasure measure = SpectralMeasure::from_data(pooled_v(fit_data), 1.0);
  if (opts.calibrate) {
    const CalibrationGrid grid = calibration_grid(task, fit_data, opts.omega_candidates);
    const ModelBuilder builder = [&](const Dataset& d) {
      return fit_two_stage(d, task.query, opts.adam);
    };
    const SpectralSelection sel =
        optimize_spectral_measure(builder, fit_data, grid, opts.cal, seed);
    measure = sel.measure;
    prior.omega = sel.omega;
  }
  grid_moments(task, fit_data, model, measure, true, prior.mean, prior.cov);
  return prior;
}

double expected_improvement(double mean, double sd, double incumbent, bool maximize) {
  if (sd < 0.0) throw std::invalid_argument("expected_improvement: sd must be >= 0");
  const double imp = maximize ? mean - incumbent : incumbent - mean;
  if (sd == 0.0) return std::max(imp, 0.0);
  const double z = imp / sd;
  return std::max(imp * normal_cdf(z) + sd * normal_pdf(z), 0.0);
}

namespace {

Eigen::Index arg_best(const Eigen::VectorXd& values, bool maximize) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    const bool better = maximize ? values[i] > values[best] : values[i] < values[best];
    if (better) best = i;
  }
  return best;
}

struct Surrogate {
  const SurrogatePrior* prior;
  KernelParams rbf;
  Eigen::MatrixXd full_cov;  // prior.cov + additive gram over the grid

  explicit Surrogate(const SurrogatePrior& p) : prior(&p), rbf(p.rbf) { rebuild(); }

  void rebuild() {
    full_cov = prior->cov + gram(rbf, prior->grid);
  }

  // observed-data marginal likelihood of the residuals under the additive
  // kernel parameters in log space; used for the periodic refit
  void refit(const std::vector<Eigen::Index>& obs, const Eigen::VectorXd& y,
             double jitter, const AdamConfig& cfg) {
    const auto m = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd x(m, 1);
    Eigen::MatrixXd prior_block(m, m);
    Eigen::VectorXd resid(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      x(i, 0) = prior->grid[obs[static_cast<std::size_t>(i)]];
      resid[i] = y[i] - prior->mean[obs[static_cast<std::size_t>(i)]];
      for (Eigen::Index j = 0; j < m; ++j)
        prior_block(i, j) = prior->cov(obs[static_cast<std::size_t>(i)],
                                       obs[static_cast<std::size_t>(j)]);
    }
    const auto objective = [&](const Eigen::VectorXd& theta) -> double {
      try {
        KernelParams p;
        p.lengthscales = Eigen::VectorXd::Constant(1, std::exp(theta[0]));
        p.amplitude = std::exp(theta[1]);
        Eigen::MatrixXd c = prior_block + gram(p, x);
        c.diagonal().array() += jitter;
        const CholFactor chol(c);
        const Eigen::VectorXd alpha = chol.solve(resid);
        const double ll = -0.5 * resid.dot(alpha) - 0.5 * chol.log_det() -
                          0.5 * static_cast<double>(m) * kLog2Pi;
        return std::isfinite(ll) ? ll : -1e100;
      } catch (const NumericalError&) {
        return -1e100;
      }
    };
    Eigen::VectorXd theta0(2);
    theta0 << std::log(rbf.lengthscales[0]), std::log(rbf.amplitude);
    const AdamResult res = adam_maximize(objective, theta0, cfg);
    rbf.lengthscales = Eigen::VectorXd::Constant(1, std::exp(res.x[0]));
    rbf.amplitude = std::exp(res.x[1]);
    rebuild();
  }

  // posterior mean/sd on the full grid given noise-free observations
  void condition(const std::vector<Eigen::Index>& obs, const Eigen::VectorXd& y,
                 double jitter, Eigen::VectorXd& mean, Eigen::VectorXd& sd) const {
    const auto m = static_cast<Eigen::Index>(obs.size());
    const auto n = prior->grid.size();
    if (m == 0) {
      mean = prior->mean;
      sd = full_cov.diagonal().array().max(0.0).sqrt();
      return;
    }
    Eigen::MatrixXd sub(m, m);
    Eigen::MatrixXd cross(m, n);
    Eigen::VectorXd resid(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index oi = obs[static_cast<std::size_t>(i)];
      resid[i] = y[i] - prior->mean[oi];
      cross.row(i) = full_cov.row(oi);
      for (Eigen::Index j = 0; j < m; ++j)
        sub(i, j) = full_cov(oi, obs[static_cast<std::size_t>(j)]);
    }
    sub.diagonal().array() += jitter;
    const CholFactor chol(sub);
    mean = prior->mean + cross.transpose() * chol.solve(resid);
    const Eigen::MatrixXd fwd = chol.forward(cross);
    sd = (full_cov.diagonal() - fwd.colwise().squaredNorm().transpose())
             .array()
             .max(0.0)
             .sqrt();
  }
};

}  // namespace

BoTrace run_cbo(const SurrogatePrior& prior,
                const std::function<double(Eigen::Index)>& oracle, double f_star,
                const BoOptions& opts, std::vector<Eigen::Index> resume_queried,
                std::vector<double> resume_y) {
  if (opts.iters < 1) throw std::invalid_argument("run_cbo: iters must be >= 1");
  if (opts.refit_every < 1) throw std::invalid_argument("run_cbo: refit_every must be >= 1");
  if (resume_queried.size() != resume_y.size())
    throw std::invalid_argument("run_cbo: resume vectors must align");
  if (static_cast<int>(resume_queried.size()) > opts.iters)
    throw std::invalid_argument("run_cbo: resume longer than the iteration budget");

  Surrogate surrogate(prior);
  BoTrace trace;
  Eigen::VectorXd y_obs(0);

  for (int i = 0; i < opts.iters; ++i) {
    Eigen::Index pick;
    double value;
    const bool replay = i < static_cast<int>(resume_queried.size());
    if (replay) {
      pick = resume_queried[static_cast<std::size_t>(i)];
      if (pick < 0 || pick >= prior.grid.size())
        throw std::invalid_argument("run_cbo: resume index outside the grid");
      value = resume_y[static_cast<std::size_t>(i)];
    } else {
      if (trace.queried.empty()) {
        pick = arg_best(prior.mean, opts.maximize);
      } else {
        Eigen::VectorXd mean, sd;
        surrogate.condition(trace.queried, y_obs, opts.jitter, mean, sd);
        const double incumbent =
            opts.maximize ? y_obs.maxCoeff() : y_obs.minCoeff();
        Eigen::VectorXd ei(prior.grid.size());
        for (Eigen::Index g = 0; g < prior.grid.size(); ++g)
          ei[g] = expected_improvement(mean[g], sd[g], incumbent, opts.maximize);
        pick = arg_best(ei, true);
      }
      try {
        value = oracle(pick);
      } catch (const std::exception&) {
        trace.completed = false;
        break;
      }
    }

    trace.queried.push_back(pick);
    y_obs.conservativeResize(y_obs.size() + 1);
    y_obs[y_obs.size() - 1] = value;

    if ((i + 1) % opts.refit_every == 0 && i + 1 < opts.iters)
      surrogate.refit(trace.queried, y_obs, opts.jitter, opts.refit_adam);
  }

  const auto steps = static_cast<Eigen::Index>(trace.queried.size());
  trace.x.resize(steps);
  trace.y = y_obs;
  trace.best.resize(steps);
  trace.regret.resize(steps);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < steps; ++i) {
    trace.x[i] = prior.grid[trace.queried[static_cast<std::size_t>(i)]];
    const double prev = i == 0 ? y_obs[0] : trace.best[i - 1];
    trace.best[i] =
        opts.maximize ? std::max(prev, y_obs[i]) : std::min(prev, y_obs[i]);
    cum += std::abs(f_star - trace.best[i]);
    trace.regret[i] = cum;
  }
  return trace;
}

}  // namespace impspec
