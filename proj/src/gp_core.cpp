#include "impspec/gp_core.hpp"

#include <cmath>

namespace impspec {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kBadObjective = -1e100;

struct StageTables {
  Eigen::MatrixXd w1, v1, v2, z2;
  Eigen::VectorXd y;
};

StageTables extract_tables(const Dataset& data, const CausalQuery& query) {
  StageTables t;
  const RoleMap& r = query.roles;
  if (r.v.empty()) throw std::invalid_argument("query: V roles must be non-empty");
  if (r.z.empty()) throw std::invalid_argument("query: Z roles must be non-empty");
  if (r.y.empty()) throw std::invalid_argument("query: Y role must be set");
  t.y = data.d1.column(r.y);
  t.v1 = data.d1.columns(r.v);
  t.w1 = r.w.empty() ? Eigen::MatrixXd(t.v1.rows(), 0) : data.d1.columns(r.w);
  const Table& s2 = data.stage2_table();
  t.v2 = s2.columns(r.v);
  t.z2 = s2.columns(r.z);
  return t;
}

// Per-dimension squared distances cached once; gram rebuilds inside the
// optimizer are then one weighted accumulation plus one exp pass.
struct SqDistCache {
  std::vector<Eigen::MatrixXd> d;
  Eigen::Index n = 0;

  explicit SqDistCache(const Eigen::MatrixXd& x) : n(x.rows()) {
    d.reserve(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::MatrixXd m(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double t = x(i, c) - x(j, c);
          m(i, j) = t * t;
        }
      d.push_back(std::move(m));
    }
  }

  Eigen::MatrixXd gram(const Eigen::VectorXd& lengthscales, double amplitude) const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t c = 0; c < d.size(); ++c) {
      const double w = 0.5 / (lengthscales[static_cast<Eigen::Index>(c)] *
                              lengthscales[static_cast<Eigen::Index>(c)]);
      e.noalias() += w * d[c];
    }
    return amplitude * (-e.array()).exp().matrix();
  }
};

double gaussian_ll(const Eigen::MatrixXd& cov, const Eigen::VectorXd& y) {
  CholFactor f(cov);
  return -0.5 * y.dot(f.solve(y)) - 0.5 * f.log_det() -
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

double safe_eval(const std::function<double(const Eigen::VectorXd&)>& f,
                 const Eigen::VectorXd& x) {
  double v;
  try {
    v = f(x);
  } catch (const NumericalError&) {
    return kBadObjective;
  }
  return std::isfinite(v) ? v : kBadObjective;
}

Eigen::VectorXd clamp_log(Eigen::VectorXd x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], -30.0, 30.0);
  return x;
}

}  // namespace

KernelParams FittedModel::w_kernel() const {
  KernelParams p;
  p.lengthscales = params.stage1.lengthscales.head(w1.cols());
  p.amplitude = 1.0;
  return p;
}

KernelParams FittedModel::v_kernel() const {
  KernelParams p;
  p.lengthscales = params.stage1.lengthscales.tail(v1.cols());
  p.amplitude = params.stage1.amplitude;
  return p;
}

Eigen::VectorXd FittedModel::kw_vector(const Eigen::VectorXd& w) const {
  if (w_empty()) return Eigen::VectorXd::Ones(n1());
  return kernel_vector(w_kernel(), w1, w);
}

double FittedModel::kww(const Eigen::VectorXd& w, const Eigen::VectorXd& w2) const {
  if (w_empty()) return 1.0;
  return kernel_value(w_kernel(), w, w2);
}

double log_marginal_likelihood(const Dataset& data, const CausalQuery& query,
                               const ModelParams& params) {
  StageTables t = extract_tables(data, query);
  Eigen::MatrixXd x(t.v1.rows(), t.w1.cols() + t.v1.cols());
  x << t.w1, t.v1;
  Eigen::MatrixXd cov = gram(params.stage1, x);
  cov.diagonal().array() += params.sigma2;
  return gaussian_ll(cov, t.y);
}

double weighted_log_marginal_likelihood(const Dataset& data, const CausalQuery& query,
                                        const ModelParams& params) {
  StageTables t = extract_tables(data, query);
  KernelParams kv;
  kv.lengthscales = params.stage1.lengthscales.tail(t.v2.cols());
  kv.amplitude = params.stage1.amplitude;
  const Eigen::MatrixXd kvv = gram(kv, t.v2);
  Eigen::MatrixXd c = gram(params.stage2, t.z2);
  c.diagonal().array() += params.eta2;
  CholFactor f(c);
  const double t_weight = tau(params.stage1);
  const double n = static_cast<double>(t.z2.rows());
  return -0.5 * t_weight * n * kLog2Pi - 0.5 * t_weight * f.log_det() -
         0.5 * f.solve(kvv).trace();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> lengthscale_box(const Eigen::MatrixXd& x,
                                                            Eigen::Index n_total) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_total, -inf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n_total, inf);
  for (Eigen::Index c = 0; c < x.cols() && c < n_total; ++c) {
    double span = x.col(c).maxCoeff() - x.col(c).minCoeff();
    if (!(span > 1e-9)) span = 1.0;
    lo[c] = std::log(0.05 * span);
    hi[c] = std::log(2.0 * span);
  }
  return {lo, hi};
}

AdamResult adam_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& x0, const AdamConfig& cfg) {
  auto boxed = [&cfg](Eigen::VectorXd x) {
    x = clamp_log(std::move(x));
    if (cfg.lower.size() == x.size() && cfg.upper.size() == x.size()) {
      x = x.cwiseMax(cfg.lower).cwiseMin(cfg.upper);
    }
    return x;
  };
  Eigen::VectorXd x = boxed(x0);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());

  AdamResult best;
  best.x = x;
  best.objective = safe_eval(f, x);
  best.trace.reserve(static_cast<std::size_t>(cfg.iterations));

  Eigen::VectorXd g(x.size());
  for (int it = 1; it <= cfg.iterations; ++it) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += cfg.fd_step;
      xm[i] -= cfg.fd_step;
      g[i] = (safe_eval(f, xp) - safe_eval(f, xm)) / (2.0 * cfg.fd_step);
      if (!std::isfinite(g[i])) g[i] = 0.0;
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.beta1, it);
    const double bc2 = 1.0 - std::pow(cfg.beta2, it);
    // ascent step
    x += (cfg.lr * (m / bc1).array() / ((v / bc2).array().sqrt() + cfg.eps)).matrix();
    x = boxed(x);
    const double obj = safe_eval(f, x);
    if (obj > best.objective) {
      best.objective = obj;
      best.x = x;
    }
    best.trace.push_back(best.objective);
  }
  return best;
}

ModelParams default_init_params(const Dataset& data, const CausalQuery& query) {
  StageTables t = extract_tables(data, query);
  ModelParams p;
  Eigen::MatrixXd x1(t.v1.rows(), t.w1.cols() + t.v1.cols());
  x1 << t.w1, t.v1;
  auto col_sd = [](const Eigen::MatrixXd& m, Eigen::Index c) {
    const double mu = m.col(c).mean();
    const double var =
        (m.col(c).array() - mu).square().sum() / std::max<double>(1.0, m.rows() - 1);
    return var > 1e-12 ? std::sqrt(var) : 1.0;
  };
  p.stage1.lengthscales.resize(x1.cols());
  for (Eigen::Index c = 0; c < x1.cols(); ++c) p.stage1.lengthscales[c] = col_sd(x1, c);
  const double ymu = t.y.mean();
  const double yvar =
      (t.y.array() - ymu).square().sum() / std::max<double>(1.0, t.y.size() - 1);
  p.stage1.amplitude = std::max(yvar, 1e-3);
  p.sigma2 = std::max(0.1 * yvar, 1e-4);
  p.stage2.lengthscales.resize(t.z2.cols());
  for (Eigen::Index c = 0; c < t.z2.cols(); ++c) p.stage2.lengthscales[c] = col_sd(t.z2, c);
  p.stage2.amplitude = 1.0;
  p.eta2 = 0.1;
  return p;
}

FittedModel build_fitted(const Dataset& data, const CausalQuery& query,
                         const ModelParams& params) {
  StageTables t = extract_tables(data, query);
  if (params.stage1.lengthscales.size() != t.w1.cols() + t.v1.cols())
    throw std::invalid_argument("build_fitted: stage-1 lengthscale count mismatch");
  if (params.stage2.lengthscales.size() != t.z2.cols())
    throw std::invalid_argument("build_fitted: stage-2 lengthscale count mismatch");
  if (!(params.sigma2 >= 0.0) || !(params.eta2 >= 0.0))
    throw std::invalid_argument("build_fitted: noise variances must be >= 0");

  FittedModel m;
  m.data = data;
  m.query = query;
  m.params = params;
  m.w1 = std::move(t.w1);
  m.v1 = std::move(t.v1);
  m.v2 = std::move(t.v2);
  m.z2 = std::move(t.z2);
  m.y = std::move(t.y);

  const KernelParams kv = m.v_kernel();
  m.kvv1 = gram(kv, m.v1);
  if (data.fusion()) {
    m.kv2v1 = cross_gram(kv, m.v2, m.v1);
    m.kvv2 = gram(kv, m.v2);
  } else {
    m.kv2v1 = m.kvv1;
    m.kvv2 = m.kvv1;
  }

  Eigen::MatrixXd g1;
  if (m.w_empty()) {
    g1 = m.kvv1;
  } else {
    Eigen::MatrixXd x1(m.v1.rows(), m.w1.cols() + m.v1.cols());
    x1 << m.w1, m.v1;
    g1 = gram(params.stage1, x1);
  }
  g1.diagonal().array() += params.sigma2;
  m.chol1 = CholFactor(g1);
  m.ry = m.chol1.solve(m.y);
  m.inv1 = m.chol1.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(m.n1(), m.n1())));

  Eigen::MatrixXd g2 = gram(params.stage2, m.z2);
  g2.diagonal().array() += params.eta2;
  m.chol2 = CholFactor(g2);
  return m;
}

FittedModel fit_two_stage(const Dataset& data, const CausalQuery& query,
                          const AdamConfig& cfg) {
  return fit_two_stage(data, query, default_init_params(data, query), cfg);
}

FittedModel fit_two_stage(const Dataset& data, const CausalQuery& query,
                          const ModelParams& init, const AdamConfig& cfg) {
  StageTables t = extract_tables(data, query);
  Eigen::MatrixXd x1(t.v1.rows(), t.w1.cols() + t.v1.cols());
  x1 << t.w1, t.v1;
  const SqDistCache sq1(x1);
  const SqDistCache sq2(t.z2);
  // stage-2 V gram rebuilt only when stage-1 params change, not per stage-2 eval
  const SqDistCache sqv2(t.v2);
  const Eigen::Index p1 = x1.cols();

  // stage 1: [log lengthscales..., log amplitude, log sigma^2]
  Eigen::VectorXd u0(p1 + 2);
  for (Eigen::Index i = 0; i < p1; ++i) u0[i] = std::log(init.stage1.lengthscales[i]);
  u0[p1] = std::log(init.stage1.amplitude);
  u0[p1 + 1] = std::log(init.sigma2);
  const Eigen::VectorXd& yv = t.y;
  auto obj1 = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd ls = u.head(p1).array().exp();
    Eigen::MatrixXd cov = sq1.gram(ls, std::exp(u[p1]));
    cov.diagonal().array() += std::exp(u[p1 + 1]);
    return gaussian_ll(cov, yv);
  };
  AdamConfig cfg1 = cfg;
  std::tie(cfg1.lower, cfg1.upper) = lengthscale_box(x1, u0.size());
  AdamResult r1 = adam_maximize(obj1, u0, cfg1);

  ModelParams trained = init;
  trained.stage1.lengthscales = r1.x.head(p1).array().exp();
  trained.stage1.amplitude = std::exp(r1.x[p1]);
  trained.sigma2 = std::exp(r1.x[p1 + 1]);

  // stage 2: [log lengthscales..., log amplitude, log eta^2], tau frozen
  const Eigen::Index p2 = t.z2.cols();
  const double t_weight = trained.stage1.amplitude;
  const double n2 = static_cast<double>(t.z2.rows());
  const Eigen::MatrixXd kvv2 =
      sqv2.gram(trained.stage1.lengthscales.tail(t.v2.cols()), trained.stage1.amplitude);
  Eigen::VectorXd s0(p2 + 2);
  for (Eigen::Index i = 0; i < p2; ++i) s0[i] = std::log(init.stage2.lengthscales[i]);
  s0[p2] = std::log(init.stage2.amplitude);
  s0[p2 + 1] = std::log(init.eta2);
  auto obj2 = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd ls = u.head(p2).array().exp();
    Eigen::MatrixXd c = sq2.gram(ls, std::exp(u[p2]));
    c.diagonal().array() += std::exp(u[p2 + 1]);
    CholFactor f(c);
    return -0.5 * t_weight * n2 * kLog2Pi - 0.5 * t_weight * f.log_det() -
           0.5 * f.solve(kvv2).trace();
  };
  AdamConfig cfg2 = cfg;
  std::tie(cfg2.lower, cfg2.upper) = lengthscale_box(t.z2, s0.size());
  AdamResult r2 = adam_maximize(obj2, s0, cfg2);
  trained.stage2.lengthscales = r2.x.head(p2).array().exp();
  trained.stage2.amplitude = std::exp(r2.x[p2]);
  trained.eta2 = std::exp(r2.x[p2 + 1]);

  FittedModel m = build_fitted(data, query, trained);
  m.trace1 = std::move(r1.trace);
  m.trace2 = std::move(r2.trace);
  return m;
}

}  // namespace impspec
