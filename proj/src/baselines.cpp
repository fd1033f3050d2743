#include "impspec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "impspec/rng.hpp"

namespace impspec {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct StageTables {
  Eigen::MatrixXd w1, v1, v2, z2;
  Eigen::VectorXd y;
};

StageTables extract(const Dataset& data, const CausalQuery& query) {
  StageTables t;
  const RoleMap& r = query.roles;
  if (r.v.empty() || r.z.empty() || r.y.empty())
    throw std::invalid_argument("query: y, v, z roles must all be set");
  t.y = data.d1.column(r.y);
  t.v1 = data.d1.columns(r.v);
  t.w1 = r.w.empty() ? Eigen::MatrixXd(t.v1.rows(), 0) : data.d1.columns(r.w);
  const Table& s2 = data.stage2_table();
  t.v2 = s2.columns(r.v);
  t.z2 = s2.columns(r.z);
  return t;
}

double col_var(const Eigen::MatrixXd& m, Eigen::Index c) {
  const double mu = m.col(c).mean();
  return (m.col(c).array() - mu).square().sum() /
         std::max<double>(1.0, static_cast<double>(m.rows() - 1));
}

}  // namespace

double plugin_estimator(const Dataset& data, const CausalQuery& query,
                        const ModelParams& params, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& z) {
  const StageTables t = extract(data, query);
  const Eigen::Index n1 = t.v1.rows();
  const Eigen::Index n2 = t.v2.rows();
  const Eigen::Index dw = t.w1.cols();
  const Eigen::Index dv = t.v1.cols();
  if (params.stage1.lengthscales.size() != dw + dv)
    throw std::invalid_argument("plugin_estimator: stage-1 lengthscale count mismatch");
  if (w.size() != dw || z.size() != t.z2.cols())
    throw std::invalid_argument("plugin_estimator: query point dimension mismatch");

  const Eigen::VectorXd lw = params.stage1.lengthscales.head(dw);
  const Eigen::VectorXd lv = params.stage1.lengthscales.tail(dv);
  const double amp = params.stage1.amplitude;

  // deliberately local kernel evaluations and plain LDLT solves
  auto kv = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double e = 0.0;
    for (Eigen::Index d = 0; d < dv; ++d) {
      const double u = (a[d] - b[d]) / lv[d];
      e += u * u;
    }
    return amp * std::exp(-0.5 * e);
  };
  auto kw = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double e = 0.0;
    for (Eigen::Index d = 0; d < dw; ++d) {
      const double u = (a[d] - b[d]) / lw[d];
      e += u * u;
    }
    return std::exp(-0.5 * e);
  };
  auto kz = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double e = 0.0;
    for (Eigen::Index d = 0; d < z.size(); ++d) {
      const double u = (a[d] - b[d]) / params.stage2.lengthscales[d];
      e += u * u;
    }
    return params.stage2.amplitude * std::exp(-0.5 * e);
  };

  Eigen::MatrixXd g1(n1, n1);
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n1; ++j) {
      double val = kv(t.v1.row(i), t.v1.row(j));
      if (dw > 0) val *= kw(t.w1.row(i), t.w1.row(j));
      g1(i, j) = val;
    }
  g1.diagonal().array() += params.sigma2;
  Eigen::VectorXd alpha = g1.ldlt().solve(t.y);
  for (Eigen::Index i = 0; i < n1; ++i)
    if (dw > 0) alpha[i] *= kw(w, t.w1.row(i));

  Eigen::MatrixXd g2(n2, n2);
  for (Eigen::Index i = 0; i < n2; ++i)
    for (Eigen::Index j = 0; j < n2; ++j) g2(i, j) = kz(t.z2.row(i), t.z2.row(j));
  g2.diagonal().array() += params.eta2;
  Eigen::VectorXd kzv(n2);
  for (Eigen::Index i = 0; i < n2; ++i) kzv[i] = kz(z, t.z2.row(i));
  const Eigen::VectorXd beta = g2.ldlt().solve(kzv);

  double acc = 0.0;
  for (Eigen::Index j = 0; j < n2; ++j) {
    double inner = 0.0;
    for (Eigen::Index i = 0; i < n1; ++i) inner += kv(t.v2.row(j), t.v1.row(i)) * alpha[i];
    acc += beta[j] * inner;
  }
  return acc;
}

KernelParams BayesimpModel::w_kernel() const {
  KernelParams p;
  p.lengthscales = params.stage1.lengthscales.head(wc.cols());
  p.amplitude = 1.0;
  return p;
}

KernelParams BayesimpModel::v_kernel() const {
  KernelParams p;
  p.lengthscales = params.stage1.lengthscales.tail(vc.cols());
  p.amplitude = params.stage1.amplitude;
  return p;
}

Eigen::VectorXd BayesimpModel::kw_vector(const Eigen::VectorXd& w) const {
  if (w_empty()) return Eigen::VectorXd::Ones(xc.rows());
  return kernel_vector(w_kernel(), wc, w);
}

BayesimpModel fit_bayesimp(const Dataset& data, const CausalQuery& query,
                           const BayesimpOptions& opts) {
  const StageTables t = extract(data, query);
  const Eigen::Index dw = t.w1.cols();
  const Eigen::Index dv = t.v1.cols();

  BayesimpModel m;
  m.query = query;
  m.y = t.y;
  m.v2 = t.v2;
  m.z2 = t.z2;
  m.x1.resize(t.v1.rows(), dw + dv);
  m.x1 << t.w1, t.v1;

  if (data.fusion()) {
    Eigen::MatrixXd w2(t.v2.rows(), dw);
    if (dw > 0) {
      for (const std::string& name : query.roles.w)
        if (std::find(data.d2->names.begin(), data.d2->names.end(), name) ==
            data.d2->names.end())
          throw std::invalid_argument(
              "fit_bayesimp: fusion with non-empty W needs the W columns in "
              "the second table");
      w2 = data.d2->columns(query.roles.w);
    }
    m.xc.resize(m.x1.rows() + t.v2.rows(), dw + dv);
    Eigen::MatrixXd x2(t.v2.rows(), dw + dv);
    x2 << w2, t.v2;
    m.xc << m.x1, x2;
  } else {
    m.xc = m.x1;
  }
  m.wc = m.xc.leftCols(dw);
  m.vc = m.xc.rightCols(dv);

  m.nu = SpectralMeasure::from_data(m.xc, 1.0);

  const ModelParams init = default_init_params(data, query);
  const Eigen::Index p1 = dw + dv;
  const Eigen::Index extra = opts.opt_varsigma ? 1 : 0;
  Eigen::VectorXd u0(p1 + 2 + extra);
  for (Eigen::Index i = 0; i < p1; ++i) u0[i] = std::log(init.stage1.lengthscales[i]);
  u0[p1] = std::log(init.stage1.amplitude);
  u0[p1 + 1] = std::log(init.sigma2);
  if (extra) u0[p1 + 2] = 0.0;

  const double n1 = static_cast<double>(m.x1.rows());
  auto obj1 = [&](const Eigen::VectorXd& u) {
    KernelParams k1;
    k1.lengthscales = u.head(p1).array().exp();
    k1.amplitude = std::exp(u[p1]);
    const SpectralMeasure nu = m.nu.with_scale(extra ? std::exp(u[p1 + 2]) : 1.0);
    Eigen::MatrixXd cov = smoothed_gram(k1, nu, m.x1);
    cov.diagonal().array() += std::exp(u[p1 + 1]);
    CholFactor f(cov);
    return -0.5 * m.y.dot(f.solve(m.y)) - 0.5 * f.log_det() - 0.5 * n1 * kLog2Pi;
  };
  AdamConfig cfg1 = opts.adam;
  std::tie(cfg1.lower, cfg1.upper) = lengthscale_box(m.x1, u0.size());
  const AdamResult r1 = adam_maximize(obj1, u0, cfg1);

  m.params = init;
  m.params.stage1.lengthscales = r1.x.head(p1).array().exp();
  m.params.stage1.amplitude = std::exp(r1.x[p1]);
  m.params.sigma2 = std::exp(r1.x[p1 + 1]);
  m.varsigma = extra ? std::exp(r1.x[p1 + 2]) : 1.0;
  m.nu.scale = m.varsigma;
  m.trace1 = r1.trace;

  // stage 2: per-column Gaussian likelihoods for the embedding targets, each
  // column of K_VV scaled by its smoothed-kernel prior variance
  SpectralMeasure nu_v;
  nu_v.mean = m.nu.mean.tail(dv);
  nu_v.base = m.nu.base.tail(dv);
  nu_v.scale = m.varsigma;

  const KernelParams kv = m.v_kernel();
  const Eigen::MatrixXd kvv2 = gram(kv, t.v2);
  const Eigen::Index n2 = t.v2.rows();
  Eigen::VectorXd rdiag(n2);
  for (Eigen::Index j = 0; j < n2; ++j)
    rdiag[j] = nuclear_dominant_value(kv, nu_v, t.v2.row(j), t.v2.row(j));
  const Eigen::MatrixXd scaled =
      kvv2 * rdiag.cwiseInverse().asDiagonal() * kvv2.transpose();
  const double logr = rdiag.array().log().sum();

  const Eigen::Index p2 = t.z2.cols();
  Eigen::VectorXd s0(p2 + 2);
  for (Eigen::Index i = 0; i < p2; ++i) s0[i] = std::log(init.stage2.lengthscales[i]);
  s0[p2] = std::log(init.stage2.amplitude);
  s0[p2 + 1] = std::log(init.eta2);
  const double n2d = static_cast<double>(n2);
  auto obj2 = [&](const Eigen::VectorXd& u) {
    KernelParams k2;
    k2.lengthscales = u.head(p2).array().exp();
    k2.amplitude = std::exp(u[p2]);
    Eigen::MatrixXd c = gram(k2, t.z2);
    c.diagonal().array() += std::exp(u[p2 + 1]);
    CholFactor f(c);
    return -0.5 * n2d * n2d * kLog2Pi - 0.5 * n2d * logr - 0.5 * n2d * f.log_det() -
           0.5 * f.solve(scaled).trace();
  };
  AdamConfig cfg2 = opts.adam;
  std::tie(cfg2.lower, cfg2.upper) = lengthscale_box(t.z2, s0.size());
  const AdamResult r2 = adam_maximize(obj2, s0, cfg2);
  m.params.stage2.lengthscales = r2.x.head(p2).array().exp();
  m.params.stage2.amplitude = std::exp(r2.x[p2]);
  m.params.eta2 = std::exp(r2.x[p2 + 1]);
  m.trace2 = r2.trace;

  // coefficient posteriors pushed through the gram inverses
  const KernelParams k1 = m.params.stage1;
  Eigen::MatrixXd r11 = smoothed_gram(k1, m.nu, m.x1);
  r11.diagonal().array() += m.params.sigma2;
  const CholFactor chol_r1(r11);
  const Eigen::MatrixXd rc1 = nuclear_dominant_gram(k1, m.nu, m.xc, m.x1);
  const Eigen::VectorXd mf = rc1 * chol_r1.solve(m.y);
  Eigen::MatrixXd rf = smoothed_gram(k1, m.nu, m.xc) -
                       rc1 * chol_r1.solve(rc1.transpose());
  rf = 0.5 * (rf + rf.transpose()).eval();

  m.kvv_c = gram(kv, m.vc);
  Eigen::MatrixXd g = m.kvv_c;
  if (dw > 0) g = g.cwiseProduct(gram(m.w_kernel(), m.wc)).eval();
  const CholFactor chol_g(g);
  m.m_a = chol_g.solve(mf);
  Eigen::MatrixXd ca = chol_g.solve(chol_g.solve(rf).transpose());
  m.c_a = 0.5 * (ca + ca.transpose());

  m.chol_vc = CholFactor(m.kvv_c);
  const Eigen::MatrixXd rvv = smoothed_gram(kv, nu_v, m.vc);
  Eigen::MatrixXd q = m.chol_vc.solve(m.chol_vc.solve(rvv).transpose());
  q = 0.5 * (q + q.transpose()).eval();
  m.kqk = m.kvv_c * q * m.kvv_c;
  m.kqk = 0.5 * (m.kqk + m.kqk.transpose()).eval();
  m.hmat = m.c_a.cwiseProduct(m.kqk);

  m.kc2 = data.fusion() ? cross_gram(kv, m.vc, t.v2) : m.kvv_c;
  Eigen::MatrixXd g2 = gram(m.params.stage2, t.z2);
  g2.diagonal().array() += m.params.eta2;
  m.chol_z = CholFactor(g2);
  return m;
}

namespace {

// shared by the point cross-covariance and the profile: the two mean-weight
// vectors and the three covariance contractions
struct BayesimpQuery {
  Eigen::VectorXd dma;  // d(w) ⊙ m_a
  Eigen::VectorXd u;    // K_VV m_b(z)
  Eigen::VectorXd beta;
};

BayesimpQuery bayesimp_query(const BayesimpModel& m, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& z) {
  BayesimpQuery q;
  const Eigen::VectorXd d = m.kw_vector(w);
  q.dma = d.cwiseProduct(m.m_a);
  const Eigen::VectorXd kz = kernel_vector(m.params.stage2, m.z2, z);
  q.beta = m.chol_z.solve(kz);
  const Eigen::VectorXd mb = m.chol_vc.solve(m.kc2 * q.beta);
  q.u = d.cwiseProduct(m.kvv_c * mb);
  return q;
}

}  // namespace

double bayesimp_cross_cov(const BayesimpModel& m, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& z, const Eigen::VectorXd& w2,
                          const Eigen::VectorXd& z2) {
  const BayesimpQuery a = bayesimp_query(m, w, z);
  const BayesimpQuery b = bayesimp_query(m, w2, z2);
  const Eigen::VectorXd kza = kernel_vector(m.params.stage2, m.z2, z);
  const double khat = kernel_value(m.params.stage2, z, z2) - kza.dot(b.beta);
  const double t_cb = khat * a.dma.dot(m.kqk * b.dma);
  const double t_ca = a.u.dot(m.c_a * b.u);
  const Eigen::VectorXd da = m.kw_vector(w);
  const Eigen::VectorXd db = m.kw_vector(w2);
  const double t_tr = khat * da.dot(m.hmat * db);
  return t_cb + t_ca + t_tr;
}

PosteriorMoments bayesimp_moments(const BayesimpModel& m, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& z) {
  PosteriorMoments out;
  out.w = w;
  out.z = z;
  const BayesimpQuery q = bayesimp_query(m, w, z);
  out.mean = m.m_a.dot(q.u);

  const Eigen::VectorXd kz = kernel_vector(m.params.stage2, m.z2, z);
  double khat = kernel_value(m.params.stage2, z, z) - kz.dot(q.beta);
  khat = std::max(khat, 0.0);
  const Eigen::VectorXd d = m.kw_vector(w);
  out.s1 = q.u.dot(m.c_a * q.u);
  out.s2 = khat * q.dma.dot(m.kqk * q.dma);
  out.s3 = khat * d.dot(m.hmat * d);
  out.variance = std::max(out.s1 + out.s2 + out.s3, 0.0);
  return out;
}

AteCurve bayesimp_ate_profile(const BayesimpModel& m,
                              const Eigen::MatrixXd& grid_values,
                              const std::vector<Eigen::Index>& grid_dims,
                              const Eigen::MatrixXd& marginal_values,
                              const std::vector<Eigen::Index>& marginal_dims) {
  if (!m.w_empty())
    throw std::invalid_argument("bayesimp_ate_profile: needs W empty");
  const Eigen::Index dz = m.z2.cols();
  if (static_cast<Eigen::Index>(grid_dims.size() + marginal_dims.size()) != dz)
    throw std::invalid_argument("bayesimp_ate_profile: dims must partition z");

  KernelParams kgrid, kmarg;
  kgrid.amplitude = m.params.stage2.amplitude;
  kmarg.amplitude = 1.0;
  kgrid.lengthscales.resize(grid_dims.size());
  kmarg.lengthscales.resize(marginal_dims.size());
  Eigen::MatrixXd zg(m.z2.rows(), grid_dims.size());
  Eigen::MatrixXd zm(m.z2.rows(), marginal_dims.size());
  for (std::size_t i = 0; i < grid_dims.size(); ++i) {
    kgrid.lengthscales[static_cast<Eigen::Index>(i)] =
        m.params.stage2.lengthscales[grid_dims[i]];
    zg.col(static_cast<Eigen::Index>(i)) = m.z2.col(grid_dims[i]);
  }
  for (std::size_t i = 0; i < marginal_dims.size(); ++i) {
    kmarg.lengthscales[static_cast<Eigen::Index>(i)] =
        m.params.stage2.lengthscales[marginal_dims[i]];
    zm.col(static_cast<Eigen::Index>(i)) = m.z2.col(marginal_dims[i]);
  }

  const Eigen::Index gn = grid_values.rows();
  const Eigen::Index mn = marginal_values.rows();

  // averaged marginal kernel weights over the stage-2 rows and over pairs
  const Eigen::MatrixXd km = cross_gram(kmarg, marginal_values, zm);  // mn x n2
  const Eigen::VectorXd cbar = km.colwise().mean().transpose();
  const double cmarg =
      gram(kmarg, marginal_values).sum() / static_cast<double>(mn * mn);

  const Eigen::MatrixXd kgg = gram(kgrid, grid_values);
  const Eigen::MatrixXd kg2 = cross_gram(kgrid, grid_values, zg);  // gn x n2

  const double a_cb = m.m_a.dot(m.kqk * m.m_a);
  const double a_tr = m.hmat.sum();

  Eigen::MatrixXd betas(m.z2.rows(), gn);
  Eigen::MatrixXd us(m.xc.rows(), gn);
  for (Eigen::Index g = 0; g < gn; ++g) {
    const Eigen::VectorXd kbar = kg2.row(g).transpose().cwiseProduct(cbar);
    betas.col(g) = m.chol_z.solve(kbar);
    us.col(g) = m.kvv_c * m.chol_vc.solve(m.kc2 * betas.col(g));
  }

  AteCurve out;
  out.mean = us.transpose() * m.m_a;
  out.cov.resize(gn, gn);
  for (Eigen::Index g = 0; g < gn; ++g)
    for (Eigen::Index h = g; h < gn; ++h) {
      const Eigen::VectorXd kbar_h = kg2.row(h).transpose().cwiseProduct(cbar);
      const double khat = kgg(g, h) * cmarg - kbar_h.dot(betas.col(g));
      const double c =
          khat * (a_cb + a_tr) + us.col(g).dot(m.c_a * us.col(h));
      out.cov(g, h) = c;
      out.cov(h, g) = c;
    }
  return out;
}

SamplingGpModel fit_sampling_gp(const Dataset& data, const CausalQuery& query,
                                const AdamConfig& cfg) {
  const StageTables t = extract(data, query);
  SamplingGpModel m;
  m.query = query;
  m.y = t.y;
  m.v2 = t.v2;
  m.z2 = t.z2;
  m.x1.resize(t.v1.rows(), t.w1.cols() + t.v1.cols());
  m.x1 << t.w1, t.v1;

  const Eigen::Index p1 = m.x1.cols();
  Eigen::VectorXd u0(p1 + 2);
  for (Eigen::Index c = 0; c < p1; ++c) {
    const double v = col_var(m.x1, c);
    u0[c] = 0.5 * std::log(std::max(v, 1e-12));
  }
  const double yvar = col_var(m.y, 0);
  u0[p1] = std::log(std::max(yvar, 1e-3));
  u0[p1 + 1] = std::log(std::max(0.1 * yvar, 1e-4));
  auto obj1 = [&](const Eigen::VectorXd& u) {
    KernelParams k;
    k.lengthscales = u.head(p1).array().exp();
    k.amplitude = std::exp(u[p1]);
    Eigen::MatrixXd cov = gram(k, m.x1);
    cov.diagonal().array() += std::exp(u[p1 + 1]);
    CholFactor f(cov);
    return -0.5 * m.y.dot(f.solve(m.y)) - 0.5 * f.log_det() -
           0.5 * static_cast<double>(m.y.size()) * kLog2Pi;
  };
  AdamConfig cfg1 = cfg;
  std::tie(cfg1.lower, cfg1.upper) = lengthscale_box(m.x1, u0.size());
  const AdamResult r1 = adam_maximize(obj1, u0, cfg1);
  m.f_kernel.lengthscales = r1.x.head(p1).array().exp();
  m.f_kernel.amplitude = std::exp(r1.x[p1]);
  m.sigma2 = std::exp(r1.x[p1 + 1]);

  Eigen::MatrixXd g1 = gram(m.f_kernel, m.x1);
  g1.diagonal().array() += m.sigma2;
  m.chol_f = CholFactor(g1);
  m.alpha_f = m.chol_f.solve(m.y);

  const Eigen::Index pz = t.z2.cols();
  m.eta2.resize(t.v2.cols());
  for (Eigen::Index d = 0; d < t.v2.cols(); ++d) {
    const Eigen::VectorXd target = t.v2.col(d);
    Eigen::VectorXd s0(pz + 2);
    for (Eigen::Index c = 0; c < pz; ++c)
      s0[c] = 0.5 * std::log(std::max(col_var(t.z2, c), 1e-12));
    const double tvar = col_var(target, 0);
    s0[pz] = std::log(std::max(tvar, 1e-3));
    s0[pz + 1] = std::log(std::max(0.1 * tvar, 1e-4));
    auto obj = [&](const Eigen::VectorXd& u) {
      KernelParams k;
      k.lengthscales = u.head(pz).array().exp();
      k.amplitude = std::exp(u[pz]);
      Eigen::MatrixXd cov = gram(k, t.z2);
      cov.diagonal().array() += std::exp(u[pz + 1]);
      CholFactor f(cov);
      return -0.5 * target.dot(f.solve(target)) - 0.5 * f.log_det() -
             0.5 * static_cast<double>(target.size()) * kLog2Pi;
    };
    AdamConfig cfgz = cfg;
    std::tie(cfgz.lower, cfgz.upper) = lengthscale_box(t.z2, s0.size());
    const AdamResult r = adam_maximize(obj, s0, cfgz);
    KernelParams k;
    k.lengthscales = r.x.head(pz).array().exp();
    k.amplitude = std::exp(r.x[pz]);
    m.g_kernels.push_back(k);
    m.eta2[d] = std::exp(r.x[pz + 1]);
    Eigen::MatrixXd gz = gram(k, t.z2);
    gz.diagonal().array() += m.eta2[d];
    m.chol_g.emplace_back(gz);
    m.alpha_g.push_back(m.chol_g.back().solve(target));
  }
  return m;
}

SampledEffect sampling_gp_effect(const SamplingGpModel& m, const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& z, Eigen::Index n_samples,
                                 std::uint64_t seed) {
  if (n_samples < 2)
    throw std::invalid_argument("sampling_gp_effect: n_samples must be >= 2");
  const Eigen::Index dv = m.v2.cols();
  const Eigen::Index dw = m.x1.cols() - dv;
  if (w.size() != dw || z.size() != m.z2.cols())
    throw std::invalid_argument("sampling_gp_effect: query point dimension mismatch");

  // stage-2 predictive for each V dimension at z
  Eigen::VectorXd mu_v(dv), sd_v(dv);
  for (Eigen::Index d = 0; d < dv; ++d) {
    const Eigen::VectorXd kz = kernel_vector(m.g_kernels[d], m.z2, z);
    mu_v[d] = kz.dot(m.alpha_g[d]);
    const double reduce = m.chol_g[d].forward(kz).squaredNorm();
    const double var = std::max(m.g_kernels[d].amplitude - reduce, 0.0) + m.eta2[d];
    sd_v[d] = std::sqrt(var);
  }

  Rng rng(seed);
  Eigen::VectorXd x(dw + dv);
  x.head(dw) = w;
  double mean = 0.0, msq = 0.0;
  for (Eigen::Index s = 0; s < n_samples; ++s) {
    for (Eigen::Index d = 0; d < dv; ++d) x[dw + d] = mu_v[d] + sd_v[d] * rng.normal();
    const Eigen::VectorXd kx = kernel_vector(m.f_kernel, m.x1, x);
    const double mf = kx.dot(m.alpha_f);
    const double reduce = m.chol_f.forward(kx).squaredNorm();
    const double var = std::max(m.f_kernel.amplitude - reduce, 0.0) + m.sigma2;
    const double ys = mf + std::sqrt(var) * rng.normal();
    const double delta = ys - mean;
    mean += delta / static_cast<double>(s + 1);
    msq += delta * (ys - mean);
  }
  SampledEffect out;
  out.mean = mean;
  out.variance = msq / static_cast<double>(n_samples - 1);
  return out;
}

}  // namespace impspec
