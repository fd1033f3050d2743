#include "impspec/posterior.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

namespace impspec {

namespace {

constexpr double kVarianceFloor = -1e-8;

double clamp_khat(double khat) {
  if (khat >= 0.0) return khat;
  if (khat >= kVarianceFloor) return 0.0;
  throw NumericalError("posterior: k_hat(z,z) below tolerance");
}

}  // namespace

EffectEvaluator::EffectEvaluator(const FittedModel& model, const SpectralMeasure& measure)
    : model_(&model), measure_(measure) {
  if (measure.mean.size() != model.v1.cols())
    throw std::invalid_argument("EffectEvaluator: measure dim != V dim");
  ktilde_ = smoothed_gram(model.v_kernel(), measure, model.v1);
  trace_ip_ = ktilde_.cwiseProduct(model.inv1);
}

PosteriorMoments EffectEvaluator::moments(const Eigen::VectorXd& w,
                                          const Eigen::VectorXd& z) const {
  const FittedModel& m = *model_;
  PosteriorMoments out;
  out.w = w;
  out.z = z;

  const Eigen::VectorXd kw = m.kw_vector(w);
  const double kww = m.kww(w, w);
  const Eigen::VectorXd kz = kernel_vector(m.params.stage2, m.z2, z);
  const Eigen::VectorXd beta = m.chol2.solve(kz);
  const double khat = clamp_khat(m.params.stage2.amplitude - kz.dot(beta));

  const Eigen::VectorXd alpha = kw.cwiseProduct(m.ry);
  const Eigen::VectorXd u = m.kv2v1.transpose() * beta;  // K_{V1 V2} beta
  out.mean = u.dot(alpha);

  const Eigen::VectorXd du = kw.cwiseProduct(u);
  out.s1 = kww * beta.dot(m.kvv2 * beta) - du.dot(m.chol1.solve(du));
  out.s2 = khat * (alpha.dot(ktilde_ * alpha) - kw.dot(trace_ip_ * kw));
  out.s3 = tau(m.v_kernel()) * kww * khat;

  const double total = out.s1 + out.s2 + out.s3;
  if (total < kVarianceFloor)
    throw NumericalError("posterior: variance below -1e-8");
  out.variance = total < 0.0 ? 0.0 : total;
  return out;
}

// Written as the general bilinear form rather than reusing the variance
// specialization above, so agreement at identical points is a real check.
double EffectEvaluator::cross_cov(const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& w2,
                                  const Eigen::VectorXd& z2) const {
  const FittedModel& m = *model_;
  const Eigen::VectorXd kwa = m.kw_vector(w);
  const Eigen::VectorXd kwb = m.kw_vector(w2);
  const double kww = m.kww(w, w2);

  const Eigen::VectorXd kza = kernel_vector(m.params.stage2, m.z2, z);
  const Eigen::VectorXd kzb = kernel_vector(m.params.stage2, m.z2, z2);
  const Eigen::VectorXd beta_a = m.chol2.solve(kza);
  const Eigen::VectorXd beta_b = m.chol2.solve(kzb);
  const double kzz = kernel_value(m.params.stage2, z, z2);
  const double khat = kzz - kza.dot(beta_b);

  const Eigen::VectorXd alpha_a = kwa.cwiseProduct(m.ry);
  const Eigen::VectorXd alpha_b = kwb.cwiseProduct(m.ry);
  const Eigen::VectorXd ua = m.kv2v1.transpose() * beta_a;
  const Eigen::VectorXd ub = m.kv2v1.transpose() * beta_b;

  const double c1 = kww * beta_a.dot(m.kvv2 * beta_b) -
                    kwa.cwiseProduct(ua).dot(m.inv1 * kwb.cwiseProduct(ub));
  const double c2 =
      khat * (alpha_a.dot(ktilde_ * alpha_b) - kwa.dot(trace_ip_ * kwb));
  const double c3 = tau(m.v_kernel()) * kww * khat;
  return c1 + c2 + c3;
}

PosteriorMoments posterior_moments(const FittedModel& model, const SpectralMeasure& measure,
                                   const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
  return EffectEvaluator(model, measure).moments(w, z);
}

double posterior_cross_cov(const FittedModel& model, const SpectralMeasure& measure,
                           const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& w2, const Eigen::VectorXd& z2) {
  return EffectEvaluator(model, measure).cross_cov(w, z, w2, z2);
}

PosteriorMoments ate_moments(const EffectEvaluator& eval, const Eigen::MatrixXd& w_points,
                             const Eigen::MatrixXd& z_points) {
  const Eigen::Index m = z_points.rows();
  if (m == 0) throw std::invalid_argument("ate_moments: no points");
  if (w_points.rows() != m && w_points.rows() != 1)
    throw std::invalid_argument("ate_moments: w rows must match z rows or broadcast");
  auto wrow = [&](Eigen::Index i) -> Eigen::VectorXd {
    return w_points.rows() == 1 ? w_points.row(0).transpose()
                                : w_points.row(i).transpose();
  };
  PosteriorMoments out;
  double mean = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    mean += eval.moments(wrow(i), z_points.row(i).transpose()).mean;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      var += eval.cross_cov(wrow(i), z_points.row(i).transpose(), wrow(j),
                            z_points.row(j).transpose());
  var /= static_cast<double>(m) * static_cast<double>(m);
  out.mean = mean;
  if (var < kVarianceFloor) throw NumericalError("ate_moments: variance below -1e-8");
  out.variance = var < 0.0 ? 0.0 : var;
  return out;
}

AteCurve ate_profile(const EffectEvaluator& eval, const Eigen::MatrixXd& grid_values,
                     const std::vector<Eigen::Index>& grid_dims,
                     const Eigen::MatrixXd& marginal_values,
                     const std::vector<Eigen::Index>& marginal_dims) {
  const FittedModel& m = eval.model();
  if (!m.w_empty())
    throw std::invalid_argument("ate_profile: requires an empty W role");
  const Eigen::Index dz = m.z2.cols();
  if (static_cast<Eigen::Index>(grid_dims.size() + marginal_dims.size()) != dz)
    throw std::invalid_argument("ate_profile: dims must partition z");
  const Eigen::Index g = grid_values.rows();
  const Eigen::Index mm = marginal_values.rows();
  if (g == 0 || mm == 0) throw std::invalid_argument("ate_profile: empty points");

  // split the stage-2 kernel into grid-dim and marginal-dim factors
  KernelParams kgrid, kmarg;
  kgrid.amplitude = m.params.stage2.amplitude;
  kmarg.amplitude = 1.0;
  kgrid.lengthscales.resize(static_cast<Eigen::Index>(grid_dims.size()));
  kmarg.lengthscales.resize(static_cast<Eigen::Index>(marginal_dims.size()));
  for (std::size_t i = 0; i < grid_dims.size(); ++i)
    kgrid.lengthscales[static_cast<Eigen::Index>(i)] =
        m.params.stage2.lengthscales[grid_dims[i]];
  for (std::size_t i = 0; i < marginal_dims.size(); ++i)
    kmarg.lengthscales[static_cast<Eigen::Index>(i)] =
        m.params.stage2.lengthscales[marginal_dims[i]];

  // averaged stage-2 kernel vectors per curve point
  Eigen::MatrixXd kbar = Eigen::MatrixXd::Zero(m.n2(), g);
  Eigen::VectorXd z(dz);
  for (Eigen::Index a = 0; a < g; ++a) {
    for (Eigen::Index i = 0; i < mm; ++i) {
      for (std::size_t j = 0; j < grid_dims.size(); ++j)
        z[grid_dims[j]] = grid_values(a, static_cast<Eigen::Index>(j));
      for (std::size_t j = 0; j < marginal_dims.size(); ++j)
        z[marginal_dims[j]] = marginal_values(i, static_cast<Eigen::Index>(j));
      kbar.col(a) += kernel_vector(m.params.stage2, m.z2, z);
    }
    kbar.col(a) /= static_cast<double>(mm);
  }
  const Eigen::MatrixXd beta_bar = m.chol2.solve(kbar);

  // constants: alpha is w-independent (W empty), so the C2 trace and the S3
  // weight do not vary along the curve
  const Eigen::VectorXd& alpha = m.ry;
  const double c2 =
      alpha.dot(eval.ktilde() * alpha) - eval.ktilde().cwiseProduct(m.inv1).sum();
  const double t = tau(m.v_kernel());
  const Eigen::MatrixXd m1 =
      m.kvv2 - m.kv2v1 * (m.inv1 * m.kv2v1.transpose());
  const double c_marg =
      marginal_dims.empty()
          ? 1.0
          : gram(kmarg, marginal_values).sum() /
                (static_cast<double>(mm) * static_cast<double>(mm));
  const Eigen::MatrixXd kgg =
      grid_dims.empty() ? Eigen::MatrixXd::Constant(g, g, kgrid.amplitude)
                        : gram(kgrid, grid_values);

  AteCurve out;
  out.mean = beta_bar.transpose() * (m.kv2v1 * alpha);
  const Eigen::MatrixXd khat_avg = kgg * c_marg - kbar.transpose() * beta_bar;
  out.cov = beta_bar.transpose() * m1 * beta_bar + (c2 + t) * khat_avg;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> dist(0.0, 1.0);
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  return boost::math::quantile(dist, p);
}

CredibleInterval credible_interval(const PosteriorMoments& m, double alpha) {
  CredibleInterval ci;
  if (alpha >= 1.0) {
    ci.lo = -std::numeric_limits<double>::infinity();
    ci.hi = std::numeric_limits<double>::infinity();
    return ci;
  }
  if (alpha <= 0.0) {
    ci.lo = ci.hi = m.mean;
    return ci;
  }
  const double q = normal_quantile(0.5 * (1.0 + alpha));
  const double sd = std::sqrt(std::max(m.variance, 0.0));
  ci.lo = m.mean - q * sd;
  ci.hi = m.mean + q * sd;
  return ci;
}

}  // namespace impspec
