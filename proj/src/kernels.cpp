#include "impspec/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "impspec/rng.hpp"

namespace impspec {

namespace {

void check_dims(const KernelParams& p, Eigen::Index cols, const char* where) {
  if (p.lengthscales.size() != cols)
    throw std::invalid_argument(std::string(where) + ": lengthscale count != input dims");
  if (!(p.amplitude > 0.0))
    throw std::invalid_argument(std::string(where) + ": amplitude must be positive");
  for (Eigen::Index d = 0; d < p.lengthscales.size(); ++d)
    if (!(p.lengthscales[d] > 0.0))
      throw std::invalid_argument(std::string(where) + ": lengthscales must be positive");
}

}  // namespace

SpectralMeasure SpectralMeasure::from_data(const Eigen::MatrixXd& v, double scale,
                                           Base kind) {
  if (v.rows() < 2) throw std::invalid_argument("SpectralMeasure: need at least 2 rows");
  SpectralMeasure m;
  m.mean = v.colwise().mean();
  m.scale = scale;
  m.base.resize(v.cols());
  for (Eigen::Index d = 0; d < v.cols(); ++d) {
    const double var =
        (v.col(d).array() - m.mean[d]).square().sum() / static_cast<double>(v.rows() - 1);
    m.base[d] = kind == Base::Variance ? var : std::sqrt(var);
    if (!(m.base[d] > 0.0)) m.base[d] = 1e-12;  // constant column fallback
  }
  return m;
}

double kernel_value(const KernelParams& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y) {
  check_dims(p, x.size(), "kernel_value");
  double e = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double t = (x[d] - y[d]) / p.lengthscales[d];
    e += t * t;
  }
  return p.amplitude * std::exp(-0.5 * e);
}

Eigen::MatrixXd cross_gram(const KernelParams& p, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y) {
  check_dims(p, x.cols(), "cross_gram");
  if (x.cols() != y.cols()) throw std::invalid_argument("cross_gram: dim mismatch");
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(x.rows(), y.rows());
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const double w = 0.5 / (p.lengthscales[d] * p.lengthscales[d]);
    e.noalias() +=
        w * (x.col(d).replicate(1, y.rows()) - y.col(d).transpose().replicate(x.rows(), 1))
                .array()
                .square()
                .matrix();
  }
  return p.amplitude * (-e.array()).exp().matrix();
}

Eigen::MatrixXd gram(const KernelParams& p, const Eigen::MatrixXd& x) {
  return cross_gram(p, x, x);
}

Eigen::VectorXd kernel_vector(const KernelParams& p, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& point) {
  check_dims(p, x.cols(), "kernel_vector");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(x.rows());
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const double w = 0.5 / (p.lengthscales[d] * p.lengthscales[d]);
    e += w * (x.col(d).array() - point[d]).square().matrix();
  }
  return p.amplitude * (-e.array()).exp().matrix();
}

// Per dimension, with s the measure variance and m its mean:
//   ∫ exp(-(x-t)^2/2l^2) exp(-(t-y)^2/2l^2) N(t; m, s) dt
//     = l/sqrt(l^2+2s) * exp(-(x-y)^2/4l^2) * exp(-((x+y)/2 - m)^2/(l^2+2s))
// The product over dimensions carries amplitude^2.
double nuclear_dominant_value(const KernelParams& p, const SpectralMeasure& mu,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_dims(p, x.size(), "nuclear_dominant_value");
  if (mu.mean.size() != x.size())
    throw std::invalid_argument("nuclear_dominant_value: measure dim mismatch");
  const Eigen::VectorXd s = mu.variances();
  double pref = p.amplitude * p.amplitude;
  double e = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double l2 = p.lengthscales[d] * p.lengthscales[d];
    const double denom = l2 + 2.0 * s[d];
    if (!(denom > 0.0))
      throw std::invalid_argument("nuclear_dominant_value: measure variance must be >= 0");
    pref *= p.lengthscales[d] / std::sqrt(denom);
    const double diff = x[d] - y[d];
    const double mid = 0.5 * (x[d] + y[d]) - mu.mean[d];
    e += diff * diff / (4.0 * l2) + mid * mid / denom;
  }
  return pref * std::exp(-e);
}

Eigen::MatrixXd nuclear_dominant_gram(const KernelParams& p,
                                      const SpectralMeasure& mu,
                                      const Eigen::MatrixXd& x,
                                      const Eigen::MatrixXd& y) {
  check_dims(p, x.cols(), "nuclear_dominant_gram");
  if (x.cols() != y.cols() || mu.mean.size() != x.cols())
    throw std::invalid_argument("nuclear_dominant_gram: dim mismatch");
  const Eigen::VectorXd s = mu.variances();
  double pref = p.amplitude * p.amplitude;
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(x.rows(), y.rows());
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const double l2 = p.lengthscales[d] * p.lengthscales[d];
    const double denom = l2 + 2.0 * s[d];
    pref *= p.lengthscales[d] / std::sqrt(denom);
    const Eigen::MatrixXd xd = x.col(d).replicate(1, y.rows());
    const Eigen::MatrixXd yd = y.col(d).transpose().replicate(x.rows(), 1);
    e.noalias() += (0.25 / l2) * (xd - yd).array().square().matrix();
    e.noalias() +=
        (1.0 / denom) * (0.5 * (xd + yd).array() - mu.mean[d]).square().matrix();
  }
  return pref * (-e.array()).exp().matrix();
}

Eigen::MatrixXd smoothed_gram(const KernelParams& p, const SpectralMeasure& mu,
                              const Eigen::MatrixXd& x) {
  return nuclear_dominant_gram(p, mu, x, x);
}

Eigen::MatrixXd smoothed_gram_mc(const KernelParams& p, const SpectralMeasure& mu,
                                 const Eigen::MatrixXd& x, long n_samples,
                                 std::uint64_t seed) {
  check_dims(p, x.cols(), "smoothed_gram_mc");
  if (n_samples <= 0) throw std::invalid_argument("smoothed_gram_mc: n_samples <= 0");
  const Eigen::VectorXd sd = mu.variances().cwiseSqrt();
  Rng rng(seed);
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd t(x.cols()), kv(n);
  for (long s = 0; s < n_samples; ++s) {
    for (Eigen::Index d = 0; d < x.cols(); ++d)
      t[d] = mu.mean[d] + sd[d] * rng.normal();
    kv = kernel_vector(p, x, t);
    acc.selfadjointView<Eigen::Lower>().rankUpdate(kv);
  }
  acc /= static_cast<double>(n_samples);
  return acc.selfadjointView<Eigen::Lower>();
}

double tau(const KernelParams& p) { return p.amplitude; }

}  // namespace impspec
