#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace impspec {

// Anisotropic Gaussian kernel
//   k(x, x') = a * exp(-sum_d (x_d - x'_d)^2 / (2 l_d^2))
// with one lengthscale per input dimension and an amplitude a = k(x, x).
struct KernelParams {
  Eigen::VectorXd lengthscales;
  double amplitude = 1.0;

  Eigen::Index dims() const { return lengthscales.size(); }
};

// Gaussian integrating measure N(mean, scale * diag(base)). The base diagonal
// defaults to the per-dimension empirical variances; a std-dev base is
// available as an alternative parameterization of the same family.
struct SpectralMeasure {
  enum class Base { Variance, StdDev };

  Eigen::VectorXd mean;
  double scale = 1.0;
  Eigen::VectorXd base;

  // covariance diagonal actually used in integrals
  Eigen::VectorXd variances() const { return scale * base; }

  SpectralMeasure with_scale(double s) const {
    SpectralMeasure m = *this;
    m.scale = s;
    return m;
  }

  static SpectralMeasure from_data(const Eigen::MatrixXd& v, double scale,
                                   Base kind = Base::Variance);
};

double kernel_value(const KernelParams& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y);

// n x n gram over the rows of x
Eigen::MatrixXd gram(const KernelParams& p, const Eigen::MatrixXd& x);

// rows(x) x rows(y) cross gram
Eigen::MatrixXd cross_gram(const KernelParams& p, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y);

// k(x, X_i) for a single point against the rows of x
Eigen::VectorXd kernel_vector(const KernelParams& p, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& point);

// Cross-point smoothing of the kernel by the measure,
//   r(x, y) = ∫ k(x, t) k(t, y) mu(dt),
// in closed form (Gaussian kernel x Gaussian measure factorizes over dims).
double nuclear_dominant_value(const KernelParams& p, const SpectralMeasure& mu,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y);

Eigen::MatrixXd nuclear_dominant_gram(const KernelParams& p,
                                      const SpectralMeasure& mu,
                                      const Eigen::MatrixXd& x,
                                      const Eigen::MatrixXd& y);

// K-tilde over one point set (r evaluated on all pairs of rows of x)
Eigen::MatrixXd smoothed_gram(const KernelParams& p, const SpectralMeasure& mu,
                              const Eigen::MatrixXd& x);

// Monte Carlo estimate of the same integral; the seed is mandatory.
Eigen::MatrixXd smoothed_gram_mc(const KernelParams& p, const SpectralMeasure& mu,
                                 const Eigen::MatrixXd& x, long n_samples,
                                 std::uint64_t seed);

// Trace of the kernel's integral operator under any probability measure:
// sum of Mercer eigenvalues = k(0, 0) = amplitude.
double tau(const KernelParams& p);

}  // namespace impspec
