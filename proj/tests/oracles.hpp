// Slow, independent reference implementations used only by tests. Everything
// here favors transparency over speed: adaptive quadrature instead of closed
// forms, dense eigendecompositions instead of Cholesky tricks.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace oracle {

// Adaptive Simpson on [a, b].
inline double simpson_slice(const std::function<double(double)>& f, double a, double b,
                            double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_slice(f, a, m, fa, flm, fm);
  const double right = simpson_slice(f, m, b, fm, frm, fb);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = simpson_slice(f, a, b, fa, fm, fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Gaussian-weighted integral ∫ f(t) N(t | mean, var) dt over ±10 sd.
inline double gauss_integral(const std::function<double(double)>& f, double mean, double var,
                             double tol = 1e-12) {
  const double sd = std::sqrt(var);
  const double norm = 1.0 / (sd * std::sqrt(2.0 * 3.14159265358979323846));
  auto g = [&](double t) {
    const double u = (t - mean) / sd;
    return f(t) * norm * std::exp(-0.5 * u * u);
  };
  return integrate(g, mean - 10.0 * sd, mean + 10.0 * sd, tol);
}

// Log density of N(mean, cov) at x via a dense eigendecomposition; tolerates
// (and pseudo-inverts past) eigenvalues below floor, so it is usable on the
// rank-deficient covariances the posterior produces.
inline double dense_gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& cov, double floor = 1e-12) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd evals = es.eigenvalues();
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * (x - mean);
  double quad = 0.0;
  double logdet = 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals[i] <= floor) continue;
    quad += proj[i] * proj[i] / evals[i];
    logdet += std::log(evals[i]);
    ++rank;
  }
  const double log2pi = 1.8378770664093454836;
  return -0.5 * (rank * log2pi + logdet + quad);
}

// Central difference gradient, 2-point and 4-point stencils.
inline Eigen::VectorXd fd_gradient2(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline Eigen::VectorXd fd_gradient4(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, double h = 1e-4) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd x1 = x, x2 = x, x3 = x, x4 = x;
    x1[i] -= 2.0 * h;
    x2[i] -= h;
    x3[i] += h;
    x4[i] += 2.0 * h;
    g[i] = (f(x1) - 8.0 * f(x2) + 8.0 * f(x3) - f(x4)) / (12.0 * h);
  }
  return g;
}

// Welford accumulator for streaming mean/variance.
struct Welford {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_mean() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

}  // namespace oracle
