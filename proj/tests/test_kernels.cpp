#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "impspec/kernels.hpp"
#include "impspec/rng.hpp"
#include "impspec/truncated.hpp"
#include "oracles.hpp"

using namespace impspec;

namespace {

KernelParams make_params(std::initializer_list<double> ls, double amp) {
  KernelParams p;
  p.lengthscales.resize(static_cast<Eigen::Index>(ls.size()));
  Eigen::Index i = 0;
  for (double l : ls) p.lengthscales[i++] = l;
  p.amplitude = amp;
  return p;
}

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

}  // namespace

TEST_CASE("kernel value closed form") {
  const KernelParams p = make_params({1.0}, 1.0);
  CHECK(kernel_value(p, vec1(0.3), vec1(0.3)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(kernel_value(p, vec1(0.0), vec1(1.0)) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(std::abs(kernel_value(p, vec1(0.0), vec1(1.0)) - 0.60653065971263342) < 1e-12);

  const KernelParams q = make_params({2.5}, 2.5);
  CHECK(kernel_value(q, vec1(-1.0), vec1(-1.0)) == doctest::Approx(2.5).epsilon(1e-14));

  // anisotropic: exponents add across dimensions
  KernelParams r = make_params({1.0, 2.0}, 1.5);
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 2.0;
  CHECK(kernel_value(r, a, b) ==
        doctest::Approx(1.5 * std::exp(-(0.5 + 4.0 / 8.0))).epsilon(1e-12));
}

TEST_CASE("gram is symmetric positive semidefinite") {
  Rng rng(42);
  const Eigen::MatrixXd x = rng.normal_matrix(20, 3);
  const KernelParams p = make_params({0.7, 1.3, 0.4}, 1.8);
  const Eigen::MatrixXd k = gram(p, x);

  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < 20; ++i) CHECK(k(i, i) == doctest::Approx(1.8).epsilon(1e-14));

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);

  // the cross gram of a set with itself is the gram
  const Eigen::MatrixXd kc = cross_gram(p, x, x);
  CHECK((k - kc).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::VectorXd kv = kernel_vector(p, x, x.row(5).transpose());
  CHECK((kv - k.col(5)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("smoothed kernel at the origin matches quadrature and 1/sqrt(3)") {
  const KernelParams p = make_params({1.0}, 1.0);
  SpectralMeasure mu;
  mu.mean = vec1(0.0);
  mu.base = vec1(1.0);
  mu.scale = 1.0;

  Eigen::MatrixXd v(1, 1);
  v(0, 0) = 0.0;
  const double r0 = smoothed_gram(p, mu, v)(0, 0);

  // r(0,0) = int exp(-t^2/2)^2 N(t;0,1) dt = 1/sqrt(3)
  CHECK(std::abs(r0 - 1.0 / std::sqrt(3.0)) < 1e-12);

  const double quad = oracle::gauss_integral(
      [&](double t) {
        return kernel_value(p, vec1(0.0), vec1(t)) * kernel_value(p, vec1(t), vec1(0.0));
      },
      0.0, 1.0);
  CHECK(std::abs(r0 - quad) < 1e-9);
}

TEST_CASE("smoothed kernel matches quadrature on random pairs") {
  Rng rng(7);
  const KernelParams p = make_params({0.8}, 1.4);
  SpectralMeasure mu;
  mu.mean = vec1(0.3);
  mu.base = vec1(0.9);
  mu.scale = 1.2;

  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd x = vec1(rng.normal());
    const Eigen::VectorXd y = vec1(rng.normal());
    const double closed = nuclear_dominant_value(p, mu, x, y);
    const double quad = oracle::gauss_integral(
        [&](double t) {
          return kernel_value(p, x, vec1(t)) * kernel_value(p, vec1(t), y);
        },
        mu.mean[0], mu.variances()[0]);
    CHECK(std::abs(closed - quad) < 1e-6);
  }

  // multi-dimensional case factorizes over dimensions
  const KernelParams p2 = make_params({0.8, 1.1}, 2.0);
  SpectralMeasure mu2;
  mu2.mean.resize(2);
  mu2.mean << 0.1, -0.4;
  mu2.base.resize(2);
  mu2.base << 0.7, 1.3;
  Eigen::VectorXd x2(2), y2(2);
  x2 << 0.5, -0.2;
  y2 << -0.3, 0.6;
  double quad2 = p2.amplitude * p2.amplitude;
  for (int d = 0; d < 2; ++d) {
    const double l2 = p2.lengthscales[d] * p2.lengthscales[d];
    quad2 *= oracle::gauss_integral(
        [&](double t) {
          return std::exp(-0.5 * (x2[d] - t) * (x2[d] - t) / l2) *
                 std::exp(-0.5 * (t - y2[d]) * (t - y2[d]) / l2);
        },
        mu2.mean[d], mu2.variances()[d]);
  }
  CHECK(std::abs(nuclear_dominant_value(p2, mu2, x2, y2) - quad2) < 1e-6);
}

TEST_CASE("smoothed kernel collapses to a point mass at small scale") {
  const KernelParams p = make_params({0.9}, 1.3);
  SpectralMeasure mu;
  mu.mean = vec1(0.4);
  mu.base = vec1(1.0);
  mu.scale = 1e-12;

  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd x = vec1(rng.normal());
    const Eigen::VectorXd y = vec1(rng.normal());
    const double expect = kernel_value(p, x, mu.mean) * kernel_value(p, mu.mean, y);
    CHECK(std::abs(nuclear_dominant_value(p, mu, x, y) - expect) < 1e-8);
  }
}

TEST_CASE("monte carlo smoothing agrees with the closed form") {
  Rng rng(11);
  Eigen::MatrixXd x = rng.normal_matrix(4, 2);
  const KernelParams p = make_params({0.9, 1.2}, 1.5);
  const SpectralMeasure mu = SpectralMeasure::from_data(x, 1.0);

  const Eigen::MatrixXd closed = smoothed_gram(p, mu, x);
  const Eigen::MatrixXd mc = smoothed_gram_mc(p, mu, x, 1000000, 99);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(std::abs(mc(i, j) - closed(i, j)) <= 0.01 * std::abs(closed(i, j)));
    }
  }
}

TEST_CASE("smoothed gram is symmetric and decays away from the measure") {
  Rng rng(5);
  const Eigen::MatrixXd x = rng.normal_matrix(8, 1);
  const KernelParams p = make_params({0.8}, 1.0);
  const SpectralMeasure mu = SpectralMeasure::from_data(x, 1.0);

  const Eigen::MatrixXd r = smoothed_gram(p, mu, x);
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      CHECK(std::abs(nuclear_dominant_value(p, mu, x.row(i).transpose(),
                                            x.row(j).transpose()) -
                     r(i, j)) < 1e-12);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);

  SpectralMeasure unit;
  unit.mean = vec1(0.0);
  unit.base = vec1(1.0);
  double prev = nuclear_dominant_value(p, unit, vec1(0.5), vec1(0.0));
  for (int k = 2; k <= 8; ++k) {
    const double cur = nuclear_dominant_value(p, unit, vec1(0.5 * k), vec1(0.0));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("operator trace equals the amplitude") {
  CHECK(tau(make_params({0.5}, 1.0)) == 1.0);
  CHECK(tau(make_params({0.5, 2.0}, 2.5)) == 2.5);
}

TEST_CASE("operator trace matches the eigenvalue sum of the feature expansion") {
  const KernelParams p = make_params({0.6}, 1.7);
  SpectralMeasure mu;
  mu.mean = vec1(0.0);
  mu.base = vec1(1.0);

  const TruncatedFeatures f = nystrom_eigen(p, mu, 2000, 2000, 17);
  CHECK(std::abs(f.lambda.sum() - tau(p)) <= 0.05 * tau(p));
}

TEST_CASE("measure construction from data") {
  Eigen::MatrixXd v(4, 2);
  v << 1.0, 10.0, 2.0, 12.0, 3.0, 14.0, 4.0, 16.0;
  const SpectralMeasure mu = SpectralMeasure::from_data(v, 2.0);
  CHECK(mu.mean[0] == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(mu.mean[1] == doctest::Approx(13.0).epsilon(1e-14));
  // sample variance of {1,2,3,4} is 5/3, doubled by the scale
  CHECK(mu.variances()[0] == doctest::Approx(2.0 * 5.0 / 3.0).epsilon(1e-12));

  const SpectralMeasure sd =
      SpectralMeasure::from_data(v, 1.0, SpectralMeasure::Base::StdDev);
  CHECK(sd.base[0] == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
  CHECK(mu.with_scale(4.0).variances()[0] ==
        doctest::Approx(4.0 * 5.0 / 3.0).epsilon(1e-12));
}
