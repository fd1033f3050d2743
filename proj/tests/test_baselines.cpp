#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "impspec/baselines.hpp"
#include "impspec/posterior.hpp"
#include "impspec/rng.hpp"
#include "impspec/simulators.hpp"
#include "helpers.hpp"

using namespace impspec;
using testing::fixed_params;
using testing::query_of;
using testing::random_params;
using testing::toy_dataset;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

SpectralMeasure pooled_measure(const Dataset& ds, double omega) {
  Eigen::MatrixXd v = ds.d1.columns(ds.roles.v);
  if (ds.fusion()) {
    const Eigen::MatrixXd v2 = ds.d2->columns(ds.roles.v);
    const Eigen::Index n1 = v.rows();
    v.conservativeResize(n1 + v2.rows(), Eigen::NoChange);
    v.bottomRows(v2.rows()) = v2;
  }
  return SpectralMeasure::from_data(v, omega);
}

}  // namespace

TEST_CASE("ridge point estimate equals the posterior mean") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int variant = trial % 3;
    Dataset ds;
    if (variant == 0) {
      ds = toy_dataset(20, 1, 1, 1, 500 + trial);  // conditional effect
    } else if (variant == 1) {
      ds = toy_dataset(14, 1, 1, 1, 500 + trial);  // fused tables
      Dataset extra = toy_dataset(9, 1, 1, 1, 900 + trial);
      ds.d2 = extra.d1;
    } else {
      ds = toy_dataset(20, 0, 2, 1, 500 + trial);  // averaged effect
    }
    const CausalQuery q = query_of(ds);
    const int p1 = static_cast<int>(ds.roles.w.size() + ds.roles.v.size());
    const ModelParams mp = random_params(p1, 1, rng);
    const FittedModel m = build_fitted(ds, q, mp);
    const SpectralMeasure mu = pooled_measure(ds, 1.0);

    const Eigen::VectorXd w =
        ds.roles.w.empty() ? Eigen::VectorXd(0) : vec1(rng.normal());
    const Eigen::VectorXd z = vec1(rng.normal());
    const double ridge = plugin_estimator(ds, q, mp, w, z);
    const PosteriorMoments pm = posterior_moments(m, mu, w, z);
    CHECK(std::abs(ridge - pm.mean) < 1e-10);
  }
}

TEST_CASE("ridge estimate shrinks to zero under infinite noise") {
  const Dataset ds = toy_dataset(15, 1, 1, 1, 23);
  const ModelParams mp = fixed_params(2, 1, 1.2, 1e12, 0.2);
  const double v = plugin_estimator(ds, query_of(ds), mp, vec1(0.5), vec1(-0.3));
  CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("ridge estimate recovers the ablation response") {
  double se_sum = 0.0;
  long count = 0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const DgpSpec spec{"ablation", 100, 1000 + t, false};
    const Dataset ds = simulate(spec);
    const CausalQuery q = default_query(spec);
    const FittedModel m = fit_two_stage(ds, q);

    Eigen::MatrixXd zs(21, 1);
    for (int i = 0; i <= 20; ++i) zs(i, 0) = i / 20.0;
    const Eigen::VectorXd truth =
        oracle_effect(spec, Estimand::Ate, zs, 200000, 42);
    for (int i = 0; i <= 20; ++i) {
      const double est =
          plugin_estimator(ds, q, m.params, Eigen::VectorXd(0), zs.row(i));
      se_sum += (est - truth[i]) * (est - truth[i]);
      ++count;
    }
  }
  CHECK(std::sqrt(se_sum / count) <= 0.35);
}

TEST_CASE("nuclear-dominant posterior collapses away from its inputs") {
  const DgpSpec spec{"synthetic", 50, 2, false};
  const Dataset ds = simulate(spec);
  const CausalQuery q = default_query(spec);
  const BayesimpModel m = fit_bayesimp(ds, q);

  const Eigen::VectorXd d_col = ds.d1.column("D");
  std::vector<double> in_sample;
  for (Eigen::Index i = 0; i < 25; ++i) {
    Eigen::VectorXd w(2);
    w << d_col[i], 0.0;
    in_sample.push_back(bayesimp_moments(m, w, vec1(0.0)).variance);
  }
  std::sort(in_sample.begin(), in_sample.end());
  const double med = in_sample[in_sample.size() / 2];

  const double ls = m.params.stage1.lengthscales[0];
  Eigen::VectorXd far(2);
  far << d_col.maxCoeff() + 10.0 * ls, 0.0;
  const double var_far = bayesimp_moments(m, far, vec1(0.0)).variance;
  CHECK(var_far <= 1e-3 * med);
  CHECK(var_far >= 0.0);
}

TEST_CASE("nuclear-dominant covariance is coherent") {
  const Dataset ds = toy_dataset(18, 1, 1, 1, 33);
  const BayesimpModel m = fit_bayesimp(ds, query_of(ds));

  Rng rng(34);
  for (int i = 0; i < 8; ++i) {
    const Eigen::VectorXd w = vec1(rng.normal());
    const Eigen::VectorXd z = vec1(rng.normal());
    const Eigen::VectorXd w2 = vec1(rng.normal());
    const Eigen::VectorXd z2 = vec1(rng.normal());
    const PosteriorMoments pm = bayesimp_moments(m, w, z);
    CHECK(pm.variance >= 0.0);
    const double self = bayesimp_cross_cov(m, w, z, w, z);
    CHECK(std::abs(self - (pm.s1 + pm.s2 + pm.s3)) < 1e-10);
    const double ab = bayesimp_cross_cov(m, w, z, w2, z2);
    const double ba = bayesimp_cross_cov(m, w2, z2, w, z);
    CHECK(std::abs(ab - ba) < 1e-10);
  }
}

TEST_CASE("nuclear-dominant curve averages its pointwise moments") {
  Dataset ds = toy_dataset(16, 0, 1, 2, 35);
  const BayesimpModel m = fit_bayesimp(ds, query_of(ds));

  Eigen::MatrixXd grid(3, 1);
  grid << -0.4, 0.1, 0.6;
  Eigen::MatrixXd marg(3, 1);
  marg << 0.2, -0.1, 0.4;
  const AteCurve curve = bayesimp_ate_profile(m, grid, {0}, marg, {1});
  REQUIRE(curve.mean.size() == 3);

  for (Eigen::Index g = 0; g < 3; ++g) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index r = 0; r < 3; ++r) {
      Eigen::VectorXd z(2);
      z << grid(g, 0), marg(r, 0);
      mean += bayesimp_moments(m, Eigen::VectorXd(0), z).mean;
      for (Eigen::Index s = 0; s < 3; ++s) {
        Eigen::VectorXd z2(2);
        z2 << grid(g, 0), marg(s, 0);
        var += bayesimp_cross_cov(m, Eigen::VectorXd(0), z, Eigen::VectorXd(0), z2);
      }
    }
    CHECK(std::abs(curve.mean[g] - mean / 3.0) < 1e-9);
    CHECK(std::abs(curve.cov(g, g) - var / 9.0) <
          1e-8 * (1.0 + std::abs(var / 9.0)));
  }
}

TEST_CASE("sampling baseline interpolates a noiseless point") {
  SamplingGpModel m;
  Dataset ds = toy_dataset(1, 0, 1, 1, 40);
  m.query = query_of(ds);
  m.x1.resize(1, 1);
  m.x1 << 0.3;
  m.z2 = m.x1;
  m.v2 = m.x1;
  m.y = vec1(1.7);
  m.f_kernel.lengthscales = vec1(1.0);
  m.f_kernel.amplitude = 1.0;
  m.sigma2 = 1e-12;
  m.g_kernels = {m.f_kernel};
  m.eta2 = vec1(1e-12);

  const Eigen::MatrixXd kf = gram(m.f_kernel, m.x1) +
                             m.sigma2 * Eigen::MatrixXd::Identity(1, 1);
  m.chol_f = CholFactor(kf);
  m.alpha_f = m.chol_f.solve(m.y);
  m.chol_g = {CholFactor(gram(m.g_kernels[0], m.z2) +
                         m.eta2[0] * Eigen::MatrixXd::Identity(1, 1))};
  m.alpha_g = {m.chol_g[0].solve(m.v2.col(0)).eval()};

  const SampledEffect e =
      sampling_gp_effect(m, Eigen::VectorXd(0), vec1(0.3), 2000, 17);
  CHECK(std::abs(e.mean - 1.7) < 1e-4);
  CHECK(e.variance < 1e-6);
}

TEST_CASE("sampling baseline is deterministic in its seed") {
  const Dataset ds = toy_dataset(20, 1, 1, 1, 41);
  AdamConfig cfg;
  cfg.iterations = 150;
  const SamplingGpModel m = fit_sampling_gp(ds, query_of(ds), cfg);
  const SampledEffect a = sampling_gp_effect(m, vec1(0.2), vec1(0.1), 500, 7);
  const SampledEffect b = sampling_gp_effect(m, vec1(0.2), vec1(0.1), 500, 7);
  const SampledEffect c = sampling_gp_effect(m, vec1(0.2), vec1(0.1), 500, 8);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
  CHECK(a.mean != c.mean);

  CHECK_THROWS_AS(sampling_gp_effect(m, vec1(0.2), vec1(0.1), 0, 7),
                  std::invalid_argument);
}

TEST_CASE("sampling error shrinks like the square root of the draw count") {
  const Dataset ds = toy_dataset(20, 1, 1, 1, 47);
  AdamConfig cfg;
  cfg.iterations = 150;
  const SamplingGpModel m = fit_sampling_gp(ds, query_of(ds), cfg);

  // repeat the estimate with independent seeds; the spread of the mean
  // should drop by about sqrt(2) when the draw count doubles
  const int reps = 400;
  auto spread = [&](Eigen::Index n_draws, std::uint64_t base) {
    double s = 0.0, ss = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double v =
          sampling_gp_effect(m, vec1(0.2), vec1(0.1), n_draws, base + r).mean;
      s += v;
      ss += v * v;
    }
    s /= reps;
    return std::sqrt(ss / reps - s * s);
  };
  const double wide = spread(64, 10000);
  const double narrow = spread(128, 20000);
  CHECK(narrow / wide > 0.6);
  CHECK(narrow / wide < 0.85);
}
