#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "impspec/calibration.hpp"
#include "impspec/linalg.hpp"
#include "impspec/rng.hpp"
#include "helpers.hpp"

using namespace impspec;
using testing::fixed_params;
using testing::query_of;
using testing::toy_dataset;

namespace {

// dataset whose first column tags every row with its index
Dataset tagged_dataset(Eigen::Index n, std::uint64_t seed, bool fused) {
  Dataset ds = toy_dataset(n, 0, 1, 1, seed);
  for (Eigen::Index i = 0; i < n; ++i) ds.d1.values(i, 0) = static_cast<double>(i);
  if (fused) {
    Dataset other = toy_dataset(n + 4, 0, 1, 1, seed + 1);
    for (Eigen::Index i = 0; i < n + 4; ++i)
      other.d1.values(i, 0) = 1000.0 + static_cast<double>(i);
    ds.d2 = other.d1;
  }
  return ds;
}

std::multiset<double> tags(const Table& t) {
  std::multiset<double> out;
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) out.insert(t.values(i, 0));
  return out;
}

ModelBuilder frozen_builder(const ModelParams& mp) {
  return [mp](const Dataset& d) {
    CausalQuery q = query_of(d);
    return build_fitted(d, q, mp);
  };
}

CalibrationGrid basic_grid() {
  CalibrationGrid g;
  g.alphas = {0.2, 0.5, 0.8};
  g.w_points.resize(2, 0);
  g.z_points.resize(2, 1);
  g.z_points << -0.3, 0.4;
  g.omega_candidates = {1.0};
  return g;
}

}  // namespace

TEST_CASE("splits partition every table") {
  for (bool fused : {false, true}) {
    const Dataset ds = tagged_dataset(21, 3, fused);
    const auto [a, b] = split_dataset(ds, 77);

    CHECK(a.d1.values.rows() == 10);  // floor(21 / 2)
    CHECK(b.d1.values.rows() == 11);
    std::multiset<double> merged = tags(a.d1);
    for (double t : tags(b.d1)) merged.insert(t);
    CHECK(merged == tags(ds.d1));

    if (fused) {
      REQUIRE(a.d2.has_value());
      REQUIRE(b.d2.has_value());
      CHECK(a.d2->values.rows() == 12);
      CHECK(b.d2->values.rows() == 13);
      std::multiset<double> m2 = tags(*a.d2);
      for (double t : tags(*b.d2)) m2.insert(t);
      CHECK(m2 == tags(*ds.d2));
    } else {
      CHECK(!a.d2.has_value());
    }

    // deterministic in the seed, sensitive to it
    const auto [a2, b2] = split_dataset(ds, 77);
    CHECK(a.d1.values == a2.d1.values);
    CHECK(b.d1.values == b2.d1.values);
    const auto [a3, b3] = split_dataset(ds, 78);
    CHECK(a.d1.values != a3.d1.values);
  }
}

TEST_CASE("fusion tables split independently") {
  const Dataset ds = tagged_dataset(20, 5, true);
  const auto [a, b] = split_dataset(ds, 9);
  // if both tables shared one permutation the d2 row order would mirror d1;
  // check instead that d2 rows come only from d2 and d1 rows only from d1
  for (double t : tags(a.d1)) CHECK(t < 1000.0);
  for (double t : tags(*a.d2)) CHECK(t >= 1000.0);
}

TEST_CASE("bootstrap resamples draw rows from the original") {
  const Dataset ds = tagged_dataset(15, 6, true);
  const Dataset r = resample_dataset(ds, 11);
  CHECK(r.d1.values.rows() == 15);
  REQUIRE(r.d2.has_value());
  CHECK(r.d2->values.rows() == 19);

  const std::multiset<double> pool = tags(ds.d1);
  for (double t : tags(r.d1)) CHECK(pool.count(t) == 1);

  const Dataset r2 = resample_dataset(ds, 11);
  CHECK(r.d1.values == r2.d1.values);
  const Dataset r3 = resample_dataset(ds, 12);
  CHECK(r.d1.values != r3.d1.values);
}

TEST_CASE("degenerate dataset drives the coverage error to its floor") {
  // identical rows: every bootstrap replicate reproduces the point estimate,
  // so coverage is 1 at every alpha and the error equals 1 - alpha
  Dataset ds = toy_dataset(24, 0, 1, 1, 8);
  ds.d1.values.rowwise() = Eigen::RowVector3d(0.7, 0.2, -0.1);

  const ModelParams mp = fixed_params(1, 1, 1.0, 0.1, 0.1);
  CalibrationGrid g = basic_grid();
  g.alphas = {0.999};
  g.z_points.resize(1, 1);
  g.z_points << -0.1;
  g.w_points.resize(1, 0);

  const SpectralMeasure cand = SpectralMeasure::from_data(
      Eigen::MatrixXd::Random(10, 1), 1.0);
  const double err = calibration_error(frozen_builder(mp), ds, cand, g,
                                       CalibrationOptions{}, 4);
  CHECK(err == doctest::Approx(0.001).epsilon(1e-9));
}

TEST_CASE("tiny levels keep the error near the floor on real data") {
  const Dataset ds = toy_dataset(30, 0, 1, 1, 9);
  const ModelParams mp = fixed_params(1, 1, 1.0, 0.2, 0.2);
  CalibrationGrid g = basic_grid();
  g.alphas = {0.001};
  const SpectralMeasure cand =
      SpectralMeasure::from_data(ds.d1.columns(ds.roles.v), 1.0);
  const double err = calibration_error(frozen_builder(mp), ds, cand, g,
                                       CalibrationOptions{}, 10);
  // an alpha=0.001 interval should almost never cover
  CHECK(err <= 0.05);
}

TEST_CASE("coverage error is a bounded deterministic statistic") {
  Dataset ds = toy_dataset(26, 0, 1, 1, 12);
  Dataset extra = toy_dataset(26, 0, 1, 1, 13);
  ds.d2 = extra.d1;

  const ModelParams mp = fixed_params(1, 1, 1.2, 0.15, 0.2);
  const CalibrationGrid g = basic_grid();
  const SpectralMeasure cand =
      SpectralMeasure::from_data(ds.d1.columns(ds.roles.v), 1.0);
  const double a = calibration_error(frozen_builder(mp), ds, cand, g,
                                     CalibrationOptions{}, 21);
  const double b = calibration_error(frozen_builder(mp), ds, cand, g,
                                     CalibrationOptions{}, 21);
  CHECK(a == b);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
}

TEST_CASE("measure selection returns the single candidate") {
  const Dataset ds = toy_dataset(24, 0, 1, 1, 14);
  const ModelParams mp = fixed_params(1, 1, 1.1, 0.2, 0.2);
  CalibrationGrid g = basic_grid();
  g.omega_candidates = {0.5};
  const SpectralSelection sel = optimize_spectral_measure(
      frozen_builder(mp), ds, g, CalibrationOptions{}, 31);
  CHECK(sel.omega == 0.5);
  REQUIRE(sel.errors.size() == 1);
  CHECK(std::isfinite(sel.errors[0]));

  g.omega_candidates = {-1.0, 1.0};
  CHECK_THROWS_AS(optimize_spectral_measure(frozen_builder(mp), ds, g,
                                            CalibrationOptions{}, 31),
                  std::invalid_argument);
}

TEST_CASE("ties between candidate scales go to the one nearest 1") {
  // identical rows make every candidate's error identical
  Dataset ds = toy_dataset(20, 0, 1, 1, 15);
  ds.d1.values.rowwise() = Eigen::RowVector3d(0.4, 0.1, 0.3);
  const ModelParams mp = fixed_params(1, 1, 1.0, 0.1, 0.1);
  CalibrationGrid g = basic_grid();

  g.omega_candidates = {0.25, 4.0};
  const SpectralSelection s1 = optimize_spectral_measure(
      frozen_builder(mp), ds, g, CalibrationOptions{}, 32);
  CHECK(s1.errors[0] == s1.errors[1]);
  CHECK(s1.omega == 0.25);

  g.omega_candidates = {4.0, 0.25};
  const SpectralSelection s2 = optimize_spectral_measure(
      frozen_builder(mp), ds, g, CalibrationOptions{}, 32);
  CHECK(s2.omega == 0.25);
}

TEST_CASE("measure selection is deterministic") {
  const Dataset ds = toy_dataset(28, 0, 1, 1, 16);
  const ModelParams mp = fixed_params(1, 1, 1.3, 0.2, 0.15);
  CalibrationGrid g = basic_grid();
  g.omega_candidates = {0.25, 1.0, 4.0};

  const SpectralSelection a = optimize_spectral_measure(
      frozen_builder(mp), ds, g, CalibrationOptions{}, 33);
  const SpectralSelection b = optimize_spectral_measure(
      frozen_builder(mp), ds, g, CalibrationOptions{}, 33);
  CHECK(a.omega == b.omega);
  REQUIRE(a.errors.size() == b.errors.size());
  for (size_t i = 0; i < a.errors.size(); ++i) CHECK(a.errors[i] == b.errors[i]);
  CHECK(a.measure.scale == b.measure.scale);
}

TEST_CASE("failing replicates beyond the budget abort the measurement") {
  const Dataset ds = toy_dataset(24, 0, 1, 1, 17);
  const ModelParams mp = fixed_params(1, 1, 1.0, 0.2, 0.2);
  const SpectralMeasure cand =
      SpectralMeasure::from_data(ds.d1.columns(ds.roles.v), 1.0);
  CalibrationGrid g = basic_grid();
  CalibrationOptions opts;
  opts.n_boot = 20;
  opts.refit_boot = true;  // builder runs inside every replicate

  // the two half fits succeed, then every replicate fit throws
  auto failing = [&, calls = 0](const Dataset& d) mutable {
    if (++calls > 2) throw NumericalError("synthetic failure");
    return build_fitted(d, query_of(d), mp);
  };
  CHECK_THROWS_AS(
      calibration_error(failing, ds, cand, g, opts, 41), NumericalError);

  // two failures in twenty stay inside the budget
  auto flaky = [&, calls = 0](const Dataset& d) mutable {
    ++calls;
    if (calls == 4 || calls == 7) throw NumericalError("synthetic failure");
    return build_fitted(d, query_of(d), mp);
  };
  const double err = calibration_error(flaky, ds, cand, g, opts, 41);
  CHECK(err >= 0.0);
  CHECK(err <= 1.0);
}

TEST_CASE("coverage profile of an always-covering method") {
  const std::vector<double> alphas = {0.2, 0.5, 0.8};
  Eigen::VectorXd truth(2);
  truth << 1.0, -1.0;

  std::vector<TrialIntervals> trials;
  for (int t = 0; t < 6; ++t) {
    TrialIntervals ti;
    ti.mean = truth;
    ti.sd = Eigen::VectorXd::Constant(2, 1.0);
    trials.push_back(ti);
  }
  const CoverageProfile p = coverage_profile(trials, truth, alphas, 50, 1);
  REQUIRE(p.coverage.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(p.coverage[i] == 1.0);
    CHECK(p.error[i] == doctest::Approx(1.0 - alphas[i]).epsilon(1e-12));
    CHECK(p.band_lo[i] <= p.band_hi[i]);
    CHECK(p.band_lo[i] >= 0.0);
    CHECK(p.band_hi[i] <= 1.0);
  }
  CHECK(p.total_error ==
        doctest::Approx((0.8 + 0.5 + 0.2) / 3.0).epsilon(1e-12));
  CHECK(p.total_sd <= 1e-12);
}

TEST_CASE("coverage rises with the level") {
  // trials scattered around the truth with matched scale
  Rng rng(55);
  Eigen::VectorXd truth(3);
  truth << 0.0, 1.0, -0.5;
  std::vector<TrialIntervals> trials;
  for (int t = 0; t < 40; ++t) {
    TrialIntervals ti;
    ti.mean = truth + rng.normal_vector(3);
    ti.sd = Eigen::VectorXd::Constant(3, 1.0);
    trials.push_back(ti);
  }
  const std::vector<double> alphas = {0.1, 0.3, 0.5, 0.7, 0.9};
  const CoverageProfile p = coverage_profile(trials, truth, alphas, 50, 2);
  for (int i = 1; i < 5; ++i) CHECK(p.coverage[i] >= p.coverage[i - 1]);
}

TEST_CASE("coverage matches the level for gaussian trials") {
  // exact normal(truth, 1) trial means with unit posterior sd: empirical
  // coverage at every level should track the level itself
  Rng rng(56);
  Eigen::VectorXd truth(1);
  truth << 0.3;
  std::vector<TrialIntervals> trials;
  for (int t = 0; t < 500; ++t) {
    TrialIntervals ti;
    ti.mean = truth + rng.normal_vector(1);
    ti.sd = Eigen::VectorXd::Constant(1, 1.0);
    trials.push_back(ti);
  }
  const std::vector<double> alphas = {0.2, 0.4, 0.6, 0.8, 0.95};
  const CoverageProfile p = coverage_profile(trials, truth, alphas, 100, 3);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(p.coverage[i] - alphas[i]) <= 0.07);
}

TEST_CASE("coverage profile input validation") {
  const std::vector<double> alphas = {0.5};
  Eigen::VectorXd truth(1);
  truth << 0.0;
  TrialIntervals ti;
  ti.mean = truth;
  ti.sd = Eigen::VectorXd::Constant(1, 1.0);

  CHECK_THROWS_AS(coverage_profile({ti}, truth, alphas, 10, 1),
                  std::invalid_argument);

  Eigen::VectorXd bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(coverage_profile({ti, ti}, bad, alphas, 10, 1),
                  std::invalid_argument);
}
