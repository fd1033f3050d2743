// Small dataset and parameter factories shared by the test binaries.
#pragma once

#include <string>

#include "impspec/dataset.hpp"
#include "impspec/gp_core.hpp"
#include "impspec/rng.hpp"

namespace testing {

// single-table dataset with columns (Y, W..., V..., Z...) of standard normals
inline impspec::Dataset toy_dataset(Eigen::Index n, int wd, int vd, int zd,
                                    std::uint64_t seed) {
  impspec::Rng rng(seed);
  impspec::Dataset ds;
  ds.d1.names = {"Y"};
  for (int i = 0; i < wd; ++i) ds.d1.names.push_back("W" + std::to_string(i));
  for (int i = 0; i < vd; ++i) ds.d1.names.push_back("V" + std::to_string(i));
  for (int i = 0; i < zd; ++i) ds.d1.names.push_back("Z" + std::to_string(i));
  ds.d1.values = rng.normal_matrix(n, 1 + wd + vd + zd);
  ds.roles.y = "Y";
  for (int i = 0; i < wd; ++i) ds.roles.w.push_back("W" + std::to_string(i));
  for (int i = 0; i < vd; ++i) ds.roles.v.push_back("V" + std::to_string(i));
  for (int i = 0; i < zd; ++i) ds.roles.z.push_back("Z" + std::to_string(i));
  return ds;
}

inline impspec::CausalQuery query_of(const impspec::Dataset& ds) {
  impspec::CausalQuery q;
  q.roles = ds.roles;
  q.fusion = ds.fusion();
  q.estimand = ds.roles.w.empty() ? impspec::Estimand::Ate : impspec::Estimand::Cate;
  return q;
}

inline impspec::ModelParams fixed_params(int p1, int p2, double amp, double sigma2,
                                         double eta2) {
  impspec::ModelParams mp;
  mp.stage1.lengthscales = Eigen::VectorXd::Constant(p1, 0.9);
  mp.stage1.amplitude = amp;
  mp.stage2.lengthscales = Eigen::VectorXd::Constant(p2, 1.1);
  mp.stage2.amplitude = 1.4;
  mp.sigma2 = sigma2;
  mp.eta2 = eta2;
  return mp;
}

// randomized positive parameters for property checks
inline impspec::ModelParams random_params(int p1, int p2, impspec::Rng& rng) {
  impspec::ModelParams mp;
  mp.stage1.lengthscales =
      (0.5 * impspec::Rng(rng.index(1u << 30)).normal_vector(p1)).array().exp();
  mp.stage2.lengthscales =
      (0.5 * impspec::Rng(rng.index(1u << 30)).normal_vector(p2)).array().exp();
  mp.stage1.amplitude = 0.5 + rng.uniform() * 2.0;
  mp.stage2.amplitude = 0.5 + rng.uniform() * 2.0;
  mp.sigma2 = 0.05 + rng.uniform() * 0.5;
  mp.eta2 = 0.05 + rng.uniform() * 0.5;
  return mp;
}

}  // namespace testing
