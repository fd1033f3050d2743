#pragma once

#include <cstdint>
#include <string>

#include "impspec/dataset.hpp"

namespace impspec {

// name ∈ {ablation, synthetic, healthcare}
//  - ablation: fusion pair D1=(Y, X1..X5), D2=(X1..X5, Z); W empty.
//  - synthetic: single table (A,B,C,D,E,Y); W=(D,B), V=C, Z=B.
//  - healthcare: fusion pair D1=(VOL, PSA), D2=(PSA, STATIN, AGE, BMI); W empty.
// binary_treatments switches the healthcare sigmoid nodes from their
// continuous propensities to Bernoulli draws.
struct DgpSpec {
  std::string name;
  Eigen::Index n = 100;
  std::uint64_t seed = 0;
  bool binary_treatments = false;
};

Dataset simulate(const DgpSpec& spec);

// Default role layout and estimand for each simulator.
CausalQuery default_query(const DgpSpec& spec);

// Ground truth by Monte Carlo on the intervened graph. Column layout of
// `points` per (name, estimand):
//   ablation, any:        (z)
//   synthetic, cate:      (d, b)       E[Y | do(D=d), B=b]
//   synthetic, att:       (b, b')      E[Y | do(B=b), B=b']
//   healthcare, ate:      (s)          E[VOL | do(STATIN=s)]
Eigen::VectorXd oracle_effect(const DgpSpec& spec, Estimand estimand,
                              const Eigen::MatrixXd& points, long n_mc,
                              std::uint64_t seed);

// Noise scales solved at simulator-construction time (cached per process):
// ablation per-dimension and outcome noise matching signal/noise = 2:1, and
// the healthcare VOL noise matching R^2 = 0.13.
struct AblationNoise {
  Eigen::VectorXd sigma2_x;  // 5 entries
  double sigma2_y = 0.0;
};
const AblationNoise& ablation_noise();
double healthcare_vol_noise_var(bool binary_treatments);

}  // namespace impspec
