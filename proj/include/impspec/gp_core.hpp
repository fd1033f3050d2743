#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "impspec/dataset.hpp"
#include "impspec/kernels.hpp"
#include "impspec/linalg.hpp"

namespace impspec {

// Stage 1 covers the concatenated (W, V) input dimensions with a single
// trained amplitude; the amplitude is carried by k_V (k_W's is fixed at 1),
// the only split consistent with K_VV and tau appearing on their own in the
// moment formulas. Stage 2 covers the Z dimensions.
struct ModelParams {
  KernelParams stage1;
  KernelParams stage2;
  double sigma2 = 0.1;
  double eta2 = 0.1;
};

// Everything the posterior needs, factorized once per (data, params).
struct FittedModel {
  Dataset data;
  CausalQuery query;
  ModelParams params;

  Eigen::MatrixXd w1, v1, v2, z2;  // stage tables (v2/z2 from the fusion table when present)
  Eigen::VectorXd y;

  Eigen::MatrixXd kvv1;    // k_V over stage-1 V rows
  Eigen::MatrixXd kv2v1;   // cross gram, stage-2 V rows x stage-1 V rows
  Eigen::MatrixXd kvv2;    // k_V over stage-2 V rows
  CholFactor chol1;        // K_WW ⊙ K_VV + sigma^2 I
  CholFactor chol2;        // K_ZZ + eta^2 I
  Eigen::VectorXd ry;      // chol1^{-1} y
  Eigen::MatrixXd inv1;    // (K_WW ⊙ K_VV + sigma^2 I)^{-1}

  std::vector<double> trace1, trace2;  // best-so-far objective traces from fitting

  bool w_empty() const { return query.roles.w.empty(); }
  Eigen::Index n1() const { return v1.rows(); }
  Eigen::Index n2() const { return v2.rows(); }
  KernelParams w_kernel() const;  // amplitude 1
  KernelParams v_kernel() const;  // carries the stage-1 amplitude
  // k_W(w, W_i) over stage-1 rows; all-ones when W is empty
  Eigen::VectorXd kw_vector(const Eigen::VectorXd& w) const;
  double kww(const Eigen::VectorXd& w, const Eigen::VectorXd& w2) const;
};

// log N(y | 0, K_WW ⊙ K_VV + sigma^2 I); the Hadamard factor drops out when
// W is empty (all-ones gram).
double log_marginal_likelihood(const Dataset& data, const CausalQuery& query,
                               const ModelParams& params);

// Spectral-weighted stage-2 objective in its closed form,
//   c - (tau/2) log|K_ZZ + eta^2 I| - (1/2) Tr[(K_ZZ + eta^2 I)^{-1} K_VV],
// with c = -(tau n / 2) log(2 pi) and tau the stage-1 amplitude.
double weighted_log_marginal_likelihood(const Dataset& data, const CausalQuery& query,
                                        const ModelParams& params);

struct AdamConfig {
  int iterations = 1000;
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double fd_step = 1e-4;  // central-difference step in log-parameter space
  // optional per-coordinate box (same space as x); empty = unbounded
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct AdamResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  std::vector<double> trace;  // best-so-far objective per iteration
};

// Maximizes f by ADAM with central finite-difference gradients. Returns the
// best iterate seen, so the result never undercuts the initial objective.
AdamResult adam_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& x0, const AdamConfig& cfg = {});

// Log-space box for a parameter vector whose first columns-of-x coordinates
// are log lengthscales: each is kept within [0.05, 2] times its column's data
// span, remaining coordinates unconstrained. Marginal likelihood is flat in a
// lengthscale once it exceeds the span (or the input is redundant given the
// others), so an unconstrained fit can wander off and poison extrapolation.
std::pair<Eigen::VectorXd, Eigen::VectorXd> lengthscale_box(const Eigen::MatrixXd& x,
                                                            Eigen::Index n_total);

ModelParams default_init_params(const Dataset& data, const CausalQuery& query);

// Builds the cached model at fixed parameters (no training).
FittedModel build_fitted(const Dataset& data, const CausalQuery& query,
                         const ModelParams& params);

// Trains stage 1 on the marginal likelihood, then stage 2 on the weighted
// objective (tau frozen at the trained stage-1 amplitude), both over
// log-parameters, and returns the cached model.
FittedModel fit_two_stage(const Dataset& data, const CausalQuery& query,
                          const AdamConfig& cfg = {});
FittedModel fit_two_stage(const Dataset& data, const CausalQuery& query,
                          const ModelParams& init, const AdamConfig& cfg);

}  // namespace impspec
