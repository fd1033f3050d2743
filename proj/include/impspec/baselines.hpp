#pragma once

#include <cstdint>
#include <vector>

#include "impspec/dataset.hpp"
#include "impspec/gp_core.hpp"
#include "impspec/kernels.hpp"
#include "impspec/linalg.hpp"
#include "impspec/posterior.hpp"

namespace impspec {

// Two-stage kernel ridge point estimate beta(z)' K_{V2V1} alpha(w),
// assembled with its own gram and solver calls so the posterior-mean
// identity is checked against a genuinely separate code path.
double plugin_estimator(const Dataset& data, const CausalQuery& query,
                        const ModelParams& params, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& z);

// Finite-dimensional nuclear-dominant posterior. The prior on the outcome
// regression uses the smoothed kernel r(x, x') = ∫ k(x,t) k(t,x') nu(dt)
// with nu a Gaussian fitted to the inputs (scale varsigma), and the effect's
// coefficient vectors get the smoothed-kernel stage posteriors pushed
// through unregularized gram inverses. Those inverses go through the jitter
// ladder; escalations show up in the global jitter stats.
struct BayesimpOptions {
  bool opt_varsigma = false;  // train the measure scale on the stage-1 objective
  AdamConfig adam;
};

struct BayesimpModel {
  CausalQuery query;
  ModelParams params;  // stage1 over the (W, V) concatenation; stage2 over Z
  double varsigma = 1.0;
  SpectralMeasure nu;  // over (W, V), scale = varsigma

  Eigen::MatrixXd x1;       // stage-1 inputs
  Eigen::MatrixXd xc;       // concatenated inputs from both tables
  Eigen::MatrixXd wc, vc;   // W / V slices of xc
  Eigen::MatrixXd v2, z2;   // stage-2 inputs
  Eigen::VectorXd y;

  Eigen::VectorXd m_a;      // coefficient posterior mean
  Eigen::MatrixXd c_a;      // coefficient posterior covariance
  Eigen::MatrixXd kvv_c;    // k_V gram over vc
  Eigen::MatrixXd kc2;      // cross gram vc x v2
  CholFactor chol_z;        // K_ZZ + eta2 I
  CholFactor chol_vc;       // jittered k_V gram over vc
  Eigen::MatrixXd kqk;      // K (K^-1 R K^-1) K with R the smoothed gram over vc
  Eigen::MatrixXd hmat;     // c_a ⊙ kqk, for the trace term

  std::vector<double> trace1, trace2;

  bool w_empty() const { return query.roles.w.empty(); }
  KernelParams w_kernel() const;  // amplitude 1
  KernelParams v_kernel() const;  // carries the stage-1 amplitude
  Eigen::VectorXd kw_vector(const Eigen::VectorXd& w) const;  // over wc rows
};

BayesimpModel fit_bayesimp(const Dataset& data, const CausalQuery& query,
                           const BayesimpOptions& opts = {});

PosteriorMoments bayesimp_moments(const BayesimpModel& m, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& z);

double bayesimp_cross_cov(const BayesimpModel& m, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& z, const Eigen::VectorXd& w2,
                          const Eigen::VectorXd& z2);

// Marginalized-effect curve over a grid (W empty), mirroring ate_profile.
AteCurve bayesimp_ate_profile(const BayesimpModel& m,
                              const Eigen::MatrixXd& grid_values,
                              const std::vector<Eigen::Index>& grid_dims,
                              const Eigen::MatrixXd& marginal_values,
                              const std::vector<Eigen::Index>& marginal_dims);

// Two-stage sampling baseline: one GP for the outcome on (W, V) and one GP
// per V dimension on Z, each trained on its own marginal likelihood. The
// effect at (w, z) is estimated by pushing stage-2 posterior predictive
// draws of V through the stage-1 posterior predictive.
struct SamplingGpModel {
  CausalQuery query;
  Eigen::MatrixXd x1;  // (W, V) stage-1 inputs
  Eigen::MatrixXd z2;
  Eigen::MatrixXd v2;
  Eigen::VectorXd y;

  KernelParams f_kernel;  // over (W, V)
  double sigma2 = 0.1;
  std::vector<KernelParams> g_kernels;  // one per V dimension, over Z
  Eigen::VectorXd eta2;                 // one per V dimension

  CholFactor chol_f;
  Eigen::VectorXd alpha_f;                // (K + sigma2 I)^{-1} y
  std::vector<CholFactor> chol_g;
  std::vector<Eigen::VectorXd> alpha_g;   // per-dimension (K + eta2 I)^{-1} v_d
};

SamplingGpModel fit_sampling_gp(const Dataset& data, const CausalQuery& query,
                                const AdamConfig& cfg = {});

struct SampledEffect {
  double mean = 0.0;
  double variance = 0.0;
};

SampledEffect sampling_gp_effect(const SamplingGpModel& m, const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& z, Eigen::Index n_samples,
                                 std::uint64_t seed);

}  // namespace impspec
