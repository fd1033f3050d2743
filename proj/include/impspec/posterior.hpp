#pragma once

#include <vector>

#include "impspec/gp_core.hpp"

namespace impspec {

struct PosteriorMoments {
  double mean = 0.0;
  double variance = 0.0;  // s1 + s2 + s3, floored at 0 within the -1e-8 tolerance
  double s1 = 0.0;        // stage-1 regression uncertainty
  double s2 = 0.0;        // embedding uncertainty weighted by the smoothed gram
  double s3 = 0.0;        // spectral truncation mass
  Eigen::VectorXd w, z;
};

struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// Precomputes the measure-dependent pieces once so grids of (w, z) points are
// cheap. Holds a pointer to the model; the model must outlive the evaluator.
class EffectEvaluator {
 public:
  EffectEvaluator(const FittedModel& model, const SpectralMeasure& measure);

  const FittedModel& model() const { return *model_; }
  const SpectralMeasure& measure() const { return measure_; }
  const Eigen::MatrixXd& ktilde() const { return ktilde_; }

  PosteriorMoments moments(const Eigen::VectorXd& w, const Eigen::VectorXd& z) const;
  double cross_cov(const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& w2, const Eigen::VectorXd& z2) const;

 private:
  const FittedModel* model_;
  SpectralMeasure measure_;
  Eigen::MatrixXd ktilde_;    // smoothed gram over stage-1 V rows
  Eigen::MatrixXd trace_ip_;  // ktilde ⊙ inv1, contracted with k_W vectors
  friend struct AteCurveBuilder;
};

PosteriorMoments posterior_moments(const FittedModel& model, const SpectralMeasure& measure,
                                   const Eigen::VectorXd& w, const Eigen::VectorXd& z);

double posterior_cross_cov(const FittedModel& model, const SpectralMeasure& measure,
                           const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& w2, const Eigen::VectorXd& z2);

// Average of the pointwise posterior over paired (w, z) rows; the variance
// averages the full cross-covariance matrix. A single w row broadcasts.
PosteriorMoments ate_moments(const EffectEvaluator& eval, const Eigen::MatrixXd& w_points,
                             const Eigen::MatrixXd& z_points);

// Posterior over a curve of marginalized effects (W empty): z splits into
// grid dimensions (one value per curve point) and marginal dimensions
// (averaged over the given rows). Returns the mean vector and the full
// posterior covariance across curve points. Exploits the product form of the
// stage-2 kernel, so cost is linear in grid x marginal size.
struct AteCurve {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
AteCurve ate_profile(const EffectEvaluator& eval, const Eigen::MatrixXd& grid_values,
                     const std::vector<Eigen::Index>& grid_dims,
                     const Eigen::MatrixXd& marginal_values,
                     const std::vector<Eigen::Index>& marginal_dims);

// Central interval mean ± q_{(1+alpha)/2} * sd; alpha >= 1 gives (-inf, inf),
// alpha <= 0 collapses to the mean.
CredibleInterval credible_interval(const PosteriorMoments& m, double alpha);
double normal_quantile(double p);

}  // namespace impspec
