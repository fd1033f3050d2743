#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "impspec/gp_core.hpp"
#include "impspec/posterior.hpp"

namespace impspec {

// Fitting procedure under evaluation; called on dataset halves and (when
// refitting is requested) on bootstrap resamples.
using ModelBuilder = std::function<FittedModel(const Dataset&)>;

struct CalibrationGrid {
  std::vector<double> alphas;  // strictly increasing, each in (0, 1)
  Eigen::MatrixXd w_points;    // one row per eval point; 0 columns when W empty
  Eigen::MatrixXd z_points;    // one row per eval point
  std::vector<double> omega_candidates;
};

struct CalibrationOptions {
  int n_boot = 20;
  bool refit_boot = false;  // refit hyperparameters inside every replicate
};

// Seeded 50:50 row split; both tables of a fusion pair split independently.
// Half A feeds the bootstrap, half B the point estimate.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::uint64_t seed);

// Bootstrap row resample of every table in the dataset.
Dataset resample_dataset(const Dataset& data, std::uint64_t seed);

// Splits the data, takes the posterior-mean estimate from half B, and over
// n_boot bootstrap resamples of half A measures how often the credible
// intervals under the candidate measure cover that estimate. Replicate
// hyperparameters stay frozen at half A's fit unless refit_boot is set.
// Returns the mean over (eval point, alpha) of |coverage - alpha|.
// Replicates that fail numerically are skipped, up to a 10% budget.
double calibration_error(const ModelBuilder& builder, const Dataset& data,
                         const SpectralMeasure& candidate, const CalibrationGrid& grid,
                         const CalibrationOptions& opts, std::uint64_t seed);

struct SpectralSelection {
  SpectralMeasure measure;
  double omega = 1.0;
  std::vector<double> errors;  // per candidate, NaN where the candidate failed
};

// Grid search over grid.omega_candidates scaling the base measure fitted to
// the pooled V rows. Every candidate sees identical splits and bootstrap
// draws. Ties go to the omega closest to 1.
SpectralSelection optimize_spectral_measure(const ModelBuilder& builder,
                                            const Dataset& data,
                                            const CalibrationGrid& grid,
                                            const CalibrationOptions& opts,
                                            std::uint64_t seed);

// One trial's posterior summary at the shared eval points.
struct TrialIntervals {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct CoverageProfile {
  std::vector<double> alphas;
  Eigen::VectorXd coverage;  // per alpha, averaged over eval points
  Eigen::VectorXd error;     // per alpha, |coverage - alpha| before averaging
  Eigen::VectorXd band_lo;   // 2.5% / 97.5% percentile bootstrap band on error
  Eigen::VectorXd band_hi;
  double total_error = 0.0;  // error averaged over alphas
  double total_sd = 0.0;     // bootstrap standard deviation of total_error
};

// Cross-trial coverage against the oracle values, with percentile bootstrap
// bands from resampling whole trials.
CoverageProfile coverage_profile(const std::vector<TrialIntervals>& trials,
                                 const Eigen::VectorXd& truth,
                                 const std::vector<double>& alphas,
                                 int n_outer_boot, std::uint64_t seed);

}  // namespace impspec
