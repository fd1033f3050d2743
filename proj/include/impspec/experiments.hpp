#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "impspec/calibration.hpp"
#include "impspec/cbo.hpp"
#include "impspec/svg.hpp"

namespace impspec {

// More than 20% of the trial-method cells failed; the run's aggregates would
// be meaningless, so it aborts with this.
struct FailureBudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BenchmarkConfig {
  // ablation | synthetic | healthcare-cbo | synthetic-cbo-frontdoor |
  // synthetic-cbo-backdoor
  std::string experiment;
  int trials = 20;
  Eigen::Index n = 0;  // observations per trial; 0 keeps the experiment default
  std::uint64_t seed = 0;
  int jobs = 1;

  bool opt_varsigma = false;  // train the nuclear-dominant measure scale
  bool refit_boot = false;    // refit hyperparameters inside calibration replicates
  int n_boot = 20;            // calibration bootstrap replications
  int outer_boot = 100;       // cross-trial bootstrap replications
  int cbo_iters = 10;
  int refit_every = 3;
  int grid_points = 200;      // cbo acquisition grid size
  int sampling_draws = 2000;
  long oracle_draws = 100000;
  bool calibrate_cbo_prior = true;
};

struct TrialRecord {
  int trial = 0;
  std::string method;
  bool failed = false;
  std::string error;
  std::vector<std::pair<std::string, double>> metrics;
};

struct CurveData {
  std::string label;
  std::string color;  // empty picks from the palette
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd lo;  // optional band, aligned with x
  Eigen::VectorXd hi;
  bool dashed = false;
};

struct PlotGroup {
  std::string name;  // output file stem
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<CurveData> curves;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  std::vector<std::string> methods;
  std::vector<TrialRecord> rows;  // trial-major, method order fixed
  // "<method>.<metric>.mean/.std" aggregates recomputable from the rows;
  // profile-based entries use ".value"/".sd" (from the cross-trial bootstrap)
  std::vector<std::pair<std::string, double>> aggregates;
  std::vector<PlotGroup> plots;
  // per-method per-alpha calibration profiles, empty for cbo experiments
  std::vector<std::pair<std::string, CoverageProfile>> profiles;
  int failed_cells = 0;
  int total_cells = 0;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

// FNV-1a over the canonical JSON serialization of the config.
std::uint64_t config_hash(const BenchmarkConfig& config);
std::string config_json(const BenchmarkConfig& config);

// Writes trials.csv, aggregates.csv, profiles.csv (when present), one SVG per
// plot group, and manifest.json into out_dir (created if missing). An empty
// result (no rows) writes the manifest only. Nothing written embeds a
// timestamp, so reruns are byte-identical.
void emit_outputs(const BenchmarkResult& result, const std::string& out_dir);

double aggregate_value(const BenchmarkResult& result, const std::string& key);

}  // namespace impspec
