#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "impspec/baselines.hpp"
#include "impspec/calibration.hpp"
#include "impspec/posterior.hpp"
#include "impspec/simulators.hpp"

namespace impspec {

enum class PriorKind { Impspec, Bayesimp, CboPlugin, Plain };

PriorKind prior_kind_from_string(const std::string& name);
std::string to_string(PriorKind kind);

// Bayesian-optimization task over a 1-d intervention grid. The effect is
// evaluated with the conditioning value pinned at 0 where the estimand has
// one; `maximize` sets the search direction.
struct CboTask {
  std::string name;
  DgpSpec dgp;
  CausalQuery query;
  bool maximize = false;
  Eigen::VectorXd grid;

  // effect-evaluation coordinates for intervention value x
  Eigen::VectorXd w_point(double x) const;
  Eigen::VectorXd z_point(double x) const;
  bool averaged() const { return ate_grid_dims.size() > 0; }
  std::vector<Eigen::Index> ate_grid_dims;      // grid dims inside z (averaged tasks)
  std::vector<Eigen::Index> ate_marginal_dims;  // empirically averaged z dims
};

// name in {frontdoor, backdoor, healthcare}; long benchmark aliases accepted.
CboTask make_cbo_task(const std::string& name, std::uint64_t seed, int n_grid = 200);

// Oracle-point rows for the task grid, in the layout oracle_effect expects.
Eigen::MatrixXd task_oracle_points(const CboTask& task);

// GP prior over the intervention grid: method posterior mean/covariance plus
// an additive stationary kernel (refit during the BO loop).
struct SurrogatePrior {
  PriorKind kind = PriorKind::Plain;
  Eigen::VectorXd grid;  // intervention values, one per row
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;      // method covariance, without the additive kernel
  KernelParams rbf;         // additive stationary part
  int clamp_events = 0;     // plug-in variance clamps during construction
  double omega = 1.0;       // spectral scale chosen for the impspec prior
};

struct PriorOptions {
  bool calibrate = true;  // impspec: pick omega by bootstrap calibration
  std::vector<double> omega_candidates = {0.0625, 0.25, 1.0, 4.0, 16.0};
  CalibrationOptions cal;
  AdamConfig adam;
  BayesimpOptions bayesimp;
};

SurrogatePrior build_prior(PriorKind kind, const CboTask& task, const Dataset& data,
                           const PriorOptions& opts, std::uint64_t seed);

// Closed-form expected improvement toward the given direction; sd = 0
// degenerates to max(improvement, 0).
double expected_improvement(double mean, double sd, double incumbent, bool maximize);

struct BoTrace {
  std::vector<Eigen::Index> queried;  // grid indices in query order
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd best;    // best observed value so far, toward the direction
  Eigen::VectorXd regret;  // cumulative |f(x*) - f(x_best_i)|
  bool completed = true;   // false when the oracle failed mid-run
};

struct BoOptions {
  int iters = 10;
  int refit_every = 3;
  bool maximize = false;
  double jitter = 1e-6;
  AdamConfig refit_adam = {200, 0.1, 0.9, 0.999, 1e-8, 1e-4};
};

// Sequential EI loop over the prior's grid. The first query takes the best
// prior mean; ties resolve to the lowest grid index. `resume_*` replay
// already-observed queries (conditioning and refit schedule included) before
// new ones are made; they count toward opts.iters.
BoTrace run_cbo(const SurrogatePrior& prior,
                const std::function<double(Eigen::Index)>& oracle, double f_star,
                const BoOptions& opts, std::vector<Eigen::Index> resume_queried = {},
                std::vector<double> resume_y = {});

}  // namespace impspec
