#include "impspec/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "impspec/linalg.hpp"
#include "impspec/rng.hpp"

namespace impspec {

namespace {

void validate_grid(const CalibrationGrid& grid) {
  if (grid.alphas.empty()) throw std::invalid_argument("calibration: empty alpha grid");
  double prev = 0.0;
  for (double a : grid.alphas) {
    if (!(a > 0.0 && a < 1.0))
      throw std::invalid_argument("calibration: alphas must lie in (0, 1)");
    if (a <= prev && prev != 0.0)
      throw std::invalid_argument("calibration: alphas must be strictly increasing");
    prev = a;
  }
  if (grid.z_points.rows() < 1)
    throw std::invalid_argument("calibration: no eval points");
  if (grid.w_points.rows() != grid.z_points.rows() && grid.w_points.cols() > 0)
    throw std::invalid_argument("calibration: w/z eval point count mismatch");
}

Table take_rows(const Table& t, const std::vector<Eigen::Index>& rows) {
  Table out;
  out.names = t.names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), t.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.values.row(static_cast<Eigen::Index>(i)) = t.values.row(rows[i]);
  return out;
}

std::pair<Table, Table> split_table(const Table& t, Rng& rng) {
  const Eigen::Index n = t.rows();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  const std::size_t half = static_cast<std::size_t>(n / 2);
  std::vector<Eigen::Index> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<Eigen::Index> b(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {take_rows(t, a), take_rows(t, b)};
}

Table resample_table(const Table& t, Rng& rng) {
  const Eigen::Index n = t.rows();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& i : idx)
    i = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
  return take_rows(t, idx);
}

// Per-point coverage counters across replicates, one row per eval point and
// one column per alpha.
struct CoverageCounts {
  Eigen::MatrixXd covered;
  long replicates = 0;
};

Eigen::VectorXd eval_means(const FittedModel& model, const SpectralMeasure& measure,
                           const CalibrationGrid& grid) {
  const EffectEvaluator eval(model, measure);
  const Eigen::Index np = grid.z_points.rows();
  Eigen::VectorXd out(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    const Eigen::VectorXd w = grid.w_points.cols() > 0
                                  ? grid.w_points.row(p).transpose().eval()
                                  : Eigen::VectorXd(0);
    out[p] = eval.moments(w, grid.z_points.row(p)).mean;
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::uint64_t seed) {
  Dataset a, b;
  a.roles = data.roles;
  b.roles = data.roles;
  Rng r1(sub_seed(seed, 0));
  auto [a1, b1] = split_table(data.d1, r1);
  a.d1 = std::move(a1);
  b.d1 = std::move(b1);
  if (data.fusion()) {
    Rng r2(sub_seed(seed, 1));
    auto [a2, b2] = split_table(*data.d2, r2);
    a.d2 = std::move(a2);
    b.d2 = std::move(b2);
  }
  return {std::move(a), std::move(b)};
}

Dataset resample_dataset(const Dataset& data, std::uint64_t seed) {
  Dataset out;
  out.roles = data.roles;
  Rng r1(sub_seed(seed, 0));
  out.d1 = resample_table(data.d1, r1);
  if (data.fusion()) {
    Rng r2(sub_seed(seed, 1));
    out.d2 = resample_table(*data.d2, r2);
  }
  return out;
}

namespace {

// Shared context so the omega search reuses the split, the half fits, and
// the bootstrap draws across candidates.
struct CalContext {
  Dataset half_a;
  Eigen::VectorXd gamma_hat;  // half-B posterior means at the eval points
  ModelParams frozen;
  CausalQuery query;
};

CalContext make_context(const ModelBuilder& builder, const Dataset& data,
                        const SpectralMeasure& any_measure, const CalibrationGrid& grid,
                        std::uint64_t seed) {
  validate_grid(grid);
  auto [half_a, half_b] = split_dataset(data, sub_seed(seed, 17));
  const FittedModel model_b = builder(half_b);
  CalContext ctx;
  ctx.gamma_hat = eval_means(model_b, any_measure, grid);
  const FittedModel model_a = builder(half_a);
  ctx.frozen = model_a.params;
  ctx.query = model_a.query;
  ctx.half_a = std::move(half_a);
  return ctx;
}

double context_error(const CalContext& ctx, const ModelBuilder& builder,
                     const SpectralMeasure& candidate, const CalibrationGrid& grid,
                     const CalibrationOptions& opts, std::uint64_t seed) {
  if (opts.n_boot < 1) throw std::invalid_argument("calibration: n_boot must be >= 1");
  const Eigen::Index np = grid.z_points.rows();
  const Eigen::Index na = static_cast<Eigen::Index>(grid.alphas.size());
  Eigen::VectorXd q(na);
  for (Eigen::Index a = 0; a < na; ++a)
    q[a] = normal_quantile(0.5 * (1.0 + grid.alphas[static_cast<std::size_t>(a)]));

  CoverageCounts counts;
  counts.covered = Eigen::MatrixXd::Zero(np, na);
  int failures = 0;
  for (int b = 0; b < opts.n_boot; ++b) {
    const Dataset boot =
        resample_dataset(ctx.half_a, sub_seed(seed, 0x800 + static_cast<std::uint64_t>(b)));
    try {
      const FittedModel model = opts.refit_boot
                                    ? builder(boot)
                                    : build_fitted(boot, ctx.query, ctx.frozen);
      const EffectEvaluator eval(model, candidate);
      for (Eigen::Index p = 0; p < np; ++p) {
        const Eigen::VectorXd w = grid.w_points.cols() > 0
                                      ? grid.w_points.row(p).transpose().eval()
                                      : Eigen::VectorXd(0);
        const PosteriorMoments m = eval.moments(w, grid.z_points.row(p));
        const double sd = std::sqrt(std::max(m.variance, 0.0));
        const double dist = std::abs(ctx.gamma_hat[p] - m.mean);
        for (Eigen::Index a = 0; a < na; ++a)
          if (dist <= q[a] * sd) counts.covered(p, a) += 1.0;
      }
      ++counts.replicates;
    } catch (const NumericalError&) {
      ++failures;
    }
  }
  if (failures * 10 > opts.n_boot)
    throw NumericalError("calibration: bootstrap failure budget exceeded");
  if (counts.replicates == 0)
    throw NumericalError("calibration: no bootstrap replicate survived");

  double err = 0.0;
  for (Eigen::Index p = 0; p < np; ++p)
    for (Eigen::Index a = 0; a < na; ++a)
      err += std::abs(counts.covered(p, a) / static_cast<double>(counts.replicates) -
                      grid.alphas[static_cast<std::size_t>(a)]);
  return err / static_cast<double>(np * na);
}

}  // namespace

double calibration_error(const ModelBuilder& builder, const Dataset& data,
                         const SpectralMeasure& candidate, const CalibrationGrid& grid,
                         const CalibrationOptions& opts, std::uint64_t seed) {
  const CalContext ctx = make_context(builder, data, candidate, grid, seed);
  return context_error(ctx, builder, candidate, grid, opts, seed);
}

SpectralSelection optimize_spectral_measure(const ModelBuilder& builder,
                                            const Dataset& data,
                                            const CalibrationGrid& grid,
                                            const CalibrationOptions& opts,
                                            std::uint64_t seed) {
  if (grid.omega_candidates.empty())
    throw std::invalid_argument("optimize_spectral_measure: no candidates");

  // pooled V rows across both tables define the base measure
  const std::vector<std::string>& vnames = data.roles.v;
  const Eigen::MatrixXd v1 = data.d1.columns(vnames);
  Eigen::MatrixXd pooled = v1;
  if (data.fusion()) {
    const Eigen::MatrixXd v2 = data.d2->columns(vnames);
    pooled.conservativeResize(v1.rows() + v2.rows(), Eigen::NoChange);
    pooled.bottomRows(v2.rows()) = v2;
  }
  const SpectralMeasure base = SpectralMeasure::from_data(pooled, 1.0);

  const CalContext ctx = make_context(builder, data, base, grid, seed);

  SpectralSelection sel;
  sel.errors.assign(grid.omega_candidates.size(),
                    std::numeric_limits<double>::quiet_NaN());
  Eigen::Index best = -1;
  for (std::size_t c = 0; c < grid.omega_candidates.size(); ++c) {
    const double omega = grid.omega_candidates[c];
    if (!(omega > 0.0))
      throw std::invalid_argument("optimize_spectral_measure: omega must be > 0");
    try {
      sel.errors[c] = context_error(ctx, builder, base.with_scale(omega), grid, opts, seed);
    } catch (const NumericalError&) {
      continue;
    }
    if (best < 0) {
      best = static_cast<Eigen::Index>(c);
      continue;
    }
    const double e_best = sel.errors[static_cast<std::size_t>(best)];
    const double w_best = grid.omega_candidates[static_cast<std::size_t>(best)];
    if (sel.errors[c] < e_best ||
        (sel.errors[c] == e_best && std::abs(omega - 1.0) < std::abs(w_best - 1.0)))
      best = static_cast<Eigen::Index>(c);
  }
  if (best < 0) throw NumericalError("optimize_spectral_measure: all candidates failed");
  sel.omega = grid.omega_candidates[static_cast<std::size_t>(best)];
  sel.measure = base.with_scale(sel.omega);
  return sel;
}

CoverageProfile coverage_profile(const std::vector<TrialIntervals>& trials,
                                 const Eigen::VectorXd& truth,
                                 const std::vector<double>& alphas,
                                 int n_outer_boot, std::uint64_t seed) {
  if (trials.size() < 2)
    throw std::invalid_argument("coverage_profile: need at least 2 trials");
  const Eigen::Index np = truth.size();
  const auto nt = static_cast<Eigen::Index>(trials.size());
  for (const TrialIntervals& t : trials)
    if (t.mean.size() != np || t.sd.size() != np)
      throw std::invalid_argument("coverage_profile: trial size mismatch");
  if (!truth.allFinite())
    throw std::invalid_argument("coverage_profile: oracle values must be finite");

  const auto na = static_cast<Eigen::Index>(alphas.size());
  Eigen::VectorXd q(na);
  for (Eigen::Index a = 0; a < na; ++a)
    q[a] = normal_quantile(0.5 * (1.0 + alphas[static_cast<std::size_t>(a)]));

  // covered(t, p*na + a): trial t covers truth p at level a
  std::vector<Eigen::MatrixXd> covered(static_cast<std::size_t>(nt));
  for (Eigen::Index t = 0; t < nt; ++t) {
    Eigen::MatrixXd c(np, na);
    for (Eigen::Index p = 0; p < np; ++p) {
      const double dist = std::abs(truth[p] - trials[static_cast<std::size_t>(t)].mean[p]);
      const double sd = trials[static_cast<std::size_t>(t)].sd[p];
      for (Eigen::Index a = 0; a < na; ++a) c(p, a) = dist <= q[a] * sd ? 1.0 : 0.0;
    }
    covered[static_cast<std::size_t>(t)] = std::move(c);
  }

  auto profile_for = [&](const std::vector<Eigen::Index>& which) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(np, na);
    for (Eigen::Index t : which) sum += covered[static_cast<std::size_t>(t)];
    sum /= static_cast<double>(which.size());
    Eigen::VectorXd cov_a(na), err_a(na);
    for (Eigen::Index a = 0; a < na; ++a) {
      cov_a[a] = sum.col(a).mean();
      err_a[a] =
          (sum.col(a).array() - alphas[static_cast<std::size_t>(a)]).abs().mean();
    }
    return std::make_pair(cov_a, err_a);
  };

  std::vector<Eigen::Index> all(static_cast<std::size_t>(nt));
  std::iota(all.begin(), all.end(), 0);
  CoverageProfile out;
  out.alphas = alphas;
  std::tie(out.coverage, out.error) = profile_for(all);
  out.total_error = out.error.mean();

  Eigen::MatrixXd boot_err(n_outer_boot, na);
  Rng rng(seed);
  for (int b = 0; b < n_outer_boot; ++b) {
    std::vector<Eigen::Index> pick(static_cast<std::size_t>(nt));
    for (auto& i : pick)
      i = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(nt)));
    boot_err.row(b) = profile_for(pick).second.transpose();
  }
  out.band_lo.resize(na);
  out.band_hi.resize(na);
  for (Eigen::Index a = 0; a < na; ++a) {
    std::vector<double> col(static_cast<std::size_t>(n_outer_boot));
    for (int b = 0; b < n_outer_boot; ++b) col[static_cast<std::size_t>(b)] = boot_err(b, a);
    std::sort(col.begin(), col.end());
    const auto lo_idx = static_cast<std::size_t>(
        std::floor(0.025 * static_cast<double>(n_outer_boot - 1)));
    const auto hi_idx = static_cast<std::size_t>(
        std::ceil(0.975 * static_cast<double>(n_outer_boot - 1)));
    out.band_lo[a] = col[lo_idx];
    out.band_hi[a] = col[hi_idx];
  }
  if (n_outer_boot > 1) {
    const Eigen::VectorXd totals = boot_err.rowwise().mean();
    const double mu = totals.mean();
    out.total_sd = std::sqrt((totals.array() - mu).square().sum() /
                             static_cast<double>(n_outer_boot - 1));
  }
  return out;
}

}  // namespace impspec
