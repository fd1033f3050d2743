#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "impspec/gp_core.hpp"
#include "impspec/kernels.hpp"

namespace impspec {

// Finite feature expansion k(v, v') ≈ Σ_j λ_j φ_j(v) φ_j(v') over the
// stage-1 V space. The nystrom kind carries eigenvalue estimates for the
// kernel's integral operator under the measure (λ sorted descending, zeros
// past the numerical rank); the rff kind spreads the amplitude uniformly,
// λ_j = a / m, over paired cosine/sine features.
struct TruncatedFeatures {
  enum class Kind { Nystrom, Rff };

  Kind kind = Kind::Nystrom;
  Eigen::Index m = 0;
  std::uint64_t seed = 0;
  KernelParams params;
  Eigen::VectorXd lambda;  // m entries

  // nystrom: φ_j(x) = Σ_i k(x, landmark_i) coeff(i, j), j < rank
  Eigen::MatrixXd landmarks;
  Eigen::MatrixXd coeff;
  Eigen::Index rank = 0;  // modes with λ > 0

  // rff: paired features sqrt(2)·cos(ω_jᵀx), sqrt(2)·sin(ω_jᵀx)
  Eigen::MatrixXd freqs;  // m/2 rows

  // m x rows(x) matrix of unweighted feature values φ_j(x_i)
  Eigen::MatrixXd eval(const Eigen::MatrixXd& x) const;
  // diag(sqrt(λ)) · eval(x)
  Eigen::MatrixXd weighted_eval(const Eigen::MatrixXd& x) const;
  // Σ_j λ_j φ_j(x) φ_j(x') on all row pairs, for reconstruction checks
  Eigen::MatrixXd reconstructed_gram(const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& y) const;
};

// Draws T points from the measure and eigendecomposes the T x T gram scaled
// by 1/T, keeping the top m modes with out-of-sample evaluation through the
// usual landmark extension. The decomposition runs through a pivoted
// low-rank factorization, so columns past the gram's numerical rank come
// back as exact zeros rather than noise.
TruncatedFeatures nystrom_eigen(const KernelParams& params,
                                const SpectralMeasure& measure, Eigen::Index T,
                                Eigen::Index m, std::uint64_t seed);

// Random Fourier features for the Gaussian kernel; m must be even. The
// paired construction makes Σ_j λ_j φ_j(v)² equal the amplitude exactly.
TruncatedFeatures rff_features(const KernelParams& params, Eigen::Index m,
                               std::uint64_t seed);

// Moments of the two independent feature-space Gaussians behind the
// truncated effect: f ~ N(m_f, kww·I − B Bᵀ) from stage 1 and
// L ~ N(m_l, diag(λ)·khat) from stage 2, with the effect their dot product.
struct TruncatedMoments {
  Eigen::VectorXd m_f;     // m
  double kww = 1.0;        // prior scale of the f block
  Eigen::MatrixXd bt;      // n1 x m, C_f = kww·I − btᵀ bt
  Eigen::VectorXd m_l;     // m
  Eigen::VectorXd c_l;     // m, diagonal of C_L
};

TruncatedMoments truncated_moments(const FittedModel& model,
                                   const TruncatedFeatures& features,
                                   const Eigen::VectorXd& w,
                                   const Eigen::VectorXd& z);

// n_samples draws of the truncated effect at (w, z). Exact under the
// feature-space model: L is drawn from its diagonal Gaussian and the effect
// is then drawn from its scalar conditional, so no m-dimensional f draw is
// materialized. Chunked for cache friendliness.
Eigen::VectorXd sample_truncated_gamma(const FittedModel& model,
                                       const TruncatedFeatures& features,
                                       const Eigen::VectorXd& w,
                                       const Eigen::VectorXd& z,
                                       Eigen::Index n_samples,
                                       std::uint64_t seed);

// Explicit paired draws of the two factors (each column one draw of f and
// one of L). Small-m diagnostics; the production path is the collapsed
// sampler above.
struct TruncatedFactorDraws {
  Eigen::MatrixXd f;  // m x n_samples
  Eigen::MatrixXd l;  // m x n_samples
};

TruncatedFactorDraws sample_truncated_factors(const FittedModel& model,
                                              const TruncatedFeatures& features,
                                              const Eigen::VectorXd& w,
                                              const Eigen::VectorXd& z,
                                              Eigen::Index n_samples,
                                              std::uint64_t seed);

}  // namespace impspec
