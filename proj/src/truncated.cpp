#include "impspec/truncated.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "impspec/linalg.hpp"
#include "impspec/rng.hpp"

namespace impspec {

namespace {

// Left-looking pivoted Cholesky with lazily generated gram columns,
// K ≈ L Lᵀ in the original row order. Stops once the trace residual drops
// below rel_tol of the full trace or max_rank columns are taken.
Eigen::MatrixXd pivoted_chol(const KernelParams& p, const Eigen::MatrixXd& x,
                             Eigen::Index max_rank, double rel_tol) {
  const Eigen::Index t = x.rows();
  Eigen::VectorXd d = Eigen::VectorXd::Constant(t, p.amplitude);
  const double tol = rel_tol * d.sum();
  Eigen::MatrixXd l(t, max_rank);
  Eigen::Index r = 0;
  while (r < max_rank && d.sum() > tol) {
    Eigen::Index piv;
    const double dmax = d.maxCoeff(&piv);
    if (dmax <= 0.0) break;
    Eigen::VectorXd col = kernel_vector(p, x, x.row(piv).transpose());
    if (r > 0)
      col.noalias() -= l.leftCols(r) * l.row(piv).head(r).transpose();
    col /= std::sqrt(dmax);
    l.col(r) = col;
    d -= col.cwiseAbs2();
    d = d.cwiseMax(0.0);
    d[piv] = 0.0;
    ++r;
  }
  return l.leftCols(r);
}

}  // namespace

Eigen::MatrixXd TruncatedFeatures::eval(const Eigen::MatrixXd& x) const {
  if (x.cols() != params.dims())
    throw std::invalid_argument("TruncatedFeatures::eval: dimension mismatch");
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(m, x.rows());
  if (kind == Kind::Nystrom) {
    if (rank > 0) {
      const Eigen::MatrixXd kx = cross_gram(params, landmarks, x);
      phi.topRows(rank).noalias() = coeff.transpose() * kx;
    }
    return phi;
  }
  const double root2 = std::sqrt(2.0);
  const Eigen::MatrixXd proj = freqs * x.transpose();  // m/2 x N
  for (Eigen::Index j = 0; j < freqs.rows(); ++j) {
    phi.row(2 * j) = root2 * proj.row(j).array().cos();
    phi.row(2 * j + 1) = root2 * proj.row(j).array().sin();
  }
  return phi;
}

Eigen::MatrixXd TruncatedFeatures::weighted_eval(const Eigen::MatrixXd& x) const {
  return lambda.cwiseSqrt().asDiagonal() * eval(x);
}

Eigen::MatrixXd TruncatedFeatures::reconstructed_gram(
    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
  const Eigen::MatrixXd px = weighted_eval(x);
  const Eigen::MatrixXd py = weighted_eval(y);
  return px.transpose() * py;
}

TruncatedFeatures nystrom_eigen(const KernelParams& params,
                                const SpectralMeasure& measure, Eigen::Index T,
                                Eigen::Index m, std::uint64_t seed) {
  if (m < 1 || m > T) throw std::invalid_argument("nystrom_eigen: need 1 <= m <= T");
  if (measure.mean.size() != params.dims())
    throw std::invalid_argument("nystrom_eigen: measure dimension mismatch");

  TruncatedFeatures f;
  f.kind = TruncatedFeatures::Kind::Nystrom;
  f.m = m;
  f.seed = seed;
  f.params = params;

  Rng rng(seed);
  const Eigen::VectorXd sd = measure.variances().cwiseSqrt();
  f.landmarks.resize(T, params.dims());
  for (Eigen::Index i = 0; i < T; ++i)
    for (Eigen::Index d = 0; d < params.dims(); ++d)
      f.landmarks(i, d) = measure.mean[d] + sd[d] * rng.normal();

  const Eigen::MatrixXd l = pivoted_chol(params, f.landmarks, m, 1e-12);
  const Eigen::Index r = l.cols();

  // Nonzero eigenpairs of (1/T) L Lᵀ through the r x r inner product matrix.
  Eigen::MatrixXd inner = (l.transpose() * l) / static_cast<double>(T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner);
  if (eig.info() != Eigen::Success)
    throw NumericalError("nystrom_eigen: eigendecomposition failed");

  f.lambda = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::Index> order;  // descending, positive modes only
  const double floor = r > 0 ? 1e-14 * eig.eigenvalues()[r - 1] : 0.0;
  for (Eigen::Index k = r - 1; k >= 0; --k) {
    if (eig.eigenvalues()[k] <= floor) break;
    order.push_back(k);
    if (static_cast<Eigen::Index>(order.size()) == m) break;
  }
  f.rank = static_cast<Eigen::Index>(order.size());
  f.coeff.resize(T, f.rank);
  for (Eigen::Index j = 0; j < f.rank; ++j) {
    const double s = eig.eigenvalues()[order[j]];
    f.lambda[j] = s;
    // unit eigenvector of (1/T)K is l·v/sqrt(T s); the eigenfunction adds
    // another 1/(sqrt(T) s), so the landmark weights carry s^{-3/2}
    f.coeff.col(j) = l * eig.eigenvectors().col(order[j]) /
                     (static_cast<double>(T) * s * std::sqrt(s));
  }
  return f;
}

TruncatedFeatures rff_features(const KernelParams& params, Eigen::Index m,
                               std::uint64_t seed) {
  if (m < 2 || m % 2 != 0)
    throw std::invalid_argument("rff_features: m must be even and >= 2");
  TruncatedFeatures f;
  f.kind = TruncatedFeatures::Kind::Rff;
  f.m = m;
  f.seed = seed;
  f.params = params;
  f.rank = m;
  f.lambda = Eigen::VectorXd::Constant(m, params.amplitude / static_cast<double>(m));

  Rng rng(seed);
  f.freqs.resize(m / 2, params.dims());
  for (Eigen::Index j = 0; j < m / 2; ++j)
    for (Eigen::Index d = 0; d < params.dims(); ++d)
      f.freqs(j, d) = rng.normal() / params.lengthscales[d];
  return f;
}

TruncatedMoments truncated_moments(const FittedModel& model,
                                   const TruncatedFeatures& features,
                                   const Eigen::VectorXd& w,
                                   const Eigen::VectorXd& z) {
  TruncatedMoments tm;
  const Eigen::VectorXd kw = model.kw_vector(w);
  tm.kww = model.kww(w, w);

  const Eigen::MatrixXd phi1 = features.weighted_eval(model.v1);  // m x n1
  const Eigen::MatrixXd phi1d = phi1 * kw.asDiagonal();
  tm.m_f.noalias() = phi1d * model.chol1.solve(model.y);
  tm.bt = model.chol1.forward(phi1d.transpose());  // n1 x m

  const Eigen::VectorXd kz =
      kernel_vector(model.params.stage2, model.z2, z);
  const Eigen::VectorXd beta = model.chol2.solve(kz);
  double khat = kernel_value(model.params.stage2, z, z) - kz.dot(beta);
  khat = std::max(khat, 0.0);

  const Eigen::MatrixXd phi2 = features.weighted_eval(model.v2);  // m x n2
  tm.m_l.noalias() = phi2 * beta;
  tm.c_l = (features.lambda * khat).cwiseMax(0.0);
  return tm;
}

Eigen::VectorXd sample_truncated_gamma(const FittedModel& model,
                                       const TruncatedFeatures& features,
                                       const Eigen::VectorXd& w,
                                       const Eigen::VectorXd& z,
                                       Eigen::Index n_samples,
                                       std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("sample_truncated_gamma: n_samples < 1");
  const TruncatedMoments tm = truncated_moments(model, features, w, z);
  const Eigen::Index m = features.m;

  // Rows of L that actually receive noise; the rest stay at their mean.
  std::vector<Eigen::Index> noisy;
  for (Eigen::Index j = 0; j < m; ++j)
    if (tm.c_l[j] > 0.0) noisy.push_back(j);
  Eigen::VectorXd noise_sd(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i)
    noise_sd[i] = std::sqrt(tm.c_l[noisy[i]]);

  Rng rng(seed);
  Eigen::VectorXd out(n_samples);
  constexpr Eigen::Index kChunk = 512;
  Eigen::MatrixXd lmat(m, kChunk);
  for (Eigen::Index start = 0; start < n_samples; start += kChunk) {
    const Eigen::Index c = std::min(kChunk, n_samples - start);
    lmat.leftCols(c).colwise() = tm.m_l;
    for (Eigen::Index s = 0; s < c; ++s)
      for (std::size_t i = 0; i < noisy.size(); ++i)
        lmat(noisy[i], s) += noise_sd[i] * rng.normal();

    const Eigen::RowVectorXd mean = tm.m_f.transpose() * lmat.leftCols(c);
    const Eigen::MatrixXd proj = tm.bt * lmat.leftCols(c);  // n1 x c
    for (Eigen::Index s = 0; s < c; ++s) {
      const double var = tm.kww * lmat.col(s).squaredNorm() -
                         proj.col(s).squaredNorm();
      out[start + s] = mean[s] + std::sqrt(std::max(var, 0.0)) * rng.normal();
    }
  }
  return out;
}

TruncatedFactorDraws sample_truncated_factors(const FittedModel& model,
                                              const TruncatedFeatures& features,
                                              const Eigen::VectorXd& w,
                                              const Eigen::VectorXd& z,
                                              Eigen::Index n_samples,
                                              std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("sample_truncated_factors: n_samples < 1");
  const TruncatedMoments tm = truncated_moments(model, features, w, z);
  const Eigen::Index m = features.m;

  // C_f = kww·I − btᵀbt: spectral form through the SVD of bt keeps the draw
  // exact, with eigenvalues floored at zero against round-off.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(tm.bt.transpose(), Eigen::ComputeThinU);
  const Eigen::MatrixXd u = svd.matrixU();  // m x min(n1, m)
  Eigen::VectorXd ev(u.cols());
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    const double s = svd.singularValues()[i];
    ev[i] = std::max(tm.kww - s * s, 0.0);
  }
  const double root_kww = std::sqrt(std::max(tm.kww, 0.0));
  const Eigen::VectorXd dl = ev.cwiseSqrt().array() - root_kww;

  TruncatedFactorDraws draws;
  draws.f.resize(m, n_samples);
  draws.l.resize(m, n_samples);
  Rng rng(seed);
  const Eigen::VectorXd l_sd = tm.c_l.cwiseSqrt();
  for (Eigen::Index s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd xi = rng.normal_vector(m);
    draws.f.col(s) = tm.m_f + root_kww * xi + u * (dl.asDiagonal() * (u.transpose() * xi));
    const Eigen::VectorXd zeta = rng.normal_vector(m);
    draws.l.col(s) = tm.m_l + l_sd.cwiseProduct(zeta);
  }
  return draws;
}

}  // namespace impspec
