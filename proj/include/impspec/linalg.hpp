#pragma once

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace impspec {

// Raised when a factorization cannot be rescued within the jitter budget.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cholesky factorization of a symmetric positive (semi)definite matrix with
// an escalating diagonal jitter: start at 1e-10 * trace(A)/n, multiply by 10
// on failure, give up past 1e-4 * max(1, trace(A)/n). The jitter actually
// used is recorded so callers (and the hygiene tests) can audit it.
class CholFactor {
 public:
  CholFactor() = default;
  explicit CholFactor(const Eigen::MatrixXd& a);

  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }
  double used_jitter() const { return used_jitter_; }
  double log_det() const;  // of the jittered matrix

  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& b) const {
    return llt_.solve(b);
  }
  // L^{-1} b, handy for low-rank reductions
  Eigen::MatrixXd forward(const Eigen::MatrixXd& b) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double used_jitter_ = 0.0;
};

Eigen::VectorXd chol_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);
Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Process-wide audit counters for the jitter ladder.
double max_jitter_used();
long jitter_escalations();
void reset_jitter_stats();

}  // namespace impspec
