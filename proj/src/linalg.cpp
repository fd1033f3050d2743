#include "impspec/linalg.hpp"

#include <atomic>
#include <cmath>

namespace impspec {

namespace {

std::atomic<double> g_max_jitter{0.0};
std::atomic<long> g_escalations{0};

void record_jitter(double j) {
  double cur = g_max_jitter.load();
  while (j > cur && !g_max_jitter.compare_exchange_weak(cur, j)) {
  }
}

}  // namespace

CholFactor::CholFactor(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw NumericalError("CholFactor: matrix not square");
  const Eigen::Index n = a.rows();
  const double scale = a.trace() / static_cast<double>(n);
  const double cap = 1e-4 * std::max(1.0, scale);

  llt_.compute(a);
  if (llt_.info() == Eigen::Success) {
    used_jitter_ = 0.0;
    return;
  }
  double jitter = 1e-10 * std::max(scale, 1e-300);
  while (jitter <= cap) {
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += jitter;
    llt_.compute(aj);
    g_escalations.fetch_add(1);
    if (llt_.info() == Eigen::Success) {
      used_jitter_ = jitter;
      record_jitter(jitter);
      return;
    }
    jitter *= 10.0;
  }
  throw NumericalError("CholFactor: not positive definite within jitter budget");
}

double CholFactor::log_det() const {
  const auto& l = llt_.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Eigen::MatrixXd CholFactor::forward(const Eigen::MatrixXd& b) const {
  return llt_.matrixL().solve(b);
}

Eigen::VectorXd chol_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return CholFactor(a).solve(b);
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return CholFactor(a).solve(b);
}

double max_jitter_used() { return g_max_jitter.load(); }
long jitter_escalations() { return g_escalations.load(); }
void reset_jitter_stats() {
  g_max_jitter.store(0.0);
  g_escalations.store(0);
}

}  // namespace impspec
