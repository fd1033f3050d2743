#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace impspec {

// Mixes a master seed with a stream index into an independent sub-seed.
// Pure function of its inputs, so parallel trials stay reproducible no
// matter which thread runs them.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream);

// mt19937_64 with an explicit Box-Muller normal generator. The standard
// library's normal_distribution is implementation-defined, which would
// break the bit-reproducibility contract across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform on [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  // standard normal
  double normal();
  double normal(double mean, double sd);
  // integer in [0, n)
  std::uint64_t index(std::uint64_t n);

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace impspec
