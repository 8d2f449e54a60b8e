#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace cbo {

/// Seedable random stream. Uniform and normal variates are produced from the
/// raw 64-bit engine output directly so that sequences do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Independent stream keyed by this stream's seed and `path`. Does not
  /// advance this stream.
  Rng child(std::initializer_list<std::uint64_t> path) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// `count` points of a Halton sequence in [0,1)^dim, randomly shifted modulo 1
/// (Cranley-Patterson rotation) by `rng`. Rows are points.
Eigen::MatrixXd halton_points(Eigen::Index count, Eigen::Index dim, Rng& rng);

}  // namespace cbo
