#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cbo/loop.hpp"

namespace cbo {

struct TrueOptimum {
  Eigen::VectorXd x;
  double value = 0.0;
};

struct BenchmarkProblem {
  std::string name;
  Problem problem;
  std::optional<TrueOptimum> true_optimum;
  double objective_noise_std = 0.0;
  /// Ground-truth feasibility of a point (all constraints), original coordinates.
  std::function<bool(const Eigen::VectorXd&)> truly_feasible;
  /// Ground-truth objective without observation noise.
  std::function<double(const Eigen::VectorXd&)> true_objective;
};

/// Standard Branin-Hoo on [-5, 10] x [0, 15]; throws InputError outside it.
double branin_hoo(const Eigen::VectorXd& x);
/// (x1 - 2.5)^2 + (x2 - 7.5)^2 <= 50.
bool disk_constraint(const Eigen::VectorXd& x);

/// Branin-Hoo with the disk as a decoupled bernoulli constraint (delta = 0.01).
BenchmarkProblem branin_disk(Mode mode = Mode::decoupled);

struct SyntheticBinomialOptions {
  int trials = 20;
  double epsilon = 0.05;
  /// rho(x) == 1 everywhere.
  bool always_feasible = false;
};

/// Success probability rho(x) = Phi(2.5 - 20 (x - 0.4)^2) of the default instance.
double synthetic_success_rate(double x);
/// 1D shifted quadratic minimized subject to rho(x) >= 1 - epsilon, observed
/// through binomial draws that are deterministic in (x, seed).
BenchmarkProblem synthetic_binomial_problem(std::uint64_t seed, const SyntheticBinomialOptions& options = {});
/// Endpoints of {x in [0,1] : rho(x) >= 1 - epsilon}, found by bisection.
std::pair<double, double> synthetic_feasible_interval(double epsilon);

/// 1D problem with a real-valued constraint g(x) = 0.09 - (x - 0.7)^2.
BenchmarkProblem toy_1d(Mode mode = Mode::coupled);
/// 2D problem with a real-valued disk constraint, for decoupled runs.
BenchmarkProblem synthetic_decoupled(double objective_cost = 1.0, double constraint_cost = 1.0);
/// 2D problem whose feasible region is a small disk the initial design misses.
BenchmarkProblem needle_feasibility(Mode mode = Mode::coupled);

std::vector<std::string> benchmark_names();
/// Throws InputError for unknown names.
BenchmarkProblem make_benchmark(const std::string& name, Mode mode, std::uint64_t seed);

}  // namespace cbo
