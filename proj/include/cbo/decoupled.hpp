#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbo/acquisition.hpp"
#include "cbo/random.hpp"

namespace cbo {

/// A black box that can be evaluated on its own: the objective, one
/// constraint (by index into the snapshot's constraint list), or all of them
/// jointly (coupled evaluation).
struct TaskId {
  enum class Kind { objective, constraint, joint };
  Kind kind = Kind::objective;
  size_t index = 0;

  static TaskId objective() { return {Kind::objective, 0}; }
  static TaskId constraint(size_t k) { return {Kind::constraint, k}; }
  static TaskId joint() { return {Kind::joint, 0}; }

  friend bool operator==(const TaskId&, const TaskId&) = default;
};

std::string task_label(const TaskId& task, const ConstraintList& constraints);

struct TaskCost {
  TaskId task;
  double cost = 1.0;
};

/// Distribution of the constrained minimizer over a finite point set. Draws
/// with no feasible point accrue to `infeasible_mass`.
struct PminEstimate {
  Eigen::MatrixXd points;
  Eigen::VectorXd mass;
  double infeasible_mass = 0.0;
};

/// The `count` highest-scoring distinct points of a `scan_points` Halton scan
/// under the snapshot's acquisition. Requires count >= 2.
Eigen::MatrixXd build_discretization(const AcquisitionSnapshot& snapshot, int count, Rng& rng,
                                     int scan_points = 4096);

/// Monte Carlo p_min from `samples` joint draws; draw s uses ensemble member s mod M.
PminEstimate estimate_pmin(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points, int samples, Rng& rng);

/// Discrete entropy in nats, with the infeasible mass as one extra atom.
double entropy(const PminEstimate& estimate);
double entropy(const Eigen::VectorXd& mass, double infeasible_mass);

struct SelectionSettings {
  int discretization = 50;
  /// Joint draws per ensemble member for each p_min estimate.
  int samples = 1000;
  /// Fantasized outcomes per ensemble member and task.
  int fantasies = 10;
  int scan_points = 4096;

  void validate() const;
};

struct TaskDecision {
  TaskId task;
  Eigen::VectorXd x;
  double expected_entropy_reduction_per_cost = 0.0;
  /// Expected entropy reduction (unscaled) for each candidate task, in input order.
  std::vector<double> reductions;
};

/// Chooses which task to evaluate at `x` by expected reduction of p_min
/// entropy per unit cost. Builds its own discretization.
TaskDecision select_task(const AcquisitionSnapshot& snapshot, const Eigen::VectorXd& x,
                         const std::vector<TaskCost>& tasks, const SelectionSettings& settings, Rng& rng);

/// select_task on a caller-provided discretization.
TaskDecision select_task_on(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points,
                            const Eigen::VectorXd& x, const std::vector<TaskCost>& tasks,
                            const SelectionSettings& settings, Rng& rng);

}  // namespace cbo
