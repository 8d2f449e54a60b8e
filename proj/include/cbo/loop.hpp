#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbo/acquisition.hpp"
#include "cbo/constraints.hpp"
#include "cbo/decoupled.hpp"
#include "cbo/models.hpp"

namespace cbo {

/// Axis-aligned search box, mapped affinely onto [0,1]^D for modelling.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
  void validate() const;
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd to_unit(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
};

enum class Mode { coupled, decoupled };

const char* to_string(Mode mode);

struct ConstraintTask {
  ConstraintSpec spec;
  /// Evaluates the constraint at a point in original coordinates. For
  /// boolean-oracle constraints this is the oracle itself.
  std::function<ConstraintPayload(const Eigen::VectorXd&)> evaluate;
  /// Hyperprior for the constraint's GP; the defaults are used when absent.
  std::optional<HyperPrior> prior;
};

struct Problem {
  Box bounds;
  /// Returns no value when the objective cannot be measured at x.
  std::function<std::optional<double>(const Eigen::VectorXd&)> objective;
  std::vector<ConstraintTask> constraints;
  Mode mode = Mode::decoupled;
  double objective_cost = 1.0;
  std::optional<HyperPrior> objective_prior;
  /// Failed objective evaluations become observations of an implicit
  /// bernoulli constraint named "objective_valid".
  bool objective_may_fail = false;
  double failure_delta = 0.05;

  void validate() const;
};

struct OptimizerSettings {
  McmcSettings mcmc;
  MaximizerSettings maximizer;
  SelectionSettings selection;
  /// Low-discrepancy points added to the observed inputs when computing the
  /// EI target and the recommendation.
  int pool_points = 2048;
};

/// Outcome of evaluating one task (or all of them) at a point.
struct Evaluation {
  bool objective_evaluated = false;
  std::optional<double> objective;
  /// Indexed like Problem::constraints; empty entries were not evaluated.
  std::vector<std::optional<ConstraintPayload>> constraints;
};

struct Suggestion {
  TaskId task;
  Eigen::VectorXd x;  // original coordinates
  bool feasibility_mode = false;
  double acq_value = 0.0;
  std::optional<TaskDecision> decision;
};

struct Recommendation {
  Eigen::VectorXd x;
  double expected_objective = 0.0;
  std::vector<double> constraint_probabilities;
  bool feasible = false;
};

struct TraceRecord {
  long iter = 0;
  TaskId task;
  std::string task_label;
  Eigen::VectorXd x;
  Evaluation observation;
  Recommendation incumbent;
  bool feasibility_mode = false;
  double acq_value = 0.0;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::vector<TraceRecord> iterations;
};

/// Sequential constrained Bayesian optimizer with an ask/tell surface.
class Optimizer {
 public:
  Optimizer(Problem problem, OptimizerSettings settings, std::uint64_t seed);

  /// Evaluates every task at `n_init` low-discrepancy points and fits all models.
  void initialize(int n_init);
  /// Next (task, x): x maximizes the constraint-weighted EI (or the
  /// feasibility acquisition); in decoupled mode the task is chosen by
  /// entropy search at that x.
  Suggestion ask();
  void tell(const TaskId& task, const Eigen::VectorXd& x, const Evaluation& evaluation);
  /// One full iteration: ask, evaluate, tell, record.
  const TraceRecord& step();
  Recommendation recommend() const;

  /// Calls the user evaluators for `task` at `x` (original coordinates).
  Evaluation evaluate(const TaskId& task, const Eigen::VectorXd& x) const;

  /// Snapshot of the current models, computing the EI target on the pool.
  AcquisitionSnapshot snapshot() const;
  /// Tasks that can be chosen in decoupled mode, with their costs.
  std::vector<TaskCost> selectable_tasks() const;
  double task_cost(const TaskId& task) const;

  const Problem& problem() const { return problem_; }
  const OptimizerSettings& settings() const { return settings_; }
  const RunTrace& trace() const { return trace_; }
  const std::vector<TraceRecord>& initial_design() const { return initial_design_; }
  const GaussianModel& objective_model() const { return *objective_; }
  const ConstraintModel& constraint_model(size_t k) const { return *constraints_.at(k); }
  size_t constraint_count() const { return constraints_.size(); }
  ConstraintList constraint_list() const;
  bool initialized() const { return initialized_; }
  long iteration() const { return iteration_; }
  double total_cost() const { return total_cost_; }
  /// Pool points (unit coordinates) used for targets and recommendations.
  Eigen::MatrixXd pool() const;

 private:
  void refresh_models();
  void record_objective(const Eigen::VectorXd& unit, const std::optional<double>& value, Rng& rng);
  ConstraintModel& mutable_constraint(size_t k);
  GaussianModel& mutable_objective();

  Problem problem_;
  OptimizerSettings settings_;
  std::uint64_t seed_;
  Rng root_;
  std::shared_ptr<GaussianModel> objective_;
  std::vector<std::shared_ptr<ConstraintModel>> constraints_;  // problem constraints, then the failure constraint
  std::vector<bool> stale_;                                   // objective first, then constraints
  Eigen::MatrixXd scan_;
  bool initialized_ = false;
  long iteration_ = 0;
  long tells_ = 0;
  double total_cost_ = 0.0;
  RunTrace trace_;
  std::vector<TraceRecord> initial_design_;
};

}  // namespace cbo
