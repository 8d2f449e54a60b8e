#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cbo/constraints.hpp"
#include "cbo/gp.hpp"
#include "cbo/models.hpp"
#include "cbo/random.hpp"

namespace cbo {

using ConstraintList = std::vector<std::shared_ptr<const ConstraintModel>>;

/// Frozen models used to evaluate the acquisition consistently during one
/// inner optimization. The search box is the unit hypercube of dimension `dim`.
struct AcquisitionSnapshot {
  std::shared_ptr<const GaussianModel> objective;
  ConstraintList constraints;
  /// EI target; absent when no pool point satisfies every probabilistic constraint.
  std::optional<double> target;
  Eigen::Index dim = 0;

  bool feasibility_mode() const { return !target.has_value(); }
};

struct Candidate {
  Eigen::VectorXd x;
  double acq_value = 0.0;
  bool feasibility_mode = false;
};

/// Closed-form EI for minimization below `target`.
double expected_improvement(const PredictiveMarginal& marginal, double target);

/// EI averaged over the objective ensemble at each row of `points`.
Eigen::VectorXd ensemble_expected_improvement(const GaussianModel& objective, const Eigen::MatrixXd& points,
                                              double target);
/// Ensemble-averaged predictive mean at each row of `points`.
Eigen::VectorXd ensemble_mean(const GaussianModel& objective, const Eigen::MatrixXd& points);

/// Product over constraints of Pr(g_k(x) >= 0) at each row.
Eigen::VectorXd constraint_probability_product(const ConstraintList& constraints, const Eigen::MatrixXd& points);
/// Rows at which every constraint meets its confidence 1 - delta_k.
std::vector<bool> all_constraints_satisfied(const ConstraintList& constraints, const Eigen::MatrixXd& points);

/// Minimum ensemble-mean objective over the pool points that satisfy every
/// probabilistic constraint; absent when there are none.
std::optional<double> compute_target(const GaussianModel& objective, const ConstraintList& constraints,
                                     const Eigen::MatrixXd& pool);

/// Observed objective inputs stacked on top of `scan`.
Eigen::MatrixXd candidate_pool(const GaussianModel& objective, const Eigen::MatrixXd& scan);

AcquisitionSnapshot make_snapshot(std::shared_ptr<const GaussianModel> objective, ConstraintList constraints,
                                  const Eigen::MatrixXd& pool);

/// Ensemble EI times the product of constraint probabilities. Throws
/// StateError when the snapshot has no target.
double constrained_ei(const AcquisitionSnapshot& snapshot, const Eigen::VectorXd& x);
Eigen::VectorXd constrained_ei_batch(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points);

double feasibility_acquisition(const ConstraintList& constraints, const Eigen::VectorXd& x);

/// constrained_ei when the snapshot has a target, feasibility_acquisition otherwise.
Eigen::VectorXd acquisition_batch(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points);

struct MaximizerSettings {
  int scan_points = 1024;
  int starts = 10;
  int refine_steps = 100;
  double initial_step = 0.1;
};

/// Maximizes a batched objective over [0,1]^dim: low-discrepancy scan, then
/// compass-search refinement from the best scan points. Returns the arg max
/// and its value.
std::pair<Eigen::VectorXd, double> maximize_over_unit_box(
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& objective, Eigen::Index dim, Rng& rng,
    const MaximizerSettings& settings = {});

Candidate maximize_acquisition(const AcquisitionSnapshot& snapshot, Rng& rng, const MaximizerSettings& settings = {});

}  // namespace cbo
