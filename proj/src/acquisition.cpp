#include "cbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbo/errors.hpp"
#include "cbo/normal.hpp"

namespace cbo {

double expected_improvement(const PredictiveMarginal& marginal, double target) {
  const double sigma = std::sqrt(std::max(marginal.variance, 0.0));
  if (sigma < 1e-12) return std::max(0.0, target - marginal.mean);
  const double z = (target - marginal.mean) / sigma;
  return std::max(0.0, sigma * (z * normal_cdf(z) + normal_pdf(z)));
}

Eigen::VectorXd ensemble_expected_improvement(const GaussianModel& objective, const Eigen::MatrixXd& points,
                                              double target) {
  Eigen::VectorXd ei = Eigen::VectorXd::Zero(points.rows());
  Eigen::VectorXd mean, var;
  for (size_t m = 0; m < objective.members(); ++m) {
    objective.predict_batch(m, points, mean, var);
    for (Eigen::Index i = 0; i < points.rows(); ++i) ei(i) += expected_improvement({mean(i), var(i)}, target);
  }
  return ei / static_cast<double>(objective.members());
}

Eigen::VectorXd ensemble_mean(const GaussianModel& objective, const Eigen::MatrixXd& points) {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(points.rows());
  Eigen::VectorXd mean, var;
  for (size_t m = 0; m < objective.members(); ++m) {
    objective.predict_batch(m, points, mean, var);
    total += mean;
  }
  return total / static_cast<double>(objective.members());
}

Eigen::VectorXd constraint_probability_product(const ConstraintList& constraints, const Eigen::MatrixXd& points) {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(points.rows());
  for (const auto& c : constraints) p = p.cwiseProduct(c->probability_batch(points));
  return p;
}

std::vector<bool> all_constraints_satisfied(const ConstraintList& constraints, const Eigen::MatrixXd& points) {
  std::vector<bool> ok(static_cast<size_t>(points.rows()), true);
  for (const auto& c : constraints) {
    const auto s = probabilistic_constraint_satisfied(*c, points);
    for (size_t i = 0; i < ok.size(); ++i) ok[i] = ok[i] && s[i];
  }
  return ok;
}

std::optional<double> compute_target(const GaussianModel& objective, const ConstraintList& constraints,
                                     const Eigen::MatrixXd& pool) {
  if (pool.rows() == 0) throw InputError("compute_target: candidate pool is empty");
  const auto ok = all_constraints_satisfied(constraints, pool);
  if (std::none_of(ok.begin(), ok.end(), [](bool b) { return b; })) return std::nullopt;
  const Eigen::VectorXd mean = ensemble_mean(objective, pool);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < pool.rows(); ++i)
    if (ok[i]) best = std::min(best, mean(i));
  return best;
}

Eigen::MatrixXd candidate_pool(const GaussianModel& objective, const Eigen::MatrixXd& scan) {
  Eigen::MatrixXd pool(objective.size() + scan.rows(), scan.cols());
  if (objective.size() > 0) pool.topRows(objective.size()) = objective.inputs();
  pool.bottomRows(scan.rows()) = scan;
  return pool;
}

AcquisitionSnapshot make_snapshot(std::shared_ptr<const GaussianModel> objective, ConstraintList constraints,
                                  const Eigen::MatrixXd& pool) {
  AcquisitionSnapshot s;
  s.dim = objective->dim();
  s.target = compute_target(*objective, constraints, pool);
  s.objective = std::move(objective);
  s.constraints = std::move(constraints);
  return s;
}

Eigen::VectorXd constrained_ei_batch(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points) {
  if (!snapshot.target) throw StateError("constrained_ei: no EI target; use feasibility_acquisition");
  return ensemble_expected_improvement(*snapshot.objective, points, *snapshot.target)
      .cwiseProduct(constraint_probability_product(snapshot.constraints, points));
}

double constrained_ei(const AcquisitionSnapshot& snapshot, const Eigen::VectorXd& x) {
  return constrained_ei_batch(snapshot, x.transpose())(0);
}

double feasibility_acquisition(const ConstraintList& constraints, const Eigen::VectorXd& x) {
  return constraint_probability_product(constraints, x.transpose())(0);
}

Eigen::VectorXd acquisition_batch(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points) {
  if (snapshot.target) return constrained_ei_batch(snapshot, points);
  return constraint_probability_product(snapshot.constraints, points);
}

std::pair<Eigen::VectorXd, double> maximize_over_unit_box(
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& objective, Eigen::Index dim, Rng& rng,
    const MaximizerSettings& settings) {
  if (dim < 1) throw InputError("maximize: dimension must be at least 1");
  const Eigen::MatrixXd scan = halton_points(std::max(settings.scan_points, 1), dim, rng);
  const Eigen::VectorXd values = objective(scan);

  std::vector<Eigen::Index> order(static_cast<size_t>(scan.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

  Eigen::VectorXd best_x = scan.row(order.front()).transpose();
  double best = values(order.front());
  const int starts = std::min<int>(settings.starts, static_cast<int>(order.size()));
  Eigen::MatrixXd moves(2 * dim, dim);
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd x = scan.row(order[s]).transpose();
    double fx = values(order[s]);
    double step = settings.initial_step;
    for (int it = 0; it < settings.refine_steps && step > 1e-9; ++it) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        moves.row(2 * d) = x.transpose();
        moves.row(2 * d + 1) = x.transpose();
        moves(2 * d, d) = std::min(1.0, x(d) + step);
        moves(2 * d + 1, d) = std::max(0.0, x(d) - step);
      }
      const Eigen::VectorXd mv = objective(moves);
      Eigen::Index arg = 0;
      const double top = mv.maxCoeff(&arg);
      if (top > fx) {
        fx = top;
        x = moves.row(arg).transpose();
      } else {
        step *= 0.5;
      }
    }
    if (fx > best) {
      best = fx;
      best_x = x;
    }
  }
  return {best_x, best};
}

Candidate maximize_acquisition(const AcquisitionSnapshot& snapshot, Rng& rng, const MaximizerSettings& settings) {
  auto [x, value] = maximize_over_unit_box(
      [&](const Eigen::MatrixXd& pts) { return acquisition_batch(snapshot, pts); }, snapshot.dim, rng, settings);
  return {x, std::max(value, 0.0), snapshot.feasibility_mode()};
}

}  // namespace cbo
