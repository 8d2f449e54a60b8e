#include "cbo/decoupled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "cbo/errors.hpp"
#include "cbo/normal.hpp"

namespace cbo {
namespace {

/// Draws `count` joint samples (columns) from N(mean, cov).
Eigen::MatrixXd sample_joint(const JointPredictive& joint, Eigen::Index count, Rng& rng) {
  const Eigen::Index n = joint.mean.size();
  const double scale = std::max(joint.covariance.diagonal().maxCoeff(), 1e-300);
  const Eigen::MatrixXd l = robust_cholesky(joint.covariance, scale, 1e-10);
  Eigen::MatrixXd s = l.triangularView<Eigen::Lower>() * rng.normal_matrix(n, count);
  s.colwise() += joint.mean;
  return s;
}

size_t ensemble_width(const AcquisitionSnapshot& snapshot) {
  size_t m = snapshot.objective->members();
  for (const auto& c : snapshot.constraints) m = std::max(m, c->members());
  return m;
}

/// Per-member joint samples over the discretization (first N rows) and
/// optionally one extra fantasy location (last row).
struct MemberDraws {
  Eigen::MatrixXd objective;
  std::vector<Eigen::MatrixXd> latent;          // empty matrix for oracle constraints
  std::vector<std::vector<bool>> oracle_masks;  // per constraint; empty for statistical ones
};

MemberDraws draw_member(const AcquisitionSnapshot& snapshot, size_t member, const Eigen::MatrixXd& points,
                        Eigen::Index count, Rng& rng) {
  MemberDraws d;
  const auto& obj = *snapshot.objective;
  d.objective = sample_joint(obj.joint(member % obj.members(), points), count, rng);
  for (const auto& c : snapshot.constraints) {
    if (c->kind() == ConstraintKind::boolean_oracle) {
      d.latent.emplace_back();
      d.oracle_masks.push_back(c->oracle_values(points));
    } else {
      d.latent.push_back(sample_joint(c->latent_joint(member % c->members(), points), count, rng));
      d.oracle_masks.emplace_back();
    }
  }
  return d;
}

/// Adds argmin visit counts of the first `n` rows to `counts`; returns the number of infeasible draws.
long accumulate_argmin(const Eigen::MatrixXd& objective, const std::vector<const Eigen::MatrixXd*>& latent,
                       const std::vector<const std::vector<bool>*>& masks, Eigen::Index n, Eigen::VectorXd& counts) {
  long infeasible = 0;
  std::vector<char> point_ok(static_cast<size_t>(n), 1);
  for (size_t k = 0; k < masks.size(); ++k)
    if (masks[k])
      for (Eigen::Index i = 0; i < n; ++i) point_ok[i] = point_ok[i] && (*masks[k])[i];
  for (Eigen::Index s = 0; s < objective.cols(); ++s) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!point_ok[i]) continue;
      bool ok = true;
      for (const auto* g : latent)
        if (g && (*g)(i, s) < 0.0) {
          ok = false;
          break;
        }
      if (ok && objective(i, s) < best) {
        best = objective(i, s);
        arg = i;
      }
    }
    if (arg < 0)
      ++infeasible;
    else
      counts(arg) += 1.0;
  }
  return infeasible;
}

struct MassPair {
  Eigen::VectorXd mass;
  double infeasible;
};

MassPair pmin_of(const Eigen::MatrixXd& objective, const std::vector<const Eigen::MatrixXd*>& latent,
                 const std::vector<const std::vector<bool>*>& masks, Eigen::Index n) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  const long inf = accumulate_argmin(objective, latent, masks, n, counts);
  const double total = static_cast<double>(objective.cols());
  return {counts / total, static_cast<double>(inf) / total};
}

double log_binomial_pmf(int k, int n, double log_p, double log_q) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * log_p + (n - k) * log_q;
}

}  // namespace

std::string task_label(const TaskId& task, const ConstraintList& constraints) {
  switch (task.kind) {
    case TaskId::Kind::objective:
      return "objective";
    case TaskId::Kind::joint:
      return "joint";
    case TaskId::Kind::constraint:
      if (task.index < constraints.size()) return constraints[task.index]->spec().id;
      return "constraint" + std::to_string(task.index);
  }
  return "unknown";
}

void SelectionSettings::validate() const {
  if (discretization < 2) throw InputError("SelectionSettings: discretization needs at least 2 points");
  if (samples < 1 || fantasies < 1 || scan_points < discretization)
    throw InputError("SelectionSettings: sample, fantasy and scan counts must be positive");
}

Eigen::MatrixXd build_discretization(const AcquisitionSnapshot& snapshot, int count, Rng& rng, int scan_points) {
  if (count < 2) throw InputError("build_discretization: need at least 2 points");
  if (scan_points < count) throw InputError("build_discretization: scan smaller than discretization");
  const Eigen::MatrixXd scan = halton_points(scan_points, snapshot.dim, rng);
  const Eigen::VectorXd score = acquisition_batch(snapshot, scan);
  std::vector<Eigen::Index> order(static_cast<size_t>(scan.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return score(a) > score(b); });
  Eigen::MatrixXd out(count, snapshot.dim);
  std::set<std::vector<double>> seen;
  Eigen::Index filled = 0;
  for (Eigen::Index idx : order) {
    if (filled == count) break;
    std::vector<double> key;
    for (Eigen::Index d = 0; d < scan.cols(); ++d) key.push_back(scan(idx, d));
    if (!seen.insert(key).second) continue;
    out.row(filled++) = scan.row(idx);
  }
  if (filled < count) throw NumericalError("build_discretization: not enough distinct scan points");
  return out;
}

PminEstimate estimate_pmin(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points, int samples, Rng& rng) {
  if (samples < 1) throw InputError("estimate_pmin: need at least one sample");
  if (points.rows() < 1 || points.cols() != snapshot.dim) throw InputError("estimate_pmin: bad point set");
  const size_t width = ensemble_width(snapshot);
  const Eigen::Index n = points.rows();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  long infeasible = 0;
  for (size_t m = 0; m < width; ++m) {
    const size_t total = static_cast<size_t>(samples);
    const auto draws = static_cast<Eigen::Index>(total / width + (m < total % width ? 1 : 0));
    if (draws == 0) continue;
    const MemberDraws d = draw_member(snapshot, m, points, draws, rng);
    std::vector<const Eigen::MatrixXd*> latent;
    std::vector<const std::vector<bool>*> masks;
    for (size_t k = 0; k < d.latent.size(); ++k) {
      latent.push_back(d.latent[k].size() ? &d.latent[k] : nullptr);
      masks.push_back(d.oracle_masks[k].empty() ? nullptr : &d.oracle_masks[k]);
    }
    infeasible += accumulate_argmin(d.objective, latent, masks, n, counts);
  }
  PminEstimate out;
  out.points = points;
  out.mass = counts / static_cast<double>(samples);
  out.infeasible_mass = static_cast<double>(infeasible) / static_cast<double>(samples);
  return out;
}

double entropy(const Eigen::VectorXd& mass, double infeasible_mass) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < mass.size(); ++i)
    if (mass(i) > 0.0) h -= mass(i) * std::log(mass(i));
  if (infeasible_mass > 0.0) h -= infeasible_mass * std::log(infeasible_mass);
  return std::max(h, 0.0);
}

double entropy(const PminEstimate& estimate) { return entropy(estimate.mass, estimate.infeasible_mass); }

TaskDecision select_task(const AcquisitionSnapshot& snapshot, const Eigen::VectorXd& x,
                         const std::vector<TaskCost>& tasks, const SelectionSettings& settings, Rng& rng) {
  settings.validate();
  const Eigen::MatrixXd points = build_discretization(snapshot, settings.discretization, rng, settings.scan_points);
  return select_task_on(snapshot, points, x, tasks, settings, rng);
}

namespace {

/// One ensemble member's joint draws over [points; x] for every model.
struct MemberState {
  JointPredictive obj_joint;
  Eigen::MatrixXd obj_draws;
  Eigen::VectorXd obj_noise;
  double obj_noise_var = 0.0;
  std::vector<JointPredictive> con_joint;
  std::vector<Eigen::MatrixXd> con_draws;
  std::vector<Eigen::VectorXd> con_noise;
  std::vector<double> con_noise_var;
  std::vector<std::vector<bool>> masks;
  Eigen::MatrixXd obj_top;
  std::vector<Eigen::MatrixXd> con_top;
  MassPair base;
};

struct Mixture {
  Eigen::VectorXd mass;
  double infeasible = 0.0;
  double weight = 0.0;

  explicit Mixture(Eigen::Index n) : mass(Eigen::VectorXd::Zero(n)) {}
  void add(double w, const MassPair& p) {
    mass += w * p.mass;
    infeasible += w * p.infeasible;
    weight += w;
  }
  double entropy_value() const { return weight > 0.0 ? entropy(mass / weight, infeasible / weight) : 0.0; }
};

double log_normal_pdf(double y, double mean, double var) {
  return -0.5 * (std::log(2.0 * M_PI * var) + (y - mean) * (y - mean) / var);
}

/// Normalized weights from log weights.
std::vector<double> softmax(const std::vector<double>& logw) {
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(logw.size());
  double total = 0.0;
  for (size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(logw[i] - top));
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

TaskDecision select_task_on(const AcquisitionSnapshot& snapshot, const Eigen::MatrixXd& points,
                            const Eigen::VectorXd& x, const std::vector<TaskCost>& tasks,
                            const SelectionSettings& settings, Rng& rng) {
  settings.validate();
  if (tasks.empty()) throw InputError("select_task: no tasks");
  if (x.size() != snapshot.dim || (x.array() < 0.0).any() || (x.array() > 1.0).any())
    throw InputError("select_task: x must lie in the unit box");
  for (const auto& t : tasks) {
    if (!(t.cost > 0.0)) throw InputError("select_task: task costs must be positive");
    if (t.task.kind == TaskId::Kind::joint) throw InputError("select_task: the joint task is not selectable");
    if (t.task.kind == TaskId::Kind::constraint &&
        (t.task.index >= snapshot.constraints.size() || !snapshot.constraints[t.task.index]->is_task()))
      throw InputError("select_task: constraint task does not name an evaluable constraint");
  }

  const Eigen::Index n = points.rows();
  Eigen::MatrixXd augmented(n + 1, snapshot.dim);
  augmented.topRows(n) = points;
  augmented.row(n) = x.transpose();

  const int fantasies = settings.fantasies;
  Eigen::VectorXd quantiles(fantasies);
  for (int j = 0; j < fantasies; ++j) quantiles(j) = normal_quantile((j + 0.5) / fantasies);

  const size_t width = ensemble_width(snapshot);
  const size_t k_count = snapshot.constraints.size();
  const auto& obj = *snapshot.objective;

  std::vector<MemberState> members(width);
  for (size_t m = 0; m < width; ++m) {
    MemberState& st = members[m];
    Rng member_rng = rng.child({m});
    const size_t om = m % obj.members();
    st.obj_joint = obj.joint(om, augmented);
    st.obj_draws = sample_joint(st.obj_joint, settings.samples, member_rng);
    st.obj_noise_var = obj.noise_variance(om);
    st.obj_noise = member_rng.normal_vector(settings.samples) * std::sqrt(st.obj_noise_var);
    st.con_joint.resize(k_count);
    st.con_draws.resize(k_count);
    st.con_noise.resize(k_count);
    st.con_noise_var.assign(k_count, 0.0);
    st.masks.resize(k_count);
    st.con_top.resize(k_count);
    for (size_t k = 0; k < k_count; ++k) {
      const auto& c = *snapshot.constraints[k];
      if (c.kind() == ConstraintKind::boolean_oracle) {
        st.masks[k] = c.oracle_values(points);
        continue;
      }
      const size_t cm = m % c.members();
      st.con_joint[k] = c.latent_joint(cm, augmented);
      st.con_draws[k] = sample_joint(st.con_joint[k], settings.samples, member_rng);
      if (c.kind() == ConstraintKind::gaussian_latent) st.con_noise_var[k] = c.gaussian().noise_variance(cm);
      st.con_noise[k] = member_rng.normal_vector(settings.samples) * std::sqrt(st.con_noise_var[k]);
      st.con_top[k] = st.con_draws[k].topRows(n);
    }
    st.obj_top = st.obj_draws.topRows(n);
  }

  auto latent_ptrs = [&](const MemberState& st) {
    std::vector<const Eigen::MatrixXd*> p(k_count, nullptr);
    for (size_t k = 0; k < k_count; ++k)
      if (st.con_top[k].size()) p[k] = &st.con_top[k];
    return p;
  };
  auto mask_ptrs = [&](const MemberState& st) {
    std::vector<const std::vector<bool>*> p(k_count, nullptr);
    for (size_t k = 0; k < k_count; ++k)
      if (!st.masks[k].empty()) p[k] = &st.masks[k];
    return p;
  };

  Mixture base(n);
  for (auto& st : members) {
    st.base = pmin_of(st.obj_top, latent_ptrs(st), mask_ptrs(st), n);
    base.add(1.0, st.base);
  }
  const double base_entropy = base.entropy_value();

  // Member-m p_min after observing `y` for a Gaussian-outcome task, by
  // pathwise conditioning of that member's draws.
  auto gaussian_conditioned = [&](const TaskId& task, size_t m, double y) -> MassPair {
    const MemberState& st = members[m];
    const bool is_obj = task.kind == TaskId::Kind::objective;
    const JointPredictive& jp = is_obj ? st.obj_joint : st.con_joint[task.index];
    const Eigen::MatrixXd& draws = is_obj ? st.obj_draws : st.con_draws[task.index];
    const Eigen::VectorXd& noise = is_obj ? st.obj_noise : st.con_noise[task.index];
    const double pred_var = jp.covariance(n, n) + (is_obj ? st.obj_noise_var : st.con_noise_var[task.index]);
    if (pred_var <= 1e-300) return st.base;
    const Eigen::VectorXd gain = jp.covariance.col(n).head(n) / pred_var;
    const Eigen::RowVectorXd resid = (Eigen::VectorXd::Constant(noise.size(), y) - draws.row(n).transpose() - noise).transpose();
    const Eigen::MatrixXd cond = draws.topRows(n) + gain * resid;
    if (is_obj) return pmin_of(cond, latent_ptrs(st), mask_ptrs(st), n);
    auto ptrs = latent_ptrs(st);
    ptrs[task.index] = &cond;
    return pmin_of(st.obj_top, ptrs, mask_ptrs(st), n);
  };

  std::vector<double> reduction(tasks.size(), 0.0);
  for (size_t t = 0; t < tasks.size(); ++t) {
    const TaskId task = tasks[t].task;
    const bool binomial =
        task.kind == TaskId::Kind::constraint && snapshot.constraints[task.index]->kind() == ConstraintKind::binomial;
    double expected = 0.0;
    if (!binomial) {
      // Predictive of the outcome under every member; fantasies are drawn from
      // each member in turn and every member is reweighted by its likelihood.
      std::vector<double> mean(width), var(width);
      for (size_t m = 0; m < width; ++m) {
        const MemberState& st = members[m];
        if (task.kind == TaskId::Kind::objective) {
          mean[m] = st.obj_joint.mean(n);
          var[m] = st.obj_joint.covariance(n, n) + st.obj_noise_var;
        } else {
          mean[m] = st.con_joint[task.index].mean(n);
          var[m] = st.con_joint[task.index].covariance(n, n) + st.con_noise_var[task.index];
        }
        var[m] = std::max(var[m], 1e-300);
      }
      for (size_t m = 0; m < width; ++m)
        for (int j = 0; j < fantasies; ++j) {
          const double y = mean[m] + std::sqrt(var[m]) * quantiles(j);
          std::vector<double> logw(width);
          for (size_t r = 0; r < width; ++r) logw[r] = log_normal_pdf(y, mean[r], var[r]);
          const std::vector<double> w = softmax(logw);
          Mixture post(n);
          for (size_t r = 0; r < width; ++r)
            if (w[r] > 1e-12) post.add(w[r], gaussian_conditioned(task, r, y));
          expected += post.entropy_value() / static_cast<double>(width * fantasies);
        }
    } else {
      // Success counts: each (member, latent quantile) pair is a hypothesis
      // whose p_min is mixed by the binomial likelihood of every count.
      const auto& c = *snapshot.constraints[task.index];
      const int trials = c.fantasy_trials();
      const double offset = c.latent_offset();
      std::vector<MassPair> hyp;
      std::vector<double> latent_value;
      for (size_t m = 0; m < width; ++m) {
        const MemberState& st = members[m];
        const JointPredictive& cj = st.con_joint[task.index];
        const double latent_var = cj.covariance(n, n);
        for (int j = 0; j < fantasies; ++j) {
          const double g = cj.mean(n) + std::sqrt(std::max(latent_var, 0.0)) * quantiles(j);
          if (latent_var <= 1e-300) {
            hyp.push_back(st.base);
          } else {
            const Eigen::VectorXd gain = cj.covariance.col(n).head(n) / latent_var;
            const Eigen::RowVectorXd resid =
                (Eigen::VectorXd::Constant(settings.samples, g) - st.con_draws[task.index].row(n).transpose()).transpose();
            const Eigen::MatrixXd cond = st.con_top[task.index] + gain * resid;
            auto ptrs = latent_ptrs(st);
            ptrs[task.index] = &cond;
            hyp.push_back(pmin_of(st.obj_top, ptrs, mask_ptrs(st), n));
          }
          latent_value.push_back(g + offset);
        }
      }
      const double count = static_cast<double>(hyp.size());
      for (int y = 0; y <= trials; ++y) {
        Mixture post(n);
        for (size_t h = 0; h < hyp.size(); ++h)
          post.add(std::exp(log_binomial_pmf(y, trials, log_normal_cdf(latent_value[h]),
                                             log_normal_cdf(-latent_value[h]))),
                   hyp[h]);
        if (post.weight <= 0.0) continue;
        expected += (post.weight / count) * post.entropy_value();
      }
    }
    // Information gain is nonnegative; small negative estimates are Monte Carlo error.
    reduction[t] = std::max(0.0, base_entropy - expected);
  }

  TaskDecision decision;
  decision.x = x;
  decision.reductions = reduction;
  size_t best = 0;
  double best_score = reduction[0] / tasks[0].cost;
  for (size_t t = 1; t < tasks.size(); ++t) {
    const double score = reduction[t] / tasks[t].cost;
    if (score > best_score || (score == best_score && tasks[t].cost < tasks[best].cost)) {
      best = t;
      best_score = score;
    }
  }
  decision.task = tasks[best].task;
  decision.expected_entropy_reduction_per_cost = best_score;
  return decision;
}

}  // namespace cbo
