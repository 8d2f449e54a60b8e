#include "cbo/loop.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "cbo/errors.hpp"

namespace cbo {
namespace {

constexpr std::uint64_t kStreamMcmc = 1;
constexpr std::uint64_t kStreamMaximize = 2;
constexpr std::uint64_t kStreamSelect = 3;
constexpr std::uint64_t kStreamAbsorb = 4;
constexpr std::uint64_t kStreamDesign = 5;
constexpr std::uint64_t kStreamPool = 6;

const char* kFailureConstraintId = "objective_valid";

}  // namespace

void Box::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) throw InputError("bounds: lower and upper must have equal, nonzero length");
  for (Eigen::Index d = 0; d < lower.size(); ++d) {
    if (!std::isfinite(lower(d)) || !std::isfinite(upper(d))) throw InputError("bounds must be finite");
    if (!(lower(d) < upper(d))) throw InputError("bounds: lower must be strictly below upper in every dimension");
  }
}

bool Box::contains(const Eigen::VectorXd& x) const {
  return x.size() == dim() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Eigen::VectorXd Box::to_unit(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw InputError("Box::to_unit: dimension mismatch");
  return ((x - lower).array() / (upper - lower).array()).matrix();
}

Eigen::VectorXd Box::from_unit(const Eigen::VectorXd& u) const {
  if (u.size() != dim()) throw InputError("Box::from_unit: dimension mismatch");
  Eigen::VectorXd x = lower.array() + u.array() * (upper - lower).array();
  return x.cwiseMax(lower).cwiseMin(upper);
}

const char* to_string(Mode mode) { return mode == Mode::coupled ? "coupled" : "decoupled"; }

void Problem::validate() const {
  bounds.validate();
  if (!objective) throw InputError("problem: objective evaluator missing");
  if (!(objective_cost > 0.0)) throw InputError("problem: objective cost must be positive");
  if (objective_may_fail && !(failure_delta > 0.0 && failure_delta < 1.0))
    throw InputError("problem: failure delta must lie in (0, 1)");
  for (const auto& c : constraints) {
    c.spec.validate();
    if (!c.evaluate) throw InputError("problem: constraint '" + c.spec.id + "' has no evaluator");
    if (c.spec.id == kFailureConstraintId) throw InputError("problem: constraint id 'objective_valid' is reserved");
  }
}

Optimizer::Optimizer(Problem problem, OptimizerSettings settings, std::uint64_t seed)
    : problem_(std::move(problem)), settings_(std::move(settings)), seed_(seed), root_(seed) {
  problem_.validate();
  settings_.mcmc.validate();
  settings_.selection.validate();
  if (settings_.pool_points < 1) throw InputError("optimizer: pool_points must be at least 1");
  const Eigen::Index dim = problem_.bounds.dim();
  const int m = settings_.mcmc.ensemble;
  objective_ = std::make_shared<GaussianModel>(
      dim, problem_.objective_prior.value_or(HyperPrior::defaults(dim, true)), m, true);
  for (const auto& c : problem_.constraints) {
    switch (c.spec.kind) {
      case ConstraintKind::gaussian_latent:
        constraints_.push_back(std::make_shared<ConstraintModel>(
            c.prior ? ConstraintModel::gaussian_latent(c.spec, dim, m, *c.prior)
                    : ConstraintModel::gaussian_latent(c.spec, dim, m)));
        break;
      case ConstraintKind::binomial:
        constraints_.push_back(std::make_shared<ConstraintModel>(
            c.prior ? ConstraintModel::binomial(c.spec, dim, m, *c.prior) : ConstraintModel::binomial(c.spec, dim, m)));
        break;
      case ConstraintKind::boolean_oracle: {
        const Box box = problem_.bounds;
        auto eval = c.evaluate;
        auto oracle = [box, eval](const Eigen::VectorXd& u) {
          const ConstraintPayload p = eval(box.from_unit(u));
          const bool* b = std::get_if<bool>(&p);
          if (!b) throw InputError("boolean-oracle evaluator must return a bool");
          return *b;
        };
        constraints_.push_back(std::make_shared<ConstraintModel>(ConstraintModel::boolean_oracle(c.spec, dim, oracle)));
        break;
      }
    }
  }
  if (problem_.objective_may_fail) {
    ConstraintSpec spec;
    spec.id = kFailureConstraintId;
    spec.kind = ConstraintKind::binomial;
    spec.delta = problem_.failure_delta;
    spec.cost = problem_.objective_cost;
    constraints_.push_back(std::make_shared<ConstraintModel>(ConstraintModel::binomial(spec, dim, m)));
  }
  stale_.assign(constraints_.size() + 1, true);
  Rng pool_rng = root_.child({kStreamPool});
  scan_ = halton_points(settings_.pool_points, dim, pool_rng);
  trace_.seed = seed;
}

ConstraintList Optimizer::constraint_list() const {
  ConstraintList out;
  for (const auto& c : constraints_) out.push_back(c);
  return out;
}

Eigen::MatrixXd Optimizer::pool() const { return candidate_pool(*objective_, scan_); }

GaussianModel& Optimizer::mutable_objective() {
  // Snapshots handed out earlier keep their own copy.
  if (objective_.use_count() > 1) objective_ = std::make_shared<GaussianModel>(*objective_);
  return *objective_;
}

ConstraintModel& Optimizer::mutable_constraint(size_t k) {
  auto& c = constraints_.at(k);
  if (c.use_count() > 1) c = std::make_shared<ConstraintModel>(*c);
  return *c;
}

double Optimizer::task_cost(const TaskId& task) const {
  switch (task.kind) {
    case TaskId::Kind::objective:
      return problem_.objective_cost;
    case TaskId::Kind::constraint:
      return problem_.constraints.at(task.index).spec.cost;
    case TaskId::Kind::joint: {
      double total = problem_.objective_cost;
      for (const auto& c : problem_.constraints)
        if (c.spec.kind != ConstraintKind::boolean_oracle) total += c.spec.cost;
      return total;
    }
  }
  return 0.0;
}

std::vector<TaskCost> Optimizer::selectable_tasks() const {
  std::vector<TaskCost> tasks{{TaskId::objective(), problem_.objective_cost}};
  for (size_t k = 0; k < problem_.constraints.size(); ++k)
    if (problem_.constraints[k].spec.kind != ConstraintKind::boolean_oracle)
      tasks.push_back({TaskId::constraint(k), problem_.constraints[k].spec.cost});
  return tasks;
}

Evaluation Optimizer::evaluate(const TaskId& task, const Eigen::VectorXd& x) const {
  if (!problem_.bounds.contains(x)) throw InputError("evaluate: point outside the search box");
  Evaluation e;
  e.constraints.resize(problem_.constraints.size());
  const bool all = task.kind == TaskId::Kind::joint;
  if (all || task.kind == TaskId::Kind::objective) {
    e.objective_evaluated = true;
    try {
      e.objective = problem_.objective(x);
    } catch (const std::exception& err) {
      if (!problem_.objective_may_fail) throw EvaluationError(std::string("objective evaluator failed: ") + err.what(), iteration_);
      e.objective.reset();
    }
    if (!e.objective && !problem_.objective_may_fail)
      throw EvaluationError("objective evaluator returned no value", iteration_);
    if (e.objective && !std::isfinite(*e.objective)) {
      if (!problem_.objective_may_fail) throw EvaluationError("objective evaluator returned a non-finite value", iteration_);
      e.objective.reset();
    }
  }
  for (size_t k = 0; k < problem_.constraints.size(); ++k) {
    const auto& c = problem_.constraints[k];
    if (c.spec.kind == ConstraintKind::boolean_oracle) continue;
    if (!(all || (task.kind == TaskId::Kind::constraint && task.index == k))) continue;
    try {
      e.constraints[k] = c.evaluate(x);
    } catch (const std::exception& err) {
      if (c.spec.kind != ConstraintKind::binomial)
        throw EvaluationError("constraint '" + c.spec.id + "' evaluator failed: " + err.what(), iteration_);
      e.constraints[k] = BinomialCount{0, 1};
    }
  }
  return e;
}

void Optimizer::record_objective(const Eigen::VectorXd& unit, const std::optional<double>& value, Rng& rng) {
  if (value) {
    mutable_objective().add(unit, *value);
    stale_[0] = true;
  }
  if (problem_.objective_may_fail) {
    const size_t k = constraints_.size() - 1;
    mutable_constraint(k).add_observation(unit, BinomialCount{value ? 1 : 0, 1}, rng, settings_.mcmc.absorb_sweeps);
    stale_[k + 1] = true;
  }
}

void Optimizer::tell(const TaskId& task, const Eigen::VectorXd& x, const Evaluation& evaluation) {
  if (!problem_.bounds.contains(x)) throw InputError("tell: point outside the search box");
  const Eigen::VectorXd unit = problem_.bounds.to_unit(x);
  Rng rng = root_.child({kStreamAbsorb, static_cast<std::uint64_t>(tells_)});
  ++tells_;
  if (evaluation.objective_evaluated) record_objective(unit, evaluation.objective, rng);
  for (size_t k = 0; k < evaluation.constraints.size() && k < problem_.constraints.size(); ++k) {
    if (!evaluation.constraints[k]) continue;
    if (problem_.constraints[k].spec.kind == ConstraintKind::boolean_oracle) continue;
    mutable_constraint(k).add_observation(unit, *evaluation.constraints[k], rng, settings_.mcmc.absorb_sweeps);
    stale_[k + 1] = true;
  }
  total_cost_ += task_cost(task);
}

void Optimizer::refresh_models() {
  const auto round = static_cast<std::uint64_t>(tells_);
  if (stale_[0]) {
    mutable_objective().refresh(settings_.mcmc, root_.child({kStreamMcmc, round, 0}));
    stale_[0] = false;
  }
  for (size_t k = 0; k < constraints_.size(); ++k) {
    if (!stale_[k + 1]) continue;
    mutable_constraint(k).refresh(settings_.mcmc, root_.child({kStreamMcmc, round, k + 1}));
    stale_[k + 1] = false;
  }
}

void Optimizer::initialize(int n_init) {
  if (n_init < 1) throw InputError("initialize: n_init must be at least 1");
  if (initialized_) throw StateError("initialize: optimizer already initialized");
  Rng design_rng = root_.child({kStreamDesign});
  const Eigen::MatrixXd design = halton_points(n_init, problem_.bounds.dim(), design_rng);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const Eigen::VectorXd x = problem_.bounds.from_unit(design.row(i).transpose());
    const Evaluation e = evaluate(TaskId::joint(), x);
    tell(TaskId::joint(), x, e);
    TraceRecord r;
    r.iter = -static_cast<long>(design.rows() - i);
    r.task = TaskId::joint();
    r.task_label = "joint";
    r.x = x;
    r.observation = e;
    initial_design_.push_back(std::move(r));
  }
  refresh_models();
  initialized_ = true;
}

AcquisitionSnapshot Optimizer::snapshot() const {
  return make_snapshot(objective_, constraint_list(), pool());
}

Suggestion Optimizer::ask() {
  if (!initialized_) throw StateError("ask: optimizer not initialized");
  refresh_models();
  const AcquisitionSnapshot snap = snapshot();
  const auto round = static_cast<std::uint64_t>(tells_);
  Rng rng = root_.child({kStreamMaximize, round});
  const Candidate cand = maximize_acquisition(snap, rng, settings_.maximizer);
  Suggestion s;
  s.x = problem_.bounds.from_unit(cand.x);
  s.feasibility_mode = cand.feasibility_mode;
  s.acq_value = cand.acq_value;
  if (problem_.mode == Mode::coupled) {
    s.task = TaskId::joint();
    return s;
  }
  const auto tasks = selectable_tasks();
  if (tasks.size() == 1) {
    s.task = tasks.front().task;
    return s;
  }
  Rng select_rng = root_.child({kStreamSelect, round});
  s.decision = select_task(snap, cand.x, tasks, settings_.selection, select_rng);
  s.task = s.decision->task;
  return s;
}

const TraceRecord& Optimizer::step() {
  const auto start = std::chrono::steady_clock::now();
  const long iter = iteration_ + 1;
  Suggestion s = ask();
  Evaluation e;
  try {
    e = evaluate(s.task, s.x);
  } catch (const EvaluationError& err) {
    std::ostringstream msg;
    msg << "iteration " << iter << ": " << err.what();
    throw EvaluationError(msg.str(), iter);
  }
  tell(s.task, s.x, e);
  iteration_ = iter;
  TraceRecord r;
  r.iter = iter;
  r.task = s.task;
  r.task_label = task_label(s.task, constraint_list());
  r.x = s.x;
  r.observation = e;
  r.incumbent = recommend();
  r.feasibility_mode = s.feasibility_mode;
  r.acq_value = s.acq_value;
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  trace_.iterations.push_back(std::move(r));
  return trace_.iterations.back();
}

Recommendation Optimizer::recommend() const {
  if (!initialized_) throw StateError("recommend: optimizer not initialized");
  const ConstraintList cons = constraint_list();
  const Eigen::MatrixXd candidates = pool();
  const auto ok = all_constraints_satisfied(cons, candidates);
  Eigen::Index arg = -1;
  if (std::any_of(ok.begin(), ok.end(), [](bool b) { return b; })) {
    const Eigen::VectorXd mean = ensemble_mean(*objective_, candidates);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < candidates.rows(); ++i)
      if (ok[i] && mean(i) < best) {
        best = mean(i);
        arg = i;
      }
  } else {
    constraint_probability_product(cons, candidates).maxCoeff(&arg);
  }
  Recommendation r;
  const Eigen::VectorXd u = candidates.row(arg).transpose();
  r.x = problem_.bounds.from_unit(u);
  r.expected_objective = ensemble_mean(*objective_, u.transpose())(0);
  r.feasible = true;
  for (const auto& c : cons) {
    const double p = constraint_satisfaction_probability(*c, u);
    r.constraint_probabilities.push_back(p);
    r.feasible = r.feasible && meets_confidence(p, c->spec().delta);
  }
  return r;
}

}  // namespace cbo
