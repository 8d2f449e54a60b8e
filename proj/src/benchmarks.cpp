#include "cbo/benchmarks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "cbo/errors.hpp"
#include "cbo/normal.hpp"
#include "cbo/random.hpp"

namespace cbo {
namespace {

Box make_box(std::initializer_list<std::pair<double, double>> ranges) {
  Box b;
  b.lower.resize(static_cast<Eigen::Index>(ranges.size()));
  b.upper.resize(static_cast<Eigen::Index>(ranges.size()));
  Eigen::Index i = 0;
  for (auto [lo, hi] : ranges) {
    b.lower(i) = lo;
    b.upper(i) = hi;
    ++i;
  }
  return b;
}

std::uint64_t point_hash(const Eigen::VectorXd& x, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (Eigen::Index i = 0; i < x.size(); ++i) h = mix_seed(h, {std::bit_cast<std::uint64_t>(x(i))});
  return h;
}

}  // namespace

double branin_hoo(const Eigen::VectorXd& x) {
  if (x.size() != 2) throw InputError("branin_hoo: expects a 2D point");
  if (x(0) < -5.0 || x(0) > 10.0 || x(1) < 0.0 || x(1) > 15.0)
    throw InputError("branin_hoo: point outside [-5, 10] x [0, 15]");
  constexpr double pi = std::numbers::pi;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double t = 1.0 / (8.0 * pi);
  const double u = x(1) - b * x(0) * x(0) + c * x(0) - 6.0;
  return u * u + 10.0 * (1.0 - t) * std::cos(x(0)) + 10.0;
}

bool disk_constraint(const Eigen::VectorXd& x) {
  if (x.size() != 2) throw InputError("disk_constraint: expects a 2D point");
  const double a = x(0) - 2.5;
  const double b = x(1) - 7.5;
  return a * a + b * b <= 50.0;
}

BenchmarkProblem branin_disk(Mode mode) {
  BenchmarkProblem bp;
  bp.name = "branin-disk";
  bp.problem.bounds = make_box({{-5.0, 10.0}, {0.0, 15.0}});
  bp.problem.objective = [](const Eigen::VectorXd& x) -> std::optional<double> { return branin_hoo(x); };
  ConstraintTask disk;
  disk.spec.id = "disk";
  disk.spec.kind = ConstraintKind::binomial;
  disk.spec.delta = 0.01;
  disk.evaluate = [](const Eigen::VectorXd& x) -> ConstraintPayload { return disk_constraint(x); };
  // The booleans are noise-free, so the latent prior favours a large
  // amplitude and the probit link behaves close to a step.
  disk.prior = HyperPrior::defaults(2, false);
  disk.prior->log_amplitude = {std::log(4.0), 0.5};
  bp.problem.constraints.push_back(disk);
  bp.problem.mode = mode;
  Eigen::VectorXd opt(2);
  opt << std::numbers::pi, 2.275;
  bp.true_optimum = TrueOptimum{opt, branin_hoo(opt)};
  bp.truly_feasible = disk_constraint;
  bp.true_objective = branin_hoo;
  return bp;
}

double synthetic_success_rate(double x) {
  const double d = x - 0.4;
  return normal_cdf(2.5 - 20.0 * d * d);
}

std::pair<double, double> synthetic_feasible_interval(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("synthetic_feasible_interval: epsilon must lie in (0, 1)");
  const double level = 1.0 - epsilon;
  if (synthetic_success_rate(0.4) < level) throw InputError("synthetic_feasible_interval: feasible set is empty");
  auto solve = [&](double feasible, double infeasible) {
    if (synthetic_success_rate(infeasible) >= level) return infeasible;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (feasible + infeasible);
      (synthetic_success_rate(mid) >= level ? feasible : infeasible) = mid;
    }
    return 0.5 * (feasible + infeasible);
  };
  return {solve(0.4, 0.0), solve(0.4, 1.0)};
}

BenchmarkProblem synthetic_binomial_problem(std::uint64_t seed, const SyntheticBinomialOptions& options) {
  if (options.trials < 1) throw InputError("synthetic_binomial_problem: trials must be at least 1");
  if (!(options.epsilon > 0.0 && options.epsilon < 1.0))
    throw InputError("synthetic_binomial_problem: epsilon must lie in (0, 1)");
  BenchmarkProblem bp;
  bp.name = "synthetic-binomial";
  bp.problem.bounds = make_box({{0.0, 1.0}});
  auto objective = [](const Eigen::VectorXd& x) { return (x(0) - 0.8) * (x(0) - 0.8); };
  bp.problem.objective = [objective](const Eigen::VectorXd& x) -> std::optional<double> { return objective(x); };
  const bool always = options.always_feasible;
  auto rho = [always](double x) { return always ? 1.0 : synthetic_success_rate(x); };
  ConstraintTask taste;
  taste.spec.id = "liked";
  taste.spec.kind = ConstraintKind::binomial;
  taste.spec.delta = 0.05;
  taste.spec.min_success_rate = 1.0 - options.epsilon;
  const int trials = options.trials;
  taste.evaluate = [rho, trials, seed](const Eigen::VectorXd& x) -> ConstraintPayload {
    Rng rng(point_hash(x, seed));
    const double p = rho(x(0));
    int successes = 0;
    for (int i = 0; i < trials; ++i) successes += rng.uniform() < p ? 1 : 0;
    return BinomialCount{successes, trials};
  };
  bp.problem.constraints.push_back(taste);
  bp.problem.mode = Mode::coupled;
  const double level = 1.0 - options.epsilon;
  bp.truly_feasible = [rho, level](const Eigen::VectorXd& x) { return rho(x(0)) >= level; };
  bp.true_objective = objective;
  Eigen::VectorXd opt(1);
  if (always) {
    opt << 0.8;
  } else {
    const auto [lo, hi] = synthetic_feasible_interval(options.epsilon);
    opt << std::clamp(0.8, lo, hi);
  }
  bp.true_optimum = TrueOptimum{opt, objective(opt)};
  return bp;
}

BenchmarkProblem toy_1d(Mode mode) {
  BenchmarkProblem bp;
  bp.name = "toy-1d";
  bp.problem.bounds = make_box({{0.0, 1.0}});
  auto objective = [](const Eigen::VectorXd& x) { return (x(0) - 0.25) * (x(0) - 0.25); };
  auto g = [](const Eigen::VectorXd& x) { return 0.09 - (x(0) - 0.7) * (x(0) - 0.7); };
  bp.problem.objective = [objective](const Eigen::VectorXd& x) -> std::optional<double> { return objective(x); };
  ConstraintTask c;
  c.spec.id = "g";
  c.spec.kind = ConstraintKind::gaussian_latent;
  c.spec.delta = 0.05;
  c.evaluate = [g](const Eigen::VectorXd& x) -> ConstraintPayload { return g(x); };
  bp.problem.constraints.push_back(c);
  bp.problem.mode = mode;
  Eigen::VectorXd opt(1);
  opt << 0.4;
  bp.true_optimum = TrueOptimum{opt, objective(opt)};
  bp.truly_feasible = [g](const Eigen::VectorXd& x) { return g(x) >= 0.0; };
  bp.true_objective = objective;
  return bp;
}

BenchmarkProblem synthetic_decoupled(double objective_cost, double constraint_cost) {
  BenchmarkProblem bp;
  bp.name = "synthetic-decoupled";
  bp.problem.bounds = make_box({{0.0, 1.0}, {0.0, 1.0}});
  auto objective = [](const Eigen::VectorXd& x) {
    return (x(0) - 0.2) * (x(0) - 0.2) + (x(1) - 0.7) * (x(1) - 0.7) + 0.1 * std::sin(6.0 * x(0));
  };
  auto g = [](const Eigen::VectorXd& x) {
    return 0.16 - (x(0) - 0.6) * (x(0) - 0.6) - (x(1) - 0.4) * (x(1) - 0.4);
  };
  bp.problem.objective = [objective](const Eigen::VectorXd& x) -> std::optional<double> { return objective(x); };
  ConstraintTask c;
  c.spec.id = "disk";
  c.spec.kind = ConstraintKind::gaussian_latent;
  c.spec.delta = 0.05;
  c.spec.cost = constraint_cost;
  c.evaluate = [g](const Eigen::VectorXd& x) -> ConstraintPayload { return g(x); };
  bp.problem.constraints.push_back(c);
  bp.problem.mode = Mode::decoupled;
  bp.problem.objective_cost = objective_cost;
  bp.truly_feasible = [g](const Eigen::VectorXd& x) { return g(x) >= 0.0; };
  bp.true_objective = objective;
  return bp;
}

BenchmarkProblem needle_feasibility(Mode mode) {
  BenchmarkProblem bp;
  bp.name = "needle-feasibility";
  bp.problem.bounds = make_box({{0.0, 1.0}, {0.0, 1.0}});
  auto objective = [](const Eigen::VectorXd& x) { return x(0) + x(1); };
  auto g = [](const Eigen::VectorXd& x) {
    const Eigen::Vector2d c(0.85, 0.15);
    return 1.0 - (x - c).norm() / 0.08;
  };
  bp.problem.objective = [objective](const Eigen::VectorXd& x) -> std::optional<double> { return objective(x); };
  ConstraintTask c;
  c.spec.id = "needle";
  c.spec.kind = ConstraintKind::gaussian_latent;
  c.spec.delta = 0.05;
  c.evaluate = [g](const Eigen::VectorXd& x) -> ConstraintPayload { return g(x); };
  bp.problem.constraints.push_back(c);
  bp.problem.mode = mode;
  bp.truly_feasible = [g](const Eigen::VectorXd& x) { return g(x) >= 0.0; };
  bp.true_objective = objective;
  return bp;
}

std::vector<std::string> benchmark_names() {
  return {"branin-disk", "synthetic-binomial", "toy-1d", "synthetic-decoupled", "needle-feasibility"};
}

BenchmarkProblem make_benchmark(const std::string& name, Mode mode, std::uint64_t seed) {
  BenchmarkProblem bp;
  if (name == "branin-disk") {
    bp = branin_disk(mode);
  } else if (name == "synthetic-binomial") {
    bp = synthetic_binomial_problem(seed);
  } else if (name == "toy-1d") {
    bp = toy_1d(mode);
  } else if (name == "synthetic-decoupled") {
    bp = synthetic_decoupled();
  } else if (name == "needle-feasibility") {
    bp = needle_feasibility(mode);
  } else {
    throw InputError("unknown benchmark '" + name + "'");
  }
  bp.problem.mode = mode;
  return bp;
}

}  // namespace cbo
