#include "doctest.h"

#include <stdexcept>

#include "cbo/benchmarks.hpp"
#include "cbo/errors.hpp"
#include "cbo/loop.hpp"

using namespace cbo;

namespace {

OptimizerSettings fast_settings() {
  OptimizerSettings s;
  s.mcmc.ensemble = 3;
  s.mcmc.burnin = 4;
  s.mcmc.initial_burnin = 10;
  s.maximizer.scan_points = 256;
  s.maximizer.starts = 3;
  s.maximizer.refine_steps = 30;
  s.selection.discretization = 15;
  s.selection.samples = 150;
  s.selection.fantasies = 4;
  s.selection.scan_points = 256;
  s.pool_points = 256;
  return s;
}

Box box1(double lo = 0.0, double hi = 1.0) {
  Box b;
  b.lower = Eigen::VectorXd::Constant(1, lo);
  b.upper = Eigen::VectorXd::Constant(1, hi);
  return b;
}

Problem quadratic_problem() {
  Problem p;
  p.bounds = box1();
  p.objective = [](const Eigen::VectorXd& x) -> std::optional<double> { return (x(0) - 0.3) * (x(0) - 0.3); };
  return p;
}

ConstraintTask oracle_task(bool value) {
  ConstraintTask t;
  t.spec.id = "oracle";
  t.spec.kind = ConstraintKind::boolean_oracle;
  t.evaluate = [value](const Eigen::VectorXd&) -> ConstraintPayload { return value; };
  return t;
}

size_t objective_observations(const Optimizer& o) { return static_cast<size_t>(o.objective_model().size()); }

}  // namespace

TEST_SUITE("loop") {
  TEST_CASE("box and problem validation") {
    Box b = box1(1.0, 1.0);
    CHECK_THROWS_AS(b.validate(), InputError);
    Problem p = quadratic_problem();
    CHECK_NOTHROW(p.validate());
    p.bounds.upper(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(p.validate(), InputError);
    p = quadratic_problem();
    ConstraintTask reserved = oracle_task(true);
    reserved.spec.id = "objective_valid";
    p.constraints.push_back(reserved);
    CHECK_THROWS_AS(p.validate(), InputError);
    p = quadratic_problem();
    p.objective_cost = 0.0;
    CHECK_THROWS_AS(p.validate(), InputError);
  }

  TEST_CASE("box maps to and from the unit cube") {
    Box b;
    b.lower = Eigen::Vector2d(-5.0, 0.0);
    b.upper = Eigen::Vector2d(10.0, 15.0);
    const Eigen::Vector2d x(2.5, 7.5);
    CHECK(b.to_unit(x).isApprox(Eigen::Vector2d(0.5, 0.5)));
    CHECK(b.from_unit(b.to_unit(x)).isApprox(x));
    CHECK(b.contains(x));
    CHECK_FALSE(b.contains(Eigen::Vector2d(11.0, 0.0)));
  }

  TEST_CASE("initialization counts observations per task") {
    BenchmarkProblem bp = synthetic_decoupled();
    Optimizer o(bp.problem, fast_settings(), 1);
    o.initialize(3);
    CHECK(objective_observations(o) == 3);
    CHECK(o.constraint_count() == bp.problem.constraints.size());
    for (size_t k = 0; k < o.constraint_count(); ++k) CHECK(o.constraint_model(k).observations().size() == 3);
    CHECK(o.initial_design().size() == 3);
    CHECK_THROWS_AS(o.initialize(3), StateError);
    Optimizer fresh(bp.problem, fast_settings(), 1);
    CHECK_THROWS_AS(fresh.initialize(0), InputError);
    CHECK_THROWS_AS(fresh.ask(), StateError);
  }

  TEST_CASE("initial design is deterministic and inside the Branin box") {
    const BenchmarkProblem bp = branin_disk();
    Optimizer a(bp.problem, fast_settings(), 9), b(bp.problem, fast_settings(), 9);
    a.initialize(5);
    b.initialize(5);
    for (size_t i = 0; i < 5; ++i) {
      const Eigen::VectorXd& x = a.initial_design()[i].x;
      CHECK(x == b.initial_design()[i].x);
      CHECK(x(0) >= -5.0);
      CHECK(x(0) <= 10.0);
      CHECK(x(1) >= 0.0);
      CHECK(x(1) <= 15.0);
    }
  }

  TEST_CASE("coupled steps maximize constrained EI when a target exists") {
    BenchmarkProblem bp = toy_1d(Mode::coupled);
    Optimizer o(bp.problem, fast_settings(), 2);
    o.initialize(6);
    int with_target = 0;
    for (int i = 0; i < 3; ++i) {
      const Suggestion s = o.ask();
      CHECK(s.task == TaskId::joint());
      const AcquisitionSnapshot fresh = o.snapshot();
      const Eigen::VectorXd u = bp.problem.bounds.to_unit(s.x);
      if (fresh.target) {
        ++with_target;
        CHECK_FALSE(s.feasibility_mode);
        CHECK(s.acq_value == doctest::Approx(constrained_ei(fresh, u)).epsilon(1e-12));
      } else {
        CHECK(s.feasibility_mode);
        CHECK(s.acq_value == doctest::Approx(feasibility_acquisition(fresh.constraints, u)).epsilon(1e-12));
      }
      o.tell(s.task, s.x, o.evaluate(s.task, s.x));
    }
    CHECK(with_target > 0);
  }

  TEST_CASE("asking twice without new data repeats the suggestion") {
    BenchmarkProblem bp = synthetic_decoupled();
    Optimizer o(bp.problem, fast_settings(), 15);
    o.initialize(4);
    const Suggestion first = o.ask();
    const TraceRecord& r = o.step();
    CHECK(r.x == first.x);
    CHECK(r.task == first.task);
    CHECK(r.acq_value == first.acq_value);
  }

  TEST_CASE("without a target the step maximizes the constraint probability product") {
    BenchmarkProblem bp = needle_feasibility(Mode::coupled);
    Optimizer o(bp.problem, fast_settings(), 3);
    o.initialize(5);
    const AcquisitionSnapshot snap = o.snapshot();
    REQUIRE(snap.feasibility_mode());
    const Suggestion s = o.ask();
    CHECK(s.feasibility_mode);
    const Eigen::VectorXd u = bp.problem.bounds.to_unit(s.x);
    CHECK(s.acq_value == doctest::Approx(feasibility_acquisition(o.snapshot().constraints, u)).epsilon(1e-12));
    const Eigen::MatrixXd probe = Eigen::MatrixXd::Random(300, 2).array() * 0.5 + 0.5;
    CHECK(s.acq_value >= constraint_probability_product(snap.constraints, probe).maxCoeff() - 1e-9);
  }

  TEST_CASE("decoupled steps evaluate exactly one task") {
    BenchmarkProblem bp = synthetic_decoupled();
    Optimizer o(bp.problem, fast_settings(), 4);
    o.initialize(5);
    for (int i = 0; i < 4; ++i) {
      const size_t before_obj = objective_observations(o);
      const size_t before_con = o.constraint_model(0).observations().size();
      const TraceRecord& r = o.step();
      int evaluated = r.observation.objective_evaluated ? 1 : 0;
      for (const auto& c : r.observation.constraints) evaluated += c.has_value() ? 1 : 0;
      CHECK(evaluated == 1);
      CHECK(objective_observations(o) + o.constraint_model(0).observations().size() == before_obj + before_con + 1);
      CHECK(r.task_label == (r.task == TaskId::objective() ? "objective" : bp.problem.constraints[0].spec.id));
    }
    CHECK(o.trace().iterations.size() == 4);
  }

  TEST_CASE("select_task receives the acquisition maximizer") {
    BenchmarkProblem bp = synthetic_decoupled();
    Optimizer o(bp.problem, fast_settings(), 5);
    o.initialize(5);
    const Suggestion s = o.ask();
    REQUIRE(s.decision.has_value());
    CHECK(bp.problem.bounds.from_unit(s.decision->x).isApprox(s.x));
    CHECK(s.decision->task == s.task);
  }

  TEST_CASE("cheap uninformed constraints are usually chosen") {
    int constraint_picks = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      BenchmarkProblem bp = synthetic_decoupled(10.0, 0.1);
      Optimizer o(bp.problem, fast_settings(), seed);
      o.initialize(2);
      if (o.ask().task.kind == TaskId::Kind::constraint) ++constraint_picks;
    }
    CHECK(constraint_picks > 10);
  }

  TEST_CASE("unconstrained recommendation is no worse than the best observation") {
    Problem p = quadratic_problem();
    Optimizer o(p, fast_settings(), 6);
    o.initialize(4);
    for (int i = 0; i < 3; ++i) o.step();
    double best = 1e300;
    const auto& values = o.objective_model().values();
    best = values.minCoeff();
    const Recommendation r = o.recommend();
    CHECK(r.feasible);
    CHECK(r.constraint_probabilities.empty());
    CHECK(r.expected_objective <= best + 1e-6);
  }

  TEST_CASE("infeasible everywhere is flagged") {
    Problem p = quadratic_problem();
    p.constraints.push_back(oracle_task(false));
    Optimizer o(p, fast_settings(), 7);
    o.initialize(3);
    const Recommendation r = o.recommend();
    CHECK_FALSE(r.feasible);
    CHECK(r.constraint_probabilities[0] == 0.0);
  }

  TEST_CASE("feasible recommendations satisfy the current models") {
    BenchmarkProblem bp = toy_1d(Mode::coupled);
    Optimizer o(bp.problem, fast_settings(), 8);
    o.initialize(6);
    for (int i = 0; i < 4; ++i) {
      const TraceRecord& r = o.step();
      const Eigen::VectorXd u = bp.problem.bounds.to_unit(r.incumbent.x);
      for (size_t k = 0; k < o.constraint_count(); ++k) {
        const double p = constraint_satisfaction_probability(o.constraint_model(k), u);
        CHECK(p == doctest::Approx(r.incumbent.constraint_probabilities[k]));
        if (r.incumbent.feasible) CHECK(meets_confidence(p, o.constraint_model(k).spec().delta));
      }
    }
  }

  TEST_CASE("failed objective evaluations feed the validity constraint only") {
    Problem p = quadratic_problem();
    p.objective_may_fail = true;
    p.objective = [](const Eigen::VectorXd& x) -> std::optional<double> {
      if (x(0) > 0.6) return std::nullopt;
      if (x(0) > 0.45) throw std::runtime_error("diverged");
      return x(0);
    };
    Optimizer o(p, fast_settings(), 9);
    o.initialize(8);
    REQUIRE(o.constraint_count() == 1);
    const ConstraintModel& valid = o.constraint_model(0);
    CHECK(valid.spec().id == "objective_valid");
    CHECK(valid.observations().size() == 8);
    size_t successes = 0;
    for (const auto& obs : valid.observations()) successes += std::get<BinomialCount>(obs.payload).successes;
    CHECK(objective_observations(o) == successes);
    CHECK(successes < 8);
  }

  TEST_CASE("evaluator errors carry the iteration") {
    Problem p = quadratic_problem();
    int calls = 0;
    p.objective = [&calls](const Eigen::VectorXd& x) -> std::optional<double> {
      if (++calls > 3) throw std::runtime_error("boom");
      return x(0);
    };
    Optimizer o(p, fast_settings(), 10);
    o.initialize(3);
    try {
      o.step();
      FAIL("expected an evaluation error");
    } catch (const EvaluationError& e) {
      CHECK(e.iteration() == 1);
      CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    }
  }

  TEST_CASE("binomial evaluator failures count as failed trials") {
    Problem p = quadratic_problem();
    ConstraintTask t;
    t.spec.id = "flaky";
    t.spec.kind = ConstraintKind::binomial;
    t.evaluate = [](const Eigen::VectorXd& x) -> ConstraintPayload {
      if (x(0) > 0.5) throw std::runtime_error("crashed");
      return BinomialCount{3, 3};
    };
    p.constraints.push_back(t);
    Optimizer o(p, fast_settings(), 11);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.8);
    const Evaluation e = o.evaluate(TaskId::constraint(0), x);
    REQUIRE(e.constraints[0].has_value());
    const auto c = std::get<BinomialCount>(*e.constraints[0]);
    CHECK(c.successes == 0);
    CHECK(c.trials == 1);
    CHECK_FALSE(e.objective_evaluated);
  }

  TEST_CASE("replaying a seed reproduces every decision") {
    BenchmarkProblem bp = synthetic_decoupled();
    Optimizer a(bp.problem, fast_settings(), 12), b(bp.problem, fast_settings(), 12);
    a.initialize(4);
    b.initialize(4);
    for (int i = 0; i < 3; ++i) {
      const TraceRecord& ra = a.step();
      const TraceRecord& rb = b.step();
      CHECK(ra.task == rb.task);
      CHECK(ra.x == rb.x);
      CHECK(ra.acq_value == rb.acq_value);
      CHECK(ra.incumbent.x == rb.incumbent.x);
    }
    const auto& it = a.trace().iterations;
    for (size_t i = 1; i < it.size(); ++i) CHECK(it[i].iter > it[i - 1].iter);
  }

  TEST_CASE("costs are accumulated per task") {
    BenchmarkProblem bp = synthetic_decoupled(2.0, 0.5);
    Optimizer o(bp.problem, fast_settings(), 13);
    o.initialize(2);
    CHECK(o.total_cost() == doctest::Approx(2 * 2.5));
    const TraceRecord& r = o.step();
    CHECK(o.total_cost() == doctest::Approx(5.0 + (r.task == TaskId::objective() ? 2.0 : 0.5)));
  }

  TEST_CASE("tell rejects points outside the box") {
    Optimizer o(quadratic_problem(), fast_settings(), 14);
    Evaluation e;
    e.objective_evaluated = true;
    e.objective = 1.0;
    CHECK_THROWS_AS(o.tell(TaskId::objective(), Eigen::VectorXd::Constant(1, 2.0), e), InputError);
  }
}
