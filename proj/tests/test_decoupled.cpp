#include "doctest.h"

#include "cbo/decoupled.hpp"
#include "cbo/errors.hpp"
#include "oracles.hpp"

using namespace cbo;

namespace {

Eigen::VectorXd pt(double v) { return Eigen::VectorXd::Constant(1, v); }

HyperPrior pinned(double ls, double amp, std::optional<double> noise) {
  HyperPrior p = HyperPrior::defaults(1, noise.has_value());
  p.log_length_scales[0] = {std::log(ls), 1e-6};
  p.log_amplitude = {std::log(amp), 1e-6};
  if (noise) p.log_noise_std = LogNormalPrior{std::log(*noise), 1e-6};
  return p;
}

McmcSettings mcmc(int ensemble) {
  McmcSettings m;
  m.ensemble = ensemble;
  return m;
}

std::shared_ptr<GaussianModel> objective(const std::vector<std::pair<double, double>>& data, int ensemble = 2) {
  auto obj = std::make_shared<GaussianModel>(1, pinned(0.25, 1.0, 0.05), ensemble, true);
  for (auto [x, y] : data) obj->add(pt(x), y);
  obj->refresh(mcmc(ensemble), Rng(1));
  return obj;
}

ConstraintSpec spec(const std::string& id, ConstraintKind kind) {
  ConstraintSpec s;
  s.id = id;
  s.kind = kind;
  return s;
}

std::shared_ptr<ConstraintModel> gaussian_constraint(const std::vector<std::pair<double, double>>& data) {
  auto c = std::make_shared<ConstraintModel>(
      ConstraintModel::gaussian_latent(spec("g", ConstraintKind::gaussian_latent), 1, 2, pinned(0.25, 1.0, 0.05)));
  Rng rng(2);
  for (auto [x, y] : data) c->add_observation(pt(x), y, rng);
  c->refresh(mcmc(2), Rng(3));
  return c;
}

std::shared_ptr<ConstraintModel> oracle_constraint(bool (*f)(const Eigen::VectorXd&)) {
  return std::make_shared<ConstraintModel>(ConstraintModel::boolean_oracle(spec("o", ConstraintKind::boolean_oracle), 1, f));
}

const std::vector<std::pair<double, double>> kObjData{{0.1, 0.8}, {0.35, -0.2}, {0.6, 0.1}, {0.9, 0.9}};
const std::vector<std::pair<double, double>> kConData{{0.2, -0.4}, {0.5, 0.3}, {0.8, -0.1}};

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

SelectionSettings small_settings() {
  SelectionSettings s;
  s.discretization = 20;
  s.samples = 300;
  s.fantasies = 6;
  s.scan_points = 512;
  return s;
}

}  // namespace

TEST_SUITE("decoupled") {
  TEST_CASE("discretization size checks") {
    AcquisitionSnapshot snap{objective(kObjData), {}, 0.0, 1};
    Rng rng(1);
    CHECK_THROWS_AS(build_discretization(snap, 1, rng), InputError);
    CHECK_THROWS_AS(build_discretization(snap, 10, rng, 5), InputError);
  }

  TEST_CASE("constant acquisition gives distinct, reproducible points") {
    // Zero everywhere: the only constraint is never satisfied.
    AcquisitionSnapshot snap{objective(kObjData), {oracle_constraint([](const Eigen::VectorXd&) { return false; })},
                             std::nullopt, 1};
    Rng a(5), b(5);
    const Eigen::MatrixXd pa = build_discretization(snap, 30, a);
    const Eigen::MatrixXd pb = build_discretization(snap, 30, b);
    CHECK(pa == pb);
    for (int i = 0; i < 30; ++i)
      for (int j = i + 1; j < 30; ++j) CHECK(pa(i, 0) != pa(j, 0));
  }

  TEST_CASE("discretization contains the dense-grid argmax of a unimodal acquisition") {
    AcquisitionSnapshot snap{objective(kObjData), {}, -0.2, 1};
    Rng rng(6);
    const Eigen::MatrixXd p = build_discretization(snap, 10, rng);
    const Eigen::VectorXd score = acquisition_batch(snap, p);
    Eigen::Index best_p;
    score.maxCoeff(&best_p);
    Eigen::MatrixXd dense(100000, 1);
    for (int i = 0; i < 100000; ++i) dense(i, 0) = i / 99999.0;
    Eigen::Index best_d;
    acquisition_batch(snap, dense).maxCoeff(&best_d);
    CHECK(std::abs(p(best_p, 0) - dense(best_d, 0)) <= 2.0 / 4096.0);
  }

  TEST_CASE("single feasible point carries all the mass") {
    AcquisitionSnapshot snap{objective(kObjData), {}, 0.0, 1};
    Rng rng(7);
    const PminEstimate e = estimate_pmin(snap, column({0.4}), 200, rng);
    CHECK(e.mass(0) == 1.0);
    CHECK(e.infeasible_mass == 0.0);
    CHECK(entropy(e) == 0.0);
  }

  TEST_CASE("two-point mass matches the bivariate Gaussian tie probability") {
    auto obj = objective(kObjData);
    AcquisitionSnapshot snap{obj, {}, 0.0, 1};
    const Eigen::MatrixXd pts = column({0.3, 0.5});
    const JointPredictive j = obj->joint(0, pts);
    const double p = oracle::prob_less(j.mean(0), j.mean(1), j.covariance(0, 0), j.covariance(1, 1), j.covariance(0, 1));
    Rng rng(8);
    const int s = 20000;
    const PminEstimate e = estimate_pmin(snap, pts, s, rng);
    CHECK(std::abs(e.mass(0) - p) <= 3.0 * std::sqrt(p * (1.0 - p) / s));
    CHECK(e.mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("violated constraint sends all mass to the infeasible atom") {
    AcquisitionSnapshot snap{objective(kObjData), {oracle_constraint([](const Eigen::VectorXd&) { return false; })},
                             std::nullopt, 1};
    Rng rng(9);
    const PminEstimate e = estimate_pmin(snap, column({0.1, 0.5, 0.9}), 100, rng);
    CHECK(e.infeasible_mass == 1.0);
    CHECK(e.mass.sum() == 0.0);
  }

  TEST_CASE("mass is a distribution with the infeasible atom") {
    AcquisitionSnapshot snap{objective(kObjData), {gaussian_constraint(kConData)}, std::nullopt, 1};
    Rng rng(10);
    Eigen::MatrixXd pts(25, 1);
    for (int i = 0; i < 25; ++i) pts(i, 0) = i / 24.0;
    const PminEstimate e = estimate_pmin(snap, pts, 1000, rng);
    CHECK(e.mass.minCoeff() >= 0.0);
    CHECK(std::abs(e.mass.sum() + e.infeasible_mass - 1.0) <= 1e-9);
    CHECK(entropy(e) >= 0.0);
    CHECK(entropy(e) <= std::log(26.0) + 1e-12);
  }

  TEST_CASE("large-sample estimates agree") {
    AcquisitionSnapshot snap{objective(kObjData), {gaussian_constraint(kConData)}, std::nullopt, 1};
    Eigen::MatrixXd pts(10, 1);
    for (int i = 0; i < 10; ++i) pts(i, 0) = i / 9.0;
    Rng a(11), b(12);
    const PminEstimate ea = estimate_pmin(snap, pts, 10000, a);
    const PminEstimate eb = estimate_pmin(snap, pts, 10000, b);
    CHECK((ea.mass - eb.mass).cwiseAbs().maxCoeff() <= 0.05);
    CHECK(std::abs(ea.infeasible_mass - eb.infeasible_mass) <= 0.05);
  }

  TEST_CASE("entropy closed forms") {
    CHECK(entropy(Eigen::Vector4d::Constant(0.25), 0.0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(entropy(Eigen::Vector3d(0.0, 1.0, 0.0), 0.0) == 0.0);
    CHECK(entropy(Eigen::Vector3d(0.5, 0.25, 0.25), 0.0) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-9));
    CHECK(entropy(Eigen::Vector2d(0.25, 0.25), 0.5) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-9));
  }

  TEST_CASE("objective-only problems always pick the objective") {
    AcquisitionSnapshot snap{objective(kObjData), {}, -0.2, 1};
    Rng rng(13);
    const TaskDecision d = select_task(snap, pt(0.4), {{TaskId::objective(), 3.0}}, small_settings(), rng);
    CHECK(d.task == TaskId::objective());
    CHECK(d.x(0) == 0.4);
  }

  TEST_CASE("identical tasks favour the cheaper one") {
    auto c = gaussian_constraint(kConData);
    AcquisitionSnapshot snap{objective(kObjData), {c, c}, 0.0, 1};
    Rng rng(14);
    const TaskDecision d =
        select_task(snap, pt(0.45), {{TaskId::constraint(0), 10.0}, {TaskId::constraint(1), 1.0}}, small_settings(), rng);
    CHECK(d.task == TaskId::constraint(1));
  }

  TEST_CASE("equal scores break toward lower cost, then task order") {
    auto c = gaussian_constraint(kConData);
    AcquisitionSnapshot snap{objective(kObjData), {c, c}, std::nullopt, 1};
    Rng a(15), b(15);
    const TaskDecision same =
        select_task(snap, pt(0.45), {{TaskId::constraint(0), 1.0}, {TaskId::constraint(1), 1.0}}, small_settings(), a);
    CHECK(same.task == TaskId::constraint(0));
  }

  TEST_CASE("uniform cost scaling never changes the decision") {
    AcquisitionSnapshot snap{objective(kObjData), {gaussian_constraint(kConData)}, std::nullopt, 1};
    for (double factor : {0.01, 0.5, 7.0, 1000.0}) {
      Rng a(16), b(16);
      const TaskDecision base =
          select_task(snap, pt(0.55), {{TaskId::objective(), 1.0}, {TaskId::constraint(0), 2.0}}, small_settings(), a);
      const TaskDecision scaled = select_task(
          snap, pt(0.55), {{TaskId::objective(), factor}, {TaskId::constraint(0), 2.0 * factor}}, small_settings(), b);
      CHECK(base.task == scaled.task);
      CHECK(scaled.expected_entropy_reduction_per_cost ==
            doctest::Approx(base.expected_entropy_reduction_per_cost / factor).epsilon(1e-12));
    }
  }

  TEST_CASE("selection is deterministic under a seed") {
    AcquisitionSnapshot snap{objective(kObjData), {gaussian_constraint(kConData)}, std::nullopt, 1};
    Rng a(17), b(17);
    const std::vector<TaskCost> tasks{{TaskId::objective(), 1.0}, {TaskId::constraint(0), 1.0}};
    const TaskDecision da = select_task(snap, pt(0.3), tasks, small_settings(), a);
    const TaskDecision db = select_task(snap, pt(0.3), tasks, small_settings(), b);
    CHECK(da.task == db.task);
    CHECK(da.reductions == db.reductions);
  }

  TEST_CASE("selection rejects malformed requests") {
    AcquisitionSnapshot snap{objective(kObjData), {oracle_constraint([](const Eigen::VectorXd&) { return true; })},
                             0.0, 1};
    Rng rng(18);
    CHECK_THROWS_AS(select_task(snap, pt(1.5), {{TaskId::objective(), 1.0}}, small_settings(), rng), InputError);
    CHECK_THROWS_AS(select_task(snap, pt(0.5), {{TaskId::joint(), 1.0}}, small_settings(), rng), InputError);
    CHECK_THROWS_AS(select_task(snap, pt(0.5), {{TaskId::constraint(0), 1.0}}, small_settings(), rng), InputError);
    CHECK_THROWS_AS(select_task(snap, pt(0.5), {{TaskId::objective(), 0.0}}, small_settings(), rng), InputError);
    CHECK_THROWS_AS(select_task(snap, pt(0.5), {}, small_settings(), rng), InputError);
    SelectionSettings bad = small_settings();
    bad.fantasies = 0;
    CHECK_THROWS_AS(select_task(snap, pt(0.5), {{TaskId::objective(), 1.0}}, bad, rng), InputError);
  }
}
