#include "cbo/constraints.hpp"

#include <cmath>
#include <sstream>

#include "cbo/errors.hpp"
#include "cbo/normal.hpp"

namespace cbo {

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::gaussian_latent:
      return "gaussian-latent";
    case ConstraintKind::binomial:
      return "binomial";
    case ConstraintKind::boolean_oracle:
      return "boolean-oracle";
  }
  return "unknown";
}

double latent_transform(double raw, const LatentTransform& t) {
  if (!std::isfinite(raw)) throw InputError("latent_transform: raw value must be finite");
  switch (t.kind) {
    case LatentTransform::Kind::identity:
      return raw;
    case LatentTransform::Kind::log_time:
      if (!(raw > 0.0)) throw InputError("latent_transform: log-time transform needs a positive time");
      if (!(t.parameter > 0.0)) throw InputError("latent_transform: time limit must be positive");
      return std::log(t.parameter) - std::log(raw);
    case LatentTransform::Kind::upper_bound:
      return t.parameter - raw;
    case LatentTransform::Kind::lower_bound:
      return raw - t.parameter;
  }
  throw InputError("latent_transform: unknown transform");
}

void ConstraintSpec::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) {
    std::ostringstream msg;
    msg << "constraint '" << id << "': delta must lie in (0, 1), got " << delta;
    throw InputError(msg.str());
  }
  if (!(cost > 0.0) || !std::isfinite(cost)) {
    std::ostringstream msg;
    msg << "constraint '" << id << "': cost must be positive, got " << cost;
    throw InputError(msg.str());
  }
  if (kind == ConstraintKind::binomial && !(min_success_rate > 0.0 && min_success_rate < 1.0))
    throw InputError("constraint '" + id + "': min_success_rate must lie in (0, 1)");
  if (transform.kind == LatentTransform::Kind::log_time && !(transform.parameter > 0.0))
    throw InputError("constraint '" + id + "': log-time limit must be positive");
}

double probability_nonnegative(double mean, double variance) {
  if (variance < 1e-24) return mean >= 0.0 ? 1.0 : 0.0;
  return normal_cdf(mean / std::sqrt(variance));
}

ConstraintModel::ConstraintModel(ConstraintSpec spec, Eigen::Index dim) : spec_(std::move(spec)), dim_(dim) {
  spec_.validate();
  if (dim < 1) throw InputError("ConstraintModel: dimension must be at least 1");
}

ConstraintModel ConstraintModel::gaussian_latent(ConstraintSpec spec, Eigen::Index dim, int ensemble,
                                                 HyperPrior prior) {
  spec.kind = ConstraintKind::gaussian_latent;
  ConstraintModel m(std::move(spec), dim);
  m.impl_.emplace<GaussianModel>(dim, std::move(prior), ensemble, true);
  return m;
}

ConstraintModel ConstraintModel::gaussian_latent(ConstraintSpec spec, Eigen::Index dim, int ensemble) {
  return gaussian_latent(std::move(spec), dim, ensemble, HyperPrior::defaults(dim, true));
}

ConstraintModel ConstraintModel::binomial(ConstraintSpec spec, Eigen::Index dim, int ensemble, HyperPrior prior) {
  spec.kind = ConstraintKind::binomial;
  ConstraintModel m(std::move(spec), dim);
  m.impl_.emplace<LatentModel>(dim, std::move(prior), ensemble);
  return m;
}

ConstraintModel ConstraintModel::binomial(ConstraintSpec spec, Eigen::Index dim, int ensemble) {
  return binomial(std::move(spec), dim, ensemble, HyperPrior::defaults(dim, false));
}

ConstraintModel ConstraintModel::boolean_oracle(ConstraintSpec spec, Eigen::Index dim, Oracle oracle) {
  if (!oracle) throw InputError("ConstraintModel: boolean-oracle constraint needs an oracle");
  spec.kind = ConstraintKind::boolean_oracle;
  ConstraintModel m(std::move(spec), dim);
  m.impl_ = std::move(oracle);
  m.fitted_ = true;
  return m;
}

void ConstraintModel::set_cost(double cost) {
  ConstraintSpec s = spec_;
  s.cost = cost;
  s.validate();
  spec_ = s;
}

void ConstraintModel::set_delta(double delta) {
  ConstraintSpec s = spec_;
  s.delta = delta;
  s.validate();
  spec_ = s;
}

void ConstraintModel::add_observation(const Eigen::VectorXd& x, const ConstraintPayload& payload, Rng& rng,
                                      int absorb_sweeps) {
  if (x.size() != dim_) throw InputError("constraint '" + spec_.id + "': point dimension mismatch");
  switch (kind()) {
    case ConstraintKind::gaussian_latent: {
      const double* raw = std::get_if<double>(&payload);
      if (!raw) throw InputError("constraint '" + spec_.id + "': gaussian-latent observations are real values");
      std::get<GaussianModel>(impl_).add(x, latent_transform(*raw, spec_.transform));
      break;
    }
    case ConstraintKind::binomial: {
      BinomialCount count;
      if (const bool* b = std::get_if<bool>(&payload)) {
        count = {*b ? 1 : 0, 1};
      } else if (const BinomialCount* c = std::get_if<BinomialCount>(&payload)) {
        count = *c;
      } else {
        throw InputError("constraint '" + spec_.id + "': binomial observations are counts or booleans");
      }
      std::get<LatentModel>(impl_).add(x, count.successes, count.trials, rng, absorb_sweeps);
      break;
    }
    case ConstraintKind::boolean_oracle:
      if (!std::holds_alternative<bool>(payload))
        throw InputError("constraint '" + spec_.id + "': boolean-oracle observations are booleans");
      break;
  }
  observations_.push_back({x, payload});
}

void ConstraintModel::refresh(const McmcSettings& settings, const Rng& base) {
  if (auto* g = std::get_if<GaussianModel>(&impl_)) g->refresh(settings, base);
  if (auto* l = std::get_if<LatentModel>(&impl_)) l->refresh(settings, base);
  fitted_ = true;
}

size_t ConstraintModel::members() const {
  if (auto* g = std::get_if<GaussianModel>(&impl_)) return g->members();
  if (auto* l = std::get_if<LatentModel>(&impl_)) return l->members();
  return 1;
}

double ConstraintModel::latent_offset() const {
  return kind() == ConstraintKind::binomial ? normal_quantile(spec_.min_success_rate) : 0.0;
}

int ConstraintModel::fantasy_trials() const {
  if (kind() != ConstraintKind::binomial) return 0;
  const auto& t = latent().trials();
  return t.empty() ? 1 : t.back();
}

void ConstraintModel::latent_batch(size_t member, const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                                   Eigen::VectorXd& variance) const {
  if (auto* g = std::get_if<GaussianModel>(&impl_)) {
    g->predict_batch(member, points, mean, variance);
  } else if (auto* l = std::get_if<LatentModel>(&impl_)) {
    l->predict_batch(member, points, mean, variance);
    mean.array() -= latent_offset();
  } else {
    throw StateError("constraint '" + spec_.id + "': boolean-oracle constraints have no latent model");
  }
}

JointPredictive ConstraintModel::latent_joint(size_t member, const Eigen::MatrixXd& points) const {
  if (auto* g = std::get_if<GaussianModel>(&impl_)) return g->joint(member, points);
  if (auto* l = std::get_if<LatentModel>(&impl_)) {
    JointPredictive j = l->joint(member, points);
    j.mean.array() -= latent_offset();
    return j;
  }
  throw StateError("constraint '" + spec_.id + "': boolean-oracle constraints have no latent model");
}

std::vector<bool> ConstraintModel::oracle_values(const Eigen::MatrixXd& points) const {
  const Oracle* oracle = std::get_if<Oracle>(&impl_);
  if (!oracle) throw StateError("constraint '" + spec_.id + "' is not a boolean oracle");
  std::vector<bool> out(static_cast<size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = (*oracle)(points.row(i).transpose());
  return out;
}

Eigen::VectorXd ConstraintModel::probability_batch(const Eigen::MatrixXd& points) const {
  if (!fitted_) throw StateError("constraint '" + spec_.id + "': model has not been fitted");
  if (points.cols() != dim_) throw InputError("constraint '" + spec_.id + "': point dimension mismatch");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(points.rows());
  if (kind() == ConstraintKind::boolean_oracle) {
    const auto v = oracle_values(points);
    for (Eigen::Index i = 0; i < points.rows(); ++i) p(i) = v[i] ? 1.0 : 0.0;
    return p;
  }
  Eigen::VectorXd mean, var;
  const size_t m = members();
  for (size_t k = 0; k < m; ++k) {
    latent_batch(k, points, mean, var);
    for (Eigen::Index i = 0; i < points.rows(); ++i) p(i) += probability_nonnegative(mean(i), var(i));
  }
  p /= static_cast<double>(m);
  return p.cwiseMax(0.0).cwiseMin(1.0);
}

double constraint_satisfaction_probability(const ConstraintModel& model, const Eigen::VectorXd& x) {
  return model.probability_batch(x.transpose())(0);
}

bool probabilistic_constraint_satisfied(const ConstraintModel& model, const Eigen::VectorXd& x) {
  return meets_confidence(constraint_satisfaction_probability(model, x), model.spec().delta);
}

std::vector<bool> probabilistic_constraint_satisfied(const ConstraintModel& model, const Eigen::MatrixXd& points) {
  const Eigen::VectorXd p = model.probability_batch(points);
  std::vector<bool> out(static_cast<size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = meets_confidence(p(i), model.spec().delta);
  return out;
}

}  // namespace cbo
