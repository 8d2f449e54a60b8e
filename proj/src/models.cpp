#include "cbo/models.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "cbo/errors.hpp"

namespace cbo {
namespace {

Eigen::MatrixXd append_row(const Eigen::MatrixXd& m, const Eigen::VectorXd& x) {
  Eigen::MatrixXd out(m.rows() + 1, x.size());
  if (m.rows() > 0) out.topRows(m.rows()) = m;
  out.row(m.rows()) = x.transpose();
  return out;
}

void check_point(const Eigen::VectorXd& x, Eigen::Index dim) {
  if (x.size() != dim) throw InputError("model: point dimension mismatch");
  if (!x.allFinite()) throw InputError("model: point must be finite");
}

JointPredictive prior_joint(const Eigen::MatrixXd& points, const KernelHyperparameters& h) {
  return {Eigen::VectorXd::Zero(points.rows()), kernel_matrix(points, points, h)};
}

}  // namespace

void McmcSettings::validate() const {
  if (ensemble < 1 || burnin < 1 || initial_burnin < 1 || absorb_sweeps < 0)
    throw InputError("McmcSettings: ensemble and burn-in counts must be at least 1");
}

// GaussianModel

GaussianModel::GaussianModel(Eigen::Index dim, HyperPrior prior, int ensemble, bool standardize)
    : dim_(dim), prior_(std::move(prior)), standardize_(standardize), inputs_(0, dim) {
  prior_.validate();
  if (prior_.dim() != dim) throw InputError("GaussianModel: prior dimension mismatch");
  if (ensemble < 1) throw InputError("GaussianModel: ensemble must be at least 1");
  chains_.assign(static_cast<size_t>(ensemble), prior_.mean_hypers(0.0));
}

void GaussianModel::add(const Eigen::VectorXd& x, double y) {
  check_point(x, dim_);
  if (!std::isfinite(y)) throw InputError("GaussianModel: observation must be finite");
  inputs_ = append_row(inputs_, x);
  values_.conservativeResize(values_.size() + 1);
  values_(values_.size() - 1) = y;
  refit();
}

void GaussianModel::update_scaling() {
  offset_ = values_.size() > 0 ? values_.mean() : 0.0;
  scale_ = 1.0;
  if (standardize_ && values_.size() > 1) {
    const double sd = std::sqrt((values_.array() - offset_).square().sum() / double(values_.size() - 1));
    if (sd > 0.0 && std::isfinite(sd)) scale_ = sd;
  }
}

void GaussianModel::refit() {
  posteriors_.clear();
  if (inputs_.rows() == 0) return;
  update_scaling();
  const Eigen::VectorXd scaled = (values_.array() - offset_) / scale_;
  FitOptions opts;
  opts.center = false;
  posteriors_.reserve(chains_.size());
  for (const auto& h : chains_) posteriors_.push_back(GPPosterior::fit(inputs_, scaled, h, opts));
}

void GaussianModel::refresh(const McmcSettings& settings, const Rng& base) {
  settings.validate();
  const int ensemble = settings.ensemble;
  if (static_cast<int>(chains_.size()) != ensemble) chains_.resize(ensemble, prior_.mean_hypers(0.0));
  if (settings.sample_hypers) {
    const int steps = warm_ ? settings.burnin : settings.initial_burnin;
    // Standardization must match the one refit() applies.
    GaussianData data{inputs_, {}};
    if (inputs_.rows() > 0) {
      update_scaling();
      data.targets = (values_.array() - offset_) / scale_;
    }
    FitOptions opts;
    opts.center = false;
    for (size_t i = 0; i < chains_.size(); ++i) {
      Rng rng = base.child({i});
      const double fixed_noise = chains_[i].noise_std;
      auto target = [&](const Eigen::VectorXd& v) { return hyper_log_posterior(data, prior_, v, fixed_noise, opts); };
      Eigen::VectorXd state = prior_.pack(chains_[i]);
      for (int s = 0; s < steps; ++s) state = slice_sweep(target, std::move(state), rng);
      chains_[i] = prior_.unpack(state, fixed_noise);
    }
    if (inputs_.rows() > 0) warm_ = true;
  }
  refit();
}

PredictiveMarginal GaussianModel::predict(size_t member, const Eigen::VectorXd& x) const {
  Eigen::VectorXd mean, var;
  predict_batch(member, x.transpose(), mean, var);
  return {mean(0), var(0)};
}

void GaussianModel::predict_batch(size_t member, const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                                  Eigen::VectorXd& variance) const {
  const auto& h = chains_.at(member);
  if (posteriors_.empty()) {
    mean = Eigen::VectorXd::Constant(points.rows(), 0.0);
    variance = Eigen::VectorXd::Constant(points.rows(), h.amplitude * h.amplitude);
    return;
  }
  posteriors_[member].predict_batch(points, mean, variance);
  mean = mean.array() * scale_ + offset_;
  variance *= scale_ * scale_;
}

JointPredictive GaussianModel::joint(size_t member, const Eigen::MatrixXd& points) const {
  if (posteriors_.empty()) return prior_joint(points, chains_.at(member));
  JointPredictive j = posteriors_.at(member).joint(points);
  j.mean = j.mean.array() * scale_ + offset_;
  j.covariance *= scale_ * scale_;
  return j;
}

double GaussianModel::noise_variance(size_t member) const {
  const double s = chains_.at(member).noise_std * scale_;
  return s * s;
}

// LatentModel

LatentModel::LatentModel(Eigen::Index dim, HyperPrior prior, int ensemble)
    : dim_(dim), prior_(std::move(prior)), inputs_(0, dim) {
  prior_.validate();
  if (prior_.dim() != dim) throw InputError("LatentModel: prior dimension mismatch");
  if (prior_.log_noise_std) throw InputError("LatentModel: probit models have no noise hyperparameter");
  if (ensemble < 1) throw InputError("LatentModel: ensemble must be at least 1");
  chains_.assign(static_cast<size_t>(ensemble), LatentState{prior_.mean_hypers(0.0), Eigen::VectorXd()});
}

Likelihood LatentModel::likelihood() const { return Likelihood::binomial(successes_, trials_); }

void LatentModel::add(const Eigen::VectorXd& x, int successes, int trials, Rng& rng, int absorb_sweeps) {
  check_point(x, dim_);
  if (trials < 1 || successes < 0 || successes > trials)
    throw InputError("LatentModel: need 0 <= successes <= trials and trials >= 1");
  for (size_t i = 0; i < chains_.size(); ++i) {
    auto& c = chains_[i];
    double draw;
    if (inputs_.rows() == 0) {
      draw = c.hyper.amplitude * rng.normal();
    } else {
      const PredictiveMarginal pm = posteriors_.at(i).predict(x);
      draw = pm.mean + std::sqrt(pm.variance) * rng.normal();
    }
    c.latent.conservativeResize(c.latent.size() + 1);
    c.latent(c.latent.size() - 1) = draw;
  }
  inputs_ = append_row(inputs_, x);
  successes_.push_back(successes);
  trials_.push_back(trials);
  const Likelihood lik = likelihood();
  for (auto& c : chains_) {
    const Eigen::MatrixXd factor = latent_prior_factor(inputs_, c.hyper);
    auto log_lik = [&](const Eigen::VectorXd& f) { return lik.log_prob(f, 0.0); };
    for (int s = 0; s < absorb_sweeps; ++s) c.latent = elliptical_slice_sample(c.latent, factor, log_lik, rng);
  }
  refit();
}

void LatentModel::refresh(const McmcSettings& settings, const Rng& base) {
  settings.validate();
  if (static_cast<int>(chains_.size()) != settings.ensemble) {
    // New slots copy slot 0 so their latent vectors are aligned with the data.
    chains_.resize(settings.ensemble, chains_.front());
  }
  const int steps = warm_ ? settings.burnin : settings.initial_burnin;
  const Likelihood lik = likelihood();
  for (size_t i = 0; i < chains_.size(); ++i) {
    Rng rng = base.child({i});
    auto& c = chains_[i];
    for (int s = 0; s < steps; ++s) {
      if (settings.sample_hypers) {
        c = whitened_transition(c, inputs_, prior_, lik, rng);
      } else if (inputs_.rows() > 0) {
        const Eigen::MatrixXd factor = latent_prior_factor(inputs_, c.hyper);
        c.latent = elliptical_slice_sample(
            c.latent, factor, [&](const Eigen::VectorXd& f) { return lik.log_prob(f, 0.0); }, rng);
      }
    }
  }
  if (inputs_.rows() > 0) warm_ = true;
  refit();
}

void LatentModel::refit() {
  posteriors_.clear();
  if (inputs_.rows() == 0) return;
  FitOptions opts;
  opts.center = false;
  posteriors_.reserve(chains_.size());
  for (const auto& c : chains_) {
    KernelHyperparameters h = c.hyper;
    h.noise_std = 0.0;
    posteriors_.push_back(GPPosterior::fit(inputs_, c.latent, h, opts));
  }
}

PredictiveMarginal LatentModel::predict(size_t member, const Eigen::VectorXd& x) const {
  Eigen::VectorXd mean, var;
  predict_batch(member, x.transpose(), mean, var);
  return {mean(0), var(0)};
}

void LatentModel::predict_batch(size_t member, const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                                Eigen::VectorXd& variance) const {
  const auto& h = chains_.at(member).hyper;
  if (posteriors_.empty()) {
    mean = Eigen::VectorXd::Zero(points.rows());
    variance = Eigen::VectorXd::Constant(points.rows(), h.amplitude * h.amplitude);
    return;
  }
  posteriors_[member].predict_batch(points, mean, variance);
}

JointPredictive LatentModel::joint(size_t member, const Eigen::MatrixXd& points) const {
  if (posteriors_.empty()) return prior_joint(points, chains_.at(member).hyper);
  return posteriors_.at(member).joint(points);
}

}  // namespace cbo
