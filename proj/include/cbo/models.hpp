#pragma once

#include <vector>

#include <Eigen/Core>

#include "cbo/gp.hpp"
#include "cbo/inference.hpp"
#include "cbo/random.hpp"

namespace cbo {

struct McmcSettings {
  int ensemble = 10;
  /// Transitions per chain at each refresh once chains are warm.
  int burnin = 20;
  /// Transitions per chain the first time a model with data is refreshed.
  int initial_burnin = 100;
  /// When false the chains keep their initial hyperparameters (prior mean).
  bool sample_hypers = true;
  /// Elliptical slice sweeps used to absorb a new binomial observation between refreshes.
  int absorb_sweeps = 5;

  void validate() const;
};

/// GP with a Gaussian likelihood and an ensemble of hyperparameter samples,
/// one independent chain per ensemble slot. Targets are optionally
/// standardized; predictions are always in the original target units.
class GaussianModel {
 public:
  GaussianModel(Eigen::Index dim, HyperPrior prior, int ensemble, bool standardize);

  /// Appends an observation and refits every member at its current hyperparameters.
  void add(const Eigen::VectorXd& x, double y);
  /// Advances each chain and refits.
  void refresh(const McmcSettings& settings, const Rng& base);

  size_t members() const { return chains_.size(); }
  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index dim() const { return dim_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<KernelHyperparameters>& hypers() const { return chains_; }
  const HyperPrior& prior() const { return prior_; }

  PredictiveMarginal predict(size_t member, const Eigen::VectorXd& x) const;
  void predict_batch(size_t member, const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                     Eigen::VectorXd& variance) const;
  JointPredictive joint(size_t member, const Eigen::MatrixXd& points) const;
  /// Observation noise variance of `member`, in target units.
  double noise_variance(size_t member) const;

 private:
  void update_scaling();
  void refit();

  Eigen::Index dim_;
  HyperPrior prior_;
  bool standardize_;
  bool warm_ = false;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd values_;
  std::vector<KernelHyperparameters> chains_;
  std::vector<GPPosterior> posteriors_;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

/// Latent GP under a binomial-probit likelihood. Each ensemble slot carries a
/// hyperparameter sample and a latent vector at the observed inputs; new
/// points are predicted by treating that latent vector as noise-free
/// pseudo-observations under the slot's hyperparameters.
class LatentModel {
 public:
  LatentModel(Eigen::Index dim, HyperPrior prior, int ensemble);

  /// Appends a count observation, extends every latent vector by a draw from
  /// its conditional prior and runs `absorb_sweeps` elliptical slice sweeps.
  void add(const Eigen::VectorXd& x, int successes, int trials, Rng& rng, int absorb_sweeps = 5);
  void refresh(const McmcSettings& settings, const Rng& base);

  size_t members() const { return chains_.size(); }
  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index dim() const { return dim_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const std::vector<int>& successes() const { return successes_; }
  const std::vector<int>& trials() const { return trials_; }
  const std::vector<LatentState>& chains() const { return chains_; }
  Likelihood likelihood() const;

  PredictiveMarginal predict(size_t member, const Eigen::VectorXd& x) const;
  void predict_batch(size_t member, const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                     Eigen::VectorXd& variance) const;
  JointPredictive joint(size_t member, const Eigen::MatrixXd& points) const;

 private:
  void refit();

  Eigen::Index dim_;
  HyperPrior prior_;
  bool warm_ = false;
  Eigen::MatrixXd inputs_;
  std::vector<int> successes_;
  std::vector<int> trials_;
  std::vector<LatentState> chains_;
  std::vector<GPPosterior> posteriors_;
};

}  // namespace cbo
