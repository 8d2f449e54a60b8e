#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cbo/gp.hpp"
#include "cbo/random.hpp"

namespace cbo {

struct LogNormalPrior {
  double mean = 0.0;  // in log space
  double std = 1.0;

  double log_density(double log_value) const;
};

/// Independent Gaussian priors on the log hyperparameters.
struct HyperPrior {
  std::vector<LogNormalPrior> log_length_scales;
  LogNormalPrior log_amplitude;
  /// Absent when the model has no observation noise to learn; noise_std is then held fixed.
  std::optional<LogNormalPrior> log_noise_std;

  /// log length scales ~ N(log 0.1, 1), log amplitude ~ N(0, 1), log noise ~ N(log 0.01, 1).
  static HyperPrior defaults(Eigen::Index dim, bool with_noise);

  void validate() const;
  Eigen::Index dim() const { return static_cast<Eigen::Index>(log_length_scales.size()); }
  /// Number of sampled coordinates.
  Eigen::Index size() const { return dim() + 1 + (log_noise_std ? 1 : 0); }
  /// Prior mean as hyperparameters; noise_std falls back to `fixed_noise` when not sampled.
  KernelHyperparameters mean_hypers(double fixed_noise = 0.0) const;

  Eigen::VectorXd pack(const KernelHyperparameters& h) const;
  KernelHyperparameters unpack(const Eigen::VectorXd& log_params, double fixed_noise) const;
  double log_density(const Eigen::VectorXd& log_params) const;
};

enum class LikelihoodKind { gaussian, binomial_probit, bernoulli_probit };

/// Per-input sufficient statistics for a latent GP. Gaussian: `values`. Probit
/// kinds: `successes`/`trials` (bernoulli has trials == 1).
struct Likelihood {
  LikelihoodKind kind = LikelihoodKind::gaussian;
  Eigen::VectorXd values;
  std::vector<int> successes;
  std::vector<int> trials;

  static Likelihood gaussian(Eigen::VectorXd values);
  static Likelihood binomial(std::vector<int> successes, std::vector<int> trials);
  static Likelihood bernoulli(const std::vector<bool>& outcomes);

  Eigen::Index size() const;
  void validate() const;
  /// log p(data | latent) without the binomial coefficients; `noise_std` is used by the Gaussian kind only.
  double log_prob(const Eigen::VectorXd& latent, double noise_std) const;
};

struct SliceSettings {
  double width = 1.0;
  int max_step_out = 100;
};

/// One coordinate-wise sweep of univariate slice sampling (stepping out plus
/// shrinkage) on `log_density`. Throws InvalidStateError if the density is
/// not finite at `state`.
Eigen::VectorXd slice_sweep(const std::function<double(const Eigen::VectorXd&)>& log_density,
                            Eigen::VectorXd state, Rng& rng, const SliceSettings& settings = {});

/// Inputs and real targets for the collapsed Gaussian-likelihood model.
struct GaussianData {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
};

/// Log posterior (up to a constant) of hyperparameters given Gaussian data;
/// with no data this is the prior.
double hyper_log_posterior(const GaussianData& data, const HyperPrior& prior, const Eigen::VectorXd& log_params,
                           double fixed_noise, const FitOptions& fit = {});

/// `steps` slice-sampling sweeps over log hyperparameters with the latent
/// function integrated out analytically.
KernelHyperparameters slice_sample_hypers(const GaussianData& data, const HyperPrior& prior,
                                          const KernelHyperparameters& current, int steps, Rng& rng,
                                          const SliceSettings& settings = {});

/// One elliptical slice sampling transition for a latent vector with prior
/// N(0, L L^T). Throws InvalidStateError when `log_lik` yields NaN.
Eigen::VectorXd elliptical_slice_sample(const Eigen::VectorXd& latent, const Eigen::MatrixXd& prior_factor,
                                        const std::function<double(const Eigen::VectorXd&)>& log_lik, Rng& rng);

struct LatentState {
  KernelHyperparameters hyper;
  Eigen::VectorXd latent;
};

/// Composite update for a latent GP: slice-sample hyperparameters with the
/// whitened latent fixed, then elliptical-slice-sample the latent.
LatentState whitened_transition(const LatentState& state, const Eigen::MatrixXd& inputs, const HyperPrior& prior,
                                const Likelihood& likelihood, Rng& rng, const SliceSettings& settings = {});

/// Lower factor of the noise-free prior covariance of the latent at `inputs`.
Eigen::MatrixXd latent_prior_factor(const Eigen::MatrixXd& inputs, const KernelHyperparameters& hyper);

}  // namespace cbo
