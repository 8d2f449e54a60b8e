#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>

namespace cbo {

/// Matern 5/2 hyperparameters: one length scale per input dimension, a signal
/// standard deviation, and (for Gaussian-likelihood models) an observation
/// noise standard deviation.
struct KernelHyperparameters {
  Eigen::VectorXd length_scales;
  double amplitude = 1.0;
  double noise_std = 0.0;

  Eigen::Index dim() const { return length_scales.size(); }
  /// Throws InputError when a positivity invariant is violated.
  void validate() const;
};

struct PredictiveMarginal {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean vector and covariance matrix of the posterior over a finite point set.
struct JointPredictive {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

double matern52(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                const KernelHyperparameters& hyper);

/// Cross-covariance between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const KernelHyperparameters& hyper);

struct FitOptions {
  /// Initial diagonal jitter relative to amplitude^2. Escalated x10 up to 1e-2.
  double jitter = 1e-8;
  /// Subtract the empirical target mean before fitting (constant prior mean).
  bool center = true;
};

/// Lower Cholesky factor of K + (noise^2 + jitter) I with jitter escalation.
/// `jitter_used` receives the absolute jitter that succeeded.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& gram, double amplitude_sq, double relative_jitter,
                                double* jitter_used = nullptr);

/// Exact GP posterior under a Gaussian likelihood. Immutable once fitted.
class GPPosterior {
 public:
  /// Rows of `inputs` are observation locations. Throws InputError on empty or
  /// inconsistent data and NumericalError when the Gram matrix cannot be factored.
  static GPPosterior fit(Eigen::MatrixXd inputs, Eigen::VectorXd targets, KernelHyperparameters hyper,
                         const FitOptions& options = {});

  PredictiveMarginal predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Marginals at each row of `points`.
  void predict_batch(const Eigen::MatrixXd& points, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;
  JointPredictive joint(const Eigen::MatrixXd& points) const;

  double log_marginal_likelihood() const;

  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const KernelHyperparameters& hyper() const { return hyper_; }
  const Eigen::MatrixXd& factor() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double prior_mean() const { return prior_mean_; }
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index dim() const { return inputs_.cols(); }

 private:
  GPPosterior() = default;

  Eigen::MatrixXd inputs_;
  Eigen::VectorXd targets_;
  KernelHyperparameters hyper_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double prior_mean_ = 0.0;
  double jitter_ = 0.0;
};

}  // namespace cbo
