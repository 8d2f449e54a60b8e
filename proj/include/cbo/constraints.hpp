#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "cbo/gp.hpp"
#include "cbo/inference.hpp"
#include "cbo/models.hpp"
#include "cbo/random.hpp"

namespace cbo {

enum class ConstraintKind { gaussian_latent, binomial, boolean_oracle };

const char* to_string(ConstraintKind kind);

/// Map from a raw constraint observation to the latent value g, where the
/// constraint holds iff g >= 0.
struct LatentTransform {
  enum class Kind {
    identity,     // g = raw
    log_time,     // g = log(parameter) - log(raw); parameter is the time limit
    upper_bound,  // g = parameter - raw
    lower_bound,  // g = raw - parameter
  };
  Kind kind = Kind::identity;
  double parameter = 0.0;
};

/// Throws InputError when `raw` is outside the transform's domain.
double latent_transform(double raw, const LatentTransform& transform);

struct ConstraintSpec {
  std::string id;
  ConstraintKind kind = ConstraintKind::gaussian_latent;
  /// Pr(C(x)) >= 1 - delta is required.
  double delta = 0.05;
  /// Evaluation cost, used to scale information gain in task selection.
  double cost = 1.0;
  LatentTransform transform;
  /// Binomial constraints hold where the success probability is at least this value.
  double min_success_rate = 0.5;

  void validate() const;
};

struct BinomialCount {
  int successes = 0;
  int trials = 1;
};

/// Raw observation: real value (gaussian-latent), counts (binomial; a bool is
/// one trial) or a bool (boolean-oracle).
using ConstraintPayload = std::variant<double, BinomialCount, bool>;

struct ConstraintObservation {
  Eigen::VectorXd x;
  ConstraintPayload payload;
};

/// A constraint with its observations and, for statistical kinds, an ensemble
/// model of the latent function. Points are in the model's input coordinates.
class ConstraintModel {
 public:
  using Oracle = std::function<bool(const Eigen::VectorXd&)>;

  static ConstraintModel gaussian_latent(ConstraintSpec spec, Eigen::Index dim, int ensemble,
                                         HyperPrior prior);
  static ConstraintModel gaussian_latent(ConstraintSpec spec, Eigen::Index dim, int ensemble);
  static ConstraintModel binomial(ConstraintSpec spec, Eigen::Index dim, int ensemble, HyperPrior prior);
  static ConstraintModel binomial(ConstraintSpec spec, Eigen::Index dim, int ensemble);
  static ConstraintModel boolean_oracle(ConstraintSpec spec, Eigen::Index dim, Oracle oracle);

  const ConstraintSpec& spec() const { return spec_; }
  ConstraintKind kind() const { return spec_.kind; }
  Eigen::Index dim() const { return dim_; }
  bool fitted() const { return fitted_; }
  bool is_task() const { return kind() != ConstraintKind::boolean_oracle; }
  const std::vector<ConstraintObservation>& observations() const { return observations_; }
  void set_cost(double cost);
  void set_delta(double delta);

  /// Throws InputError when the payload type does not match the kind.
  void add_observation(const Eigen::VectorXd& x, const ConstraintPayload& payload, Rng& rng,
                       int absorb_sweeps = 5);
  /// Runs the ensemble chains; after this the model is fitted.
  void refresh(const McmcSettings& settings, const Rng& base);

  size_t members() const;
  /// Marginals of the shifted latent (satisfied iff >= 0) for one member.
  void latent_batch(size_t member, const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                    Eigen::VectorXd& variance) const;
  JointPredictive latent_joint(size_t member, const Eigen::MatrixXd& points) const;
  /// Oracle outcome at each row; boolean-oracle kind only.
  std::vector<bool> oracle_values(const Eigen::MatrixXd& points) const;
  /// Offset subtracted from the modelled latent so the constraint holds iff the result is >= 0.
  double latent_offset() const;
  /// Trials a fresh binomial evaluation is expected to report.
  int fantasy_trials() const;

  /// Ensemble-averaged Pr(g(x) >= 0). Throws StateError when unfitted.
  Eigen::VectorXd probability_batch(const Eigen::MatrixXd& points) const;

  const GaussianModel& gaussian() const { return std::get<GaussianModel>(impl_); }
  const LatentModel& latent() const { return std::get<LatentModel>(impl_); }

 private:
  ConstraintModel(ConstraintSpec spec, Eigen::Index dim);

  ConstraintSpec spec_;
  Eigen::Index dim_;
  bool fitted_ = false;
  std::vector<ConstraintObservation> observations_;
  std::variant<std::monostate, GaussianModel, LatentModel, Oracle> impl_;
};

/// The probabilistic-constraint test Pr >= 1 - delta (boundary counts as satisfied).
inline bool meets_confidence(double probability, double delta) { return probability >= 1.0 - delta; }

double constraint_satisfaction_probability(const ConstraintModel& model, const Eigen::VectorXd& x);
bool probabilistic_constraint_satisfied(const ConstraintModel& model, const Eigen::VectorXd& x);
/// Per-point Pr(g >= 0) >= 1 - delta.
std::vector<bool> probabilistic_constraint_satisfied(const ConstraintModel& model, const Eigen::MatrixXd& points);

/// Pr(z >= 0) for z ~ N(mean, variance); a step function when the variance vanishes.
double probability_nonnegative(double mean, double variance);

}  // namespace cbo
