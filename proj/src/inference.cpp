#include "cbo/inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "cbo/errors.hpp"
#include "cbo/normal.hpp"

namespace cbo {

double LogNormalPrior::log_density(double log_value) const {
  const double z = (log_value - mean) / std;
  return -0.5 * z * z - std::log(std);
}

HyperPrior HyperPrior::defaults(Eigen::Index dim, bool with_noise) {
  HyperPrior p;
  p.log_length_scales.assign(static_cast<size_t>(dim), LogNormalPrior{std::log(0.1), 1.0});
  p.log_amplitude = {0.0, 1.0};
  if (with_noise) p.log_noise_std = LogNormalPrior{std::log(0.01), 1.0};
  return p;
}

void HyperPrior::validate() const {
  if (log_length_scales.empty()) throw InputError("HyperPrior: no length-scale priors");
  auto ok = [](const LogNormalPrior& p) { return p.std > 0.0 && std::isfinite(p.std) && std::isfinite(p.mean); };
  for (const auto& p : log_length_scales)
    if (!ok(p)) throw InputError("HyperPrior: prior stds must be positive");
  if (!ok(log_amplitude) || (log_noise_std && !ok(*log_noise_std)))
    throw InputError("HyperPrior: prior stds must be positive");
}

KernelHyperparameters HyperPrior::mean_hypers(double fixed_noise) const {
  Eigen::VectorXd v(size());
  for (Eigen::Index d = 0; d < dim(); ++d) v(d) = log_length_scales[d].mean;
  v(dim()) = log_amplitude.mean;
  if (log_noise_std) v(dim() + 1) = log_noise_std->mean;
  return unpack(v, fixed_noise);
}

Eigen::VectorXd HyperPrior::pack(const KernelHyperparameters& h) const {
  if (h.dim() != dim()) throw InputError("HyperPrior::pack: dimension mismatch");
  Eigen::VectorXd v(size());
  v.head(dim()) = h.length_scales.array().log();
  v(dim()) = std::log(h.amplitude);
  if (log_noise_std) v(dim() + 1) = std::log(h.noise_std);
  return v;
}

KernelHyperparameters HyperPrior::unpack(const Eigen::VectorXd& log_params, double fixed_noise) const {
  KernelHyperparameters h;
  h.length_scales = log_params.head(dim()).array().exp();
  h.amplitude = std::exp(log_params(dim()));
  h.noise_std = log_noise_std ? std::exp(log_params(dim() + 1)) : fixed_noise;
  return h;
}

double HyperPrior::log_density(const Eigen::VectorXd& v) const {
  double lp = 0.0;
  for (Eigen::Index d = 0; d < dim(); ++d) lp += log_length_scales[d].log_density(v(d));
  lp += log_amplitude.log_density(v(dim()));
  if (log_noise_std) lp += log_noise_std->log_density(v(dim() + 1));
  return lp;
}

Likelihood Likelihood::gaussian(Eigen::VectorXd values) {
  Likelihood l;
  l.kind = LikelihoodKind::gaussian;
  l.values = std::move(values);
  return l;
}

Likelihood Likelihood::binomial(std::vector<int> successes, std::vector<int> trials) {
  Likelihood l;
  l.kind = LikelihoodKind::binomial_probit;
  l.successes = std::move(successes);
  l.trials = std::move(trials);
  l.validate();
  return l;
}

Likelihood Likelihood::bernoulli(const std::vector<bool>& outcomes) {
  Likelihood l;
  l.kind = LikelihoodKind::bernoulli_probit;
  for (bool o : outcomes) {
    l.successes.push_back(o ? 1 : 0);
    l.trials.push_back(1);
  }
  return l;
}

Eigen::Index Likelihood::size() const {
  return kind == LikelihoodKind::gaussian ? values.size() : static_cast<Eigen::Index>(successes.size());
}

void Likelihood::validate() const {
  if (kind == LikelihoodKind::gaussian) return;
  if (successes.size() != trials.size()) throw InputError("Likelihood: successes and trials differ in length");
  for (size_t i = 0; i < trials.size(); ++i) {
    if (trials[i] < 1) throw InputError("Likelihood: trials must be at least 1");
    if (successes[i] < 0 || successes[i] > trials[i])
      throw InputError("Likelihood: successes must lie in [0, trials]");
    if (kind == LikelihoodKind::bernoulli_probit && trials[i] != 1)
      throw InputError("Likelihood: bernoulli observations have exactly one trial");
  }
}

double Likelihood::log_prob(const Eigen::VectorXd& latent, double noise_std) const {
  if (latent.size() != size()) throw InputError("Likelihood::log_prob: latent length mismatch");
  double lp = 0.0;
  if (kind == LikelihoodKind::gaussian) {
    if (!(noise_std > 0.0)) return -std::numeric_limits<double>::infinity();
    const double var = noise_std * noise_std;
    const double r2 = (values - latent).squaredNorm();
    return -0.5 * r2 / var - static_cast<double>(size()) * (std::log(noise_std) + 0.5 * std::log(2.0 * std::numbers::pi));
  }
  // Binomial coefficients are constant in the latent and omitted.
  for (Eigen::Index i = 0; i < latent.size(); ++i) {
    const int s = successes[i];
    const int f = trials[i] - s;
    if (s > 0) lp += s * log_normal_cdf(latent(i));
    if (f > 0) lp += f * log_normal_cdf(-latent(i));
  }
  return lp;
}

Eigen::VectorXd slice_sweep(const std::function<double(const Eigen::VectorXd&)>& log_density,
                            Eigen::VectorXd state, Rng& rng, const SliceSettings& settings) {
  double current = log_density(state);
  if (!std::isfinite(current)) throw InvalidStateError("slice_sweep: log density is not finite at the current state");
  for (Eigen::Index d = 0; d < state.size(); ++d) {
    const double x0 = state(d);
    const double level = current + std::log(rng.uniform() + std::numeric_limits<double>::min());
    auto at = [&](double v) {
      state(d) = v;
      const double lp = log_density(state);
      return std::isnan(lp) ? -std::numeric_limits<double>::infinity() : lp;
    };
    double lo = x0 - settings.width * rng.uniform();
    double hi = lo + settings.width;
    int j = static_cast<int>(std::floor(settings.max_step_out * rng.uniform()));
    int k = settings.max_step_out - 1 - j;
    while (j-- > 0 && at(lo) > level) lo -= settings.width;
    while (k-- > 0 && at(hi) > level) hi += settings.width;
    for (;;) {
      const double candidate = rng.uniform(lo, hi);
      const double lp = at(candidate);
      if (lp > level) {
        current = lp;
        break;
      }
      if (candidate < x0)
        lo = candidate;
      else
        hi = candidate;
      if (hi - lo < 1e-300) {
        state(d) = x0;
        current = log_density(state);
        break;
      }
    }
  }
  return state;
}

double hyper_log_posterior(const GaussianData& data, const HyperPrior& prior, const Eigen::VectorXd& log_params,
                           double fixed_noise, const FitOptions& fit) {
  if (!log_params.allFinite()) return -std::numeric_limits<double>::infinity();
  const double lp = prior.log_density(log_params);
  if (data.inputs.rows() == 0) return lp;
  try {
    const auto gp = GPPosterior::fit(data.inputs, data.targets, prior.unpack(log_params, fixed_noise), fit);
    return lp + gp.log_marginal_likelihood();
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  } catch (const InputError&) {
    // Overflow/underflow of exp(log_params) lands outside the positive reals.
    return -std::numeric_limits<double>::infinity();
  }
}

KernelHyperparameters slice_sample_hypers(const GaussianData& data, const HyperPrior& prior,
                                          const KernelHyperparameters& current, int steps, Rng& rng,
                                          const SliceSettings& settings) {
  prior.validate();
  if (steps < 1) throw InputError("slice_sample_hypers: steps must be at least 1");
  const double fixed_noise = current.noise_std;
  auto target = [&](const Eigen::VectorXd& v) { return hyper_log_posterior(data, prior, v, fixed_noise); };
  Eigen::VectorXd state = prior.pack(current);
  for (int s = 0; s < steps; ++s) state = slice_sweep(target, std::move(state), rng, settings);
  return prior.unpack(state, fixed_noise);
}

Eigen::VectorXd elliptical_slice_sample(const Eigen::VectorXd& latent, const Eigen::MatrixXd& prior_factor,
                                        const std::function<double(const Eigen::VectorXd&)>& log_lik, Rng& rng) {
  if (latent.size() != prior_factor.rows() || prior_factor.rows() != prior_factor.cols())
    throw InputError("elliptical_slice_sample: latent length does not match the prior factor");
  if (latent.size() == 0) return latent;
  const double current = log_lik(latent);
  if (std::isnan(current)) throw InvalidStateError("elliptical_slice_sample: log likelihood is NaN");
  if (current == -std::numeric_limits<double>::infinity())
    throw InvalidStateError("elliptical_slice_sample: current state has zero likelihood");

  const Eigen::VectorXd nu = prior_factor.triangularView<Eigen::Lower>() * rng.normal_vector(latent.size());
  const double level = current + std::log(rng.uniform() + std::numeric_limits<double>::min());
  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double lo = theta - 2.0 * std::numbers::pi;
  double hi = theta;
  for (;;) {
    Eigen::VectorXd proposal = latent * std::cos(theta) + nu * std::sin(theta);
    const double lp = log_lik(proposal);
    if (std::isnan(lp)) throw InvalidStateError("elliptical_slice_sample: log likelihood is NaN");
    if (lp > level) return proposal;
    if (theta < 0.0)
      lo = theta;
    else
      hi = theta;
    // The bracket shrinks toward theta = 0, which is the current state.
    if (hi - lo < 1e-14) return latent;
    theta = rng.uniform(lo, hi);
  }
}

Eigen::MatrixXd latent_prior_factor(const Eigen::MatrixXd& inputs, const KernelHyperparameters& hyper) {
  const double amp_sq = hyper.amplitude * hyper.amplitude;
  return robust_cholesky(kernel_matrix(inputs, inputs, hyper), amp_sq, 1e-8);
}

LatentState whitened_transition(const LatentState& state, const Eigen::MatrixXd& inputs, const HyperPrior& prior,
                                const Likelihood& likelihood, Rng& rng, const SliceSettings& settings) {
  if (state.latent.size() != inputs.rows() || likelihood.size() != inputs.rows())
    throw InputError("whitened_transition: latent, inputs and likelihood must agree in length");
  prior.validate();
  const double fixed_noise = state.hyper.noise_std;
  LatentState next = state;
  if (inputs.rows() == 0) {
    next.hyper = prior.unpack(
        slice_sweep([&](const Eigen::VectorXd& v) { return prior.log_density(v); }, prior.pack(state.hyper), rng,
                    settings),
        fixed_noise);
    return next;
  }

  const Eigen::MatrixXd factor = latent_prior_factor(inputs, state.hyper);
  const Eigen::VectorXd whitened = factor.triangularView<Eigen::Lower>().solve(state.latent);

  auto target = [&](const Eigen::VectorXd& v) {
    if (!v.allFinite()) return -std::numeric_limits<double>::infinity();
    const KernelHyperparameters h = prior.unpack(v, fixed_noise);
    Eigen::MatrixXd l;
    try {
      l = latent_prior_factor(inputs, h);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd f = l.triangularView<Eigen::Lower>() * whitened;
    return prior.log_density(v) + likelihood.log_prob(f, h.noise_std);
  };
  next.hyper = prior.unpack(slice_sweep(target, prior.pack(state.hyper), rng, settings), fixed_noise);

  const Eigen::MatrixXd new_factor = latent_prior_factor(inputs, next.hyper);
  next.latent = new_factor.triangularView<Eigen::Lower>() * whitened;
  const double noise = next.hyper.noise_std;
  next.latent = elliptical_slice_sample(
      next.latent, new_factor, [&](const Eigen::VectorXd& f) { return likelihood.log_prob(f, noise); }, rng);
  return next;
}

}  // namespace cbo
