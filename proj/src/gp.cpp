#include "cbo/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "cbo/errors.hpp"

namespace cbo {
namespace {

constexpr double kSqrt5 = 2.2360679774997896964;

inline double matern52_from_distance(double r, double amplitude_sq) {
  const double s = kSqrt5 * r;
  return amplitude_sq * (1.0 + s + (5.0 / 3.0) * r * r) * std::exp(-s);
}

void check_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    std::ostringstream msg;
    msg << what << ": dimension " << got << " does not match kernel dimension " << want;
    throw InputError(msg.str());
  }
}

}  // namespace

void KernelHyperparameters::validate() const {
  if (length_scales.size() == 0) throw InputError("KernelHyperparameters: no length scales");
  for (Eigen::Index i = 0; i < length_scales.size(); ++i)
    if (!(length_scales(i) > 0.0) || !std::isfinite(length_scales(i)))
      throw InputError("KernelHyperparameters: length scales must be positive and finite");
  if (!(amplitude > 0.0) || !std::isfinite(amplitude))
    throw InputError("KernelHyperparameters: amplitude must be positive and finite");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw InputError("KernelHyperparameters: noise_std must be nonnegative and finite");
}

double matern52(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                const KernelHyperparameters& hyper) {
  check_dim(x.size(), hyper.dim(), "matern52");
  check_dim(y.size(), hyper.dim(), "matern52");
  const double r = ((x - y).array() / hyper.length_scales.array()).matrix().norm();
  return matern52_from_distance(r, hyper.amplitude * hyper.amplitude);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const KernelHyperparameters& hyper) {
  check_dim(a.cols(), hyper.dim(), "kernel_matrix");
  check_dim(b.cols(), hyper.dim(), "kernel_matrix");
  const Eigen::RowVectorXd inv_ls = hyper.length_scales.cwiseInverse().transpose();
  const Eigen::MatrixXd as = a.array().rowwise() * inv_ls.array();
  const Eigen::MatrixXd bs = b.array().rowwise() * inv_ls.array();
  // Squared distances via the expansion |a|^2 + |b|^2 - 2 a.b, clamped at zero.
  const Eigen::VectorXd an = as.rowwise().squaredNorm();
  const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * as * bs.transpose();
  k.colwise() += an;
  k.rowwise() += bn.transpose();
  const double amp_sq = hyper.amplitude * hyper.amplitude;
  for (Eigen::Index j = 0; j < k.cols(); ++j)
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      k(i, j) = matern52_from_distance(std::sqrt(std::max(k(i, j), 0.0)), amp_sq);
  return k;
}

Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& gram, double amplitude_sq, double relative_jitter,
                                double* jitter_used) {
  const double max_jitter = 1e-2 * amplitude_sq;
  double jitter = relative_jitter * amplitude_sq;
  const Eigen::Index n = gram.rows();
  for (;;) {
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
    if (jitter * 10.0 > max_jitter * (1.0 + 1e-12)) break;
    jitter *= 10.0;
  }
  std::ostringstream msg;
  msg << "Cholesky factorization of " << n << "x" << n << " Gram matrix failed with jitter up to "
      << max_jitter << " (amplitude^2 = " << amplitude_sq << ")";
  throw NumericalError(msg.str());
}

GPPosterior GPPosterior::fit(Eigen::MatrixXd inputs, Eigen::VectorXd targets, KernelHyperparameters hyper,
                             const FitOptions& options) {
  hyper.validate();
  if (inputs.rows() < 1) throw InputError("fit_gp: at least one observation required");
  if (inputs.rows() != targets.size()) throw InputError("fit_gp: inputs and targets differ in length");
  check_dim(inputs.cols(), hyper.dim(), "fit_gp");
  if (!targets.allFinite()) throw InputError("fit_gp: targets must be finite");
  if (!(options.jitter > 0.0)) throw InputError("fit_gp: jitter must be positive");

  GPPosterior gp;
  gp.prior_mean_ = options.center ? targets.mean() : 0.0;
  Eigen::MatrixXd gram = kernel_matrix(inputs, inputs, hyper);
  gram.diagonal().array() += hyper.noise_std * hyper.noise_std;
  gp.chol_ = robust_cholesky(gram, hyper.amplitude * hyper.amplitude, options.jitter, &gp.jitter_);
  Eigen::VectorXd centered = targets.array() - gp.prior_mean_;
  auto lower = gp.chol_.triangularView<Eigen::Lower>();
  gp.alpha_ = lower.transpose().solve(lower.solve(centered));
  gp.inputs_ = std::move(inputs);
  gp.targets_ = std::move(targets);
  gp.hyper_ = std::move(hyper);
  return gp;
}

PredictiveMarginal GPPosterior::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dim(x.size(), dim(), "predict");
  Eigen::VectorXd mean, var;
  predict_batch(x.transpose(), mean, var);
  return {mean(0), var(0)};
}

void GPPosterior::predict_batch(const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                                Eigen::VectorXd& variance) const {
  check_dim(points.cols(), dim(), "predict");
  const Eigen::MatrixXd k_star = kernel_matrix(inputs_, points, hyper_);  // n x q
  mean = (k_star.transpose() * alpha_).array() + prior_mean_;
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(k_star);
  const double prior_var = hyper_.amplitude * hyper_.amplitude;
  variance = (prior_var - v.colwise().squaredNorm().array()).cwiseMax(0.0).matrix().transpose();
}

JointPredictive GPPosterior::joint(const Eigen::MatrixXd& points) const {
  check_dim(points.cols(), dim(), "joint");
  const Eigen::MatrixXd k_star = kernel_matrix(inputs_, points, hyper_);
  JointPredictive out;
  out.mean = (k_star.transpose() * alpha_).array() + prior_mean_;
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(k_star);
  out.covariance = kernel_matrix(points, points, hyper_);
  out.covariance.noalias() -= v.transpose() * v;
  return out;
}

double GPPosterior::log_marginal_likelihood() const {
  const Eigen::VectorXd centered = targets_.array() - prior_mean_;
  const double n = static_cast<double>(size());
  return -0.5 * centered.dot(alpha_) - chol_.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace cbo
