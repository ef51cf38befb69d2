#include "kkf/baselines.hpp"

#include <cmath>
#include <limits>

namespace kkf {

// ---------------------------------------------------------------- bootstrap PF

PfState pf_init(const StateSpaceModel& model, int particles, Rng& rng) {
  if (particles < 1) throw ConfigError("particle filter needs at least 1 particle");
  Eigen::MatrixXd x(model.state_dim(), particles);
  for (int i = 0; i < particles; ++i) x.col(i) = model.sample_prior(rng);
  return {Ensemble(std::move(x)), Eigen::VectorXd::Constant(particles, 1.0 / particles), 0};
}

double normalize_log_weights(Eigen::VectorXd& log_w) {
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top)) throw DegenerateWeights("all particle likelihoods vanished");
  log_w = (log_w.array() - top).exp();
  const double total = log_w.sum();
  log_w /= total;
  return top + std::log(total);
}

std::vector<Eigen::Index> systematic_resample(const Eigen::VectorXd& weights, Rng& rng) {
  const Eigen::Index m = weights.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double step = 1.0 / static_cast<double>(m);
  const double offset = unit(rng) * step;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  double cumulative = weights[0];
  Eigen::Index j = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const double u = offset + static_cast<double>(k) * step;
    while (u > cumulative && j < m - 1) cumulative += weights[++j];
    idx[static_cast<std::size_t>(k)] = j;
  }
  return idx;
}

PfStep pf_step(PfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model, Rng& rng) {
  const int n = state.n + 1;
  const Eigen::MatrixXd& x = state.particles.particles();
  const Eigen::Index m = x.cols();
  Eigen::MatrixXd next(x.rows(), m);
  Eigen::VectorXd log_w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    next.col(i) = model.process(x.col(i), model.sample_process_noise(rng), n);
    if (!next.col(i).allFinite()) throw Diverged("pf particle diverged", n);
    log_w[i] = std::log(state.weights[i]) + model.measurement_log_likelihood(y, next.col(i));
  }
  normalize_log_weights(log_w);
  PfStep out{next * log_w};

  const auto idx = systematic_resample(log_w, rng);
  Eigen::MatrixXd resampled(x.rows(), m);
  for (Eigen::Index k = 0; k < m; ++k) resampled.col(k) = next.col(idx[static_cast<std::size_t>(k)]);
  state.particles = Ensemble(std::move(resampled));
  state.weights = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  state.n = n;
  return out;
}

// ---------------------------------------------------------------- Gaussian PF

GaussianBelief gpf_step(const GaussianBelief& belief, const Eigen::VectorXd& y, int n,
                        const StateSpaceModel& model, int particles, Rng& rng) {
  if (particles < 1) throw ConfigError("gaussian particle filter needs at least 1 particle");
  const Eigen::MatrixXd factor = psd_factor(belief.cov);
  const Eigen::Index d = belief.mean.size();
  Eigen::MatrixXd x(d, particles);
  Eigen::VectorXd log_w(particles);
  for (int i = 0; i < particles; ++i) {
    const Eigen::VectorXd draw = belief.mean + factor * standard_normal(rng, factor.cols());
    x.col(i) = model.process(draw, model.sample_process_noise(rng), n);
    if (!x.col(i).allFinite()) throw Diverged("gpf particle diverged", n);
    log_w[i] = model.measurement_log_likelihood(y, x.col(i));
  }
  normalize_log_weights(log_w);
  const Eigen::VectorXd mean = x * log_w;
  const Eigen::MatrixXd second = x * log_w.asDiagonal() * x.transpose();
  return {mean, psd_repair(second - mean * mean.transpose())};
}

// ---------------------------------------------------------------- UKF

SigmaPoints sigma_points(const GaussianBelief& belief, const UkfParams& p) {
  const Eigen::Index d = belief.mean.size();
  const double dd = static_cast<double>(d);
  const double lambda = p.alpha * p.alpha * (dd + p.kappa) - dd;
  const Eigen::MatrixXd root = psd_factor((dd + lambda) * belief.cov);

  SigmaPoints sp;
  sp.points.resize(d, 2 * d + 1);
  sp.points.col(0) = belief.mean;
  for (Eigen::Index i = 0; i < d; ++i) {
    sp.points.col(1 + i) = belief.mean + root.col(i);
    sp.points.col(1 + d + i) = belief.mean - root.col(i);
  }
  sp.mean_weights = Eigen::VectorXd::Constant(2 * d + 1, 0.5 / (dd + lambda));
  sp.cov_weights = sp.mean_weights;
  sp.mean_weights[0] = lambda / (dd + lambda);
  sp.cov_weights[0] = sp.mean_weights[0] + (1.0 - p.alpha * p.alpha + p.beta);
  return sp;
}

UkfState ukf_init(const StateSpaceModel& model, const UkfParams& params) {
  return {{model.prior_mean(), model.prior_cov()}, params, 0, 0};
}

void ukf_step(UkfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model) {
  const int n = state.n + 1;
  const Eigen::Index d = state.belief.mean.size();

  // Time update.
  const SigmaPoints prior = sigma_points(state.belief, state.params);
  Eigen::MatrixXd moved(d, prior.points.cols());
  for (Eigen::Index i = 0; i < moved.cols(); ++i) moved.col(i) = model.process_mean(prior.points.col(i), n);
  const Eigen::VectorXd x_pred = moved * prior.mean_weights;
  Eigen::MatrixXd p_pred = model.process_noise_cov(state.belief.mean, n);
  for (Eigen::Index i = 0; i < moved.cols(); ++i) {
    const Eigen::VectorXd dx = moved.col(i) - x_pred;
    p_pred += prior.cov_weights[i] * dx * dx.transpose();
  }
  if (!x_pred.allFinite() || !p_pred.allFinite()) throw Diverged("ukf prediction is non-finite", n);

  // Measurement update.
  const SigmaPoints pred = sigma_points({x_pred, p_pred}, state.params);
  const Eigen::Index k = pred.points.cols();
  Eigen::MatrixXd obs(model.obs_dim(), k);
  for (Eigen::Index i = 0; i < k; ++i) obs.col(i) = model.measure_mean(pred.points.col(i));
  Eigen::VectorXd y_pred = obs.col(0);
  {
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(y_pred.size());
    for (Eigen::Index i = 0; i < k; ++i) shift += pred.mean_weights[i] * model.innovation(obs.col(i), obs.col(0));
    y_pred += shift;
  }
  Eigen::MatrixXd p_yy = model.measurement_noise_cov();
  Eigen::MatrixXd p_xy = Eigen::MatrixXd::Zero(d, y_pred.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::VectorXd dy = model.innovation(obs.col(i), y_pred);
    const Eigen::VectorXd dx = pred.points.col(i) - x_pred;
    p_yy += pred.cov_weights[i] * dy * dy.transpose();
    p_xy += pred.cov_weights[i] * dx * dy.transpose();
  }
  const Eigen::MatrixXd gain = p_yy.transpose().ldlt().solve(p_xy.transpose()).transpose();
  Eigen::VectorXd mean = x_pred + gain * model.innovation(y, y_pred);
  Eigen::MatrixXd cov = p_pred - gain * p_yy * gain.transpose();
  cov = 0.5 * (cov + cov.transpose().eval());
  if (!mean.allFinite() || !cov.allFinite()) throw Diverged("ukf update is non-finite", n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 0.0) {
    cov = psd_repair(cov);
    ++state.psd_repairs;
  }
  state.belief = {std::move(mean), std::move(cov)};
  state.n = n;
}

// ---------------------------------------------------------------- data-driven KKR

KkrModel kkr_fit(const Ensemble& predecessors, const Ensemble& states, const Ensemble& observations,
                 const KernelSpec& state_kernel, const KernelSpec& obs_kernel, double lambda, double kappa) {
  if (predecessors.size() != states.size() || states.size() != observations.size())
    throw DimensionMismatch("kkr_fit: training ensembles must have equal counts");
  if (!(lambda >= 0.0) || !(kappa > 0.0)) throw ConfigError("kkr_fit: need lambda >= 0 and kappa > 0");
  state_kernel.validate();
  obs_kernel.validate();

  KkrModel km{predecessors, states, observations, resolve_bandwidth(state_kernel, predecessors),
              resolve_bandwidth(obs_kernel, observations), {}, {}, {}, lambda, kappa};
  const Eigen::MatrixXd k_pp = gram(km.state_kernel, predecessors).values;
  const Eigen::MatrixXd k_ps = gram(km.state_kernel, predecessors, states).values;
  km.transition = ridge_solve(k_pp, lambda, k_ps, "K_x_x_");
  km.residual = transition_residual(k_pp, lambda);
  km.obs_gram = gram(km.obs_kernel, observations).values;
  return km;
}

KkrStep kkr_step(const KkrModel& model, const Eigen::VectorXd& w, const Eigen::MatrixXd& s,
                 const Eigen::VectorXd& y) {
  const Eigen::Index m = model.transition.rows();
  if (w.size() != m || s.rows() != m || s.cols() != m) throw DimensionMismatch("kkr_step: weight shape mismatch");
  const Eigen::VectorXd w_minus = model.transition * w;
  Eigen::MatrixXd s_minus = model.transition * s * model.transition.transpose() + model.residual;
  s_minus = 0.5 * (s_minus + s_minus.transpose().eval());
  const Eigen::VectorXd g_y = kernel_vector(model.obs_kernel, model.observations, y);
  KernelKalmanUpdate up = kernel_kalman_update(w_minus, s_minus, model.obs_gram, g_y, model.kappa);
  GaussianBelief belief = project_moments(model.states, up.w, up.s);
  return {std::move(up.w), std::move(up.s), std::move(belief)};
}

}  // namespace kkf
