#include "kkf/akkf.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace kkf {

void AkkfConfig::validate() const {
  state_kernel.validate();
  obs_kernel.validate();
  if (particles < 2) throw ConfigError("akkf needs at least 2 particles");
  if (!(lambda_tilde > 0.0)) throw ConfigError("lambda_tilde must be > 0");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
  if (!(lambda_k >= 0.0)) throw ConfigError("lambda_K must be >= 0");
}

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

KernelKalmanUpdate kernel_kalman_update(const Eigen::VectorXd& w_minus, const Eigen::MatrixXd& s_minus,
                                        const Eigen::MatrixXd& g_yy, const Eigen::VectorXd& g_y, double kappa,
                                        const Eigen::MatrixXd* likelihood_map) {
  const Eigen::Index m = w_minus.size();
  if (s_minus.rows() != m || s_minus.cols() != m || g_yy.rows() != m || g_yy.cols() != m || g_y.size() != m)
    throw DimensionMismatch("kernel_kalman_update: shape mismatch");

  Eigen::MatrixXd g_eff = g_yy;
  Eigen::MatrixXd s_cross = s_minus;
  if (likelihood_map != nullptr) {
    g_eff = g_yy * *likelihood_map;
    s_cross = s_minus * likelihood_map->transpose();
  }

  Eigen::MatrixXd system = s_cross * g_eff;
  system.diagonal().array() += kappa;
  Eigen::MatrixXd gain = system.partialPivLu().solve(s_cross);
  if (!gain.allFinite()) throw SingularMatrix("S G_yy + kappa I");

  KernelKalmanUpdate out;
  out.w = w_minus + gain * (g_y - g_eff * w_minus);
  out.s = symmetrize(s_minus - gain * (g_eff * s_minus));
  out.gain = std::move(gain);
  return out;
}

Eigen::MatrixXd transition_residual(const Eigen::MatrixXd& k, double lambda) {
  const Eigen::Index m = k.rows();
  if (k.cols() != m) throw DimensionMismatch("transition_residual: Gram must be square");
  if (lambda == 0.0) return Eigen::MatrixXd::Zero(m, m);
  const Eigen::MatrixXd a = -lambda * ridge_solve(k, lambda, Eigen::MatrixXd::Identity(m, m), "K_x~x~");
  return symmetrize(a * a.transpose() / static_cast<double>(m));
}

namespace akkf {

AkkfState init(const StateSpaceModel& model, const AkkfConfig& cfg, Rng& rng) {
  cfg.validate();
  const int m = cfg.particles;
  Eigen::MatrixXd x(model.state_dim(), m);
  for (int i = 0; i < m; ++i) x.col(i) = model.sample_prior(rng);

  AkkfState s;
  s.particles = Ensemble(x);
  s.proposals = s.particles;
  s.w_plus = Eigen::VectorXd::Constant(m, 1.0 / m);
  s.s_plus = Eigen::MatrixXd::Identity(m, m) / static_cast<double>(m);
  s.w_minus = s.w_plus;
  s.s_minus = s.s_plus;
  s.w_tilde = s.w_plus;
  s.s_tilde = s.s_plus;
  s.gamma = Eigen::MatrixXd::Identity(m, m);
  s.proposal_gram = gram(resolve_bandwidth(cfg.state_kernel, s.proposals), s.proposals).values;
  s.residual = Eigen::MatrixXd::Zero(m, m);
  s.n = 0;
  return s;
}

void predict(AkkfState& state, const StateSpaceModel& model, const AkkfConfig& cfg, Rng& rng) {
  const int n = state.n + 1;
  const Eigen::MatrixXd& prop = state.proposals.particles();
  Eigen::MatrixXd next(prop.rows(), prop.cols());
  for (Eigen::Index i = 0; i < prop.cols(); ++i) {
    next.col(i) = model.process(prop.col(i), model.sample_process_noise(rng), n);
    if (!next.col(i).allFinite()) throw Diverged("akkf particle " + std::to_string(i) + " diverged", n);
  }
  state.particles = Ensemble(std::move(next));
  state.residual = transition_residual(state.proposal_gram, cfg.lambda_tilde);
  state.w_minus = state.w_tilde;
  state.s_minus = state.s_tilde + state.residual;
  state.n = n;
}

void update(AkkfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model, const AkkfConfig& cfg,
            Rng& rng) {
  const Eigen::MatrixXd& x = state.particles.particles();
  Eigen::MatrixXd obs(model.obs_dim(), x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Eigen::VectorXd yi = model.measure(x.col(i), model.sample_measurement_noise(rng));
    // Express each particle observation on the branch nearest y (matters for angles).
    obs.col(i) = y + model.innovation(yi, y);
    if (!obs.col(i).allFinite())
      throw Diverged("akkf observation particle " + std::to_string(i) + " is non-finite", state.n);
  }
  const Ensemble obs_particles(std::move(obs));
  const KernelSpec ky = resolve_bandwidth(cfg.obs_kernel, obs_particles);
  const Eigen::MatrixXd g_yy = gram(ky, obs_particles).values;
  const Eigen::VectorXd g_y = kernel_vector(ky, obs_particles, y);

  std::optional<Eigen::MatrixXd> lmap;
  if (cfg.lambda_k > 0.0) {
    const Eigen::MatrixXd k_xx = gram(resolve_bandwidth(cfg.state_kernel, state.particles), state.particles).values;
    lmap = ridge_solve(k_xx, cfg.lambda_k, k_xx, "K_xx");
  }
  KernelKalmanUpdate up =
      kernel_kalman_update(state.w_minus, state.s_minus, g_yy, g_y, cfg.kappa, lmap ? &*lmap : nullptr);
  if (!up.w.allFinite() || !up.s.allFinite()) throw Diverged("akkf posterior weights are non-finite", state.n);
  state.w_plus = std::move(up.w);
  state.s_plus = std::move(up.s);
}

GaussianBelief estimate(const AkkfState& state, const AkkfConfig& cfg) {
  if (cfg.state_kernel.is_polynomial()) return extract_moments_poly(cfg.state_kernel, state.particles, state.w_plus);
  return project_moments(state.particles, state.w_plus, state.s_plus);
}

void propose(AkkfState& state, const AkkfConfig& cfg, Rng& rng) {
  GaussianBelief belief;
  try {
    belief = estimate(state, cfg);
  } catch (const NonFiniteInput&) {
    throw Diverged("akkf posterior covariance is non-finite", state.n);
  }
  const Eigen::MatrixXd factor = psd_factor(belief.cov);
  if (!factor.allFinite() || !belief.mean.allFinite())
    throw Diverged("akkf proposal distribution is non-finite", state.n);

  const Eigen::Index m = state.particles.size();
  Eigen::MatrixXd prop(belief.mean.size(), m);
  for (Eigen::Index i = 0; i < m; ++i) prop.col(i) = belief.mean + factor * standard_normal(rng, factor.cols());
  state.proposals = Ensemble(std::move(prop));

  const KernelSpec kx = resolve_bandwidth(cfg.state_kernel, state.proposals);
  state.proposal_gram = gram(kx, state.proposals).values;
  const Eigen::MatrixXd cross = gram(kx, state.proposals, state.particles).values;
  state.gamma = ridge_solve(state.proposal_gram, cfg.lambda_tilde, cross, "K_x~x~");
  state.w_tilde = state.gamma * state.w_plus;
  state.s_tilde = symmetrize(state.gamma * state.s_plus * state.gamma.transpose());
}

GaussianBelief step(AkkfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model,
                    const AkkfConfig& cfg, Rng& rng) {
  predict(state, model, cfg, rng);
  update(state, y, model, cfg, rng);
  GaussianBelief belief = estimate(state, cfg);
  propose(state, cfg, rng);
  return belief;
}

}  // namespace akkf
}  // namespace kkf
