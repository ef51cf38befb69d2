#pragma once

#include <optional>

#include <Eigen/Dense>

#include "kkf/kernels.hpp"
#include "kkf/models.hpp"
#include "kkf/rng.hpp"

namespace kkf {

struct AkkfConfig {
  KernelSpec state_kernel = KernelSpec::quadratic();
  KernelSpec obs_kernel = KernelSpec::gaussian_median();
  int particles = 20;
  double lambda_tilde = 1e-3;  // change-of-basis ridge
  double kappa = 1e-3;         // gain ridge
  double lambda_k = 0.0;       // likelihood-operator ridge

  void validate() const;
};

/// Filter state: the particle bases and the kernel weight mean/covariance in
/// each of them. The embedded mean is Phi w and the covariance operator is
/// Phi S Phi^T, where Phi holds the feature maps of `particles` (or of
/// `proposals` for the tilde quantities).
struct AkkfState {
  Ensemble particles;
  Ensemble proposals;
  Eigen::VectorXd w_minus, w_plus, w_tilde;
  Eigen::MatrixXd s_minus, s_plus, s_tilde;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd proposal_gram;  // self-Gram of `proposals`; feeds the next transition residual
  Eigen::MatrixXd residual;       // V_n of the latest prediction
  int n = 0;                      // time index of the latest completed step
};

/// Outcome of one kernel Kalman correction.
struct KernelKalmanUpdate {
  Eigen::VectorXd w;
  Eigen::MatrixXd s;
  Eigen::MatrixXd gain;
};

/// Kernel Kalman correction shared by the adaptive filter and data-driven KKR:
///   Q  = S (G S + kappa I)^{-1}
///   w+ = w + Q (g - G w)
///   S+ = S - Q G S        (symmetrized)
/// When `likelihood_map` L = (K + lambda_K I)^{-1} K is given, G is replaced by
/// G L and S by S L^T in the gain. Q is obtained from the equivalent system
/// (S G + kappa I) Q = S without forming an inverse.
KernelKalmanUpdate kernel_kalman_update(const Eigen::VectorXd& w_minus, const Eigen::MatrixXd& s_minus,
                                        const Eigen::MatrixXd& g_yy, const Eigen::VectorXd& g_y, double kappa,
                                        const Eigen::MatrixXd* likelihood_map = nullptr);

/// V = (1/M) [(K + lambda I)^{-1} K - I][...]^T, evaluated as
/// (lambda^2 / M) (K + lambda I)^{-2}.
Eigen::MatrixXd transition_residual(const Eigen::MatrixXd& k, double lambda);

namespace akkf {

AkkfState init(const StateSpaceModel& model, const AkkfConfig& cfg, Rng& rng);

/// Propagates the proposal particles and predicts (w, S) for step n + 1.
void predict(AkkfState& state, const StateSpaceModel& model, const AkkfConfig& cfg, Rng& rng);

/// Corrects (w, S) with observation y using freshly simulated observation particles.
void update(AkkfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model, const AkkfConfig& cfg,
            Rng& rng);

/// Data-space moments of the posterior embedding (particles, w+, S+).
GaussianBelief estimate(const AkkfState& state, const AkkfConfig& cfg);

/// Draws proposal particles from the posterior moments and re-expresses the
/// posterior in their basis.
void propose(AkkfState& state, const AkkfConfig& cfg, Rng& rng);

/// predict -> update -> estimate -> propose; returns the estimate.
GaussianBelief step(AkkfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model,
                    const AkkfConfig& cfg, Rng& rng);

}  // namespace akkf
}  // namespace kkf
