#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kkf/akkf.hpp"
#include "kkf/kernels.hpp"
#include "kkf/models.hpp"
#include "kkf/rng.hpp"

namespace kkf {

// ---------------------------------------------------------------- bootstrap PF

struct PfState {
  Ensemble particles;
  Eigen::VectorXd weights;  // non-negative, sums to 1
  int n = 0;
};

struct PfStep {
  Eigen::VectorXd mean;  // weighted mean before resampling
};

PfState pf_init(const StateSpaceModel& model, int particles, Rng& rng);

/// Bootstrap proposal, likelihood weighting (log-sum-exp normalized), weighted
/// mean, then systematic resampling. Throws DegenerateWeights when every
/// log-likelihood is -inf.
PfStep pf_step(PfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model, Rng& rng);

/// Systematic resampling: M indices using a single uniform offset.
std::vector<Eigen::Index> systematic_resample(const Eigen::VectorXd& weights, Rng& rng);

/// Normalizes log-weights in place into probabilities; returns the log normalizer.
double normalize_log_weights(Eigen::VectorXd& log_w);

// ---------------------------------------------------------------- Gaussian PF

/// One Gaussian particle filter step for the state produced at index n.
/// No resampling: the weighted sample is collapsed into new Gaussian moments.
GaussianBelief gpf_step(const GaussianBelief& belief, const Eigen::VectorXd& y, int n,
                        const StateSpaceModel& model, int particles, Rng& rng);

// ---------------------------------------------------------------- UKF

struct UkfParams {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;
};

struct UkfState {
  GaussianBelief belief;
  UkfParams params;
  int n = 0;
  int psd_repairs = 0;  // number of post-update covariance repairs
};

struct SigmaPoints {
  Eigen::MatrixXd points;  // d x (2d + 1)
  Eigen::VectorXd mean_weights;
  Eigen::VectorXd cov_weights;
};

SigmaPoints sigma_points(const GaussianBelief& belief, const UkfParams& params);

UkfState ukf_init(const StateSpaceModel& model, const UkfParams& params = {});

/// Additive-noise unscented Kalman step; innovations go through model.innovation().
void ukf_step(UkfState& state, const Eigen::VectorXd& y, const StateSpaceModel& model);

// ---------------------------------------------------------------- data-driven KKR

struct KkrModel {
  Ensemble predecessors;
  Ensemble states;
  Ensemble observations;
  KernelSpec state_kernel;  // resolved
  KernelSpec obs_kernel;    // resolved
  Eigen::MatrixXd transition;  // T = (K_pp + lambda I)^{-1} K_ps
  Eigen::MatrixXd residual;    // V
  Eigen::MatrixXd obs_gram;    // G_yy of the training observations
  double lambda = 0.0;
  double kappa = 1e-3;
};

/// Learns the kernel transition T and residual V from training triples
/// (x_prev^i, x^i, y^i). Median-heuristic bandwidths are resolved on the
/// predecessor and observation ensembles.
KkrModel kkr_fit(const Ensemble& predecessors, const Ensemble& states, const Ensemble& observations,
                 const KernelSpec& state_kernel, const KernelSpec& obs_kernel, double lambda, double kappa);

struct KkrStep {
  Eigen::VectorXd w;
  Eigen::MatrixXd s;
  GaussianBelief belief;
};

/// w- = T w+, S- = T S+ T^T + V, kernel Kalman correction against y,
/// projection onto the training states.
KkrStep kkr_step(const KkrModel& model, const Eigen::VectorXd& w, const Eigen::MatrixXd& s,
                 const Eigen::VectorXd& y);

}  // namespace kkf
