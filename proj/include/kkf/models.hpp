#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "kkf/error.hpp"
#include "kkf/rng.hpp"

namespace kkf {

/// Discrete-time dynamic state-space model
///   x_n = f(x_{n-1}, u_n, n),   y_n = h(x_n, v_n).
///
/// Besides the sampling interface used by particle methods, every model also
/// describes itself in additive-Gaussian form (prior moments, noise
/// covariances, innovation) for sigma-point filters.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual int default_horizon() const = 0;

  /// `n` is the 1-based index of the state being produced.
  virtual Eigen::VectorXd process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const = 0;
  virtual Eigen::VectorXd measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const = 0;
  virtual Eigen::VectorXd sample_process_noise(Rng& rng) const = 0;
  virtual Eigen::VectorXd sample_measurement_noise(Rng& rng) const = 0;
  virtual double measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd sample_prior(Rng& rng) const = 0;

  Eigen::VectorXd process_mean(const Eigen::VectorXd& x, int n) const;
  Eigen::VectorXd measure_mean(const Eigen::VectorXd& x) const;

  virtual Eigen::VectorXd prior_mean() const = 0;
  virtual Eigen::MatrixXd prior_cov() const = 0;
  virtual Eigen::MatrixXd process_noise_cov(const Eigen::VectorXd& x, int n) const = 0;
  virtual Eigen::MatrixXd measurement_noise_cov() const = 0;
  /// y - y_pred, wrapped where the observation is an angle.
  virtual Eigen::VectorXd innovation(const Eigen::VectorXd& y, const Eigen::VectorXd& y_pred) const;

 protected:
  virtual int process_noise_dim() const = 0;
  virtual int measurement_noise_dim() const = 0;
};

using ModelPtr = std::shared_ptr<const StateSpaceModel>;

/// Univariate nonstationary growth model.
class Ungm final : public StateSpaceModel {
 public:
  static constexpr double kAlpha = 0.5;
  static constexpr double kBeta = 25.0;
  static constexpr double kGamma = 8.0;
  static constexpr double kSigmaU = 1.0;
  static constexpr double kSigmaV = 1.0;
  static constexpr double kX0 = 0.1;

  std::string name() const override { return "ungm"; }
  int state_dim() const override { return 1; }
  int obs_dim() const override { return 1; }
  int default_horizon() const override { return 100; }

  Eigen::VectorXd process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const override;
  Eigen::VectorXd measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const override;
  Eigen::VectorXd sample_process_noise(Rng& rng) const override;
  Eigen::VectorXd sample_measurement_noise(Rng& rng) const override;
  double measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample_prior(Rng& rng) const override;

  Eigen::VectorXd prior_mean() const override;
  Eigen::MatrixXd prior_cov() const override;
  Eigen::MatrixXd process_noise_cov(const Eigen::VectorXd& x, int n) const override;
  Eigen::MatrixXd measurement_noise_cov() const override;

 protected:
  int process_noise_dim() const override { return 1; }
  int measurement_noise_dim() const override { return 1; }
};

/// Four-quadrant bearing atan2(eta, xi) of the position components (0, 2).
double bearing(const Eigen::VectorXd& x);
/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Shared bearing sensor and position/velocity prior of both tracking models.
class BearingsOnlyBase : public StateSpaceModel {
 public:
  static constexpr double kSigmaBearing = 5e-3;

  int obs_dim() const override { return 1; }
  int default_horizon() const override { return 30; }

  Eigen::VectorXd measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const override;
  Eigen::VectorXd sample_measurement_noise(Rng& rng) const override;
  double measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd measurement_noise_cov() const override;
  Eigen::VectorXd innovation(const Eigen::VectorXd& y, const Eigen::VectorXd& y_pred) const override;

  /// Prior mean of [xi, xi_dot, eta, eta_dot].
  static Eigen::Vector4d kinematic_prior_mean();
  /// Raw prior covariance (not symmetric).
  static Eigen::Matrix4d kinematic_prior_cov_raw();
  /// PSD repair of the raw covariance; the law used for prior sampling.
  static Eigen::Matrix4d kinematic_prior_cov();

 protected:
  BearingsOnlyBase();
  Eigen::Vector4d sample_kinematic_prior(Rng& rng) const;
  int measurement_noise_dim() const override { return 1; }

 private:
  Eigen::Matrix4d prior_factor_;
};

/// Bearings-only tracking with constant-velocity motion, state [xi, xi_dot, eta, eta_dot].
class BotCv final : public BearingsOnlyBase {
 public:
  static constexpr double kTs = 1.0;
  static constexpr double kSigmaU = 1e-3;

  std::string name() const override { return "bot-cv"; }
  int state_dim() const override { return 4; }

  static Eigen::Matrix4d transition();
  static Eigen::Matrix<double, 4, 2> noise_gain();

  Eigen::VectorXd process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const override;
  Eigen::VectorXd sample_process_noise(Rng& rng) const override;
  Eigen::VectorXd sample_prior(Rng& rng) const override;

  Eigen::VectorXd prior_mean() const override;
  Eigen::MatrixXd prior_cov() const override;
  Eigen::MatrixXd process_noise_cov(const Eigen::VectorXd& x, int n) const override;

 protected:
  int process_noise_dim() const override { return 2; }
};

/// Bearings-only tracking with coordinated-turn motion and a random-walk turn
/// rate, state [xi, xi_dot, eta, eta_dot, omega]. The turn rate is divided by
/// three at n = horizon / 2.
class BotCt final : public BearingsOnlyBase {
 public:
  static constexpr double kTs = 1.0;
  static constexpr double kSigmaV = 1e-3;
  static constexpr double kSigmaOmega = 1e-2;
  static constexpr double kSmallOmega = 1e-6;

  explicit BotCt(int horizon = 30);

  std::string name() const override { return "bot-ct"; }
  int state_dim() const override { return 5; }
  int default_horizon() const override { return horizon_; }
  int switch_step() const { return horizon_ / 2; }

  /// Position/velocity transition for turn rate omega (Taylor limit near 0).
  static Eigen::Matrix4d transition(double omega);
  /// Position/velocity noise shape R(omega) (Taylor limit near 0).
  static Eigen::Matrix4d noise_shape(double omega);
  /// Deterministic part of the turn-rate recursion for the state at step n.
  double next_turn_rate(double omega, int n) const;

  /// `noise` is a standard-normal 5-vector: four components shaped by
  /// sigma_v * sqrt(R(omega_n)), the last scaled by sigma_omega.
  Eigen::VectorXd process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const override;
  Eigen::VectorXd sample_process_noise(Rng& rng) const override;
  Eigen::VectorXd sample_prior(Rng& rng) const override;

  Eigen::VectorXd prior_mean() const override;
  Eigen::MatrixXd prior_cov() const override;
  Eigen::MatrixXd process_noise_cov(const Eigen::VectorXd& x, int n) const override;

 protected:
  int process_noise_dim() const override { return 5; }

 private:
  int horizon_;
};

/// Linear-Gaussian model x_n = A x_{n-1} + w, y_n = H x_n + v.
class LinearGaussianModel final : public StateSpaceModel {
 public:
  LinearGaussianModel(Eigen::MatrixXd a, Eigen::MatrixXd h, Eigen::MatrixXd q, Eigen::MatrixXd r,
                      Eigen::VectorXd m0, Eigen::MatrixXd p0, int horizon = 10);

  std::string name() const override { return "linear-gaussian"; }
  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int obs_dim() const override { return static_cast<int>(h_.rows()); }
  int default_horizon() const override { return horizon_; }

  Eigen::VectorXd process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const override;
  Eigen::VectorXd measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const override;
  Eigen::VectorXd sample_process_noise(Rng& rng) const override;
  Eigen::VectorXd sample_measurement_noise(Rng& rng) const override;
  double measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample_prior(Rng& rng) const override;

  Eigen::VectorXd prior_mean() const override { return m0_; }
  Eigen::MatrixXd prior_cov() const override { return p0_; }
  Eigen::MatrixXd process_noise_cov(const Eigen::VectorXd&, int) const override { return q_; }
  Eigen::MatrixXd measurement_noise_cov() const override { return r_; }

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& h() const { return h_; }

 protected:
  int process_noise_dim() const override { return static_cast<int>(q_.rows()); }
  int measurement_noise_dim() const override { return static_cast<int>(r_.rows()); }

 private:
  Eigen::MatrixXd a_, h_, q_, r_, p0_;
  Eigen::VectorXd m0_;
  Eigen::MatrixXd q_factor_, r_factor_, p0_factor_;
  Eigen::LLT<Eigen::MatrixXd> r_llt_;
  double r_log_det_ = 0.0;
  int horizon_;
};

ModelPtr make_ungm();
ModelPtr make_bot_cv();
ModelPtr make_bot_ct(int horizon = 30);

/// Symmetric square-root factor L with L L^T = psd_repair(c); handles singular c.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c);

struct Trajectory {
  Eigen::MatrixXd states;        // d_x x N, column n-1 holds x_n
  Eigen::MatrixXd observations;  // d_y x N
  Eigen::Index horizon() const { return states.cols(); }
};

/// Draws x_0 from the prior and runs the recursion for n = 1..N. Per step the
/// process noise is drawn before the measurement noise.
Trajectory simulate(const StateSpaceModel& model, int horizon, Rng& rng);

void write_trajectory_csv(std::ostream& out, const Trajectory& t);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace kkf
