#include "kkf/models.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kkf/kernels.hpp"

namespace kkf {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double gaussian_log_pdf(double residual, double sigma) {
  const double z = residual / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

void require_dims(const Eigen::VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw DimensionMismatch(std::string(what) + ": wrong vector length");
}

// x - sin(x), accurate near zero.
double x_minus_sin(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    double term = x * x2 / 6.0;
    double sum = 0.0;
    for (int k = 1; k <= 6; ++k) {
      sum += term;
      term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
    return sum;
  }
  return x - std::sin(x);
}

// 1 - cos(x) without cancellation.
double one_minus_cos(double x) {
  const double s = std::sin(0.5 * x);
  return 2.0 * s * s;
}

Eigen::Matrix4d psd_factor4(const Eigen::Matrix4d& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(0.5 * (c + c.transpose()));
  const Eigen::Vector4d root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

Eigen::VectorXd StateSpaceModel::process_mean(const Eigen::VectorXd& x, int n) const {
  return process(x, Eigen::VectorXd::Zero(process_noise_dim()), n);
}

Eigen::VectorXd StateSpaceModel::measure_mean(const Eigen::VectorXd& x) const {
  return measure(x, Eigen::VectorXd::Zero(measurement_noise_dim()));
}

Eigen::VectorXd StateSpaceModel::innovation(const Eigen::VectorXd& y, const Eigen::VectorXd& y_pred) const {
  return y - y_pred;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c) {
  const Eigen::MatrixXd repaired = psd_repair(c);
  Eigen::LLT<Eigen::MatrixXd> llt(repaired);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd l = llt.matrixL();
    if (l.allFinite()) return l;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(repaired);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// ---------------------------------------------------------------- UNGM

Eigen::VectorXd Ungm::process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const {
  require_dims(x, 1, "ungm process");
  require_dims(noise, 1, "ungm process noise");
  const double v = x[0];
  return scalar(kAlpha * v + kBeta * v / (1.0 + v * v) + kGamma * std::cos(1.2 * (n - 1)) + noise[0]);
}

Eigen::VectorXd Ungm::measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const {
  require_dims(x, 1, "ungm measure");
  return scalar(x[0] * x[0] / 20.0 + noise[0]);
}

Eigen::VectorXd Ungm::sample_process_noise(Rng& rng) const { return kSigmaU * standard_normal(rng, 1); }
Eigen::VectorXd Ungm::sample_measurement_noise(Rng& rng) const { return kSigmaV * standard_normal(rng, 1); }

double Ungm::measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  return gaussian_log_pdf(y[0] - x[0] * x[0] / 20.0, kSigmaV);
}

Eigen::VectorXd Ungm::sample_prior(Rng&) const { return scalar(kX0); }
Eigen::VectorXd Ungm::prior_mean() const { return scalar(kX0); }
Eigen::MatrixXd Ungm::prior_cov() const { return Eigen::MatrixXd::Zero(1, 1); }
Eigen::MatrixXd Ungm::process_noise_cov(const Eigen::VectorXd&, int) const {
  return Eigen::MatrixXd::Constant(1, 1, kSigmaU * kSigmaU);
}
Eigen::MatrixXd Ungm::measurement_noise_cov() const { return Eigen::MatrixXd::Constant(1, 1, kSigmaV * kSigmaV); }

// ---------------------------------------------------------------- bearings

double bearing(const Eigen::VectorXd& x) {
  if (x[0] == 0.0 && x[2] == 0.0) throw DomainError("bearing undefined at the observer position");
  return std::atan2(x[2], x[0]);
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

BearingsOnlyBase::BearingsOnlyBase() : prior_factor_(psd_factor4(kinematic_prior_cov())) {}

Eigen::VectorXd BearingsOnlyBase::measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const {
  if (x.size() < 3) throw DimensionMismatch("bearing measure: state too short");
  return scalar(bearing(x) + noise[0]);
}

Eigen::VectorXd BearingsOnlyBase::sample_measurement_noise(Rng& rng) const {
  return kSigmaBearing * standard_normal(rng, 1);
}

double BearingsOnlyBase::measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  // atan2(0, 0) = 0 is accepted here; a particle exactly at the observer is measure-zero.
  return gaussian_log_pdf(wrap_angle(y[0] - std::atan2(x[2], x[0])), kSigmaBearing);
}

Eigen::MatrixXd BearingsOnlyBase::measurement_noise_cov() const {
  return Eigen::MatrixXd::Constant(1, 1, kSigmaBearing * kSigmaBearing);
}

Eigen::VectorXd BearingsOnlyBase::innovation(const Eigen::VectorXd& y, const Eigen::VectorXd& y_pred) const {
  return scalar(wrap_angle(y[0] - y_pred[0]));
}

Eigen::Vector4d BearingsOnlyBase::kinematic_prior_mean() { return {-0.05, 0.001, 0.7, -0.05}; }

Eigen::Matrix4d BearingsOnlyBase::kinematic_prior_cov_raw() {
  Eigen::Matrix4d p;
  p << 0.1, 0.0, 0.0, 0.0,
       0.0, 0.005, 0.0, 0.0,
       0.0, 0.0, 0.1, 1.0,
       0.0, 0.0, 0.0, 0.01;
  return p;
}

Eigen::Matrix4d BearingsOnlyBase::kinematic_prior_cov() { return psd_repair(kinematic_prior_cov_raw()); }

Eigen::Vector4d BearingsOnlyBase::sample_kinematic_prior(Rng& rng) const {
  Eigen::Vector4d z = standard_normal(rng, 4);
  return kinematic_prior_mean() + prior_factor_ * z;
}

// ---------------------------------------------------------------- BOT-CV

Eigen::Matrix4d BotCv::transition() {
  Eigen::Matrix4d f;
  f << 1, kTs, 0, 0,
       0, 1, 0, 0,
       0, 0, 1, kTs,
       0, 0, 0, 1;
  return f;
}

Eigen::Matrix<double, 4, 2> BotCv::noise_gain() {
  Eigen::Matrix<double, 4, 2> g;
  g << 0.5, 0.0,
       1.0, 0.0,
       0.0, 0.5,
       0.0, 1.0;
  return g;
}

Eigen::VectorXd BotCv::process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int) const {
  require_dims(x, 4, "bot-cv process");
  require_dims(noise, 2, "bot-cv process noise");
  const Eigen::Vector4d v = x;
  const Eigen::Vector2d u = noise;
  return Eigen::Vector4d(transition() * v + noise_gain() * u);
}

Eigen::VectorXd BotCv::sample_process_noise(Rng& rng) const { return kSigmaU * standard_normal(rng, 2); }
Eigen::VectorXd BotCv::sample_prior(Rng& rng) const { return sample_kinematic_prior(rng); }
Eigen::VectorXd BotCv::prior_mean() const { return kinematic_prior_mean(); }
Eigen::MatrixXd BotCv::prior_cov() const { return kinematic_prior_cov(); }

Eigen::MatrixXd BotCv::process_noise_cov(const Eigen::VectorXd&, int) const {
  const Eigen::Matrix<double, 4, 2> g = noise_gain();
  return kSigmaU * kSigmaU * g * g.transpose();
}

// ---------------------------------------------------------------- BOT-CT

BotCt::BotCt(int horizon) : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("bot-ct horizon must be >= 1");
}

Eigen::Matrix4d BotCt::transition(double omega) {
  const double wt = omega * kTs;
  double s_over_w;  // sin(wT) / w
  double c_over_w;  // (1 - cos(wT)) / w
  if (std::abs(omega) < kSmallOmega) {
    s_over_w = kTs - omega * omega * kTs * kTs * kTs / 6.0;
    c_over_w = omega * kTs * kTs / 2.0;
  } else {
    s_over_w = std::sin(wt) / omega;
    c_over_w = one_minus_cos(wt) / omega;
  }
  const double c = std::cos(wt);
  const double s = std::sin(wt);
  Eigen::Matrix4d a;
  a << 1, s_over_w, 0, -c_over_w,
       0, c, 0, -s,
       0, c_over_w, 1, s_over_w,
       0, s, 0, c;
  return a;
}

Eigen::Matrix4d BotCt::noise_shape(double omega) {
  const double t = kTs;
  double a3;  // (wT - sin wT) / w^3
  double a2;  // (wT - sin wT) / w^2
  double b2;  // (1 - cos wT) / w^2
  if (std::abs(omega) < kSmallOmega) {
    const double w2 = omega * omega;
    a3 = t * t * t / 6.0 - w2 * std::pow(t, 5) / 120.0;
    a2 = omega * t * t * t / 6.0;
    b2 = t * t / 2.0 - w2 * std::pow(t, 4) / 24.0;
  } else {
    const double wt = omega * t;
    const double xs = x_minus_sin(wt);
    a3 = xs / (omega * omega * omega);
    a2 = xs / (omega * omega);
    b2 = one_minus_cos(wt) / (omega * omega);
  }
  Eigen::Matrix4d r;
  r << 2 * a3, b2, 0, a2,
       b2, t, -a3, 0,
       0, -a3, 2 * a3, b2,
       a2, 0, b2, t;
  return r;
}

double BotCt::next_turn_rate(double omega, int n) const { return n == switch_step() ? omega / 3.0 : omega; }

Eigen::VectorXd BotCt::process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int n) const {
  require_dims(x, 5, "bot-ct process");
  require_dims(noise, 5, "bot-ct process noise");
  const double omega_prev = x[4];
  const double omega = next_turn_rate(omega_prev, n) + kSigmaOmega * noise[4];
  const Eigen::Vector4d kin = transition(omega_prev) * Eigen::Vector4d(x.head<4>());
  Eigen::VectorXd out(5);
  const Eigen::Vector4d z = noise.head<4>();
  if (z.isZero(0.0)) {
    out.head<4>() = kin;
  } else {
    out.head<4>() = kin + kSigmaV * psd_factor4(noise_shape(omega)) * z;
  }
  out[4] = omega;
  return out;
}

Eigen::VectorXd BotCt::sample_process_noise(Rng& rng) const { return standard_normal(rng, 5); }

Eigen::VectorXd BotCt::sample_prior(Rng& rng) const {
  Eigen::VectorXd x(5);
  x.head<4>() = sample_kinematic_prior(rng);
  std::uniform_real_distribution<double> rate(0.0, std::numbers::pi / 6.0);
  x[4] = rate(rng);
  return x;
}

Eigen::VectorXd BotCt::prior_mean() const {
  Eigen::VectorXd m(5);
  m.head<4>() = kinematic_prior_mean();
  m[4] = std::numbers::pi / 12.0;
  return m;
}

Eigen::MatrixXd BotCt::prior_cov() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(5, 5);
  p.topLeftCorner<4, 4>() = kinematic_prior_cov();
  const double width = std::numbers::pi / 6.0;
  p(4, 4) = width * width / 12.0;
  return p;
}

Eigen::MatrixXd BotCt::process_noise_cov(const Eigen::VectorXd& x, int n) const {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(5, 5);
  q.topLeftCorner<4, 4>() = kSigmaV * kSigmaV * psd_repair(noise_shape(next_turn_rate(x[4], n)));
  q(4, 4) = kSigmaOmega * kSigmaOmega;
  return q;
}

// ---------------------------------------------------------------- linear-Gaussian

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd a, Eigen::MatrixXd h, Eigen::MatrixXd q,
                                         Eigen::MatrixXd r, Eigen::VectorXd m0, Eigen::MatrixXd p0,
                                         int horizon)
    : a_(std::move(a)), h_(std::move(h)), q_(std::move(q)), r_(std::move(r)), p0_(std::move(p0)),
      m0_(std::move(m0)), horizon_(horizon) {
  const Eigen::Index dx = a_.rows();
  if (a_.cols() != dx || h_.cols() != dx || q_.rows() != dx || q_.cols() != dx ||
      r_.rows() != h_.rows() || r_.cols() != h_.rows() || m0_.size() != dx || p0_.rows() != dx ||
      p0_.cols() != dx)
    throw DimensionMismatch("linear-gaussian model: inconsistent shapes");
  q_factor_ = psd_factor(q_);
  r_factor_ = psd_factor(r_);
  p0_factor_ = psd_factor(p0_);
  r_llt_.compute(r_);
  if (r_llt_.info() != Eigen::Success) throw ConfigError("measurement covariance must be positive definite");
  r_log_det_ = 2.0 * r_llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd LinearGaussianModel::process(const Eigen::VectorXd& x, const Eigen::VectorXd& noise, int) const {
  return a_ * x + noise;
}

Eigen::VectorXd LinearGaussianModel::measure(const Eigen::VectorXd& x, const Eigen::VectorXd& noise) const {
  return h_ * x + noise;
}

Eigen::VectorXd LinearGaussianModel::sample_process_noise(Rng& rng) const {
  return q_factor_ * standard_normal(rng, q_factor_.cols());
}

Eigen::VectorXd LinearGaussianModel::sample_measurement_noise(Rng& rng) const {
  return r_factor_ * standard_normal(rng, r_factor_.cols());
}

double LinearGaussianModel::measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  const Eigen::VectorXd e = y - h_ * x;
  const double quad = e.dot(r_llt_.solve(e));
  return -0.5 * quad - 0.5 * r_log_det_ - static_cast<double>(e.size()) * kLogSqrt2Pi;
}

Eigen::VectorXd LinearGaussianModel::sample_prior(Rng& rng) const {
  return m0_ + p0_factor_ * standard_normal(rng, p0_factor_.cols());
}

// ---------------------------------------------------------------- factories

ModelPtr make_ungm() { return std::make_shared<Ungm>(); }
ModelPtr make_bot_cv() { return std::make_shared<BotCv>(); }
ModelPtr make_bot_ct(int horizon) { return std::make_shared<BotCt>(horizon); }

// ---------------------------------------------------------------- simulation

Trajectory simulate(const StateSpaceModel& model, int horizon, Rng& rng) {
  if (horizon < 1) throw ConfigError("simulate: horizon must be >= 1");
  Trajectory t{Eigen::MatrixXd(model.state_dim(), horizon), Eigen::MatrixXd(model.obs_dim(), horizon)};
  Eigen::VectorXd x = model.sample_prior(rng);
  for (int n = 1; n <= horizon; ++n) {
    x = model.process(x, model.sample_process_noise(rng), n);
    if (!x.allFinite()) throw Diverged("simulation diverged", n);
    const Eigen::VectorXd y = model.measure(x, model.sample_measurement_noise(rng));
    if (!y.allFinite()) throw Diverged("simulation produced a non-finite observation", n);
    t.states.col(n - 1) = x;
    t.observations.col(n - 1) = y;
  }
  return t;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& t) {
  out << "n";
  for (Eigen::Index i = 1; i <= t.states.rows(); ++i) out << ",x" << i;
  for (Eigen::Index i = 1; i <= t.observations.rows(); ++i) out << ",y" << i;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Eigen::Index n = 0; n < t.horizon(); ++n) {
    out << n + 1;
    for (Eigen::Index i = 0; i < t.states.rows(); ++i) out << ',' << t.states(i, n);
    for (Eigen::Index i = 0; i < t.observations.rows(); ++i) out << ',' << t.observations(i, n);
    out << '\n';
  }
  out.precision(old_precision);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  return cells;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory csv: missing header");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "n") throw ConfigError("trajectory csv: header must start with n");
  Eigen::Index dx = 0;
  Eigen::Index dy = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string expect_x = "x" + std::to_string(dx + 1);
    const std::string expect_y = "y" + std::to_string(dy + 1);
    if (dy == 0 && header[i] == expect_x) {
      ++dx;
    } else if (header[i] == expect_y) {
      ++dy;
    } else {
      throw ConfigError("trajectory csv: unexpected column " + header[i]);
    }
  }
  if (dx == 0 || dy == 0) throw ConfigError("trajectory csv: need state and observation columns");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw ConfigError("trajectory csv: ragged row");
    if (std::stol(cells[0]) != static_cast<long>(rows.size()) + 1)
      throw ConfigError("trajectory csv: rows must be numbered 1..N in order");
    std::vector<double> vals;
    for (std::size_t i = 1; i < cells.size(); ++i) vals.push_back(std::stod(cells[i]));
    rows.push_back(std::move(vals));
  }
  Trajectory t{Eigen::MatrixXd(dx, static_cast<Eigen::Index>(rows.size())),
               Eigen::MatrixXd(dy, static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (Eigen::Index i = 0; i < dx; ++i) t.states(i, static_cast<Eigen::Index>(n)) = rows[n][static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < dy; ++i)
      t.observations(i, static_cast<Eigen::Index>(n)) = rows[n][static_cast<std::size_t>(dx + i)];
  }
  return t;
}

}  // namespace kkf
