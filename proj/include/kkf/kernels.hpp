#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "kkf/error.hpp"

namespace kkf {

enum class KernelKind { Linear, Quadratic, Quartic, Gaussian };

std::string to_string(KernelKind kind);

/// Kernel choice and hyperparameters.
///
/// A Gaussian kernel with no bandwidth set uses the median heuristic; such a
/// spec must be passed through resolve_bandwidth() before evaluation.
struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double c = 1.0;                // polynomial offset (Quadratic, Quartic)
  std::optional<double> sigma;   // Gaussian bandwidth; nullopt = median heuristic

  static KernelSpec linear() { return {KernelKind::Linear, 0.0, std::nullopt}; }
  static KernelSpec quadratic(double c = 1.0) { return {KernelKind::Quadratic, c, std::nullopt}; }
  static KernelSpec quartic(double c = 1.0) { return {KernelKind::Quartic, c, std::nullopt}; }
  static KernelSpec gaussian(double sigma) { return {KernelKind::Gaussian, 0.0, sigma}; }
  static KernelSpec gaussian_median() { return {KernelKind::Gaussian, 0.0, std::nullopt}; }

  bool is_polynomial() const { return kind == KernelKind::Quadratic || kind == KernelKind::Quartic; }
  bool needs_bandwidth() const { return kind == KernelKind::Gaussian && !sigma.has_value(); }
  void validate() const;
};

/// An ordered set of M particles of dimension d, stored column-wise.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(Eigen::MatrixXd particles);

  const Eigen::MatrixXd& particles() const { return x_; }
  Eigen::Index dim() const { return x_.rows(); }
  Eigen::Index size() const { return x_.cols(); }
  auto col(Eigen::Index i) const { return x_.col(i); }

 private:
  Eigen::MatrixXd x_;
};

/// Kernel matrix between two ensembles. `values(i, j) = k(a_i, b_j)`.
struct GramMatrix {
  struct Fingerprint {
    Eigen::Index dim = 0;
    Eigen::Index count = 0;
  };
  Eigen::MatrixXd values;
  Fingerprint left;
  Fingerprint right;
};

/// Data-space mean and covariance.
struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2);

GramMatrix gram(const KernelSpec& spec, const Ensemble& a, const Ensemble& b);

/// Self-Gram; computes the upper triangle once so the result is exactly symmetric.
GramMatrix gram(const KernelSpec& spec, const Ensemble& a);

/// Kernel vector [k(a_1, y), ..., k(a_M, y)].
Eigen::VectorXd kernel_vector(const KernelSpec& spec, const Ensemble& a,
                              const Eigen::Ref<const Eigen::VectorXd>& y);

/// Replaces the median-heuristic sentinel by the median pairwise Euclidean
/// distance of `e` (1 when that median is 0). Specs that are already resolved
/// are returned unchanged.
KernelSpec resolve_bandwidth(const KernelSpec& spec, const Ensemble& e);

/// (K + lambda I)^{-1} B via Cholesky, with jitter escalation on failure.
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& k, double lambda, const Eigen::MatrixXd& b,
                            const std::string& name = "K");
Eigen::MatrixXd ridge_solve(const GramMatrix& k, double lambda, const Eigen::MatrixXd& b,
                            const std::string& name = "K");

/// Symmetrize, clamp negative eigenvalues to zero, reconstruct.
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& c);

/// Marginal readout of a weighted polynomial-kernel embedding:
/// mean = sum w_i x_i, cov = psd_repair(sum w_i x_i x_i^T - mean mean^T).
GaussianBelief extract_moments_poly(const KernelSpec& spec, const Ensemble& e,
                                    const Eigen::VectorXd& w);

/// Projection of (w, S) onto the particle matrix: mean = X w, cov = psd_repair(X S X^T).
GaussianBelief project_moments(const Ensemble& e, const Eigen::VectorXd& w,
                               const Eigen::MatrixXd& s);

}  // namespace kkf
