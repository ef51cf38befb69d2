#include "kkf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace kkf {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Quadratic: return "quadratic";
    case KernelKind::Quartic: return "quartic";
    case KernelKind::Gaussian: return "gaussian";
  }
  return "unknown";
}

void KernelSpec::validate() const {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("kernel offset c must be finite and >= 0");
  if (sigma && !(*sigma > 0.0 && std::isfinite(*sigma)))
    throw ConfigError("gaussian bandwidth must be finite and > 0");
}

Ensemble::Ensemble(Eigen::MatrixXd particles) : x_(std::move(particles)) {
  if (x_.rows() < 1 || x_.cols() < 1) throw DimensionMismatch("ensemble needs d >= 1 and M >= 1");
  if (!x_.allFinite()) throw NonFiniteInput("ensemble contains non-finite entries");
}

namespace {

double eval_unchecked(const KernelSpec& spec, const double* a, const double* b, Eigen::Index d) {
  switch (spec.kind) {
    case KernelKind::Linear: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) s += a[i] * b[i];
      return s;
    }
    case KernelKind::Quadratic: {
      double s = spec.c;
      for (Eigen::Index i = 0; i < d; ++i) s += a[i] * b[i];
      return s * s;
    }
    case KernelKind::Quartic: {
      double s = spec.c;
      for (Eigen::Index i = 0; i < d; ++i) s += a[i] * b[i];
      const double s2 = s * s;
      return s2 * s2;
    }
    case KernelKind::Gaussian: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
      }
      return std::exp(-s / (*spec.sigma * *spec.sigma));
    }
  }
  return 0.0;
}

void require_resolved(const KernelSpec& spec) {
  if (spec.needs_bandwidth())
    throw ConfigError("gaussian kernel bandwidth must be resolved before evaluation");
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2) {
  require_resolved(spec);
  if (x.size() != x2.size()) throw DimensionMismatch("kernel_eval: dimension mismatch");
  if (!x.allFinite() || !x2.allFinite()) throw NonFiniteInput("kernel_eval: non-finite input");
  return eval_unchecked(spec, x.data(), x2.data(), x.size());
}

GramMatrix gram(const KernelSpec& spec, const Ensemble& a, const Ensemble& b) {
  require_resolved(spec);
  if (a.dim() != b.dim()) throw DimensionMismatch("gram: ensembles differ in dimension");
  const Eigen::Index d = a.dim();
  GramMatrix g{Eigen::MatrixXd(a.size(), b.size()), {a.dim(), a.size()}, {b.dim(), b.size()}};
  const double* pa = a.particles().data();
  const double* pb = b.particles().data();
  for (Eigen::Index j = 0; j < b.size(); ++j)
    for (Eigen::Index i = 0; i < a.size(); ++i)
      g.values(i, j) = eval_unchecked(spec, pa + i * d, pb + j * d, d);
  return g;
}

GramMatrix gram(const KernelSpec& spec, const Ensemble& a) {
  require_resolved(spec);
  const Eigen::Index d = a.dim();
  const Eigen::Index m = a.size();
  GramMatrix g{Eigen::MatrixXd(m, m), {d, m}, {d, m}};
  const double* p = a.particles().data();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = eval_unchecked(spec, p + i * d, p + j * d, d);
      g.values(i, j) = v;
      g.values(j, i) = v;
    }
  }
  return g;
}

Eigen::VectorXd kernel_vector(const KernelSpec& spec, const Ensemble& a,
                              const Eigen::Ref<const Eigen::VectorXd>& y) {
  require_resolved(spec);
  if (y.size() != a.dim()) throw DimensionMismatch("kernel_vector: dimension mismatch");
  if (!y.allFinite()) throw NonFiniteInput("kernel_vector: non-finite query");
  const Eigen::VectorXd yv = y;
  Eigen::VectorXd out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out[i] = eval_unchecked(spec, a.particles().data() + i * a.dim(), yv.data(), a.dim());
  return out;
}

KernelSpec resolve_bandwidth(const KernelSpec& spec, const Ensemble& e) {
  if (!spec.needs_bandwidth()) return spec;
  const Eigen::Index m = e.size();
  if (m < 2) throw ConfigError("median heuristic needs at least two particles");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index j = 1; j < m; ++j)
    for (Eigen::Index i = 0; i < j; ++i) dist.push_back((e.col(i) - e.col(j)).norm());

  const std::size_t n = dist.size();
  const std::size_t mid = n / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  KernelSpec out = spec;
  out.sigma = median > 0.0 ? median : 1.0;
  return out;
}

Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& k, double lambda, const Eigen::MatrixXd& b,
                            const std::string& name) {
  if (k.rows() != k.cols()) throw DimensionMismatch("ridge_solve: " + name + " is not square");
  if (b.rows() != k.rows()) throw DimensionMismatch("ridge_solve: right-hand side row mismatch");
  if (!(lambda >= 0.0)) throw ConfigError("ridge_solve: lambda must be >= 0");

  const Eigen::Index m = k.rows();
  const double tr = k.trace();
  const double jitter = 1e-10 * (tr > 0.0 && std::isfinite(tr) ? tr / static_cast<double>(m) : 1.0);

  double extra = 0.0;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += lambda + extra;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd x = llt.solve(b);
      if (x.allFinite()) return x;
    }
    extra = extra == 0.0 ? jitter : extra * 10.0;
  }
  throw SingularMatrix(name);
}

Eigen::MatrixXd ridge_solve(const GramMatrix& k, double lambda, const Eigen::MatrixXd& b,
                            const std::string& name) {
  return ridge_solve(k.values, lambda, b, name);
}

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols()) throw DimensionMismatch("psd_repair: matrix is not square");
  const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
  if (!sym.allFinite()) throw NonFiniteInput("psd_repair: non-finite covariance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NonFiniteInput("psd_repair: eigendecomposition failed");
  const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
  if ((eig.eigenvalues().array() >= 0.0).all()) return sym;
  Eigen::MatrixXd out = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

GaussianBelief extract_moments_poly(const KernelSpec& spec, const Ensemble& e,
                                    const Eigen::VectorXd& w) {
  if (!spec.is_polynomial()) throw ConfigError("extract_moments_poly needs a polynomial kernel");
  if (w.size() != e.size()) throw DimensionMismatch("extract_moments_poly: weight length mismatch");
  if (!w.allFinite()) throw NonFiniteInput("extract_moments_poly: non-finite weights");
  const Eigen::MatrixXd& x = e.particles();
  Eigen::VectorXd mean = x * w;
  Eigen::MatrixXd second = x * w.asDiagonal() * x.transpose();
  return {mean, psd_repair(second - mean * mean.transpose())};
}

GaussianBelief project_moments(const Ensemble& e, const Eigen::VectorXd& w,
                               const Eigen::MatrixXd& s) {
  if (w.size() != e.size()) throw DimensionMismatch("project_moments: weight length mismatch");
  if (s.rows() != e.size() || s.cols() != e.size())
    throw DimensionMismatch("project_moments: weight covariance shape mismatch");
  const Eigen::MatrixXd& x = e.particles();
  return {x * w, psd_repair(x * s * x.transpose())};
}

}  // namespace kkf
