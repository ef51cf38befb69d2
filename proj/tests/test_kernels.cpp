#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "kkf/kernels.hpp"
#include "kkf/rng.hpp"

using kkf::Ensemble;
using kkf::KernelSpec;

namespace {

Ensemble row(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return Ensemble(m);
}

Ensemble random_ensemble(kkf::Rng& rng, Eigen::Index d, Eigen::Index m) {
  Eigen::MatrixXd x(d, m);
  for (Eigen::Index j = 0; j < m; ++j) x.col(j) = kkf::standard_normal(rng, d);
  return Ensemble(x);
}

// Explicit quadratic feature map whose inner product is (<x, x'> + c)^2:
// [vec(x x^T); sqrt(2c) x; c].
Eigen::VectorXd quadratic_features(const Eigen::VectorXd& x, double c) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd f(d * d + d + 1);
  const Eigen::MatrixXd outer = x * x.transpose();
  f.head(d * d) = Eigen::Map<const Eigen::VectorXd>(outer.data(), d * d);
  f.segment(d * d, d) = std::sqrt(2.0 * c) * x;
  f[d * d + d] = c;
  return f;
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (a + a.transpose())).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("kernel_eval closed forms") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  CHECK(kkf::kernel_eval(KernelSpec::quadratic(1.0), a, b) == doctest::Approx(1.0));
  CHECK(kkf::kernel_eval(KernelSpec::gaussian(0.3), a, a) == doctest::Approx(1.0));

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
  CHECK(kkf::kernel_eval(KernelSpec::quartic(0.0), ones, ones) == doctest::Approx(16.0));
  CHECK(kkf::kernel_eval(KernelSpec::linear(), a, ones) == doctest::Approx(1.0));
  // exp(-|a - b|^2 / sigma^2) with |a - b|^2 = 2 and sigma = 2.
  CHECK(kkf::kernel_eval(KernelSpec::gaussian(2.0), a, b) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("kernel_eval rejects bad input") {
  Eigen::VectorXd a(2), b(3);
  a << 1, 2;
  b << 1, 2, 3;
  CHECK_THROWS_AS(kkf::kernel_eval(KernelSpec::linear(), a, b), kkf::DimensionMismatch);
  Eigen::VectorXd nan_vec(2);
  nan_vec << 1, std::nan("");
  CHECK_THROWS_AS(kkf::kernel_eval(KernelSpec::linear(), a, nan_vec), kkf::NonFiniteInput);
  CHECK_THROWS_AS(kkf::kernel_eval(KernelSpec::gaussian_median(), a, a), kkf::ConfigError);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(KernelSpec::quadratic(-1.0).validate(), kkf::ConfigError);
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0).validate(), kkf::ConfigError);
  CHECK_NOTHROW(KernelSpec::gaussian_median().validate());
}

TEST_CASE("ensemble invariants") {
  CHECK_THROWS_AS(Ensemble(Eigen::MatrixXd(0, 3)), kkf::DimensionMismatch);
  CHECK_THROWS_AS(Ensemble(Eigen::MatrixXd(2, 0)), kkf::DimensionMismatch);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(1, 2);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Ensemble{bad}, kkf::NonFiniteInput);
}

TEST_CASE("gram examples") {
  const Ensemble eye(Eigen::MatrixXd::Identity(2, 2));
  CHECK(kkf::gram(KernelSpec::linear(), eye).values.isApprox(Eigen::MatrixXd::Identity(2, 2)));

  const auto q = kkf::gram(KernelSpec::quadratic(1.0), row({1, 2})).values;
  Eigen::Matrix2d expected;
  expected << 4, 9, 9, 25;
  CHECK((q - expected).cwiseAbs().maxCoeff() < 1e-12);

  kkf::Rng rng(5);
  const auto g = kkf::gram(KernelSpec::gaussian(0.7), random_ensemble(rng, 3, 6)).values;
  CHECK((g.diagonal().array() - 1.0).abs().maxCoeff() == 0.0);

  const auto cross = kkf::gram(KernelSpec::linear(), row({1, 2}), row({3, 4, 5}));
  CHECK(cross.values.rows() == 2);
  CHECK(cross.values.cols() == 3);
  CHECK(cross.left.count == 2);
  CHECK(cross.right.count == 3);
  CHECK(cross.values(1, 2) == doctest::Approx(10.0));
  CHECK_THROWS_AS(kkf::gram(KernelSpec::linear(), row({1}), eye), kkf::DimensionMismatch);
}

TEST_CASE("gram entries equal kernel_eval, self-Gram symmetric and PSD") {
  kkf::Rng rng(11);
  const std::vector<KernelSpec> specs{KernelSpec::linear(), KernelSpec::quadratic(), KernelSpec::quartic(0.5),
                                      KernelSpec::gaussian(1.3)};
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + trial % 3;
    const Eigen::Index m = 2 + trial % 9;
    const Ensemble a = random_ensemble(rng, d, m);
    const Ensemble b = random_ensemble(rng, d, m + 1);
    for (const auto& spec : specs) {
      const Eigen::MatrixXd k = kkf::gram(spec, a).values;
      const double norm_inf = k.cwiseAbs().rowwise().sum().maxCoeff();
      CHECK((k - k.transpose()).cwiseAbs().rowwise().sum().maxCoeff() <= 1e-12 * (1.0 + norm_inf));
      CHECK(min_eigenvalue(k) >= -1e-10 * k.trace());

      const Eigen::MatrixXd kab = kkf::gram(spec, a, b).values;
      for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < b.size(); ++j) CHECK(kab(i, j) == kkf::kernel_eval(spec, a.col(i), b.col(j)));
      for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < a.size(); ++j) CHECK(k(i, j) == kkf::kernel_eval(spec, a.col(i), a.col(j)));
    }
  }
}

TEST_CASE("kernel_vector matches gram column") {
  kkf::Rng rng(3);
  const Ensemble a = random_ensemble(rng, 2, 5);
  const Eigen::VectorXd y = kkf::standard_normal(rng, 2);
  const auto spec = KernelSpec::gaussian(0.9);
  const Eigen::VectorXd kv = kkf::kernel_vector(spec, a, y);
  const Eigen::MatrixXd col = kkf::gram(spec, a, Ensemble(Eigen::MatrixXd(y))).values;
  CHECK((kv - col.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("median bandwidth") {
  const auto spec = KernelSpec::gaussian_median();
  CHECK(*kkf::resolve_bandwidth(spec, row({0, 2})).sigma == doctest::Approx(2.0));
  CHECK(*kkf::resolve_bandwidth(spec, row({0, 1, 3})).sigma == doctest::Approx(2.0));
  CHECK(*kkf::resolve_bandwidth(spec, row({5, 5, 5})).sigma == doctest::Approx(1.0));
  // Four points give six distances {1, 2, 3, 1, 2, 1}; the median averages the middle pair.
  CHECK(*kkf::resolve_bandwidth(spec, row({0, 1, 2, 3})).sigma == doctest::Approx(1.5));
  CHECK_THROWS_AS(kkf::resolve_bandwidth(spec, row({1})), kkf::ConfigError);

  const auto fixed = KernelSpec::gaussian(0.25);
  CHECK(*kkf::resolve_bandwidth(fixed, row({0, 9})).sigma == 0.25);
  CHECK(!kkf::resolve_bandwidth(KernelSpec::quadratic(), row({1})).sigma.has_value());
}

TEST_CASE("median bandwidth agrees with brute-force median") {
  kkf::Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Ensemble e = random_ensemble(rng, 2, 3 + trial);
    std::vector<double> d;
    for (Eigen::Index i = 0; i < e.size(); ++i)
      for (Eigen::Index j = i + 1; j < e.size(); ++j) d.push_back((e.col(i) - e.col(j)).norm());
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    const double med = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    CHECK(*kkf::resolve_bandwidth(KernelSpec::gaussian_median(), e).sigma == doctest::Approx(med).epsilon(1e-14));
  }
}

TEST_CASE("ridge_solve examples") {
  const Eigen::Vector3d b(1, -2, 3);
  const Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
  CHECK((kkf::ridge_solve(i3, 0.0, b) - b).norm() < 1e-14);
  CHECK((kkf::ridge_solve(i3, 1.0, b) - b / 2).norm() < 1e-14);

  Eigen::Matrix2d k;
  k << 2, 1, 1, 2;
  // inverse of [[2.5, 1], [1, 2.5]] = [[2.5, -1], [-1, 2.5]] / 5.25
  Eigen::Matrix2d inv;
  inv << 2.5, -1, -1, 2.5;
  inv /= 5.25;
  CHECK((kkf::ridge_solve(k, 0.5, Eigen::MatrixXd::Identity(2, 2)) - inv).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("ridge_solve residual on random SPD matrices") {
  kkf::Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 2 + trial;
    Eigen::MatrixXd a(m, m);
    for (Eigen::Index j = 0; j < m; ++j) a.col(j) = kkf::standard_normal(rng, m);
    const Eigen::MatrixXd k = a * a.transpose() + 1e-3 * Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd b(m, 3);
    for (int j = 0; j < 3; ++j) b.col(j) = kkf::standard_normal(rng, m);
    const double lambda = trial % 2 == 0 ? 0.0 : 1e-2;
    const Eigen::MatrixXd x = kkf::ridge_solve(k, lambda, b);
    const Eigen::MatrixXd resid = (k + lambda * Eigen::MatrixXd::Identity(m, m)) * x - b;
    CHECK(resid.norm() <= 1e-8 * (k.norm() + lambda) * x.norm());
  }
}

TEST_CASE("ridge_solve jitter and failure") {
  // Rank-one PSD matrix: plain Cholesky fails at lambda = 0, the jitter retry succeeds.
  Eigen::MatrixXd k = Eigen::MatrixXd::Ones(3, 3);
  const Eigen::MatrixXd x = kkf::ridge_solve(k, 0.0, Eigen::MatrixXd::Identity(3, 3));
  CHECK(x.allFinite());

  Eigen::Matrix2d neg;
  neg << -1, 0, 0, -1;
  try {
    (void)kkf::ridge_solve(neg, 0.0, Eigen::MatrixXd::Identity(2, 2), "K_test");
    FAIL("expected SingularMatrix");
  } catch (const kkf::SingularMatrix& e) {
    CHECK(e.matrix_name() == "K_test");
  }
  CHECK_THROWS_AS(kkf::ridge_solve(Eigen::MatrixXd::Identity(2, 2), 0.0, Eigen::MatrixXd::Identity(3, 3)),
                  kkf::DimensionMismatch);
}

TEST_CASE("psd_repair") {
  Eigen::Matrix2d a;
  a << 1, 2, 2, 1;  // eigenvalues 3 and -1
  const Eigen::MatrixXd r = kkf::psd_repair(a);
  CHECK((r - Eigen::Matrix2d::Constant(1.5)).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::Matrix2d spd;
  spd << 2, 0.5, 0.5, 1;
  CHECK((kkf::psd_repair(spd) - spd).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::Matrix2d asym;
  asym << 1, 1, 0, 1;
  const Eigen::MatrixXd s = kkf::psd_repair(asym);
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(min_eigenvalue(s) >= -1e-14);
}

TEST_CASE("extract_moments_poly examples") {
  const auto spec = KernelSpec::quadratic();
  const auto sym = kkf::extract_moments_poly(spec, row({-1, 1}), Eigen::Vector2d(0.5, 0.5));
  CHECK(sym.mean[0] == doctest::Approx(0.0));
  CHECK(sym.cov(0, 0) == doctest::Approx(1.0));

  Eigen::MatrixXd x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const auto point = kkf::extract_moments_poly(KernelSpec::quartic(), Ensemble(x), Eigen::Vector3d(0, 1, 0));
  CHECK((point.mean - x.col(1)).norm() < 1e-14);
  CHECK(point.cov.cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(kkf::extract_moments_poly(KernelSpec::gaussian(1.0), Ensemble(x), Eigen::Vector3d::Ones()),
                  kkf::ConfigError);
  CHECK_THROWS_AS(kkf::extract_moments_poly(spec, Ensemble(x), Eigen::Vector2d::Ones()), kkf::DimensionMismatch);
  CHECK_THROWS_AS(kkf::extract_moments_poly(spec, Ensemble(x), Eigen::Vector3d(1, std::nan(""), 0)),
                  kkf::NonFiniteInput);
}

TEST_CASE("explicit quadratic features reproduce the kernel") {
  kkf::Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd a = kkf::standard_normal(rng, 3);
    const Eigen::VectorXd b = kkf::standard_normal(rng, 3);
    const double c = 0.5 + trial;
    CHECK(quadratic_features(a, c).dot(quadratic_features(b, c)) ==
          doctest::Approx(kkf::kernel_eval(KernelSpec::quadratic(c), a, b)).epsilon(1e-12));
  }
}

TEST_CASE("extract_moments_poly equals the explicit-feature readout") {
  kkf::Rng rng(31);
  auto check_instance = [](const Ensemble& e, const Eigen::VectorXd& w, double c) {
    const Eigen::Index d = e.dim();
    Eigen::VectorXd embedding = Eigen::VectorXd::Zero(d * d + d + 1);
    for (Eigen::Index i = 0; i < e.size(); ++i) embedding += w[i] * quadratic_features(e.col(i), c);
    const Eigen::VectorXd mean = embedding.segment(d * d, d) / std::sqrt(2.0 * c);
    const Eigen::MatrixXd second = Eigen::Map<const Eigen::MatrixXd>(embedding.data(), d, d);
    const Eigen::MatrixXd cov = kkf::psd_repair(second - mean * mean.transpose());

    for (const auto& spec : {KernelSpec::quadratic(c), KernelSpec::quartic(c)}) {
      const auto got = kkf::extract_moments_poly(spec, e, w);
      const double scale = 1.0 + mean.norm();
      CHECK((got.mean - mean).norm() <= 1e-10 * scale);
      CHECK((got.cov - cov).norm() <= 1e-10 * (1.0 + cov.norm()));
    }
  };

  Eigen::MatrixXd x(2, 3);
  x << 0.3, -1.2, 2.0, 1.1, 0.4, -0.7;
  check_instance(Ensemble(x), Eigen::Vector3d(0.7, 0.5, -0.2), 1.0);

  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 1 + trial % 3;
    const Eigen::Index m = 1 + trial % 10;
    const Eigen::VectorXd w = kkf::standard_normal(rng, m);
    check_instance(random_ensemble(rng, d, m), w, 0.5 + 0.1 * trial);
  }
}

TEST_CASE("project_moments") {
  Eigen::MatrixXd x(1, 3);
  x << 1, 2, 6;
  const auto a = kkf::project_moments(Ensemble(x), Eigen::Vector3d::Constant(1.0 / 3), Eigen::Matrix3d::Zero());
  CHECK(a.mean[0] == doctest::Approx(3.0));
  CHECK(a.cov(0, 0) == doctest::Approx(0.0));

  Eigen::MatrixXd one(2, 1);
  one << 2, -1;
  const auto b = kkf::project_moments(Ensemble(one), Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, 0.5));
  CHECK((b.mean - one.col(0)).norm() < 1e-15);
  CHECK((b.cov - 0.5 * one * one.transpose()).norm() < 1e-14);

  kkf::Rng rng(37);
  const Ensemble e = random_ensemble(rng, 2, 3);
  const Eigen::VectorXd w = kkf::standard_normal(rng, 3);
  Eigen::MatrixXd l(3, 3);
  for (int j = 0; j < 3; ++j) l.col(j) = kkf::standard_normal(rng, 3);
  const Eigen::MatrixXd s = l * l.transpose();
  const auto c = kkf::project_moments(e, w, s);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 3; ++i) {
    mean += w[i] * e.col(i);
    for (int j = 0; j < 3; ++j) cov += s(i, j) * e.col(i) * e.col(j).transpose();
  }
  CHECK((c.mean - mean).norm() < 1e-12);
  CHECK((c.cov - cov).norm() < 1e-12 * (1 + cov.norm()));

  CHECK_THROWS_AS(kkf::project_moments(e, Eigen::Vector2d::Ones(), s), kkf::DimensionMismatch);
  CHECK_THROWS_AS(kkf::project_moments(e, w, Eigen::Matrix2d::Identity()), kkf::DimensionMismatch);
}

TEST_CASE("project_moments with centering matrix gives sample moments") {
  kkf::Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index m = 3 + trial;
    const Eigen::Index d = 1 + trial % 3;
    const Ensemble e = random_ensemble(rng, d, m);
    const double md = static_cast<double>(m);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / md);
    const Eigen::MatrixXd s =
        Eigen::MatrixXd::Identity(m, m) / md - Eigen::MatrixXd::Ones(m, m) / (md * md);
    const auto got = kkf::project_moments(e, w, s);

    const Eigen::VectorXd mean = e.particles().rowwise().mean();
    const Eigen::MatrixXd centered = e.particles().colwise() - mean;
    const Eigen::MatrixXd cov = centered * centered.transpose() / md;
    CHECK((got.mean - mean).norm() <= 1e-10);
    CHECK((got.cov - cov).norm() <= 1e-10);
  }
}
