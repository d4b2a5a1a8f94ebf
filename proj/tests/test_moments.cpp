#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "htmm/error.hpp"
#include "htmm/moments.hpp"
#include "htmm/oracles.hpp"

using namespace htmm;
using htmm::testing::bleach_only;
using htmm::testing::make_spec;
using htmm::testing::unit;

namespace {

double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

CameraModel noisy_camera(double f2, double sigma) {
  CameraModel c;
  c.f2 = f2;
  c.sigma = {sigma};
  return c;
}

}  // namespace

TEST_CASE("alpha_from_model") {
  Rng rng = Rng::derive(11, {});
  for (int i = 0; i < 50; ++i) {
    const int r = 1 + i % 3;
    const OuterModelSpec spec = random_model(r, rng);
    const auto decomp = spectral_decompose(build_matrices(spec).total);
    const AlphaSet a = alpha_from_model(spec, decomp);
    const double nu0 = spec.nu(0);
    CHECK((a.alpha - (nu0 * a.alpha0 + (1.0 - nu0) * a.alpha1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(a.alpha0.sum() - 1.0) < 1e-10);

    // Sum of alpha is mu_1 / (m theta1) = (M nu)_0 / q00, and M_{0z} = q00 q(0, z).
    double expected = spec.nu(0);
    for (int z = 1; z < r; ++z) expected += spec.q(0, z) * spec.nu(z);
    CHECK(std::abs(a.alpha.sum() - expected) < 1e-10);
  }

  Eigen::MatrixXd q(3, 2);
  q << 0.8, 0.3, 0.15, 0.6, 0.05, 0.1;
  const OuterModelSpec bright = make_spec(2, q, unit(3, 0));
  const AlphaSet ab = alpha_from_model(bright, spectral_decompose(build_matrices(bright).total));
  CHECK(max_abs(ab.alpha, ab.alpha0) < 1e-15);
  CHECK(ab.alpha1.cwiseAbs().maxCoeff() == 0.0);

  const OuterModelSpec bleached = make_spec(2, q, unit(3, 2));
  const AlphaSet az = alpha_from_model(bleached, spectral_decompose(build_matrices(bleached).total));
  CHECK(az.alpha.cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd qc(4, 3);
  qc << 0.1, 0.0, 1.0, 0.0, 0.1, 0.0, 0.9, 0.9, 0.0, 0.0, 0.0, 0.0;
  const OuterModelSpec complex_model = make_spec(3, qc, unit(4, 0));
  const auto decomp = spectral_decompose(build_matrices(complex_model).total);
  if (!decomp.is_real)
    CHECK(kind_of([&] { alpha_from_model(complex_model, decomp); }) == ErrorKind::ComplexSpectrum);
}

TEST_CASE("mean_trace") {
  const ThetaParams theta{40.0, 0.6, 0.2};
  const OuterModelSpec spec = bleach_only(0.9);
  const auto g = second_order_from_model(spec, theta, 3.0);
  const Eigen::VectorXd mu = mean_trace(g, 20);
  for (int t = 1; t <= 20; ++t)
    CHECK(mu(t - 1) == doctest::Approx(3.0 * 40.0 * std::pow(0.9, t - 1)).epsilon(1e-13));

  const auto g6 = second_order_from_model(spec, theta, 6.0);
  CHECK(max_abs(mean_trace(g6, 20), 2.0 * mu) < 1e-12);
  CHECK(max_abs(matrix_power_mean(spec, theta.theta1, 3.0, 20), mu) < 1e-10);

  OuterModelSpec bleached = spec;
  bleached.nu = unit(2, 1);
  CHECK(matrix_power_mean(bleached, theta.theta1, 3.0, 20).cwiseAbs().maxCoeff() == 0.0);

  Rng rng = Rng::derive(12, {});
  for (int i = 0; i < 30; ++i) {
    const OuterModelSpec s = random_model(1 + i % 3, rng, 0.5, true);
    const ThetaParams th = random_theta(rng);
    const auto gi = second_order_from_model(s, th, 2.0);
    const Eigen::VectorXd mi = mean_trace(gi, 100);
    CHECK(mi(0) == doctest::Approx(2.0 * th.theta1).epsilon(1e-12));
    CHECK(max_abs(mi, matrix_power_mean(s, th.theta1, 2.0, 100)) < 1e-10);
  }
}

TEST_CASE("constraint checks") {
  SecondOrderParams g;
  g.m = 1.0;
  g.nu0 = 1.0;
  g.q00 = 0.8;
  g.lambda = Eigen::Vector2d(0.8, 1.0);
  g.alpha0 = Eigen::Vector2d(1.0, 0.0);
  g.alpha1 = Eigen::Vector2d(0.0, 0.0);
  g.theta = {10.0, 0.5, 0.0};
  ConstraintReport rep = check_constraints(g);
  CHECK(rep.pass);
  CHECK(rep.max_abs() < 1e-15);

  g.alpha0(0) += 0.01;
  rep = check_constraints(g);
  CHECK_FALSE(rep.pass);
  CHECK(rep.sum_alpha0 == doctest::Approx(0.01));
  CHECK(kind_of([&] { mean_trace(g, 5); }) == ErrorKind::ConstraintViolation);

  Rng rng = Rng::derive(13, {});
  for (int i = 0; i < 50; ++i) {
    const auto gi = second_order_from_model(random_model(1 + i % 3, rng), random_theta(rng), 1.0);
    CHECK(check_constraints(gi).max_abs() < 1e-10);
  }
}

TEST_CASE("covariance limits") {
  const ThetaParams theta{30.0, 0.7, 0.4};
  OuterModelSpec dark = bleach_only(0.9);
  dark.nu = unit(2, 1);
  const CameraModel cam = noisy_camera(1.4, 2.5);
  const Eigen::MatrixXd S = covariance(second_order_from_model(dark, theta, 2.0), cam, 8);
  CHECK(max_abs(S, Eigen::MatrixXd::Identity(8, 8) * 6.25) < 1e-12);

  // Diagonal pattern with explicit coefficients.
  Rng rng = Rng::derive(14, {});
  const OuterModelSpec spec = random_model(2, rng, 0.5, true);
  const double m = 3.0;
  const auto g = second_order_from_model(spec, theta, m);
  const Eigen::VectorXd mu = mean_trace(g, 30);
  const Eigen::MatrixXd Sigma = covariance(g, cam, 30);
  for (int t = 0; t < 30; ++t) {
    const double expected =
        (theta.theta1 * (theta.theta3 + 1.0) + cam.f2) * mu(t) - mu(t) * mu(t) / m + 6.25;
    CHECK(Sigma(t, t) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(max_abs(Sigma, Sigma.transpose()) == 0.0);

  // Off-diagonals scale linearly in m.
  const auto g2 = second_order_from_model(spec, theta, 2.0 * m);
  const Eigen::MatrixXd Sigma2 = covariance(g2, cam, 30);
  for (int t = 1; t < 30; ++t)
    for (int u = 0; u < t; ++u) CHECK(std::abs(Sigma2(t, u) - 2.0 * Sigma(t, u)) < 1e-9);
}

TEST_CASE("spectral and matrix-power duality") {
  Rng rng = Rng::derive(15, {});
  double worst_mu = 0.0;
  double worst_sigma = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int r = 1 + i % 3;
    const OuterModelSpec spec = random_model(r, rng, 0.5, rng.uniform() < 0.5);
    const ThetaParams theta = random_theta(rng);
    const double m = 1.0 + std::floor(4.0 * rng.uniform());
    const CameraModel cam = noisy_camera(1.0 + rng.uniform(), rng.uniform());
    const auto g = second_order_from_model(spec, theta, m);
    const int T = i < 90 ? 50 : 100;
    worst_mu = std::max(worst_mu, max_abs(mean_trace(g, T), matrix_power_mean(spec, theta.theta1, m, T)));
    worst_sigma = std::max(worst_sigma, max_abs(covariance(g, cam, T),
                                                matrix_moment_covariance(spec, theta, m, cam, T)));
  }
  CHECK(worst_mu < 1e-9);
  CHECK(worst_sigma < 1e-9);
}

TEST_CASE("enumeration agreement and PSD") {
  Rng rng = Rng::derive(16, {});
  for (int i = 0; i < 10; ++i) {
    const OuterModelSpec spec = random_model(1, rng, 0.5, rng.uniform() < 0.5);
    const ThetaParams theta = random_theta(rng);
    const CameraModel cam = noisy_camera(1.0 + rng.uniform(), rng.uniform());
    const MomentSet exact = enumerate_marginals(spec, theta, 2.0, cam, 6);
    const auto g = second_order_from_model(spec, theta, 2.0);
    CHECK(max_abs(mean_trace(g, 6), exact.mu) < 1e-9);
    CHECK(max_abs(covariance(g, cam, 6), exact.Sigma) < 1e-9);
  }
  for (int i = 0; i < 30; ++i) {
    const OuterModelSpec spec = random_model(1 + i % 3, rng, 0.5, rng.uniform() < 0.5);
    const auto g = second_order_from_model(spec, htmm::testing::realizable_theta(spec.q00(), rng), 2.0);
    const Eigen::MatrixXd S = covariance(g, noisy_camera(1.2, 0.1), 40);
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff();
    CHECK(lo > -1e-8);
  }
}

TEST_CASE("canonicalize merges equal eigenvalues") {
  SecondOrderParams g;
  g.m = 2.0;
  g.nu0 = 1.0;
  g.lambda = Eigen::Vector3d(0.9, 0.9, 1.0);
  g.alpha0 = Eigen::Vector3d(0.4, 0.6, 0.0);
  g.alpha1 = Eigen::Vector3d::Zero();
  g.q00 = 0.9;
  g.theta = {10.0, 0.5, 0.1};
  const SecondOrderParams c = canonicalize(g);
  const CameraModel cam = noisy_camera(1.0, 0.3);
  CHECK(max_abs(mean_trace(g, 20), mean_trace(c, 20)) < 1e-13);
  CHECK(max_abs(covariance(g, cam, 20), covariance(c, cam, 20)) < 1e-12);
  CHECK(c.alpha0(0) == doctest::Approx(1.0));
}

TEST_CASE("moment set bundles mean, bright-start mean and covariance") {
  const OuterModelSpec spec = bleach_only(0.95);
  const auto g = second_order_from_model(spec, {20.0, 0.8, 0.0}, 1.0);
  const MomentSet ms = moment_set(g, CameraModel{}, 10);
  CHECK(ms.mu.size() == 10);
  CHECK(ms.mu0.size() == 11);
  CHECK(ms.Sigma.rows() == 10);
  CHECK(ms.mu0(1) == doctest::Approx(ms.mu(0)));
}
