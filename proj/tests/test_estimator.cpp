#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "htmm/error.hpp"
#include "htmm/estimator.hpp"
#include "htmm/moments.hpp"
#include "htmm/oracles.hpp"
#include "htmm/simulator.hpp"

using namespace htmm;
using htmm::testing::bleach_only;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

CameraModel background(double sigma) {
  CameraModel c;
  c.sigma = {sigma};
  return c;
}

double dense_loglik(const SecondOrderParams& g, const CameraModel& cam, const Eigen::VectorXd& y) {
  const int T = static_cast<int>(y.size());
  const Eigen::MatrixXd S = covariance(g, cam, T);
  const Eigen::VectorXd d = y - mean_trace(g, T);
  const Eigen::MatrixXd inv = S.inverse();
  const double logdet = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().array().log().sum();
  return -0.5 * (d.dot(inv * d) + logdet);
}

}  // namespace

TEST_CASE("pseudo_loglik") {
  SecondOrderParams dark;
  dark.m = 1.0;
  dark.nu0 = 0.0;
  dark.q00 = 0.9;
  dark.lambda = Eigen::Vector2d(0.9, 1.0);
  dark.alpha0 = Eigen::Vector2d(1.0, 0.0);
  dark.alpha1 = Eigen::Vector2d(0.0, 0.0);
  dark.theta = {10.0, 0.5, 0.0};
  const CameraModel cam = background(2.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(30);
  CHECK(pseudo_loglik(dark, cam, zero) == doctest::Approx(-0.5 * 30 * std::log(4.0)).epsilon(1e-13));

  Rng rng = Rng::derive(31, {});
  const OuterModelSpec spec = random_model(2, rng, 0.5, true);
  const auto g = second_order_from_model(spec, {20.0, 0.6, 0.1}, 2.0);
  const CameraModel noisy = background(3.0);
  const int T = 60;
  const Eigen::VectorXd mu = mean_trace(g, T);
  const double at_mean = pseudo_loglik(g, noisy, mu);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance(g, noisy, T));
  for (int k : {0, T / 2, T - 1}) {
    const Eigen::VectorXd v = eig.eigenvectors().col(k);
    CHECK(pseudo_loglik(g, noisy, mu + 0.5 * v) < at_mean);
    CHECK(pseudo_loglik(g, noisy, mu - 2.0 * v) < pseudo_loglik(g, noisy, mu - 0.5 * v));
  }

  for (int i = 0; i < 5; ++i) {
    const OuterModelSpec s = random_model(1 + i % 3, rng, 0.5, true);
    const auto gi = second_order_from_model(s, htmm::testing::realizable_theta(s.q00(), rng), 1.0 + i);
    const Eigen::VectorXd y = mean_trace(gi, 200) + Eigen::VectorXd::Random(200);
    const double a = pseudo_loglik(gi, noisy, y);
    CHECK(std::abs(a - dense_loglik(gi, noisy, y)) < 1e-8 * std::abs(a));
  }

  // Merged eigenvalues give the same value.
  SecondOrderParams split = g;
  split.lambda = Eigen::Vector4d(g.lambda(0), g.lambda(0), g.lambda(1), 1.0);
  split.alpha0 = Eigen::Vector4d(0.3 * g.alpha0(0), 0.7 * g.alpha0(0), g.alpha0(1), 0.0);
  split.alpha1 = Eigen::Vector4d::Zero();
  CHECK(pseudo_loglik(split, noisy, mu) == doctest::Approx(at_mean).epsilon(1e-12));

  SecondOrderParams broken = g;
  broken.alpha0(0) += 0.1;
  CHECK(kind_of([&] { pseudo_loglik(broken, noisy, mu); }) == ErrorKind::ConstraintViolation);
}

TEST_CASE("init_params") {
  const int T = 200;
  Eigen::VectorXd y(T);
  for (int t = 0; t < T; ++t) y(t) = 2.0 * 50.0 * std::pow(0.95, t);
  const SecondOrderParams g = init_params(y, 1, background(0.0));
  CHECK(std::abs(g.lambda(0) - 0.95) < 1e-3);
  CHECK(g.lambda(1) == 1.0);
  CHECK(check_constraints(g).pass);

  CHECK(kind_of([&] { init_params(Eigen::VectorXd::Zero(100), 2, background(1.0)); }) ==
        ErrorKind::DegenerateTrace);
  CHECK(kind_of([&] { init_params(y.head(20), 3, background(1.0)); }) ==
        ErrorKind::InsufficientData);
}

TEST_CASE("fit contracts") {
  const SimulationConfig c = htmm::testing::reference_config(2, 120);
  const Trace tr = simulate_trace(c, 0);
  CameraModel cam = c.camera;

  FitOptions opt;
  opt.r = 3;
  opt.m_grid = {1, 2, 3};
  opt.seed = 5;
  const FitResult a = fit(tr.y, cam, opt);
  REQUIRE(a.profile.size() == 3);
  REQUIRE(a.per_m.size() == 3);
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (const auto& [m, ll] : a.profile)
    if (ll > best) {
      best = ll;
      arg = m;
    }
  CHECK(a.m_hat == arg);
  CHECK(a.loglik == best);
  CHECK(a.gamma_hat.m == a.m_hat);
  CHECK(a.diagnostics.constraints.max_abs() < 1e-6);
  for (const auto& p : a.per_m) CHECK(check_constraints(p, 1e-6).pass);
  CHECK(pseudo_loglik(a.gamma_hat, cam, tr.y) == doctest::Approx(a.loglik).epsilon(1e-12));

  const FitResult b = fit(tr.y, cam, opt);
  CHECK(b.loglik == a.loglik);
  CHECK(b.gamma_hat.lambda == a.gamma_hat.lambda);

  FitOptions single = opt;
  single.m_grid = {3};
  CHECK(fit(tr.y, cam, single).profile.size() == 1);

  FitOptions bad = opt;
  bad.m_grid.clear();
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("self-consistency at the true parameters") {
  const SimulationConfig c = htmm::testing::reference_config(2, 100);
  const ThetaParams theta = htmm::testing::normalized_theta(c);
  const SecondOrderParams truth = second_order_from_model(c.spec, theta, 2.0);
  const Eigen::VectorXd y = mean_trace(truth, c.T);
  const double at_truth = pseudo_loglik(truth, c.camera, y);

  FitOptions opt;
  opt.r = 3;
  opt.m_grid = {2};
  opt.nu0_fixed = 1.0;
  const FitResult res = fit_from(y, c.camera, opt, truth);
  CHECK(res.loglik >= at_truth - opt.tol);
}

TEST_CASE("generic mode leaves theta2 free") {
  const SimulationConfig c = htmm::testing::reference_config(1, 100);
  const Trace tr = simulate_trace(c, 3);
  FitOptions opt;
  opt.r = 2;
  opt.m_grid = {1};
  opt.alexa = false;
  opt.nu0_fixed = 1.0;
  const FitResult res = fit(tr.y, c.camera, opt);
  CHECK(res.gamma_hat.theta.theta2 > 0.0);
  CHECK(res.gamma_hat.theta.theta2 < 1.0);
  CHECK(res.gamma_hat.nu0 == 1.0);
}

TEST_CASE("calibrate_camera") {
  std::vector<std::pair<double, double>> pairs;
  for (double mean : {10.0, 40.0, 90.0, 200.0, 500.0}) pairs.emplace_back(mean, 30.0 * mean + 4.0);
  const CalibrationResult r = calibrate_camera(pairs, 2.0);
  CHECK(std::abs(r.a - 15.0) < 1e-9);
  CHECK(std::abs(r.intercept - 4.0) < 1e-9);
  CHECK(kind_of([&] { calibrate_camera({{10.0, 300.0}}, 2.0); }) == ErrorKind::IllConditioned);
  CHECK(kind_of([&] {
          calibrate_camera({{10.0, 300.0}, {11.0, 330.0}, {12.0, 360.0}}, 2.0);
        }) == ErrorKind::IllConditioned);
}
