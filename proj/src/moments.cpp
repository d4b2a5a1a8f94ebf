#include "htmm/moments.hpp"

#include <cmath>
#include <sstream>

#include "htmm/error.hpp"

namespace htmm {

namespace {

constexpr double kMaxQ00 = 1.0 - 1e-6;

Eigen::VectorXd coefficients_for(const SpectralDecomposition& d,
                                 const Eigen::VectorXd& nu, double q00) {
  const Eigen::VectorXcd projected = d.V_inv * nu.cast<std::complex<double>>();
  Eigen::VectorXd out(d.lambda.size());
  for (Eigen::Index x = 0; x < d.lambda.size(); ++x)
    out[x] = (d.V(0, x) * d.lambda[x] / q00 * projected[x]).real();
  return out;
}

// Tiny negative means from cancellation are set to zero before they enter
// the covariance.
Eigen::VectorXd clamp_means(Eigen::VectorXd mu) {
  const double scale = mu.cwiseAbs().maxCoeff();
  for (Eigen::Index t = 0; t < mu.size(); ++t)
    if (mu[t] < 0.0 && -mu[t] <= 1e-12 * scale) mu[t] = 0.0;
  return mu;
}

void require_camera(const CameraModel& camera) {
  if (!(camera.a > 0.0)) throw Error(ErrorKind::InvalidConfig, "camera.a must be > 0");
  if (!(camera.f2 >= 1.0 && camera.f2 <= 2.0))
    throw Error(ErrorKind::InvalidConfig, "camera.f2 must lie in [1,2]");
}

}  // namespace

AlphaSet alpha_from_model(const OuterModelSpec& spec,
                          const SpectralDecomposition& decomp) {
  spec.validate();
  if (!decomp.is_real)
    throw Error(ErrorKind::ComplexSpectrum, "spectrum of M is not real");
  const double q00 = spec.q00();
  if (!(q00 > 0.0 && q00 < 1.0))
    throw Error(ErrorKind::InvalidSpec, "q00 must lie in (0,1)");

  const int n = spec.states();
  AlphaSet a;
  a.alpha = coefficients_for(decomp, spec.nu, q00);
  a.alpha0 = coefficients_for(decomp, Eigen::VectorXd::Unit(n, 0), q00);
  const double nu0 = spec.nu[0];
  if (nu0 < 1.0) {
    Eigen::VectorXd rest = spec.nu;
    rest[0] = 0.0;
    a.alpha1 = coefficients_for(decomp, rest / (1.0 - nu0), q00);
  } else {
    a.alpha1 = Eigen::VectorXd::Zero(n);
  }
  return a;
}

SecondOrderParams second_order_from_model(const OuterModelSpec& spec,
                                          const ThetaParams& theta, double m) {
  const TransitionMatrices mats = build_matrices(spec);
  const SpectralDecomposition d = spectral_decompose(mats.total);
  const AlphaSet a = alpha_from_model(spec, d);
  SecondOrderParams g;
  g.m = m;
  g.nu0 = spec.nu[0];
  g.q00 = spec.q00();
  g.lambda = d.real_lambda();
  g.alpha0 = a.alpha0;
  g.alpha1 = a.alpha1;
  g.theta = theta;
  return g;
}

double ConstraintReport::max_abs() const {
  return std::max({std::abs(sum_alpha0), std::abs(inverse_alpha0),
                   std::abs(inverse_alpha1), std::abs(alpha1_range),
                   std::abs(bleached)});
}

ConstraintReport check_constraints(const SecondOrderParams& g, double tol) {
  ConstraintReport rep;
  const Eigen::Index n = g.lambda.size();
  if (n < 2 || g.alpha0.size() != n || g.alpha1.size() != n) {
    rep.bleached = std::numeric_limits<double>::infinity();
    return rep;
  }
  rep.sum_alpha0 = g.alpha0.sum() - 1.0;
  rep.inverse_alpha0 = g.alpha0.cwiseQuotient(g.lambda).sum() - 1.0 / g.q00;
  rep.inverse_alpha1 = g.alpha1.cwiseQuotient(g.lambda).sum();
  const double s = g.q00 * g.alpha1.sum();
  rep.alpha1_range = std::max({0.0, -s, s - 1.0});
  rep.bleached = std::abs(g.alpha0[n - 1]) + std::abs(g.alpha1[n - 1]) +
                 std::abs(g.lambda[n - 1] - 1.0);
  rep.pass = std::isfinite(rep.max_abs()) && rep.max_abs() < tol;
  return rep;
}

void require_valid(const SecondOrderParams& g, double tol) {
  const Eigen::Index n = g.lambda.size();
  if (n < 2 || g.alpha0.size() != n || g.alpha1.size() != n)
    throw Error(ErrorKind::ConstraintViolation, "lambda/alpha0/alpha1 size mismatch");
  if (!(g.m > 0.0)) throw Error(ErrorKind::ConstraintViolation, "m must be > 0");
  if (!(g.nu0 >= 0.0 && g.nu0 <= 1.0))
    throw Error(ErrorKind::ConstraintViolation, "nu0 must lie in [0,1]");
  if (!(g.q00 > 0.0 && g.q00 <= kMaxQ00))
    throw Error(ErrorKind::ConstraintViolation, "q00 must lie in (0, 1 - 1e-6]");
  for (Eigen::Index x = 0; x < n; ++x)
    if (!(g.lambda[x] > 0.0 && g.lambda[x] <= 1.0))
      throw Error(ErrorKind::ConstraintViolation, "lambda must lie in (0,1]");
  if (!(g.theta.theta1 > 0.0))
    throw Error(ErrorKind::ConstraintViolation, "theta1 must be > 0");
  if (!(g.theta.theta2 > 0.0 && g.theta.theta2 < 1.0))
    throw Error(ErrorKind::ConstraintViolation, "theta2 must lie in (0,1)");
  if (!(g.theta.theta3 >= -1.0))
    throw Error(ErrorKind::ConstraintViolation, "theta3 must be >= -1");
  const ConstraintReport rep = check_constraints(g, tol);
  if (!rep.pass) {
    std::ostringstream os;
    os << "constraint residual " << rep.max_abs();
    throw Error(ErrorKind::ConstraintViolation, os.str());
  }
}

Eigen::VectorXd mean_trace(const SecondOrderParams& g, int T) {
  require_valid(g);
  if (T < 1) throw Error(ErrorKind::InvalidConfig, "T must be >= 1");
  const Eigen::VectorXd alpha = g.nu0 * g.alpha0 + (1.0 - g.nu0) * g.alpha1;
  const double scale = g.m * g.theta.theta1;
  Eigen::VectorXd mu(T);
  for (int t = 1; t <= T; ++t) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < alpha.size(); ++x)
      s += alpha[x] * std::pow(g.lambda[x], t - 1);
    mu[t - 1] = scale * s;
  }
  const double tolerance = 1e-10 * std::max(1.0, mu.cwiseAbs().maxCoeff());
  if (mu.minCoeff() < -tolerance)
    throw Error(ErrorKind::ConstraintViolation, "negative expected intensity");
  return mu;
}

Eigen::VectorXd bright_start_mean(const SecondOrderParams& g, int T) {
  require_valid(g);
  const double scale = g.m * g.theta.theta1;
  Eigen::VectorXd mu0(T + 1);
  for (int k = 0; k <= T; ++k) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < g.alpha0.size(); ++x)
      s += g.alpha0[x] * std::pow(g.lambda[x], k - 1);
    mu0[k] = scale * s;
  }
  return mu0;
}

Eigen::VectorXd matrix_power_mean(const OuterModelSpec& spec, double theta1,
                                  double m, int T) {
  const TransitionMatrices mats = build_matrices(spec);
  const double scale = m * theta1 / spec.q00();
  Eigen::VectorXd state = spec.nu;
  Eigen::VectorXd mu(T);
  for (int t = 1; t <= T; ++t) {
    state = mats.total * state;
    mu[t - 1] = scale * state[0];
  }
  return mu;
}

Eigen::MatrixXd covariance(const SecondOrderParams& g, const CameraModel& camera,
                           int T) {
  Eigen::MatrixXd S;
  covariance_into(g, camera, T, S);
  return S;
}

void covariance_into(const SecondOrderParams& g, const CameraModel& camera, int T,
                     Eigen::MatrixXd& S) {
  require_camera(camera);
  const Eigen::VectorXd mu = clamp_means(mean_trace(g, T));
  const Eigen::VectorXd mu0 = bright_start_mean(g, T);
  const double m = g.m;
  const double theta1 = g.theta.theta1;
  const double theta2 = g.theta.theta2;
  const double theta3 = g.theta.theta3;
  const double exit_share = (1.0 - theta2) / (1.0 - g.q00);
  const double stay_share = theta2 - g.q00 * exit_share;

  // Lag kernel: stay_share * mu0_d + exit_share * mu0_{d+1}.
  Eigen::VectorXd lag(T);
  for (int d = 1; d < T; ++d) lag[d] = stay_share * mu0[d] + exit_share * mu0[d + 1];

  S.resize(T, T);
  const double a2 = camera.a * camera.a;
  for (int t = 0; t < T; ++t) {
    const double s = camera.sigma_at(static_cast<std::size_t>(t));
    S(t, t) = (m * theta1 * (theta3 + 1.0) + m * camera.f2 - mu[t]) * mu[t] / m +
              s * s / a2;
    for (int u = 0; u < t; ++u) {
      const double v = (lag[t - u] - mu[t]) * mu[u] / m;
      S(t, u) = v;
      S(u, t) = v;
    }
  }
}

Eigen::MatrixXd matrix_moment_covariance(const OuterModelSpec& spec,
                                         const ThetaParams& theta, double m,
                                         const CameraModel& camera, int T) {
  require_camera(camera);
  const TransitionMatrices mats = build_matrices(spec);
  const Eigen::MatrixXd& M = mats.total;
  const double q00 = spec.q00();
  const double theta1 = theta.theta1;
  const int n = spec.states();

  // Single-molecule mean, bright-start row e_0^T M^d and the exit column.
  Eigen::VectorXd single(T);
  {
    Eigen::VectorXd state = spec.nu;
    for (int t = 0; t < T; ++t) {
      state = M * state;
      single[t] = theta1 / q00 * state[0];
    }
  }
  Eigen::VectorXd exit_column = spec.q.col(0);
  exit_column[0] = 0.0;
  Eigen::VectorXd beta(T);
  {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Unit(n, 0);
    for (int d = 1; d < T; ++d) {
      row = row * M;
      const double beta1 = theta1 / q00 * row[0];
      const double beta2 = theta1 / q00 * row.dot(exit_column.transpose());
      beta[d] = theta.theta2 * beta1 + (1.0 - theta.theta2) / (1.0 - q00) * beta2;
    }
  }

  Eigen::MatrixXd S(T, T);
  const double a2 = camera.a * camera.a;
  for (int t = 0; t < T; ++t) {
    const double s = camera.sigma_at(static_cast<std::size_t>(t));
    const double second = theta1 * (theta.theta3 + 1.0) + camera.f2;
    S(t, t) = m * (second * single[t] - single[t] * single[t]) + s * s / a2;
    for (int u = 0; u < t; ++u) {
      const double v = m * (beta[t - u] * single[u] - single[t] * single[u]);
      S(t, u) = v;
      S(u, t) = v;
    }
  }
  return S;
}

MomentSet moment_set(const SecondOrderParams& g, const CameraModel& camera,
                     int T) {
  MomentSet ms;
  ms.mu = mean_trace(g, T);
  ms.mu0 = bright_start_mean(g, T);
  ms.Sigma = covariance(g, camera, T);
  return ms;
}

SecondOrderParams canonicalize(const SecondOrderParams& g) {
  SecondOrderParams out = g;
  const Eigen::Index r = g.lambda.size() - 1;
  for (Eigen::Index x = 0; x < r; ++x) {
    for (Eigen::Index z = x + 1; z < r; ++z) {
      if (std::abs(out.lambda[x] - out.lambda[z]) < 1e-12 &&
          (out.alpha0[z] != 0.0 || out.alpha1[z] != 0.0)) {
        out.alpha0[x] += out.alpha0[z];
        out.alpha1[x] += out.alpha1[z];
        out.alpha0[z] = 0.0;
        out.alpha1[z] = 0.0;
      }
    }
  }
  return out;
}

}  // namespace htmm
