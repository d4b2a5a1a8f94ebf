#pragma once

#include <Eigen/Dense>

#include "htmm/inner_alexa.hpp"
#include "htmm/markov_core.hpp"

namespace htmm {

// Moment-level ("second order") parameterisation of an m-fluorophore trace.
// Index r of lambda/alpha0/alpha1 is the bleached state: lambda_r = 1 and
// alpha0_r = alpha1_r = 0. `theta` is expressed in normalised camera units
// (detected photons) before amplification noise; the camera enters through
// CameraModel::f2 and the background.
struct SecondOrderParams {
  double m = 1.0;
  double nu0 = 1.0;
  double q00 = 0.5;
  Eigen::VectorXd lambda;
  Eigen::VectorXd alpha0;
  Eigen::VectorXd alpha1;
  ThetaParams theta;

  int r() const { return static_cast<int>(lambda.size()) - 1; }
};

struct MomentSet {
  Eigen::VectorXd mu;     // mu_1 .. mu_T
  Eigen::VectorXd mu0;    // bright-start means mu0_0 .. mu0_T
  Eigen::MatrixXd Sigma;  // T x T
};

struct AlphaSet {
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha0;
  Eigen::VectorXd alpha1;
};

// Multi-exponential coefficients of the mean for the initial law nu, for a
// bright start (alpha0) and for the non-bright part of nu (alpha1).
// ComplexSpectrum unless decomp.is_real.
AlphaSet alpha_from_model(const OuterModelSpec& spec,
                          const SpectralDecomposition& decomp);

// Diagonalises the model and collects the parameters that mu and Sigma
// depend on.
SecondOrderParams second_order_from_model(const OuterModelSpec& spec,
                                          const ThetaParams& theta, double m);

struct ConstraintReport {
  double sum_alpha0 = 0.0;        // sum alpha0 - 1
  double inverse_alpha0 = 0.0;    // sum alpha0 / lambda - 1 / q00
  double inverse_alpha1 = 0.0;    // sum alpha1 / lambda
  double alpha1_range = 0.0;      // distance of q00 * sum alpha1 from [0, 1]
  double bleached = 0.0;          // |alpha0_r| + |alpha1_r| + |lambda_r - 1|
  bool pass = false;

  double max_abs() const;
};

ConstraintReport check_constraints(const SecondOrderParams& gamma,
                                   double tol = 1e-8);

// Throws ConstraintViolation when the parameter vector is unusable for the
// closed forms (shapes, ranges, or constraint residuals above `tol`).
void require_valid(const SecondOrderParams& gamma, double tol = 1e-6);

Eigen::VectorXd mean_trace(const SecondOrderParams& gamma, int T);

// mu0_k for k = 0..T, where mu0_0 = m theta1 / q00.
Eigen::VectorXd bright_start_mean(const SecondOrderParams& gamma, int T);

// m theta1 / q00 * (M^t nu)_0 for t = 1..T, by repeated products.
Eigen::VectorXd matrix_power_mean(const OuterModelSpec& spec, double theta1,
                                  double m, int T);

Eigen::MatrixXd covariance(const SecondOrderParams& gamma,
                           const CameraModel& camera, int T);

// Same, into a caller-owned matrix (no allocation when S is already T x T).
void covariance_into(const SecondOrderParams& gamma, const CameraModel& camera,
                     int T, Eigen::MatrixXd& S);

// Covariance from powers of M only (no diagonalisation).
Eigen::MatrixXd matrix_moment_covariance(const OuterModelSpec& spec,
                                         const ThetaParams& theta, double m,
                                         const CameraModel& camera, int T);

MomentSet moment_set(const SecondOrderParams& gamma, const CameraModel& camera,
                     int T);

// Merges coefficients of eigenvalues that agree within 1e-12 onto the first
// one; mu and Sigma are unchanged.
SecondOrderParams canonicalize(const SecondOrderParams& gamma);

}  // namespace htmm
