#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "htmm/inner_alexa.hpp"
#include "htmm/moments.hpp"

namespace htmm {

struct FitOptions {
  int r = 3;
  std::vector<int> m_grid = default_m_grid();
  std::optional<double> nu0_fixed;  // empty: nu0 and alpha1 are fitted
  bool alexa = true;                // theta2 tied to q00; false leaves it free
  int restarts = 1;                 // perturbed restarts per m
  double tol = 1e-3;                // loglik improvement per block cycle
  int max_iters = 30;               // block cycles per start
  std::uint64_t seed = 0;

  static std::vector<int> default_m_grid();
  void validate() const;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;   // block cycles, all m
  long evaluations = 0; // objective evaluations, all m
  ConstraintReport constraints;
  double sigma_condition = 0.0;
  std::string warning;
};

struct FitResult {
  SecondOrderParams gamma_hat;
  int m_hat = 0;
  double loglik = 0.0;
  std::vector<std::pair<int, double>> profile;
  std::vector<SecondOrderParams> per_m;  // best point for every grid entry
  FitDiagnostics diagnostics;
};

constexpr int kMaxFitFrames = 4000;

// -1/2 [(y - mu)^T Sigma^-1 (y - mu) + log det Sigma] by Cholesky, with the
// jitter escalation 1e-10, 1e-8 (times trace(Sigma) / T) before SigmaNotPD.
double pseudo_loglik(const SecondOrderParams& gamma, const CameraModel& camera,
                     const Eigen::VectorXd& y);

// Multi-exponential start values from the smoothed trace; m is set to
// round(sum c / theta1) clamped to m_grid.
SecondOrderParams init_params(const Eigen::VectorXd& y, int r, const CameraModel& camera,
                              const std::vector<int>& m_grid = FitOptions::default_m_grid());

// Profile pseudo-ML over the integer grid. Never throws NoConvergence: the
// flag is in diagnostics and the CLI maps it to exit code 2.
FitResult fit(const Eigen::VectorXd& y, const CameraModel& camera, const FitOptions& options);

// Same, starting from a given parameter vector instead of init_params for
// every m (theta1 rescaled so that m theta1 stays fixed).
FitResult fit_from(const Eigen::VectorXd& y, const CameraModel& camera,
                   const FitOptions& options, const SecondOrderParams& start);

struct CalibrationResult {
  double a = 0.0;
  double intercept = 0.0;  // about Var[eps]
  double slope = 0.0;      // a f2
};

CalibrationResult calibrate_camera(const std::vector<std::pair<double, double>>& pixel_stats,
                                   double f2);

}  // namespace htmm
