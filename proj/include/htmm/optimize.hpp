#pragma once

#include <functional>

#include <Eigen/Dense>

namespace htmm {

struct NelderMeadOptions {
  int max_evals = 2000;
  double f_tol = 1e-8;   // stop when the simplex values span less than this
  double x_tol = 1e-8;   // ... and the simplex is this small
  double initial_step = 0.1;
  int restarts = 1;      // fresh simplex around the best point
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// Minimises f; non-finite values are treated as +inf (rejected steps).
// Dimension-adaptive coefficients (Gao and Han).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& options = {});

// min ||A x - b|| subject to x >= 0, by enumerating active sets (small n).
Eigen::VectorXd nnls_small(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

}  // namespace htmm
