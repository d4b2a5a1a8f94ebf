#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace htmm {

// Outer (frame-to-frame) model. State 0 is bright, states 1..r-1 are
// temporary dark states and state r is the absorbing bleached state.
//
// `q` has r+1 rows and r columns: q(x, z) is the probability of the
// transition z -> x. Column 0 describes where a molecule that starts an
// exposure bright ends up after the exposure (short-time step); columns
// 1..r-1 describe the long-time step out of the dark states.
struct OuterModelSpec {
  int r = 1;
  Eigen::MatrixXd q;
  Eigen::VectorXd nu;

  int states() const { return r + 1; }
  double q00() const { return q(0, 0); }

  // Throws InvalidSpec when shapes, ranges or column sums are off by more
  // than `tol`.
  void validate(double tol = 1e-9) const;
};

// Column-stochastic matrices of the two-timescale chain.
struct TransitionMatrices {
  Eigen::MatrixXd long_time;   // frame-to-frame step, applied first
  Eigen::MatrixXd short_time;  // within-exposure step
  Eigen::MatrixXd total;       // short_time * long_time
};

TransitionMatrices build_matrices(const OuterModelSpec& spec);

// M = V diag(lambda) V^{-1}. The bleached eigenvalue 1 is always last and its
// eigenvector is e_r; the remaining eigenvalues are ordered by descending real
// part (then descending imaginary part).
struct SpectralDecomposition {
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd V;
  Eigen::MatrixXcd V_inv;
  bool is_real = false;
  bool is_positive = false;
  double condition = 1.0;  // 2-norm condition number of V

  Eigen::VectorXd real_lambda() const { return lambda.real(); }
  Eigen::MatrixXd reconstruct() const;
};

constexpr double kMaxEigenvectorCondition = 1e12;

SpectralDecomposition spectral_decompose(const Eigen::MatrixXd& M);

struct R2Verdict {
  bool real = true;
  bool nonnegative = false;
  bool diagonal_sufficient = false;  // every diagonal entry >= 1/2
  double discriminant = 0.0;         // (a1 - a4)^2 + 4 a2 a3
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();  // ascending
};

// Spectrum check for the 3x3 (r = 2) transition matrix.
R2Verdict check_real_spectrum_r2(const Eigen::MatrixXd& M);

struct R3Verdict {
  double lambda0 = 0.0;          // Perron eigenvalue of the upper-left block
  double condition_value = 0.0;  // discriminant criterion for real spectrum
  bool real = false;
};

// Spectrum check for the 4x4 (r = 3) transition matrix. Requires the
// upper-left 3x3 block to be irreducible (NotIrreducible otherwise) and M to
// be diagonalizable (NotDiagonalizable propagated).
R3Verdict check_real_spectrum_r3(const Eigen::MatrixXd& M);

struct GapVerdict {
  double mu1 = 0.0;
  double mu2 = 0.0;
  bool satisfied = false;
};

GapVerdict check_gap_condition(std::array<double, 3> diag, double lambda0);

// Largest eigenvalue of a non-negative irreducible matrix, by power iteration
// on block + I started from the uniform vector. Stops once the
// Collatz-Wielandt bounds are within `tol`.
double perron_eigenvalue(const Eigen::MatrixXd& block, double tol = 1e-12,
                         int max_iters = 100000);

// Strong connectivity of the directed graph with an edge j -> i for every
// positive entry block(i, j).
bool is_irreducible(const Eigen::MatrixXd& block);

struct StatePartition {
  std::vector<std::vector<int>> blocks;

  // Throws InvalidPartition unless blocks are non-empty, disjoint and cover
  // {0..n-1}.
  void validate(int n) const;
};

// Kemeny-Snell lumping for a column-stochastic M. Entry (j, i) of the result
// is the probability to move from block i into block j, which must agree for
// every state of block i within `tol` (NotLumpable otherwise).
Eigen::MatrixXd lump(const Eigen::MatrixXd& M, const StatePartition& partition,
                     double tol = 1e-9);

}  // namespace htmm
