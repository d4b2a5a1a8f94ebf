#include "htmm/markov_core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

#include "htmm/error.hpp"

namespace htmm {

namespace {

void require_column_stochastic(const Eigen::MatrixXd& M, double tol,
                               const char* what) {
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    const double s = M.col(j).sum();
    if (std::abs(s - 1.0) > tol) {
      std::ostringstream os;
      os << what << ": column " << j << " sums to " << s;
      throw Error(ErrorKind::InvalidSpec, os.str());
    }
  }
}

void require_absorbing_last(const Eigen::MatrixXd& M, ErrorKind kind) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n || n < 2) throw Error(kind, "matrix must be square, n >= 2");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double expected = (i == n - 1) ? 1.0 : 0.0;
    if (M(i, n - 1) != expected)
      throw Error(kind, "last column must be the bleached unit vector");
  }
}

}  // namespace

void OuterModelSpec::validate(double tol) const {
  if (r < 1) throw Error(ErrorKind::InvalidSpec, "r must be >= 1");
  if (q.rows() != r + 1 || q.cols() != r) {
    std::ostringstream os;
    os << "q must be " << r + 1 << "x" << r << ", got " << q.rows() << "x"
       << q.cols();
    throw Error(ErrorKind::InvalidSpec, os.str());
  }
  if (nu.size() != r + 1)
    throw Error(ErrorKind::InvalidSpec, "nu must have r+1 entries");
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double v = q.data()[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorKind::InvalidSpec, "q entries must lie in [0,1]");
  }
  require_column_stochastic(q, tol, "q");
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (!(nu[i] >= 0.0))
      throw Error(ErrorKind::InvalidSpec, "nu entries must be >= 0");
  }
  if (std::abs(nu.sum() - 1.0) > tol)
    throw Error(ErrorKind::InvalidSpec, "nu must sum to 1");
}

TransitionMatrices build_matrices(const OuterModelSpec& spec) {
  spec.validate();
  const int n = spec.states();
  const int r = spec.r;

  TransitionMatrices out;
  out.long_time = Eigen::MatrixXd::Zero(n, n);
  out.long_time(0, 0) = 1.0;
  out.long_time(r, r) = 1.0;
  for (int z = 1; z < r; ++z) out.long_time.col(z) = spec.q.col(z);

  out.short_time = Eigen::MatrixXd::Identity(n, n);
  out.short_time.col(0) = spec.q.col(0);

  out.total = out.short_time * out.long_time;
  return out;
}

Eigen::MatrixXd SpectralDecomposition::reconstruct() const {
  return (V * lambda.asDiagonal() * V_inv).real();
}

SpectralDecomposition spectral_decompose(const Eigen::MatrixXd& M) {
  require_absorbing_last(M, ErrorKind::InvalidSpec);
  require_column_stochastic(M, 1e-9, "M");
  const Eigen::Index n = M.rows();
  const Eigen::Index r = n - 1;

  // M is block lower-triangular: [[B, 0], [b, 1]]. Every eigenpair (l, v) of
  // B lifts to (l, (v, b.v / (l - 1))) and e_r carries the eigenvalue 1.
  const Eigen::MatrixXd B = M.topLeftCorner(r, r);
  const Eigen::RowVectorXd b = M.row(r).head(r);

  Eigen::EigenSolver<Eigen::MatrixXd> solver(B, true);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::NotDiagonalizable, "eigen solver failed");

  std::vector<Eigen::Index> order(r);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXcd ev = solver.eigenvalues();
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
    if (ev[a].real() != ev[c].real()) return ev[a].real() > ev[c].real();
    return ev[a].imag() > ev[c].imag();
  });

  SpectralDecomposition d;
  d.lambda.resize(n);
  d.V = Eigen::MatrixXcd::Zero(n, n);
  const Eigen::MatrixXcd vecs = solver.eigenvectors();
  const Eigen::RowVectorXcd bc = b.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < r; ++k) {
    const Eigen::Index src = order[k];
    const std::complex<double> l = ev[src];
    Eigen::VectorXcd col(n);
    col.head(r) = vecs.col(src);
    const std::complex<double> bv = (bc * vecs.col(src))(0);
    if (std::abs(l - 1.0) > 1e-12) {
      col[r] = bv / (l - 1.0);
    } else if (std::abs(bv) <= 1e-12) {
      col[r] = 0.0;
    } else {
      throw Error(ErrorKind::NotDiagonalizable,
                  "unit eigenvalue of the transient block couples to the "
                  "bleached state");
    }
    d.lambda[k] = l;
    d.V.col(k) = col / col.norm();
  }
  d.lambda[r] = 1.0;
  d.V(r, r) = 1.0;

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(d.V);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  d.condition = smin > 0.0 ? sv[0] / smin
                           : std::numeric_limits<double>::infinity();
  if (!(d.condition <= kMaxEigenvectorCondition)) {
    std::ostringstream os;
    os << "eigenvector matrix condition number " << d.condition;
    throw Error(ErrorKind::NotDiagonalizable, os.str());
  }
  d.V_inv = d.V.inverse();

  const double residual = (M - d.reconstruct()).cwiseAbs().maxCoeff();
  if (!(residual < 1e-9)) {
    std::ostringstream os;
    os << "reconstruction residual " << residual;
    throw Error(ErrorKind::NotDiagonalizable, os.str());
  }

  d.is_real = d.lambda.imag().cwiseAbs().maxCoeff() < 1e-10;
  d.is_positive = d.is_real && d.lambda.real().minCoeff() > -1e-10;
  return d;
}

R2Verdict check_real_spectrum_r2(const Eigen::MatrixXd& M) {
  if (M.rows() != 3 || M.cols() != 3)
    throw Error(ErrorKind::ShapeMismatch, "expected a 3x3 matrix");
  require_absorbing_last(M, ErrorKind::ShapeMismatch);

  const double a1 = M(0, 0), a2 = M(0, 1), a3 = M(1, 0), a4 = M(1, 1);
  R2Verdict v;
  v.discriminant = (a1 - a4) * (a1 - a4) + 4.0 * a2 * a3;
  v.real = v.discriminant >= 0.0;
  v.diagonal_sufficient = a1 >= 0.5 && a4 >= 0.5;

  const double root = std::sqrt(std::max(v.discriminant, 0.0));
  const double half_trace = 0.5 * (a1 + a4);
  v.eigenvalues << half_trace - 0.5 * root, half_trace + 0.5 * root, 1.0;
  std::sort(v.eigenvalues.data(), v.eigenvalues.data() + 3);
  v.nonnegative =
      v.diagonal_sufficient || (v.real && v.eigenvalues.minCoeff() >= -1e-12);
  return v;
}

bool is_irreducible(const Eigen::MatrixXd& block) {
  const Eigen::Index n = block.rows();
  if (block.cols() != n) throw Error(ErrorKind::ShapeMismatch, "square block expected");
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) reach[i][j] = (i == j) || block(i, j) > 0.0;
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (!reach[i][j]) return false;
  return true;
}

double perron_eigenvalue(const Eigen::MatrixXd& block, double tol,
                         int max_iters) {
  const Eigen::Index n = block.rows();
  const Eigen::MatrixXd shifted =
      block + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd y = shifted * x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ratio = y[i] / x[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    if (hi - lo < tol) return 0.5 * (lo + hi) - 1.0;
    x = y / y.sum();
  }
  throw Error(ErrorKind::NoConvergence, "power iteration did not converge");
}

R3Verdict check_real_spectrum_r3(const Eigen::MatrixXd& M) {
  if (M.rows() != 4 || M.cols() != 4)
    throw Error(ErrorKind::ShapeMismatch, "expected a 4x4 matrix");
  require_absorbing_last(M, ErrorKind::ShapeMismatch);
  const Eigen::MatrixXd B = M.topLeftCorner(3, 3);
  if (!is_irreducible(B))
    throw Error(ErrorKind::NotIrreducible, "upper-left 3x3 block is reducible");
  (void)spectral_decompose(M);

  R3Verdict v;
  v.lambda0 = perron_eigenvalue(B);
  const double a2 = B(0, 1), a3 = B(0, 2), a4 = B(1, 0), a6 = B(1, 2),
               a7 = B(2, 0), a8 = B(2, 1);
  const double b1 = B(0, 0) - v.lambda0;
  const double b5 = B(1, 1) - v.lambda0;
  const double b9 = B(2, 2) - v.lambda0;
  const double s = b1 + b5 + b9;
  v.condition_value =
      s * s + 4.0 * (a6 * a8 + a2 * a4 + a3 * a7 - b1 * b5 - b1 * b9 - b5 * b9);
  v.real = v.condition_value >= -1e-12;
  return v;
}

GapVerdict check_gap_condition(std::array<double, 3> diag, double lambda0) {
  std::sort(diag.begin(), diag.end(), std::greater<>());
  if (diag[0] - diag[1] < 1e-12 || diag[1] - diag[2] < 1e-12)
    throw Error(ErrorKind::DegenerateDiagonal, "diagonal values must be distinct");
  if (!(lambda0 > 0.0 && lambda0 <= 1.0) || lambda0 < diag[0])
    throw Error(ErrorKind::OutOfDomain,
                "lambda0 must lie in (0,1] and dominate the diagonal");

  GapVerdict g;
  g.mu1 = (lambda0 - diag[0]) / (lambda0 - diag[1]);
  g.mu2 = (lambda0 - diag[1]) / (lambda0 - diag[2]);
  const double lhs = g.mu2 * g.mu2 * (1.0 - g.mu1) * (1.0 - g.mu1);
  const double rhs = 2.0 * g.mu2 * (1.0 + g.mu1) - 1.0;
  g.satisfied = lhs >= rhs;
  return g;
}

void StatePartition::validate(int n) const {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& block : blocks) {
    if (block.empty())
      throw Error(ErrorKind::InvalidPartition, "empty block");
    for (int s : block) {
      if (s < 0 || s >= n)
        throw Error(ErrorKind::InvalidPartition, "state index out of range");
      if (seen[static_cast<std::size_t>(s)]++)
        throw Error(ErrorKind::InvalidPartition, "blocks overlap");
    }
  }
  for (int s = 0; s < n; ++s)
    if (!seen[static_cast<std::size_t>(s)])
      throw Error(ErrorKind::InvalidPartition, "blocks do not cover all states");
}

Eigen::MatrixXd lump(const Eigen::MatrixXd& M, const StatePartition& partition,
                     double tol) {
  if (M.rows() != M.cols())
    throw Error(ErrorKind::ShapeMismatch, "square matrix expected");
  partition.validate(static_cast<int>(M.rows()));

  const auto k = static_cast<Eigen::Index>(partition.blocks.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& from = partition.blocks[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& to = partition.blocks[static_cast<std::size_t>(j)];
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double total = 0.0;
      for (int x : from) {
        double p = 0.0;
        for (int z : to) p += M(z, x);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
        total += p;
      }
      if (hi - lo > tol) {
        std::ostringstream os;
        os << "block pair (" << i << ", " << j << ") deviates by " << hi - lo;
        throw Error(ErrorKind::NotLumpable, os.str());
      }
      out(j, i) = total / static_cast<double>(from.size());
    }
  }
  return out;
}

}  // namespace htmm
