#include "htmm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "htmm/error.hpp"

namespace htmm {

namespace {

struct Simplex {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> f;
};

double clean(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  NelderMeadResult best;
  best.x = x0;
  if (n == 0) {
    best.f = clean(f(x0));
    best.evals = 1;
    best.converged = true;
    return best;
  }
  const double dn = static_cast<double>(n);
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / dn;
  const double gamma = 0.75 - 1.0 / (2.0 * dn);
  const double delta = 1.0 - 1.0 / dn;

  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return clean(f(x));
  };

  best.f = eval(x0);
  for (int round = 0; round <= options.restarts; ++round) {
    Simplex s;
    s.x.push_back(best.x);
    s.f.push_back(best.f);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd v = best.x;
      const double h = options.initial_step * std::max(1.0, std::abs(v[i]));
      v[i] += h;
      double fv = eval(v);
      if (!std::isfinite(fv)) {
        v[i] = best.x[i] - h;
        fv = eval(v);
      }
      s.x.push_back(v);
      s.f.push_back(fv);
    }
    std::vector<std::size_t> order(s.x.size());
    bool converged = false;
    while (evals < options.max_evals) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
      const std::size_t lo = order.front();
      const std::size_t hi = order.back();
      const std::size_t second = order[order.size() - 2];

      double size = 0.0;
      for (const auto& v : s.x) size = std::max(size, (v - s.x[lo]).cwiseAbs().maxCoeff());
      if (std::isfinite(s.f[hi]) && s.f[hi] - s.f[lo] <= options.f_tol &&
          size <= options.x_tol * (1.0 + s.x[lo].cwiseAbs().maxCoeff())) {
        converged = true;
        break;
      }
      if (std::isfinite(s.f[lo]) && std::isfinite(s.f[hi]) &&
          s.f[hi] - s.f[lo] <= options.f_tol * 1e-3) {
        converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (i != hi) centroid += s.x[i];
      centroid /= dn;

      const Eigen::VectorXd xr = centroid + alpha * (centroid - s.x[hi]);
      const double fr = eval(xr);
      if (fr < s.f[lo]) {
        const Eigen::VectorXd xe = centroid + beta * (xr - centroid);
        const double fe = eval(xe);
        if (fe < fr) {
          s.x[hi] = xe;
          s.f[hi] = fe;
        } else {
          s.x[hi] = xr;
          s.f[hi] = fr;
        }
        continue;
      }
      if (fr < s.f[second]) {
        s.x[hi] = xr;
        s.f[hi] = fr;
        continue;
      }
      const bool outside = fr < s.f[hi];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + gamma * (xr - centroid))
                                         : Eigen::VectorXd(centroid - gamma * (centroid - s.x[hi]));
      const double fc = eval(xc);
      if (fc < std::min(fr, s.f[hi])) {
        s.x[hi] = xc;
        s.f[hi] = fc;
        continue;
      }
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i == lo) continue;
        s.x[i] = s.x[lo] + delta * (s.x[i] - s.x[lo]);
        s.f[i] = eval(s.x[i]);
      }
    }
    const auto it = std::min_element(s.f.begin(), s.f.end());
    const auto idx = static_cast<std::size_t>(it - s.f.begin());
    const double previous = best.f;
    if (s.f[idx] <= best.f) {
      best.f = s.f[idx];
      best.x = s.x[idx];
    }
    best.converged = converged;
    if (evals >= options.max_evals) break;
    // A restart that no longer moves the optimum ends the search.
    if (round > 0 && std::isfinite(previous) && previous - best.f <= options.f_tol) break;
  }
  best.evals = evals;
  return best;
}

Eigen::VectorXd nnls_small(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  if (n > 12) throw Error(ErrorKind::InvalidConfig, "nnls_small supports at most 12 columns");
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_res = b.squaredNorm();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      sub.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const Eigen::VectorXd c = sub.colPivHouseholderQr().solve(b);
    if (!c.allFinite() || c.minCoeff() < 0.0) continue;
    const double res = (sub * c - b).squaredNorm();
    if (res < best_res) {
      best_res = res;
      best.setZero();
      for (std::size_t k = 0; k < cols.size(); ++k) best[cols[k]] = c[static_cast<Eigen::Index>(k)];
    }
  }
  return best;
}

}  // namespace htmm
