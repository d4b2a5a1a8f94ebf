#include "htmm/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "htmm/error.hpp"

namespace htmm {

namespace {

double poisson_pmf(double mean, std::int64_t y) {
  if (y < 0) return 0.0;
  if (mean == 0.0) return y == 0 ? 1.0 : 0.0;
  const double yd = static_cast<double>(y);
  return std::exp(-mean + yd * std::log(mean) - std::lgamma(yd + 1.0));
}

double poisson_tail(double mean, std::int64_t k) {
  if (k < 0) return 1.0;
  // Sum upwards from k + 1 until the terms stop mattering.
  double tail = 0.0;
  for (std::int64_t y = k + 1;; ++y) {
    const double p = poisson_pmf(mean, y);
    tail += p;
    if (static_cast<double>(y) > mean && p < 1e-18 * std::max(tail, 1e-300)) break;
    if (y > k + 100000) break;
  }
  return tail;
}

double geometric_pmf(double s, std::int64_t y) {
  if (y < 0) return 0.0;
  return (1.0 - s) * std::pow(s, static_cast<double>(y));
}

double complement_tail(const InnerAlexaParams& params, std::int64_t k, bool exited) {
  double head = 0.0;
  for (std::int64_t y = 0; y <= k; ++y) head += alexa_photon_pmf(params, y, exited);
  return std::max(0.0, 1.0 - head);
}

// p_{x x'}(y) M^s_{x x'} M^l_{x' x_prev} summed over x'.
Eigen::MatrixXd step_factors(const TransitionMatrices& mats, const PhotonLaw& law,
                             std::int64_t y) {
  const Eigen::Index n = mats.total.rows();
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);  // f(x, x_prev)
  const double stay = law.stay(y);
  const double exit = law.exit(y);
  const double dark = (y == 0) ? 1.0 : 0.0;
  for (Eigen::Index xp = 0; xp < n; ++xp) {
    for (Eigen::Index x = 0; x < n; ++x) {
      double s = 0.0;
      for (Eigen::Index mid = 0; mid < n; ++mid) {
        const double emit = (mid != 0) ? dark : (x == 0 ? stay : exit);
        s += emit * mats.short_time(x, mid) * mats.long_time(mid, xp);
      }
      f(x, xp) = s;
    }
  }
  return f;
}

// Streaming log-sum-exp.
struct LogAccumulator {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add(double v) {
    if (v == -std::numeric_limits<double>::infinity()) return;
    if (v <= max) {
      sum += std::exp(v - max);
    } else {
      sum = sum * std::exp(max - v) + 1.0;
      max = v;
    }
  }
  double value() const {
    return sum > 0.0 ? max + std::log(sum) : -std::numeric_limits<double>::infinity();
  }
};

void require_budget(int r, int T, const EnumerationBudget& budget) {
  const std::uint64_t paths = path_count(r, T);
  if (paths > budget.max_paths)
    throw Error(ErrorKind::BudgetExceeded,
                std::to_string(paths) + " paths exceed the budget of " +
                    std::to_string(budget.max_paths));
}

Eigen::VectorXd dirichlet_ones(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = -std::log1p(-rng.uniform());
  return v / v.sum();
}

}  // namespace

std::uint64_t path_count(int r, int T) {
  std::uint64_t total = 1;
  const auto base = static_cast<std::uint64_t>(r + 1);
  for (int i = 0; i <= T; ++i) {
    if (total > std::numeric_limits<std::uint64_t>::max() / base)
      return std::numeric_limits<std::uint64_t>::max();
    total *= base;
  }
  return total;
}

double PoissonLaw::stay(std::int64_t y) const { return poisson_pmf(stay_mean_, y); }
double PoissonLaw::exit(std::int64_t y) const { return poisson_pmf(exit_mean_, y); }
double PoissonLaw::stay_tail(std::int64_t k) const { return poisson_tail(stay_mean_, k); }
double PoissonLaw::exit_tail(std::int64_t k) const { return poisson_tail(exit_mean_, k); }

double GeometricLaw::stay(std::int64_t y) const { return geometric_pmf(stay_ratio_, y); }
double GeometricLaw::exit(std::int64_t y) const { return geometric_pmf(exit_ratio_, y); }
double GeometricLaw::stay_tail(std::int64_t k) const {
  return k < 0 ? 1.0 : std::pow(stay_ratio_, static_cast<double>(k + 1));
}
double GeometricLaw::exit_tail(std::int64_t k) const {
  return k < 0 ? 1.0 : std::pow(exit_ratio_, static_cast<double>(k + 1));
}

double AlexaLaw::stay_tail(std::int64_t k) const { return complement_tail(params_, k, false); }
double AlexaLaw::exit_tail(std::int64_t k) const { return complement_tail(params_, k, true); }

double exact_log_likelihood(const OuterModelSpec& spec, const PhotonLaw& law,
                            const std::vector<std::int64_t>& y,
                            const EnumerationBudget& budget) {
  spec.validate();
  const int T = static_cast<int>(y.size());
  require_budget(spec.r, T, budget);
  const TransitionMatrices mats = build_matrices(spec);
  const int n = spec.states();

  std::vector<Eigen::MatrixXd> log_f;
  log_f.reserve(y.size());
  for (auto yt : y) log_f.push_back(step_factors(mats, law, yt).array().log().matrix());

  // Depth-first over X_0..X_T; partial[d] is the log weight of the prefix.
  LogAccumulator acc;
  std::vector<int> state(static_cast<std::size_t>(T) + 1, 0);
  std::vector<double> partial(static_cast<std::size_t>(T) + 1, 0.0);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  int depth = 0;
  state[0] = 0;
  for (;;) {
    const int x = state[static_cast<std::size_t>(depth)];
    double w;
    if (depth == 0) {
      w = spec.nu[x] > 0.0 ? std::log(spec.nu[x]) : neg_inf;
    } else {
      w = partial[static_cast<std::size_t>(depth) - 1] +
          log_f[static_cast<std::size_t>(depth) - 1](x, state[static_cast<std::size_t>(depth) - 1]);
    }
    partial[static_cast<std::size_t>(depth)] = w;
    if (depth == T) {
      acc.add(w);
    } else if (w != neg_inf) {
      ++depth;
      state[static_cast<std::size_t>(depth)] = 0;
      continue;
    }
    // Advance to the next sibling, backtracking over exhausted levels.
    while (depth >= 0 && ++state[static_cast<std::size_t>(depth)] == n) --depth;
    if (depth < 0) break;
  }
  return acc.value();
}

double exact_likelihood(const OuterModelSpec& spec, const PhotonLaw& law,
                        const std::vector<std::int64_t>& y,
                        const EnumerationBudget& budget) {
  return std::exp(exact_log_likelihood(spec, law, y, budget));
}

TruncatedMass truncated_total_mass(const OuterModelSpec& spec, const PhotonLaw& law,
                                   int T, std::int64_t k,
                                   const EnumerationBudget& budget) {
  if (T < 1 || k < 0) throw Error(ErrorKind::InvalidConfig, "need T >= 1 and k >= 0");
  const std::uint64_t traces = path_count(static_cast<int>(k), T - 1);
  const std::uint64_t paths = path_count(spec.r, T);
  if (traces > budget.max_paths || paths > budget.max_paths / std::max<std::uint64_t>(traces, 1))
    throw Error(ErrorKind::BudgetExceeded, "truncated support too large for the budget");

  TruncatedMass out;
  std::vector<std::int64_t> y(static_cast<std::size_t>(T), 0);
  // Odometer over {0..k}^T in lexicographic order.
  for (;;) {
    out.mass += exact_likelihood(spec, law, y, budget);
    int pos = T - 1;
    while (pos >= 0 && ++y[static_cast<std::size_t>(pos)] > k) {
      y[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  out.tail_bound = static_cast<double>(T) * std::max(law.stay_tail(k), law.exit_tail(k));
  return out;
}

MomentSet enumerate_marginals(const OuterModelSpec& spec, const ThetaParams& theta,
                              double m, const CameraModel& camera, int T,
                              const EnumerationBudget& budget) {
  spec.validate();
  if (T < 1) throw Error(ErrorKind::InvalidConfig, "T must be >= 1");
  require_budget(spec.r, T, budget);
  const TransitionMatrices mats = build_matrices(spec);
  const int n = spec.states();
  const double q00 = spec.q00();
  const double theta1 = theta.theta1;
  const double mean_stay = theta1 * theta.theta2 / q00;
  const double mean_exit = theta1 * (1.0 - theta.theta2) / (1.0 - q00);
  const double second = theta1 * theta1 * (theta.theta3 + 1.0) + theta1;

  // Per transition x_prev -> x: probability that the exposure started bright,
  // and the conditional mean of the frame.
  Eigen::MatrixXd bright(n, n);
  Eigen::MatrixXd cond_mean(n, n);
  for (int xp = 0; xp < n; ++xp) {
    for (int x = 0; x < n; ++x) {
      const double total = mats.total(x, xp);
      const double via_bright = mats.short_time(x, 0) * mats.long_time(0, xp);
      bright(x, xp) = total > 0.0 ? via_bright / total : 0.0;
      cond_mean(x, xp) = bright(x, xp) * (x == 0 ? mean_stay : mean_exit);
    }
  }

  const auto Tz = static_cast<std::size_t>(T);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(T);
  Eigen::VectorXd p_bright = Eigen::VectorXd::Zero(T);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(T, T);
  std::vector<int> state(Tz + 1, 0);
  std::vector<double> prob(Tz + 1, 0.0);
  Eigen::VectorXd e(T);
  Eigen::VectorXd b(T);
  int depth = 0;
  for (;;) {
    const int x = state[static_cast<std::size_t>(depth)];
    const double w = depth == 0 ? spec.nu[x]
                                : prob[static_cast<std::size_t>(depth) - 1] *
                                      mats.total(x, state[static_cast<std::size_t>(depth) - 1]);
    prob[static_cast<std::size_t>(depth)] = w;
    if (w > 0.0) {
      if (depth == T) {
        for (int t = 1; t <= T; ++t) {
          e[t - 1] = cond_mean(state[static_cast<std::size_t>(t)], state[static_cast<std::size_t>(t) - 1]);
          b[t - 1] = bright(state[static_cast<std::size_t>(t)], state[static_cast<std::size_t>(t) - 1]);
        }
        mu += w * e;
        p_bright += w * b;
        cross.noalias() += w * e * e.transpose();
      } else {
        ++depth;
        state[static_cast<std::size_t>(depth)] = 0;
        continue;
      }
    }
    while (depth >= 0 && ++state[static_cast<std::size_t>(depth)] == n) --depth;
    if (depth < 0) break;
  }

  MomentSet ms;
  ms.mu = m * mu;
  ms.Sigma = m * (cross - mu * mu.transpose());
  for (int t = 0; t < T; ++t) {
    const double s = camera.sigma_at(static_cast<std::size_t>(t));
    ms.Sigma(t, t) = m * (p_bright[t] * second - mu[t] * mu[t]) +
                     (camera.f2 - 1.0) * ms.mu[t] + s * s / (camera.a * camera.a);
  }
  // Bright-start means from powers of M.
  ms.mu0.resize(T + 1);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Unit(n, 0);
  ms.mu0[0] = m * theta1 / q00;
  for (int k = 1; k <= T; ++k) {
    ms.mu0[k] = m * theta1 / q00 * row[0];
    row = row * mats.total;
  }
  return ms;
}

MonteCarloMoments monte_carlo_moments(const std::vector<Eigen::VectorXd>& traces,
                                      int max_lag) {
  if (traces.size() < 2) throw Error(ErrorKind::InsufficientData, "need at least 2 traces");
  const Eigen::Index T = traces.front().size();
  const auto N = static_cast<Eigen::Index>(traces.size());
  Eigen::MatrixXd Y(N, T);
  for (Eigen::Index i = 0; i < N; ++i) {
    if (traces[static_cast<std::size_t>(i)].size() != T)
      throw Error(ErrorKind::InsufficientData, "traces differ in length");
    Y.row(i) = traces[static_cast<std::size_t>(i)].transpose();
  }
  const double n = static_cast<double>(N);

  MonteCarloMoments out;
  out.n = traces.size();
  out.mu_hat = Y.colwise().mean().transpose();
  const Eigen::MatrixXd D = Y.rowwise() - out.mu_hat.transpose();
  out.Sigma_hat = D.transpose() * D / (n - 1.0);
  out.mu_se = (out.Sigma_hat.diagonal() / n).cwiseSqrt();

  // Leave-one-out covariance: (S - n/(n-1) d_it d_iu) / (n - 2), so the
  // jackknife variance only needs the spread of the products d_it d_iu.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.Sigma_se = Eigen::MatrixXd::Constant(T, T, nan);
  const Eigen::Index lag_cap = max_lag < 0 ? T - 1 : std::min<Eigen::Index>(max_lag, T - 1);
  const double k = n / (n - 1.0);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index u = std::max<Eigen::Index>(0, t - lag_cap); u <= t; ++u) {
      double se = std::numeric_limits<double>::infinity();
      if (N > 2) {
        const Eigen::ArrayXd p = D.col(t).array() * D.col(u).array();
        const double ss = (p - p.mean()).square().sum();
        se = std::sqrt((n - 1.0) / n * k * k / ((n - 2.0) * (n - 2.0)) * ss);
      }
      out.Sigma_se(t, u) = se;
      out.Sigma_se(u, t) = se;
    }
  }
  return out;
}

MonteCarloMoments monte_carlo_moments(const std::vector<Trace>& traces, int max_lag) {
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(traces.size());
  for (const auto& tr : traces) ys.push_back(tr.y);
  return monte_carlo_moments(ys, max_lag);
}

OuterModelSpec random_model(int r, Rng& rng, double diag_min, bool bright_start) {
  if (r < 1) throw Error(ErrorKind::InvalidSpec, "r must be >= 1");
  const int n = r + 1;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    OuterModelSpec spec;
    spec.r = r;
    spec.q = Eigen::MatrixXd::Zero(n, r);
    for (int z = 0; z < r; ++z) {
      const double keep = diag_min + (0.97 - diag_min) * rng.uniform();
      const Eigen::VectorXd spread = dirichlet_ones(n - 1, rng) * (1.0 - keep);
      for (int x = 0, j = 0; x < n; ++x) {
        if (x == z) {
          spec.q(x, z) = keep;
        } else {
          spec.q(x, z) = spread[j++];
        }
      }
    }
    spec.nu = bright_start ? Eigen::VectorXd(Eigen::VectorXd::Unit(n, 0))
                           : dirichlet_ones(n, rng);

    SpectralDecomposition d;
    try {
      d = spectral_decompose(build_matrices(spec).total);
    } catch (const Error&) {
      continue;
    }
    if (!d.is_positive || d.condition > 1e6) continue;
    if (d.real_lambda().minCoeff() < 1e-3) continue;
    return spec;
  }
  throw Error(ErrorKind::ComplexSpectrum, "no model with a positive real spectrum found");
}

ThetaParams random_theta(Rng& rng) {
  ThetaParams t;
  t.theta1 = 0.5 + 4.5 * rng.uniform();
  t.theta2 = 0.05 + 0.9 * rng.uniform();
  t.theta3 = -0.5 + 2.5 * rng.uniform();
  return t;
}

}  // namespace htmm
