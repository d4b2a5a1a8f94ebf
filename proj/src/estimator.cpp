#include "htmm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "htmm/error.hpp"
#include "htmm/optimize.hpp"
#include "htmm/rng.hpp"

namespace htmm {

namespace {

constexpr double kLambdaLo = 1e-6;
constexpr double kLambdaHi = 1.0 - 1e-6;
constexpr double kMaxQ00 = 1.0 - 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

// Free coordinates of one model order, grouped in blocks:
//   [0, r)                   lambda (nested logistic, descending)
//   [r, 2r-1)                alpha0_1 .. alpha0_{r-1}
//   theta block              log theta1, log(theta3 + 1) [, logit theta2]
//   initial-law block        logit nu0, alpha1_1 .. alpha1_{r-1}
class Coordinates {
 public:
  Coordinates(int r, bool alexa, std::optional<double> nu0_fixed)
      : r_(r), alexa_(alexa), nu0_fixed_(nu0_fixed) {}

  int lambda_begin() const { return 0; }
  int theta_begin() const { return 2 * r_ - 1; }
  int theta_size() const { return alexa_ ? 2 : 3; }
  int init_begin() const { return theta_begin() + theta_size(); }
  int init_size() const { return nu0_fixed_ ? 0 : r_; }
  int size() const { return init_begin() + init_size(); }

  std::vector<std::vector<int>> blocks() const {
    std::vector<std::vector<int>> out(nu0_fixed_ ? 2 : 3);
    for (int i = 0; i < theta_begin(); ++i) out[0].push_back(i);
    for (int i = 0; i < theta_size(); ++i) out[1].push_back(theta_begin() + i);
    for (int i = 0; i < init_size(); ++i) out[2].push_back(init_begin() + i);
    return out;
  }

  // Throws ConstraintViolation outside the feasible set.
  SecondOrderParams decode(const Eigen::VectorXd& z, double m) const {
    const int n = r_ + 1;
    SecondOrderParams g;
    g.m = m;
    g.lambda = Eigen::VectorXd::Ones(n);
    g.alpha0 = Eigen::VectorXd::Zero(n);
    g.alpha1 = Eigen::VectorXd::Zero(n);
    double upper = kLambdaHi;
    for (int x = 0; x < r_; ++x) {
      g.lambda[x] = kLambdaLo + (upper - kLambdaLo) * logistic(z[x]);
      upper = g.lambda[x];
    }
    double rest = 0.0;
    for (int x = 1; x < r_; ++x) {
      g.alpha0[x] = z[r_ + x - 1];
      rest += g.alpha0[x];
    }
    g.alpha0[0] = 1.0 - rest;
    const double inverse_sum = g.alpha0.head(r_).cwiseQuotient(g.lambda.head(r_)).sum();
    if (!(inverse_sum >= 1.0 / kMaxQ00))
      throw Error(ErrorKind::ConstraintViolation, "q00 outside (0, 1 - 1e-6]");
    g.q00 = 1.0 / inverse_sum;

    const int tb = theta_begin();
    g.theta.theta1 = std::exp(z[tb]);
    g.theta.theta3 = std::exp(z[tb + 1]) - 1.0;
    g.theta.theta2 = alexa_ ? theta2_from_q00(g.q00) : logistic(z[tb + 2]);

    if (nu0_fixed_) {
      g.nu0 = *nu0_fixed_;
    } else {
      const int ib = init_begin();
      g.nu0 = logistic(z[ib]);
      double weighted = 0.0;
      for (int x = 1; x < r_; ++x) {
        g.alpha1[x] = z[ib + x];
        weighted += g.alpha1[x] / g.lambda[x];
      }
      g.alpha1[0] = -g.lambda[0] * weighted;
      const double s = g.q00 * g.alpha1.sum();
      if (s < 0.0 || s > 1.0)
        throw Error(ErrorKind::ConstraintViolation, "q00 sum alpha1 outside [0,1]");
    }
    return g;
  }

  Eigen::VectorXd encode(const SecondOrderParams& g) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(size());
    double upper = kLambdaHi;
    for (int x = 0; x < r_; ++x) {
      const double lam = std::clamp(g.lambda[x], kLambdaLo * 1.5, upper * (1.0 - 1e-9));
      z[x] = logit((lam - kLambdaLo) / (upper - kLambdaLo));
      upper = kLambdaLo + (upper - kLambdaLo) * logistic(z[x]);
    }
    for (int x = 1; x < r_; ++x) z[r_ + x - 1] = g.alpha0[x];
    const int tb = theta_begin();
    z[tb] = std::log(std::max(g.theta.theta1, 1e-12));
    z[tb + 1] = std::log(std::max(g.theta.theta3 + 1.0, 1e-12));
    if (!alexa_) z[tb + 2] = logit(g.theta.theta2);
    if (!nu0_fixed_) {
      const int ib = init_begin();
      z[ib] = logit(g.nu0);
      for (int x = 1; x < r_; ++x) z[ib + x] = g.alpha1[x];
    }
    return z;
  }

 private:
  int r_;
  bool alexa_;
  std::optional<double> nu0_fixed_;
};

// Trailing moving average with the window shrinking at the start.
Eigen::VectorXd moving_average(const Eigen::VectorXd& v, int window) {
  Eigen::VectorXd out(v.size());
  double acc = 0.0;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    acc += v[t];
    if (t >= window) acc -= v[t - window];
    out[t] = acc / static_cast<double>(std::min<Eigen::Index>(t + 1, window));
  }
  return out;
}

struct ExpFit {
  Eigen::VectorXd lambda;  // r, descending
  Eigen::VectorXd c;       // r, >= 0
  double residual = kInf;
};

Eigen::VectorXd nested_lambda(const Eigen::VectorXd& u) {
  Eigen::VectorXd lam(u.size());
  double upper = kLambdaHi;
  for (Eigen::Index x = 0; x < u.size(); ++x) {
    lam[x] = kLambdaLo + (upper - kLambdaLo) * logistic(u[x]);
    upper = lam[x];
  }
  return lam;
}

Eigen::VectorXd nested_logits(const Eigen::VectorXd& lam) {
  Eigen::VectorXd u(lam.size());
  double upper = kLambdaHi;
  for (Eigen::Index x = 0; x < lam.size(); ++x) {
    u[x] = logit((lam[x] - kLambdaLo) / (upper - kLambdaLo));
    upper = lam[x];
  }
  return u;
}

// Variable projection: for fixed decay rates the non-negative amplitudes are
// an NNLS problem on the smoothed basis.
ExpFit project(const Eigen::VectorXd& smooth_y, const Eigen::VectorXd& lam, int window) {
  const Eigen::Index T = smooth_y.size();
  Eigen::MatrixXd basis(T, lam.size());
  for (Eigen::Index x = 0; x < lam.size(); ++x) {
    Eigen::VectorXd col(T);
    double v = 1.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      col[t] = v;
      v *= lam[x];
    }
    basis.col(x) = moving_average(col, window);
  }
  ExpFit f;
  f.lambda = lam;
  f.c = nnls_small(basis, smooth_y);
  f.residual = (basis * f.c - smooth_y).squaredNorm();
  return f;
}

ExpFit fit_exponentials(const Eigen::VectorXd& y, int r, int window) {
  const Eigen::VectorXd smooth_y = moving_average(y, window);
  const double T = static_cast<double>(y.size());

  // Decay times on a log grid from one frame to four trace lengths.
  const int grid_size = std::max(r + 3, 8);
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    const double tau = std::exp(std::log(4.0 * T) * (grid_size - 1 - i) /
                                static_cast<double>(grid_size - 1));
    grid[static_cast<std::size_t>(i)] = std::exp(-1.0 / tau);
  }
  std::vector<ExpFit> starts;
  std::vector<int> pick(static_cast<std::size_t>(r));
  std::iota(pick.begin(), pick.end(), 0);
  for (;;) {
    Eigen::VectorXd lam(r);
    for (int x = 0; x < r; ++x) lam[x] = std::min(grid[static_cast<std::size_t>(pick[static_cast<std::size_t>(x)])], kLambdaHi * (1.0 - 1e-6 * x));
    starts.push_back(project(smooth_y, lam, window));
    int pos = r - 1;
    while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == grid_size - r + pos) --pos;
    if (pos < 0) break;
    ++pick[static_cast<std::size_t>(pos)];
    for (int x = pos + 1; x < r; ++x)
      pick[static_cast<std::size_t>(x)] = pick[static_cast<std::size_t>(x) - 1] + 1;
  }
  std::sort(starts.begin(), starts.end(),
            [](const ExpFit& a, const ExpFit& b) { return a.residual < b.residual; });

  ExpFit best = starts.front();
  const std::size_t polish = std::min<std::size_t>(4, starts.size());
  NelderMeadOptions nm;
  nm.max_evals = 400;
  nm.initial_step = 0.5;
  nm.f_tol = 1e-12 * std::max(1.0, smooth_y.squaredNorm());
  for (std::size_t s = 0; s < polish; ++s) {
    auto objective = [&](const Eigen::VectorXd& u) {
      return project(smooth_y, nested_lambda(u), window).residual;
    };
    const auto res = nelder_mead(objective, nested_logits(starts[s].lambda), nm);
    const ExpFit f = project(smooth_y, nested_lambda(res.x), window);
    if (f.residual < best.residual) best = f;
  }
  return best;
}

double plateau_level(const Eigen::VectorXd& y, const CameraModel& camera) {
  const Eigen::Index T = y.size();
  std::vector<double> active;
  for (Eigen::Index t = (3 * T) / 4; t < T; ++t) {
    const double threshold = 3.0 * camera.sigma_at(static_cast<std::size_t>(t)) / camera.a;
    if (y[t] > threshold) active.push_back(y[t]);
  }
  if (active.size() < 5) return y.maxCoeff() / 2.0;
  std::sort(active.begin(), active.end());
  const std::size_t cut = active.size() / 10;
  double sum = 0.0;
  for (std::size_t i = cut; i < active.size() - cut; ++i) sum += active[i];
  return sum / static_cast<double>(active.size() - 2 * cut);
}

int clamp_to_grid(double m, const std::vector<int>& grid) {
  int best = grid.front();
  for (int g : grid)
    if (std::abs(g - m) < std::abs(best - m)) best = g;
  return best;
}

SecondOrderParams rescale_m(const SecondOrderParams& g, double m) {
  SecondOrderParams out = g;
  // Keep m theta1 and theta1 (theta3 + 1) fixed.
  out.theta.theta1 = g.theta.theta1 * g.m / m;
  out.theta.theta3 = (g.theta.theta3 + 1.0) * m / g.m - 1.0;
  out.m = m;
  return out;
}

// Keeps m theta1 and theta3; the variance stays valid when m decreases.
SecondOrderParams rescale_m_keep_theta3(const SecondOrderParams& g, double m) {
  SecondOrderParams out = g;
  out.theta.theta1 = g.theta.theta1 * g.m / m;
  out.m = m;
  return out;
}

struct MFit {
  SecondOrderParams gamma;
  double loglik = -kInf;
  bool converged = false;
  int cycles = 0;
  long evals = 0;
};

class ProfilePoint {
 public:
  ProfilePoint(const Eigen::VectorXd& y, const CameraModel& camera, const FitOptions& opt,
               int m)
      : y_(y), camera_(camera), opt_(opt), coords_(opt.r, opt.alexa, opt.nu0_fixed), m_(m) {}

  double objective(const Eigen::VectorXd& z) {
    ++evals_;
    try {
      return -pseudo_loglik(coords_.decode(z, m_), camera_, y_);
    } catch (const Error&) {
      return kInf;
    }
  }

  // Best of the rescaled starts, or an infinite value if none is feasible.
  std::pair<Eigen::VectorXd, double> best_start(const std::vector<SecondOrderParams>& starts) {
    Eigen::VectorXd z;
    double f = kInf;
    for (const auto& s : starts) {
      SecondOrderParams kept = rescale_m_keep_theta3(s, m_);
      // Raise theta3 until the covariance is valid, at most a few times.
      for (int bump = 0; bump < 6; ++bump) {
        for (const auto& cand : {coords_.encode(rescale_m(s, m_)), coords_.encode(kept)}) {
          const double fc = objective(cand);
          if (fc < f || z.size() == 0) {
            z = cand;
            f = fc;
          }
        }
        if (std::isfinite(f)) break;
        kept.theta.theta3 = 2.0 * kept.theta.theta3 + 0.1;
      }
    }
    return {z, f};
  }

  MFit run(const std::vector<SecondOrderParams>& starts, int restarts) {
    auto [z, f] = best_start(starts);
    MFit out;
    auto [zb, fb, conv] = descend(z, f, out.cycles);
    Rng rng = Rng::derive(opt_.seed, {static_cast<std::uint64_t>(m_)});
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (int k = 0; k < restarts && std::isfinite(fb); ++k) {
      Eigen::VectorXd zs = zb;
      for (Eigen::Index i = 0; i < zs.size(); ++i) zs[i] += jitter(rng);
      const double fs = objective(zs);
      if (!std::isfinite(fs)) continue;
      auto [zr, fr, cr] = descend(zs, fs, out.cycles);
      if (fr < fb - opt_.tol) {
        zb = zr;
        fb = fr;
        conv = cr;
      }
    }
    out.loglik = -fb;
    out.converged = conv && std::isfinite(fb);
    out.evals = evals_;
    if (std::isfinite(fb)) out.gamma = coords_.decode(zb, m_);
    return out;
  }

 private:
  std::tuple<Eigen::VectorXd, double, bool> descend(Eigen::VectorXd z, double f, int& cycles) {
    if (!std::isfinite(f)) return {z, f, false};
    const auto blocks = coords_.blocks();
    bool converged = false;
    for (int cycle = 0; cycle < opt_.max_iters; ++cycle) {
      ++cycles;
      const double start = f;
      for (const auto& block : blocks) {
        if (block.empty()) continue;
        Eigen::VectorXd sub(static_cast<Eigen::Index>(block.size()));
        for (std::size_t i = 0; i < block.size(); ++i) sub[static_cast<Eigen::Index>(i)] = z[block[i]];
        auto partial = [&](const Eigen::VectorXd& s) {
          Eigen::VectorXd full = z;
          for (std::size_t i = 0; i < block.size(); ++i) full[block[i]] = s[static_cast<Eigen::Index>(i)];
          return objective(full);
        };
        NelderMeadOptions nm;
        nm.max_evals = 60 * static_cast<int>(block.size()) + 60;
        nm.initial_step = cycle == 0 ? 0.2 : 0.05;
        nm.f_tol = opt_.tol * 0.1;
        nm.x_tol = 1e-6;
        nm.restarts = 1;
        const auto res = nelder_mead(partial, sub, nm);
        if (res.f < f) {
          for (std::size_t i = 0; i < block.size(); ++i) z[block[i]] = res.x[static_cast<Eigen::Index>(i)];
          f = res.f;
        }
      }
      if (start - f < opt_.tol) {
        // Joint polish; another cycle only if it still moves.
        NelderMeadOptions nm;
        nm.max_evals = 40 * static_cast<int>(z.size());
        nm.initial_step = 0.02;
        nm.f_tol = opt_.tol * 0.1;
        nm.x_tol = 1e-6;
        nm.restarts = 0;
        const auto res = nelder_mead([&](const Eigen::VectorXd& v) { return objective(v); }, z, nm);
        if (res.f < f - opt_.tol) {
          z = res.x;
          f = res.f;
          continue;
        }
        if (res.f < f) {
          z = res.x;
          f = res.f;
        }
        converged = true;
        break;
      }
    }
    return {z, f, converged};
  }

  const Eigen::VectorXd& y_;
  const CameraModel& camera_;
  const FitOptions& opt_;
  Coordinates coords_;
  int m_;
  long evals_ = 0;
};

FitResult profile_fit(const Eigen::VectorXd& y_in, const CameraModel& camera,
                      const FitOptions& options, const SecondOrderParams* given) {
  options.validate();
  camera.validate();
  FitResult result;
  Eigen::VectorXd y = y_in;
  if (y.size() > kMaxFitFrames) {
    y = y_in.head(kMaxFitFrames);
    result.diagnostics.warning =
        "trace truncated to the first " + std::to_string(kMaxFitFrames) + " frames";
  }

  SecondOrderParams base = given ? *given : init_params(y, options.r, camera, options.m_grid);
  if (base.r() != options.r)
    throw Error(ErrorKind::InvalidConfig, "start parameters have the wrong r");
  if (!options.nu0_fixed && base.nu0 >= 1.0) base.nu0 = 1.0 - 1e-3;
  if (options.nu0_fixed) {
    base.nu0 = *options.nu0_fixed;
    base.alpha1.setZero();
  }

  std::vector<int> grid = options.m_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // Ascending sweep warm-started from the previous m, then a descending sweep
  // that re-optimises wherever the larger neighbour gives a better start.
  std::vector<MFit> fits;
  std::optional<SecondOrderParams> previous;
  for (int m : grid) {
    std::vector<SecondOrderParams> starts{base};
    if (previous) starts.push_back(*previous);
    ProfilePoint point(y, camera, options, m);
    MFit mf = point.run(starts, options.restarts);
    result.diagnostics.iterations += mf.cycles;
    result.diagnostics.evaluations += mf.evals;
    if (std::isfinite(mf.loglik)) previous = mf.gamma;
    fits.push_back(std::move(mf));
  }
  for (std::size_t i = grid.size() - 1; i-- > 0;) {
    if (!std::isfinite(fits[i + 1].loglik)) continue;
    ProfilePoint point(y, camera, options, grid[i]);
    const double from_neighbour = -point.best_start({fits[i + 1].gamma}).second;
    if (!(from_neighbour > fits[i].loglik + options.tol)) continue;
    MFit mf = point.run({fits[i + 1].gamma}, 0);
    result.diagnostics.iterations += mf.cycles;
    result.diagnostics.evaluations += mf.evals;
    if (mf.loglik > fits[i].loglik) fits[i] = std::move(mf);
  }

  bool all_converged = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    MFit& mf = fits[i];
    all_converged = all_converged && mf.converged;
    if (!std::isfinite(mf.loglik)) mf.gamma = rescale_m(base, grid[i]);
    result.profile.emplace_back(grid[i], mf.loglik);
    result.per_m.push_back(mf.gamma);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.profile.size(); ++i)
    if (result.profile[i].second > result.profile[best].second) best = i;
  result.m_hat = result.profile[best].first;
  result.loglik = result.profile[best].second;
  result.gamma_hat = result.per_m[best];
  result.diagnostics.converged = all_converged && std::isfinite(result.loglik);
  result.diagnostics.constraints = check_constraints(result.gamma_hat, 1e-6);
  if (std::isfinite(result.loglik)) {
    const Eigen::MatrixXd S = covariance(result.gamma_hat, camera, static_cast<int>(y.size()));
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues();
    result.diagnostics.sigma_condition = ev.minCoeff() > 0.0 ? ev.maxCoeff() / ev.minCoeff() : kInf;
  }
  return result;
}

}  // namespace

std::vector<int> FitOptions::default_m_grid() {
  std::vector<int> g(20);
  std::iota(g.begin(), g.end(), 1);
  return g;
}

void FitOptions::validate() const {
  if (r < 1) throw Error(ErrorKind::InvalidConfig, "r must be >= 1");
  if (m_grid.empty()) throw Error(ErrorKind::InvalidConfig, "m_grid is empty");
  for (int m : m_grid)
    if (m < 1) throw Error(ErrorKind::InvalidConfig, "m_grid entries must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "tol must be > 0");
  if (max_iters < 1) throw Error(ErrorKind::InvalidConfig, "max_iters must be >= 1");
  if (restarts < 0) throw Error(ErrorKind::InvalidConfig, "restarts must be >= 0");
  if (nu0_fixed && !(*nu0_fixed >= 0.0 && *nu0_fixed <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "nu0 must lie in [0,1]");
}

double pseudo_loglik(const SecondOrderParams& gamma, const CameraModel& camera,
                     const Eigen::VectorXd& y) {
  const int T = static_cast<int>(y.size());
  if (T < 1) throw Error(ErrorKind::InsufficientData, "empty trace");
  const Eigen::VectorXd residual = y - mean_trace(gamma, T);
  // Factorised in place; the buffer is reused across calls on this thread.
  thread_local Eigen::MatrixXd S;
  double scale = 0.0;
  for (double jitter : {0.0, 1e-10, 1e-8}) {
    covariance_into(gamma, camera, T, S);
    if (jitter == 0.0) scale = S.trace() / T;
    S.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(S);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd diag = S.diagonal();
    if (diag.minCoeff() <= 0.0 || !diag.allFinite()) continue;
    const Eigen::VectorXd w = llt.matrixL().solve(residual);
    const double logdet = 2.0 * diag.array().log().sum();
    return -0.5 * (w.squaredNorm() + logdet);
  }
  throw Error(ErrorKind::SigmaNotPD, "covariance is not positive definite after jitter");
}

SecondOrderParams init_params(const Eigen::VectorXd& y, int r, const CameraModel& camera,
                              const std::vector<int>& m_grid) {
  if (r < 1) throw Error(ErrorKind::InvalidConfig, "r must be >= 1");
  if (m_grid.empty()) throw Error(ErrorKind::InvalidConfig, "m_grid is empty");
  const Eigen::Index T = y.size();
  if (T < 10 * r) throw Error(ErrorKind::InsufficientData, "need at least 10 r frames");
  if (!y.allFinite()) throw Error(ErrorKind::InvalidConfig, "trace has non-finite entries");
  if (y.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorKind::DegenerateTrace, "trace is all zero");

  const int window = static_cast<int>((T + 49) / 50);
  const ExpFit ef = fit_exponentials(y, r, window);
  const double amplitude = ef.c.sum();
  if (!(amplitude > 0.0))
    throw Error(ErrorKind::DegenerateTrace, "no decaying component in the trace");

  double theta1 = plateau_level(y, camera);
  if (!(theta1 > 0.0)) theta1 = amplitude;

  SecondOrderParams g;
  g.m = clamp_to_grid(std::round(amplitude / theta1), m_grid);
  g.nu0 = 1.0;
  g.lambda = Eigen::VectorXd::Ones(r + 1);
  g.lambda.head(r) = ef.lambda;
  g.alpha0 = Eigen::VectorXd::Zero(r + 1);
  g.alpha0.head(r) = ef.c / amplitude;
  g.alpha1 = Eigen::VectorXd::Zero(r + 1);
  g.q00 = std::min(1.0 / g.alpha0.head(r).cwiseQuotient(ef.lambda).sum(), kMaxQ00);
  g.theta.theta1 = amplitude / g.m;
  g.theta.theta2 = theta2_from_q00(g.q00);
  // Smallest theta3 for which the stay/exit split is a valid photon law.
  const double split = g.theta.theta2 * g.theta.theta2 / g.q00 +
                       (1.0 - g.theta.theta2) * (1.0 - g.theta.theta2) / (1.0 - g.q00);
  g.theta.theta3 = std::max(0.0, split - 1.0 - 1.0 / g.theta.theta1) + 0.1;
  return g;
}

FitResult fit(const Eigen::VectorXd& y, const CameraModel& camera, const FitOptions& options) {
  return profile_fit(y, camera, options, nullptr);
}

FitResult fit_from(const Eigen::VectorXd& y, const CameraModel& camera,
                   const FitOptions& options, const SecondOrderParams& start) {
  return profile_fit(y, camera, options, &start);
}

CalibrationResult calibrate_camera(const std::vector<std::pair<double, double>>& pixel_stats,
                                   double f2) {
  if (!(f2 >= 1.0 && f2 <= 2.0)) throw Error(ErrorKind::InvalidConfig, "f2 must lie in [1,2]");
  if (pixel_stats.size() < 3)
    throw Error(ErrorKind::IllConditioned, "need at least 3 (mean, variance) pairs");
  double lo = kInf;
  double hi = -kInf;
  for (const auto& [mean, var] : pixel_stats) {
    if (!std::isfinite(mean) || !std::isfinite(var))
      throw Error(ErrorKind::IllConditioned, "non-finite calibration pair");
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  if (!(hi - lo >= 10.0 * std::abs(lo)) || hi - lo <= 0.0)
    throw Error(ErrorKind::IllConditioned, "mean range narrower than 10x its minimum");

  const double n = static_cast<double>(pixel_stats.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [mean, var] : pixel_stats) {
    mx += mean;
    my += var;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& [mean, var] : pixel_stats) {
    sxy += (mean - mx) * (var - my);
    sxx += (mean - mx) * (mean - mx);
  }
  CalibrationResult out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.a = out.slope / f2;
  return out;
}

}  // namespace htmm
