#include "htmm/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "htmm/error.hpp"
#include "htmm/inner_alexa.hpp"
#include "htmm/moments.hpp"

namespace htmm {

namespace {

CameraModel random_camera(Rng& rng) {
  CameraModel c;
  c.a = 1.0;
  c.f2 = 1.0 + rng.uniform();
  c.sigma = {0.5 * rng.uniform()};
  return c;
}

Eigen::MatrixXd spectral_covariance(const SecondOrderParams& g, const CameraModel& camera,
                                    int T, bool inject_fault) {
  if (!inject_fault) return covariance(g, camera, T);
  SecondOrderParams broken = g;
  broken.theta.theta2 = 1.0 - g.theta.theta2;
  return covariance(broken, camera, T);
}

double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const Error& e) {
    r.status = e.kind() == ErrorKind::BudgetExceeded ? CheckStatus::Skip : CheckStatus::Fail;
    r.detail = e.what();
  } catch (const std::exception& e) {
    r.status = CheckStatus::Fail;
    r.detail = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

DualityError spectral_duality(int models, int T, std::uint64_t seed, bool inject_fault) {
  DualityError err;
  for (int i = 0; i < models; ++i) {
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(i)});
    const int r = 1 + i % 3;
    const OuterModelSpec spec = random_model(r, rng, 0.5, rng.uniform() < 0.5);
    const ThetaParams theta = random_theta(rng);
    const double m = 1.0 + std::floor(3.0 * rng.uniform());
    const CameraModel camera = random_camera(rng);
    const SecondOrderParams g = second_order_from_model(spec, theta, m);
    err.mean = std::max(err.mean, (mean_trace(g, T) - matrix_power_mean(spec, theta.theta1, m, T))
                                      .cwiseAbs()
                                      .maxCoeff());
    err.covariance =
        std::max(err.covariance, max_abs(spectral_covariance(g, camera, T, inject_fault),
                                         matrix_moment_covariance(spec, theta, m, camera, T)));
    ++err.models;
  }
  return err;
}

DualityError enumeration_duality(int models, int r, int T, std::uint64_t seed,
                                 const EnumerationBudget& budget, bool inject_fault) {
  DualityError err;
  for (int i = 0; i < models; ++i) {
    Rng rng = Rng::derive(seed, {1000u + static_cast<std::uint64_t>(i)});
    const OuterModelSpec spec = random_model(r, rng, 0.5, rng.uniform() < 0.5);
    const ThetaParams theta = random_theta(rng);
    const double m = 1.0 + std::floor(3.0 * rng.uniform());
    const CameraModel camera = random_camera(rng);
    const SecondOrderParams g = second_order_from_model(spec, theta, m);
    const MomentSet exact = enumerate_marginals(spec, theta, m, camera, T, budget);
    err.mean = std::max(err.mean, (mean_trace(g, T) - exact.mu).cwiseAbs().maxCoeff());
    err.covariance = std::max(
        err.covariance, max_abs(spectral_covariance(g, camera, T, inject_fault), exact.Sigma));
    ++err.models;
  }
  return err;
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  std::vector<CheckResult> out;
  const double tol = 1e-9;
  const bool fault = options.inject_fault;

  out.push_back(timed("spectral vs matrix-power moments (r<=3, T=50)", [&](CheckResult& r) {
    const auto e = spectral_duality(options.models, 50, options.seed, fault);
    r.status = (e.mean < tol && e.covariance < tol) ? CheckStatus::Pass : CheckStatus::Fail;
    r.detail = "max |d mu| " + sci(e.mean) + ", max |d Sigma| " + sci(e.covariance);
  }));

  out.push_back(timed("spectral vs path enumeration (r=1, T=6)", [&](CheckResult& r) {
    const auto e = enumeration_duality(20, 1, 6, options.seed, options.budget, fault);
    r.status = (e.mean < tol && e.covariance < tol) ? CheckStatus::Pass : CheckStatus::Fail;
    r.detail = "max |d mu| " + sci(e.mean) + ", max |d Sigma| " + sci(e.covariance);
  }));

  out.push_back(timed("spectral vs path enumeration (r=3, T=8)", [&](CheckResult& r) {
    const auto e = enumeration_duality(3, 3, 8, options.seed, options.budget, fault);
    r.status = (e.mean < tol && e.covariance < tol) ? CheckStatus::Pass : CheckStatus::Fail;
    r.detail = "max |d mu| " + sci(e.mean) + ", max |d Sigma| " + sci(e.covariance);
  }));

  out.push_back(timed("path-sum likelihood mass (r=1, T=4, geometric)", [&](CheckResult& r) {
    Rng rng = Rng::derive(options.seed, {7777});
    const OuterModelSpec spec = random_model(1, rng, 0.5);
    const GeometricLaw law(0.3, 0.2);
    const auto tm = truncated_total_mass(spec, law, 4, 15, options.budget);
    const double missing = 1.0 - tm.mass;
    r.status = (missing > -1e-12 && missing <= tm.tail_bound + 1e-12 && tm.tail_bound < 1e-6)
                   ? CheckStatus::Pass
                   : CheckStatus::Fail;
    r.detail = "1 - mass " + sci(missing) + ", tail bound " + sci(tm.tail_bound);
  }));

  out.push_back(timed("alpha constraints from random models", [&](CheckResult& r) {
    double worst = 0.0;
    for (int i = 0; i < options.models; ++i) {
      Rng rng = Rng::derive(options.seed, {2000u + static_cast<std::uint64_t>(i)});
      const OuterModelSpec spec = random_model(1 + i % 3, rng, 0.5, false);
      const auto g = second_order_from_model(spec, random_theta(rng), 1.0);
      worst = std::max(worst, check_constraints(g).max_abs());
    }
    r.status = worst < 1e-10 ? CheckStatus::Pass : CheckStatus::Fail;
    r.detail = "max residual " + sci(worst);
  }));

  out.push_back(timed("Lambert W round trip q00 in [0.01, 0.99]", [&](CheckResult& r) {
    double worst = 0.0;
    for (int i = 0; i <= 980; ++i) {
      const double q00 = 0.01 + 0.001 * i;
      worst = std::max(worst, std::abs(q00_from_theta2(theta2_from_q00(q00)) - q00));
    }
    r.status = worst < 1e-10 ? CheckStatus::Pass : CheckStatus::Fail;
    r.detail = "max error " + sci(worst);
  }));

  out.push_back(timed("thinning generating-function identity", [&](CheckResult& r) {
    const InnerAlexaParams inner{0.9, 0.95, 12.0};
    const double p_d = 0.3;
    const InnerAlexaParams thinned = thin_inner(inner, p_d);
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double xi = -1.0 + 0.05 * i;
      const double lhs = gen_fn_Y(xi, thinned);
      const double rhs = gen_fn_Y(std::log1p(p_d * std::expm1(xi)), inner);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    r.status = worst < 1e-12 ? CheckStatus::Pass : CheckStatus::Fail;
    r.detail = "max error " + sci(worst);
  }));
  return out;
}

std::string format_table(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    const char* tag = r.status == CheckStatus::Pass ? "PASS" : r.status == CheckStatus::Skip ? "SKIP" : "FAIL";
    os << tag << "  " << r.name << "  (" << r.detail << "; " << std::fixed;
    os.precision(2);
    os << r.seconds << " s)\n";
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (r.status == CheckStatus::Fail) return false;
  return true;
}

}  // namespace htmm
