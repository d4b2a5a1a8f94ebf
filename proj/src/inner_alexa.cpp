#include "htmm/inner_alexa.hpp"

#include <cmath>
#include <random>

#include "htmm/error.hpp"

namespace htmm {

namespace {

constexpr double kInvE = 0.36787944117144233;

void require_open_unit(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0))
    throw Error(ErrorKind::OutOfDomain, std::string(name) + " must lie in (0,1)");
}

// (1 - exp(-rate * u)) / u, with the series used near the removable
// singularity u = 0.
double exit_kernel(double rate, double u) {
  if (std::abs(u) < 1e-8) {
    const double x = rate * u;
    return rate * (1.0 - x / 2.0 + x * x / 6.0);
  }
  return -std::expm1(-rate * u) / u;
}

// log((1 - p) / (1 - p e^xi)): burst-level argument for the photon-level
// generating functions.
double burst_argument(double xi, const InnerAlexaParams& params) {
  const double pe = params.p * std::exp(xi);
  if (!(pe < 1.0))
    throw Error(ErrorKind::OutOfConvergenceRegion, "p e^xi must be < 1");
  if (!(params.q * (1.0 - params.p) / (1.0 - pe) < 1.0))
    throw Error(ErrorKind::OutOfConvergenceRegion,
                "q (1 - p) / (1 - p e^xi) must be < 1");
  return std::log1p(-params.p) - std::log1p(-pe);
}

}  // namespace

void InnerAlexaParams::validate() const {
  require_open_unit(p, "p");
  require_open_unit(q, "q");
  if (!(rate > 0.0 && std::isfinite(rate)))
    throw Error(ErrorKind::OutOfDomain, "rate must be > 0");
}

void CameraModel::validate() const {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidConfig, "camera.a must be > 0");
  if (!(f2 >= 1.0 && f2 <= 2.0))
    throw Error(ErrorKind::InvalidConfig, "camera.f2 must lie in [1,2]");
  if (!std::isfinite(o)) throw Error(ErrorKind::InvalidConfig, "camera.o must be finite");
  if (sigma.empty()) throw Error(ErrorKind::InvalidConfig, "camera.sigma is empty");
  for (double s : sigma)
    if (!(s >= 0.0)) throw Error(ErrorKind::InvalidConfig, "camera.sigma must be >= 0");
  if (!(p_d > 0.0 && p_d <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "camera.p_d must lie in (0,1]");
}

double CameraModel::sigma_at(std::size_t t) const {
  if (sigma.empty()) return 0.0;
  return sigma.size() == 1 ? sigma.front() : sigma.at(t);
}

double q00_from_inner(const InnerAlexaParams& params) {
  params.validate();
  return std::exp(-(1.0 - params.q) * params.rate);
}

double theta2_from_q00(double q00) {
  require_open_unit(q00, "q00");
  const double u = 1.0 - q00;
  if (u < 1e-8) return 1.0 - u / 2.0 - u * u / 6.0;
  return -q00 * std::log(q00) / u;
}

ThetaParams theta_from_inner(const InnerAlexaParams& params) {
  const double q00 = q00_from_inner(params);
  const double p = params.p;
  const double q = params.q;
  ThetaParams t;
  t.theta1 = p / (1.0 - p) * q / (1.0 - q) * (1.0 - q00);
  t.theta2 = theta2_from_q00(q00);
  t.theta3 = 2.0 / (1.0 - q00) * ((1.0 - q) / q - t.theta2 + 1.0) - 1.0;
  return t;
}

double lambert_w_minus1(double x) {
  if (!(x >= -kInvE && x < 0.0))
    throw Error(ErrorKind::OutOfDomain, "W_{-1} needs x in [-1/e, 0)");
  if (x == -kInvE) return -1.0;

  double w = std::log(-x) - std::log(-std::log(-x));
  if (!(w < -1.0)) w = -1.0 - 1e-6;
  for (int it = 0; it < 100; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double step =
        f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    double next = w - step;
    if (!(next < -1.0)) next = 0.5 * (w - 1.0);  // stay on the lower branch
    const bool done = std::abs(next - w) <= 1e-15 * std::abs(next) ||
                      std::abs(f) <= 1e-13 * std::abs(x);
    w = next;
    if (done) break;
  }
  return w;
}

double q00_from_theta2(double theta2) {
  if (!(theta2 > 0.0 && theta2 < 1.0))
    throw Error(ErrorKind::OutOfDomain, "theta2 must lie in (0,1)");
  const double x = -theta2 * std::exp(-theta2);
  return -theta2 / lambert_w_minus1(x);
}

double gen_fn_B_stay(double xi, const InnerAlexaParams& params) {
  params.validate();
  return std::exp(params.q * params.rate * std::expm1(xi));
}

double gen_fn_B_exit(double xi, const InnerAlexaParams& params) {
  params.validate();
  const double q = params.q;
  const double mu = params.rate;
  const double one_minus_q00 = -std::expm1(-(1.0 - q) * mu);
  const double u = 1.0 - q * std::exp(xi);
  return (1.0 - q) * exit_kernel(mu, u) / one_minus_q00;
}

double gen_fn_B(double xi, const InnerAlexaParams& params) {
  params.validate();
  const double q = params.q;
  const double mu = params.rate;
  const double q00 = std::exp(-(1.0 - q) * mu);
  const double one_minus_q00 = -std::expm1(-(1.0 - q) * mu);
  // Written as 1 + (deviations that vanish identically at xi = 0).
  const double stay = q00 * std::expm1(q * mu * std::expm1(xi));
  const double u = 1.0 - q * std::exp(xi);
  const double exit_part = (std::abs(u) < 1e-8)
                               ? (1.0 - q) * exit_kernel(mu, u)
                               : (1.0 - q) / u * -std::expm1(-mu * u);
  return 1.0 + stay + (exit_part - one_minus_q00);
}

double gen_fn_Y(double xi, const InnerAlexaParams& params) {
  return gen_fn_B(burst_argument(xi, params), params);
}

double gen_fn_Y_stay(double xi, const InnerAlexaParams& params) {
  return gen_fn_B_stay(burst_argument(xi, params), params);
}

double gen_fn_Y_exit(double xi, const InnerAlexaParams& params) {
  return gen_fn_B_exit(burst_argument(xi, params), params);
}

ConditionalBurstLaw conditional_burst_law(const InnerAlexaParams& params) {
  params.validate();
  return {params.q * params.rate};
}

double thin_inner(double p, double p_d) {
  require_open_unit(p, "p");
  if (!(p_d > 0.0 && p_d <= 1.0))
    throw Error(ErrorKind::OutOfDomain, "p_d must lie in (0,1]");
  return p * p_d / (1.0 - p + p * p_d);
}

InnerAlexaParams thin_inner(const InnerAlexaParams& params, double p_d) {
  InnerAlexaParams out = params;
  out.p = thin_inner(params.p, p_d);
  return out;
}

ThetaParams thin_theta(const ThetaParams& theta, double p_d) {
  ThetaParams out = theta;
  out.theta1 = p_d * theta.theta1;
  return out;
}

ThetaParams camera_theta(const ThetaParams& theta, const CameraModel& camera) {
  if (!(camera.f2 >= 1.0 && camera.f2 <= 2.0))
    throw Error(ErrorKind::InvalidConfig, "camera.f2 must lie in [1,2]");
  ThetaParams out = theta;
  out.theta1 = camera.a * theta.theta1;
  out.theta3 = theta.theta3 + (camera.f2 - 1.0) / theta.theta1;
  return out;
}

double alexa_photon_pmf(const InnerAlexaParams& params, std::int64_t y,
                        bool exited) {
  params.validate();
  if (y < 0) return 0.0;
  const double p = params.p;
  const double q = params.q;
  const double mu = params.rate;
  const double one_minus_q00 = -std::expm1(-(1.0 - q) * mu);

  // Burst-count law given the condition. B <= Z, so the support is cut where
  // the Poisson tail is far below double precision.
  const double law_rate = exited ? mu : q * mu;
  const auto b_max = static_cast<std::size_t>(
      std::ceil(law_rate + 40.0 * std::sqrt(law_rate) + 60.0));
  std::vector<double> log_pois(b_max + 1);
  for (std::size_t z = 0; z <= b_max; ++z) {
    const double zd = static_cast<double>(z);
    log_pois[z] = -law_rate + zd * std::log(law_rate) - std::lgamma(zd + 1.0);
  }
  std::vector<double> weight(b_max + 1);
  if (!exited) {
    for (std::size_t b = 0; b <= b_max; ++b) weight[b] = std::exp(log_pois[b]);
  } else {
    // P(B = b | Z > G) = P(G = b) P(Z > b) / (1 - q00); tails summed from the
    // top so that small tails keep their relative precision.
    double tail = 0.0;
    for (std::size_t b = b_max + 1; b-- > 0;) {
      weight[b] = std::exp(static_cast<double>(b) * std::log(q) + std::log1p(-q)) *
                  tail / one_minus_q00;
      tail += std::exp(log_pois[b]);
    }
  }

  const double yd = static_cast<double>(y);
  double total = (y == 0) ? weight[0] : 0.0;
  for (std::size_t b = 1; b <= b_max; ++b) {
    if (weight[b] == 0.0) continue;
    const double bd = static_cast<double>(b);
    const double log_nb = std::lgamma(yd + bd) - std::lgamma(yd + 1.0) -
                          std::lgamma(bd) + yd * std::log(p) +
                          bd * std::log1p(-p);
    total += weight[b] * std::exp(log_nb);
  }
  return total;
}

FrameSample sample_frame(const InnerAlexaParams& params, Rng& rng) {
  std::poisson_distribution<std::int64_t> bursts(params.rate);
  std::geometric_distribution<std::int64_t> before_exit(1.0 - params.q);
  const std::int64_t z = bursts(rng);
  const std::int64_t g = before_exit(rng);
  FrameSample s;
  s.exited = z > g;
  const std::int64_t b = std::min(z, g);
  if (b > 0) {
    std::negative_binomial_distribution<std::int64_t> photons(b, 1.0 - params.p);
    s.photons = photons(rng);
  }
  return s;
}

}  // namespace htmm
