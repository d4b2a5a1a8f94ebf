#pragma once

#include <cstdint>
#include <vector>

#include "htmm/rng.hpp"

namespace htmm {

// Burst model of the Alexa 647 inner (within-exposure) dynamics.
//
// Per exposure, Z ~ Poisson(rate) bursts would occur if the molecule could not
// leave the bright state, and G ~ Geom(1 - q) on {0, 1, ...} bursts happen
// before the exit. B = min(Z, G) bursts are realised and each contributes
// Geom(1 - p) photons on {0, 1, ...}. The molecule exits iff Z > G.
struct InnerAlexaParams {
  double p = 0.5;
  double q = 0.5;
  double rate = 1.0;

  void validate() const;
};

// Second-order summary of the photon statistics of a frame that starts bright:
//   theta1  E[Y | X' = 0]
//   theta2  q00 E[Y | X' = X = 0] / theta1
//   theta3  Var[Y | X' = 0] / theta1^2 - 1 / theta1
struct ThetaParams {
  double theta1 = 1.0;
  double theta2 = 0.5;
  double theta3 = 0.0;
};

struct CameraModel {
  double a = 1.0;    // camera units per detected photon
  double f2 = 1.0;   // excess noise factor, in [1, 2]
  double o = 0.0;    // offset
  std::vector<double> sigma{0.0};  // background sd per frame, or one value
  double p_d = 1.0;  // detection probability (simulation only)

  void validate() const;
  double sigma_at(std::size_t t) const;  // broadcasts a single value
};

double q00_from_inner(const InnerAlexaParams& params);

// -q00 log(q00) / (1 - q00), continuous at q00 -> 1.
double theta2_from_q00(double q00);

ThetaParams theta_from_inner(const InnerAlexaParams& params);

// Lower real branch W_{-1} on (-1/e, 0) by Halley iteration.
double lambert_w_minus1(double x);

// Inverse of theta2_from_q00 through q00 = -theta2 / W_{-1}(-theta2 e^-theta2).
double q00_from_theta2(double theta2);

// Moment generating functions. gen_fn_B is the law of the burst count and
// decomposes as q00 * gen_fn_B_stay + (1 - q00) * gen_fn_B_exit; gen_fn_Y
// composes a burst-level function with log((1 - p) / (1 - p e^xi)).
double gen_fn_B(double xi, const InnerAlexaParams& params);
double gen_fn_B_stay(double xi, const InnerAlexaParams& params);
double gen_fn_B_exit(double xi, const InnerAlexaParams& params);
double gen_fn_Y(double xi, const InnerAlexaParams& params);
double gen_fn_Y_stay(double xi, const InnerAlexaParams& params);
double gen_fn_Y_exit(double xi, const InnerAlexaParams& params);

struct ConditionalBurstLaw {
  double poisson_reduced_rate = 0.0;
};

// B given {Z <= G} is Poisson(q * rate).
ConditionalBurstLaw conditional_burst_law(const InnerAlexaParams& params);

// Binomial thinning with detection probability p_d maps the photon law with
// parameter p onto the same family with p * p_d / (1 - p + p * p_d).
double thin_inner(double p, double p_d);
InnerAlexaParams thin_inner(const InnerAlexaParams& params, double p_d);

ThetaParams thin_theta(const ThetaParams& theta, double p_d);
ThetaParams camera_theta(const ThetaParams& theta, const CameraModel& camera);

// Point probabilities of the photon count given that the frame starts bright
// and the molecule stays bright (exited = false) or leaves (exited = true).
double alexa_photon_pmf(const InnerAlexaParams& params, std::int64_t y,
                        bool exited);

struct FrameSample {
  std::int64_t photons = 0;
  bool exited = false;
};

FrameSample sample_frame(const InnerAlexaParams& params, Rng& rng);

}  // namespace htmm
