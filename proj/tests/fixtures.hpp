#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "htmm/inner_alexa.hpp"
#include "htmm/markov_core.hpp"
#include "htmm/simulator.hpp"

namespace htmm::testing {

inline OuterModelSpec make_spec(int r, const Eigen::MatrixXd& q, const Eigen::VectorXd& nu) {
  OuterModelSpec spec;
  spec.r = r;
  spec.q = q;
  spec.nu = nu;
  spec.validate();
  return spec;
}

inline Eigen::VectorXd unit(int n, int i) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e(i) = 1.0;
  return e;
}

// r = 1: bright stays with probability q00, otherwise bleaches.
inline OuterModelSpec bleach_only(double q00) {
  Eigen::MatrixXd q(2, 1);
  q << q00, 1.0 - q00;
  return make_spec(1, q, unit(2, 0));
}

// Desk-scale reference configuration: three dark-ish states (two blinking
// states and bleaching), everything starts bright, about 200 detected photons
// per bright frame and a background of a fifth of that.
inline SimulationConfig reference_config(int m, int T = 250) {
  SimulationConfig c;
  Eigen::MatrixXd q(4, 3);
  q << 0.90, 0.30, 0.05,
       0.06, 0.68, 0.00,
       0.025, 0.01, 0.94,
       0.015, 0.01, 0.01;
  c.spec = make_spec(3, q, unit(4, 0));
  const double inner_q = 0.99;
  c.inner = {0.995, inner_q, -std::log(0.9) / (1.0 - inner_q)};
  c.camera.p_d = 0.1;
  const ThetaParams detected = thin_theta(theta_from_inner(c.inner), c.camera.p_d);
  c.camera.sigma = {detected.theta1 / 5.0};
  c.m = m;
  c.T = T;
  c.seed = 1;
  c.replicates = 1;
  return c;
}

// Theta of an actual photon law with the given stay probability, so that
// the moments it produces are those of a real process.
inline ThetaParams realizable_theta(double q00, Rng& rng) {
  const double q = 0.8 + 0.19 * rng.uniform();
  const InnerAlexaParams inner{0.5 + 0.3 * rng.uniform(), q, -std::log(q00) / (1.0 - q)};
  return thin_theta(theta_from_inner(inner), 0.05 + 0.5 * rng.uniform());
}

// Theta in normalised units for a simulation config.
inline ThetaParams normalized_theta(const SimulationConfig& c) {
  return thin_theta(theta_from_inner(c.inner), c.camera.p_d);
}

}  // namespace htmm::testing
