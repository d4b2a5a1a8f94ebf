#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "htmm/inner_alexa.hpp"
#include "htmm/markov_core.hpp"
#include "htmm/rng.hpp"

namespace htmm {

struct SimulationConfig {
  OuterModelSpec spec;
  InnerAlexaParams inner;
  CameraModel camera;
  int m = 1;
  int T = 100;
  std::uint64_t seed = 1;
  int replicates = 1;

  // InvalidConfig / InvalidSpec / InconsistentQ00.
  void validate() const;
};

struct Trace {
  Eigen::VectorXd y;  // normalised units
  int m_true = 0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::string config_hash;
};

struct HiddenPath {
  std::vector<int> pre;   // X'_1 .. X'_T
  std::vector<int> post;  // X_0 .. X_T
};

HiddenPath simulate_hidden_path(const OuterModelSpec& spec, int T, Rng& rng);

// One molecule: the short-time step out of the bright state is decided by the
// inner model, so photon counts and exits are consistent.
std::vector<std::int64_t> simulate_single_fluorophore(const OuterModelSpec& spec,
                                                      const InnerAlexaParams& inner,
                                                      int T, Rng& rng,
                                                      HiddenPath* path = nullptr);

// Sum of config.m molecules; molecule k draws from stream (seed, replicate, 0, k).
std::vector<std::int64_t> simulate_photon_trace(const SimulationConfig& config,
                                                std::uint64_t replicate);

std::vector<std::int64_t> apply_detection(const std::vector<std::int64_t>& photons,
                                          double p_d, Rng& rng);

// Camera units: a * (Gamma-distributed gain sum) + N(0, sigma_t^2) + o.
Eigen::VectorXd apply_camera(const std::vector<std::int64_t>& detected,
                             const CameraModel& camera, Rng& rng);

Eigen::VectorXd normalize(const Eigen::VectorXd& ytilde, const CameraModel& camera);

// Full chain for one replicate.
Trace simulate_trace(const SimulationConfig& config, std::uint64_t replicate);

// All replicates; parallel over replicates, capped by HTMM_THREADS.
std::vector<Trace> simulate_traces(const SimulationConfig& config);

// Flat-field stack: for each illumination level (expected detected photons per
// pixel), `pixels` independent Poisson pixels go through the camera. Returns
// the (mean, variance) pair of every level in camera units.
std::vector<std::pair<double, double>> simulate_calibration_stack(
    const CameraModel& camera, const std::vector<double>& levels, int pixels,
    std::uint64_t seed);

// Worker count from HTMM_THREADS (default: hardware concurrency, at least 1).
unsigned worker_count();

}  // namespace htmm
