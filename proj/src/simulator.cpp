#include "htmm/simulator.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "htmm/error.hpp"

namespace htmm {

namespace {

// Stream tags below the replicate id.
constexpr std::uint64_t kFluorophoreStream = 0;
constexpr std::uint64_t kDetectionStream = 1;
constexpr std::uint64_t kCameraStream = 2;

int draw_column(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left a sliver of mass: return the last state with weight.
  for (int i = n - 1; i >= 0; --i)
    if (probs[i] > 0.0) return i;
  return n - 1;
}

// Long-time step: bright and bleached states stay put.
int long_step(const OuterModelSpec& spec, int x, Rng& rng) {
  if (x == 0 || x == spec.r) return x;
  return draw_column(spec.q.col(x), rng);
}

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

unsigned worker_count() {
  if (const char* env = std::getenv("HTMM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void SimulationConfig::validate() const {
  spec.validate();
  inner.validate();
  camera.validate();
  if (m < 1) throw Error(ErrorKind::InvalidConfig, "m must be >= 1");
  if (T < 1) throw Error(ErrorKind::InvalidConfig, "T must be >= 1");
  if (replicates < 1) throw Error(ErrorKind::InvalidConfig, "replicates must be >= 1");
  if (camera.sigma.size() != 1 && camera.sigma.size() != static_cast<std::size_t>(T))
    throw Error(ErrorKind::InvalidConfig, "camera.sigma must have length 1 or T");
  const double q00_inner = q00_from_inner(inner);
  if (std::abs(q00_inner - spec.q00()) > 1e-6)
    throw Error(ErrorKind::InconsistentQ00,
                "inner model gives q00 = " + std::to_string(q00_inner) +
                    " but spec.q[0][0] = " + std::to_string(spec.q00()));
}

HiddenPath simulate_hidden_path(const OuterModelSpec& spec, int T, Rng& rng) {
  spec.validate();
  HiddenPath path;
  path.pre.resize(static_cast<std::size_t>(T));
  path.post.resize(static_cast<std::size_t>(T) + 1);
  int x = draw_column(spec.nu, rng);
  path.post[0] = x;
  for (int t = 1; t <= T; ++t) {
    const int pre = long_step(spec, x, rng);
    x = (pre == 0) ? draw_column(spec.q.col(0), rng) : pre;
    path.pre[static_cast<std::size_t>(t - 1)] = pre;
    path.post[static_cast<std::size_t>(t)] = x;
  }
  return path;
}

std::vector<std::int64_t> simulate_single_fluorophore(const OuterModelSpec& spec,
                                                      const InnerAlexaParams& inner,
                                                      int T, Rng& rng,
                                                      HiddenPath* path) {
  const double q00 = spec.q00();
  Eigen::VectorXd exit_law = spec.q.col(0);
  exit_law[0] = 0.0;
  exit_law /= (1.0 - q00);

  std::vector<std::int64_t> y(static_cast<std::size_t>(T), 0);
  if (path) {
    path->pre.assign(static_cast<std::size_t>(T), 0);
    path->post.assign(static_cast<std::size_t>(T) + 1, 0);
  }
  int x = draw_column(spec.nu, rng);
  if (path) path->post[0] = x;
  for (int t = 0; t < T; ++t) {
    const int pre = long_step(spec, x, rng);
    if (pre == 0) {
      const FrameSample s = sample_frame(inner, rng);
      y[static_cast<std::size_t>(t)] = s.photons;
      x = s.exited ? draw_column(exit_law, rng) : 0;
    } else {
      x = pre;
    }
    if (path) {
      path->pre[static_cast<std::size_t>(t)] = pre;
      path->post[static_cast<std::size_t>(t) + 1] = x;
    }
  }
  return y;
}

std::vector<std::int64_t> simulate_photon_trace(const SimulationConfig& config,
                                                std::uint64_t replicate) {
  config.validate();
  std::vector<std::int64_t> total(static_cast<std::size_t>(config.T), 0);
  for (int k = 0; k < config.m; ++k) {
    Rng rng = Rng::derive(config.seed,
                          {replicate, kFluorophoreStream, static_cast<std::uint64_t>(k)});
    const auto y = simulate_single_fluorophore(config.spec, config.inner, config.T, rng);
    for (std::size_t t = 0; t < total.size(); ++t) total[t] += y[t];
  }
  return total;
}

std::vector<std::int64_t> apply_detection(const std::vector<std::int64_t>& photons,
                                          double p_d, Rng& rng) {
  if (!(p_d > 0.0 && p_d <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "p_d must lie in (0,1]");
  if (p_d == 1.0) return photons;
  std::vector<std::int64_t> out(photons.size());
  for (std::size_t t = 0; t < photons.size(); ++t) {
    if (photons[t] <= 0) continue;
    std::binomial_distribution<std::int64_t> thin(photons[t], p_d);
    out[t] = thin(rng);
  }
  return out;
}

Eigen::VectorXd apply_camera(const std::vector<std::int64_t>& detected,
                             const CameraModel& camera, Rng& rng) {
  camera.validate();
  // Each gain is Gamma(1/(f2-1), f2-1) with mean 1, so a sum of n gains is
  // Gamma(n/(f2-1), f2-1); c = a for unit mean gain.
  const double excess = camera.f2 - 1.0;
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd out(static_cast<Eigen::Index>(detected.size()));
  for (std::size_t t = 0; t < detected.size(); ++t) {
    double gain = 0.0;
    const auto n = detected[t];
    if (n > 0) {
      if (excess > 0.0) {
        std::gamma_distribution<double> g(static_cast<double>(n) / excess, excess);
        gain = g(rng);
      } else {
        gain = static_cast<double>(n);
      }
    }
    const double s = camera.sigma_at(t);
    const double eps = s > 0.0 ? s * noise(rng) : 0.0;
    out[static_cast<Eigen::Index>(t)] = camera.a * gain + eps + camera.o;
  }
  return out;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& ytilde, const CameraModel& camera) {
  if (!(camera.a > 0.0)) throw Error(ErrorKind::InvalidConfig, "camera.a must be > 0");
  return (ytilde.array() - camera.o) / camera.a;
}

Trace simulate_trace(const SimulationConfig& config, std::uint64_t replicate) {
  const auto photons = simulate_photon_trace(config, replicate);
  Rng detection = Rng::derive(config.seed, {replicate, kDetectionStream});
  Rng amplification = Rng::derive(config.seed, {replicate, kCameraStream});
  const auto detected = apply_detection(photons, config.camera.p_d, detection);
  Trace tr;
  tr.y = normalize(apply_camera(detected, config.camera, amplification), config.camera);
  tr.m_true = config.m;
  tr.seed = config.seed;
  tr.replicate = replicate;
  return tr;
}

std::vector<Trace> simulate_traces(const SimulationConfig& config) {
  config.validate();
  std::vector<Trace> out(static_cast<std::size_t>(config.replicates));
  parallel_for(out.size(), [&](std::size_t i) { out[i] = simulate_trace(config, i); });
  return out;
}

std::vector<std::pair<double, double>> simulate_calibration_stack(
    const CameraModel& camera, const std::vector<double>& levels, int pixels,
    std::uint64_t seed) {
  camera.validate();
  if (pixels < 2) throw Error(ErrorKind::InvalidConfig, "need at least 2 pixels per level");
  std::vector<std::pair<double, double>> out;
  out.reserve(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0)) throw Error(ErrorKind::InvalidConfig, "levels must be >= 0");
    Rng rng = Rng::derive(seed, {i});
    std::poisson_distribution<std::int64_t> light(levels[i]);
    std::vector<std::int64_t> detected(static_cast<std::size_t>(pixels));
    for (auto& d : detected) d = light(rng);
    CameraModel flat = camera;
    flat.sigma = {camera.sigma.front()};
    const Eigen::VectorXd v = apply_camera(detected, flat, rng);
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / static_cast<double>(pixels - 1);
    out.emplace_back(mean, var);
  }
  return out;
}

}  // namespace htmm
