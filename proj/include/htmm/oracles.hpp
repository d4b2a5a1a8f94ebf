#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "htmm/inner_alexa.hpp"
#include "htmm/markov_core.hpp"
#include "htmm/moments.hpp"
#include "htmm/rng.hpp"
#include "htmm/simulator.hpp"

namespace htmm {

struct EnumerationBudget {
  std::uint64_t max_paths = 10'000'000;
};

// (r+1)^(T+1), saturating at UINT64_MAX.
std::uint64_t path_count(int r, int T);

// Photon-count law of a frame that starts bright: stay() is p_00 and exit()
// is p_x0 for every dark or bleached destination x. Laws must be supported on
// {0, ..., support_max()} or report their tail mass beyond a cut.
class PhotonLaw {
 public:
  virtual ~PhotonLaw() = default;
  virtual double stay(std::int64_t y) const = 0;
  virtual double exit(std::int64_t y) const = 0;
  // P(Y > k) under each conditional law.
  virtual double stay_tail(std::int64_t k) const = 0;
  virtual double exit_tail(std::int64_t k) const = 0;
};

// Exactly k photons when staying bright, j when leaving.
class DeterministicLaw final : public PhotonLaw {
 public:
  DeterministicLaw(std::int64_t stay_count, std::int64_t exit_count)
      : stay_count_(stay_count), exit_count_(exit_count) {}
  double stay(std::int64_t y) const override { return y == stay_count_ ? 1.0 : 0.0; }
  double exit(std::int64_t y) const override { return y == exit_count_ ? 1.0 : 0.0; }
  double stay_tail(std::int64_t k) const override { return stay_count_ > k ? 1.0 : 0.0; }
  double exit_tail(std::int64_t k) const override { return exit_count_ > k ? 1.0 : 0.0; }

 private:
  std::int64_t stay_count_;
  std::int64_t exit_count_;
};

class PoissonLaw final : public PhotonLaw {
 public:
  PoissonLaw(double stay_mean, double exit_mean)
      : stay_mean_(stay_mean), exit_mean_(exit_mean) {}
  double stay(std::int64_t y) const override;
  double exit(std::int64_t y) const override;
  double stay_tail(std::int64_t k) const override;
  double exit_tail(std::int64_t k) const override;

 private:
  double stay_mean_;
  double exit_mean_;
};

// P(Y = y) = (1 - s) s^y.
class GeometricLaw final : public PhotonLaw {
 public:
  GeometricLaw(double stay_ratio, double exit_ratio)
      : stay_ratio_(stay_ratio), exit_ratio_(exit_ratio) {}
  double stay(std::int64_t y) const override;
  double exit(std::int64_t y) const override;
  double stay_tail(std::int64_t k) const override;
  double exit_tail(std::int64_t k) const override;

 private:
  double stay_ratio_;
  double exit_ratio_;
};

class AlexaLaw final : public PhotonLaw {
 public:
  explicit AlexaLaw(const InnerAlexaParams& params) : params_(params) {}
  double stay(std::int64_t y) const override { return alexa_photon_pmf(params_, y, false); }
  double exit(std::int64_t y) const override { return alexa_photon_pmf(params_, y, true); }
  double stay_tail(std::int64_t k) const override;
  double exit_tail(std::int64_t k) const override;

 private:
  InnerAlexaParams params_;
};

// Probability of the integer trace y, summed over all hidden paths
// X_0..X_T (and the intermediate states X'_t). BudgetExceeded if the number
// of paths exceeds the budget.
double exact_likelihood(const OuterModelSpec& spec, const PhotonLaw& law,
                        const std::vector<std::int64_t>& y,
                        const EnumerationBudget& budget = {});

// Same sum in log space.
double exact_log_likelihood(const OuterModelSpec& spec, const PhotonLaw& law,
                            const std::vector<std::int64_t>& y,
                            const EnumerationBudget& budget = {});

// Mass of all traces in {0..k}^T, and the union bound
// sum_t P(Y_t > k) <= T * max(stay_tail(k), exit_tail(k)) on what is missing.
struct TruncatedMass {
  double mass = 0.0;
  double tail_bound = 0.0;
};
TruncatedMass truncated_total_mass(const OuterModelSpec& spec, const PhotonLaw& law,
                                   int T, std::int64_t k,
                                   const EnumerationBudget& budget = {});

// Exact mu and Sigma of the normalised m-molecule trace by conditioning on
// every post-exposure path: given the path the frames are independent, the
// bright-start frame has conditional mean theta1 theta2 / q00 when it stays
// and theta1 (1 - theta2) / (1 - q00) when it leaves, and the second moment
// of a bright-start frame is theta1^2 (theta3 + 1) + theta1.
MomentSet enumerate_marginals(const OuterModelSpec& spec, const ThetaParams& theta,
                              double m, const CameraModel& camera, int T,
                              const EnumerationBudget& budget = {});

struct MonteCarloMoments {
  Eigen::VectorXd mu_hat;
  Eigen::MatrixXd Sigma_hat;
  Eigen::VectorXd mu_se;
  Eigen::MatrixXd Sigma_se;  // jackknife over traces
  std::size_t n = 0;
};

MonteCarloMoments monte_carlo_moments(const std::vector<Eigen::VectorXd>& traces,
                                      int max_lag = -1);
MonteCarloMoments monte_carlo_moments(const std::vector<Trace>& traces,
                                      int max_lag = -1);

// Random outer model with a real, positive, well-conditioned spectrum.
// Diagonal entries of q are drawn from [diag_min, 0.97]. With bright_start
// the initial law is e_0, otherwise a random probability vector.
OuterModelSpec random_model(int r, Rng& rng, double diag_min = 0.5,
                            bool bright_start = false);

ThetaParams random_theta(Rng& rng);

}  // namespace htmm
