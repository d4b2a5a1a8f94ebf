#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "htmm/estimator.hpp"
#include "htmm/inner_alexa.hpp"
#include "htmm/markov_core.hpp"
#include "htmm/moments.hpp"
#include "htmm/oracles.hpp"
#include "htmm/simulator.hpp"

namespace htmm {

using Json = nlohmann::json;

// Parsers report the offending field as a path ("config.spec.q[2]").
OuterModelSpec spec_from_json(const Json& j, const std::string& path = "spec");
InnerAlexaParams inner_from_json(const Json& j, const std::string& path = "inner");
CameraModel camera_from_json(const Json& j, const std::string& path = "camera");
ThetaParams theta_from_json(const Json& j, const std::string& path = "theta");
SimulationConfig simulation_config_from_json(const Json& j, const std::string& path = "config");
SecondOrderParams second_order_from_json(const Json& j, const std::string& path = "gamma");

Json to_json(const OuterModelSpec& spec);
Json to_json(const InnerAlexaParams& inner);
Json to_json(const CameraModel& camera);
Json to_json(const ThetaParams& theta);
Json to_json(const SimulationConfig& config);
Json to_json(const SecondOrderParams& gamma);
Json to_json(const FitResult& result);

Json read_json_file(const std::filesystem::path& path);

// FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const Json& j);

// Shortest round-trip representation ("%.17g").
std::string format_double(double v);

// Write to a temporary sibling and rename over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// "t,y" for a single trace, "replicate,t,y" otherwise. t starts at 1.
std::string traces_to_csv(const std::vector<Trace>& traces);

// Reads either layout; returns one vector per replicate.
std::vector<Eigen::VectorXd> read_traces_csv(const std::filesystem::path& path);

// "t,mu" (t = 1..T).
std::string mean_to_csv(const Eigen::VectorXd& mu);
// Dense matrix, one row per line, no header.
std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
Eigen::VectorXd read_mean_csv(const std::filesystem::path& path);

// "t,mu_hat,var_hat,mu,var" with the closed forms alongside the empirical
// moments of a replicate bundle.
std::string summary_to_csv(const MonteCarloMoments& mc, const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& Sigma);

// (mean, variance) pairs from "mean,var" CSV.
std::vector<std::pair<double, double>> read_pairs_csv(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string version;
  std::string timestamp;
};

Json to_json(const RunManifest& manifest);
std::string utc_timestamp();

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace htmm
