// htmm: simulate, moments, estimate, verify, calibrate.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "htmm/error.hpp"
#include "htmm/estimator.hpp"
#include "htmm/io.hpp"
#include "htmm/moments.hpp"
#include "htmm/oracles.hpp"
#include "htmm/simulator.hpp"
#include "htmm/verify.hpp"

namespace fs = std::filesystem;
using namespace htmm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoConvergence = 2;

std::vector<int> parse_m_grid(const std::string& text) {
  std::vector<int> out;
  const auto colon = text.find(':');
  try {
    if (colon != std::string::npos) {
      const int lo = std::stoi(text.substr(0, colon));
      const int hi = std::stoi(text.substr(colon + 1));
      for (int m = lo; m <= hi; ++m) out.push_back(m);
    } else {
      std::istringstream is(text);
      std::string item;
      while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, "--m-grid: expected 'lo:hi' or a comma list");
  }
  if (out.empty()) throw Error(ErrorKind::InvalidConfig, "--m-grid is empty");
  return out;
}

void write_manifest(const fs::path& dir, RunManifest manifest) {
  manifest.version = kToolVersion;
  manifest.timestamp = utc_timestamp();
  write_atomic(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
}

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
};

int cmd_simulate(const SimulateArgs& a, bool quiet) {
  Json j = read_json_file(a.config);
  if (a.seed) j["seed"] = *a.seed;
  if (a.replicates) j["replicates"] = *a.replicates;
  const SimulationConfig config = simulation_config_from_json(j);
  const std::string hash = config_hash(to_json(config));

  std::vector<Trace> traces = simulate_traces(config);
  for (auto& tr : traces) tr.config_hash = hash;

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  RunManifest manifest{"simulate", a.config, config.seed, {}, {}, {}};
  write_atomic(dir / "traces.csv", traces_to_csv(traces));
  manifest.outputs.push_back((dir / "traces.csv").string());
  if (traces.size() >= 2) {
    const auto mc = monte_carlo_moments(traces, 0);
    const ThetaParams theta =
        thin_theta(theta_from_inner(config.inner), config.camera.p_d);
    const auto g = second_order_from_model(config.spec, theta, config.m);
    write_atomic(dir / "summary.csv",
                 summary_to_csv(mc, mean_trace(g, config.T), covariance(g, config.camera, config.T)));
    manifest.outputs.push_back((dir / "summary.csv").string());
  }
  write_manifest(dir, manifest);
  if (!quiet)
    std::cout << "wrote " << traces.size() << " trace(s) of " << config.T << " frames to "
              << (dir / "traces.csv").string() << " (config " << hash << ")\n";
  return kExitOk;
}

struct MomentsArgs {
  std::string config;
  std::string out;
  std::string camera;
  int T = 0;
};

// Accepts a parameter vector ({"m", "lambda", "alpha0", ...}) or a model
// ({"spec", "m", and "theta" or "inner"}).
SecondOrderParams gamma_from_document(const Json& j, CameraModel& camera) {
  if (j.contains("camera")) camera = camera_from_json(j.at("camera"), "config.camera");
  if (j.contains("lambda")) return second_order_from_json(j, "config");
  if (!j.contains("spec")) throw Error(ErrorKind::InvalidConfig, "config: needs 'lambda' or 'spec'");
  const OuterModelSpec spec = spec_from_json(j.at("spec"), "config.spec");
  ThetaParams theta;
  if (j.contains("theta")) {
    theta = theta_from_json(j.at("theta"), "config.theta");
  } else if (j.contains("inner")) {
    theta = thin_theta(theta_from_inner(inner_from_json(j.at("inner"), "config.inner")), camera.p_d);
  } else {
    throw Error(ErrorKind::InvalidConfig, "config: needs 'theta' or 'inner'");
  }
  const double m = j.contains("m") ? j.at("m").get<double>() : 1.0;
  return second_order_from_model(spec, theta, m);
}

int cmd_moments(const MomentsArgs& a, bool quiet) {
  const Json j = read_json_file(a.config);
  CameraModel camera;
  SecondOrderParams g = gamma_from_document(j, camera);
  if (!a.camera.empty()) camera = camera_from_json(read_json_file(a.camera), "camera");
  int T = a.T;
  if (T <= 0 && j.contains("T")) T = j.at("T").get<int>();
  if (T <= 0) throw Error(ErrorKind::InvalidConfig, "--T must be >= 1");
  const MomentSet ms = moment_set(g, camera, T);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_atomic(dir / "mu.csv", mean_to_csv(ms.mu));
  write_atomic(dir / "sigma.csv", matrix_to_csv(ms.Sigma));
  write_manifest(dir, {"moments", a.config, 0, {(dir / "mu.csv").string(), (dir / "sigma.csv").string()}, {}, {}});
  if (!quiet) std::cout << "mu_1 = " << format_double(ms.mu[0]) << ", T = " << T << "\n";
  return kExitOk;
}

struct EstimateArgs {
  std::string trace;
  std::string camera;
  std::string out;
  std::string m_grid = "1:20";
  int r = 3;
  std::optional<double> nu0;
  bool generic = false;
  int restarts = 1;
  std::uint64_t seed = 0;
  int replicate = 0;
};

int cmd_estimate(const EstimateArgs& a, bool quiet) {
  const auto traces = read_traces_csv(a.trace);
  if (a.replicate < 0 || static_cast<std::size_t>(a.replicate) >= traces.size())
    throw Error(ErrorKind::InvalidConfig, "--replicate out of range");
  const Eigen::VectorXd& y = traces[static_cast<std::size_t>(a.replicate)];
  if (y.size() == 0) throw Error(ErrorKind::InvalidConfig, a.trace + ": empty trace");
  CameraModel camera;
  if (!a.camera.empty()) camera = camera_from_json(read_json_file(a.camera), "camera");

  FitOptions opt;
  opt.r = a.r;
  opt.m_grid = parse_m_grid(a.m_grid);
  opt.nu0_fixed = a.nu0;
  opt.alexa = !a.generic;
  opt.restarts = a.restarts;
  opt.seed = a.seed;
  const FitResult res = fit(y, camera, opt);

  const std::string doc = to_json(res).dump(2) + "\n";
  if (!a.out.empty()) {
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_atomic(out, doc);
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    write_manifest(dir, {"estimate", a.trace, a.seed, {out.string()}, {}, {}});
  }
  if (!quiet) {
    std::cout << "m_hat = " << res.m_hat << "  loglik = " << format_double(res.loglik) << "\n";
    std::cout << "m\tloglik\n";
    for (const auto& [m, ll] : res.profile) std::cout << m << "\t" << format_double(ll) << "\n";
    if (!res.diagnostics.warning.empty()) std::cerr << "warning: " << res.diagnostics.warning << "\n";
  }
  if (a.out.empty() && quiet) std::cout << doc;
  if (!res.diagnostics.converged) {
    std::cerr << "NoConvergence: block search did not converge for every m\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_verify(std::uint64_t budget, bool inject_fault, bool quiet) {
  VerifyOptions opt;
  opt.budget.max_paths = budget;
  opt.inject_fault = inject_fault;
  const auto results = run_verify(opt);
  const bool ok = all_passed(results);
  if (!quiet || !ok) std::cout << format_table(results);
  if (!ok) {
    std::cerr << "failing checks:";
    for (const auto& r : results)
      if (r.status == CheckStatus::Fail) std::cerr << " [" << r.name << "]";
    std::cerr << "\n";
  }
  return ok ? kExitOk : kExitError;
}

int cmd_calibrate(const std::string& pairs, double f2, const std::string& out, bool quiet) {
  const auto stats = read_pairs_csv(pairs);
  const CalibrationResult c = calibrate_camera(stats, f2);
  const Json doc = {{"a", c.a}, {"slope", c.slope}, {"intercept", c.intercept}, {"f2", f2}};
  if (!out.empty()) {
    const fs::path path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_atomic(path, doc.dump(2) + "\n");
    write_manifest(path.has_parent_path() ? path.parent_path() : fs::path("."),
                   {"calibrate", pairs, 0, {path.string()}, {}, {}});
  }
  if (!quiet) std::cout << "a = " << format_double(c.a) << "  slope = " << format_double(c.slope)
                        << "  intercept = " << format_double(c.intercept) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden two-timescale Markov models for fluorescence traces"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "Only print errors");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate normalised traces from a JSON config");
  simulate->add_option("--config", sim.config, "Simulation config (JSON)")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Override the config seed");
  simulate->add_option("--replicates", sim.replicates, "Override the replicate count");

  MomentsArgs mom;
  auto* moments = app.add_subcommand("moments", "Closed-form mean and covariance");
  moments->add_option("--config", mom.config, "Parameter vector or model (JSON)")->required();
  moments->add_option("--out", mom.out, "Output directory")->required();
  moments->add_option("--T", mom.T, "Number of frames");
  moments->add_option("--camera", mom.camera, "Camera model (JSON)");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Profile pseudo-ML fit of one trace");
  estimate->add_option("--trace", est.trace, "Trace CSV")->required();
  estimate->add_option("--camera", est.camera, "Camera model (JSON)");
  estimate->add_option("--out", est.out, "FitResult JSON path");
  estimate->add_option("--m-grid", est.m_grid, "Fluorophore counts, 'lo:hi' or a comma list");
  estimate->add_option("--r", est.r, "Dark states of the fitted model (incl. bleached)");
  estimate->add_option("--nu0", est.nu0, "Fix the initially bright fraction");
  estimate->add_flag("--generic", est.generic, "Leave theta2 free instead of tying it to q00");
  estimate->add_option("--restarts", est.restarts, "Perturbed restarts per m");
  estimate->add_option("--seed", est.seed, "Seed for the restarts");
  estimate->add_option("--replicate", est.replicate, "Which replicate of a bundle to fit");

  std::uint64_t budget = EnumerationBudget{}.max_paths;
  bool inject_fault = false;
  auto* verify = app.add_subcommand("verify", "Run the oracle equivalence suite");
  verify->add_option("--budget", budget, "Maximum number of enumerated paths");
  verify->add_flag("--inject-fault", inject_fault, "Check against a broken covariance");

  std::string pairs;
  std::string cal_out;
  double f2 = 1.0;
  auto* calibrate = app.add_subcommand("calibrate", "Amplification factor from (mean, var) pairs");
  calibrate->add_option("--pairs", pairs, "CSV with mean,var rows")->required();
  calibrate->add_option("--f2", f2, "Excess noise factor")->required();
  calibrate->add_option("--out", cal_out, "Result JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*simulate) return cmd_simulate(sim, quiet);
    if (*moments) return cmd_moments(mom, quiet);
    if (*estimate) return cmd_estimate(est, quiet);
    if (*verify) return cmd_verify(budget, inject_fault, quiet);
    if (*calibrate) return cmd_calibrate(pairs, f2, cal_out, quiet);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
