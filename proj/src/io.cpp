#include "htmm/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "htmm/error.hpp"

namespace htmm {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::InvalidConfig, path + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) bad(path + "." + key, "missing");
  return *it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

double number_or(const Json& j, const char* key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return number(j.at(key), path + "." + key);
}

long long integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<long long>();
}

Eigen::VectorXd vector_from(const Json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Json vector_to(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() && s.find_first_not_of(" \r", used) != std::string::npos)
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Io, file.string() + ":" + std::to_string(line) +
                                   ": not a number: '" + s + "'");
  }
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split(line));
  }
  return rows;
}

bool is_header(const std::vector<std::string>& row) {
  for (const auto& c : row)
    if (!c.empty() && (std::isalpha(static_cast<unsigned char>(c[0])) || c[0] == '_')) return true;
  return false;
}

}  // namespace

OuterModelSpec spec_from_json(const Json& j, const std::string& path) {
  OuterModelSpec s;
  s.r = static_cast<int>(integer(field(j, "r", path), path + ".r"));
  if (s.r < 1) bad(path + ".r", "must be >= 1");
  const Json& q = field(j, "q", path);
  if (!q.is_array() || q.size() != static_cast<std::size_t>(s.r + 1))
    bad(path + ".q", "expected r+1 rows");
  s.q.resize(s.r + 1, s.r);
  for (int x = 0; x <= s.r; ++x) {
    const std::string row_path = path + ".q[" + std::to_string(x) + "]";
    const Eigen::VectorXd row = vector_from(q[static_cast<std::size_t>(x)], row_path);
    if (row.size() != s.r) bad(row_path, "expected r columns");
    s.q.row(x) = row.transpose();
  }
  if (j.contains("nu")) {
    s.nu = vector_from(j.at("nu"), path + ".nu");
  } else {
    s.nu = Eigen::VectorXd::Unit(s.r + 1, 0);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    bad(path, e.what());
  }
  return s;
}

InnerAlexaParams inner_from_json(const Json& j, const std::string& path) {
  InnerAlexaParams p;
  p.p = number(field(j, "p", path), path + ".p");
  p.q = number(field(j, "q", path), path + ".q");
  p.rate = number(field(j, "rate", path), path + ".rate");
  try {
    p.validate();
  } catch (const Error& e) {
    bad(path, e.what());
  }
  return p;
}

CameraModel camera_from_json(const Json& j, const std::string& path) {
  CameraModel c;
  if (!j.is_object()) bad(path, "expected an object");
  c.a = number_or(j, "a", 1.0, path);
  c.f2 = number_or(j, "f2", 1.0, path);
  c.o = number_or(j, "o", 0.0, path);
  c.p_d = number_or(j, "p_d", 1.0, path);
  if (j.contains("sigma")) {
    const Json& s = j.at("sigma");
    if (s.is_number()) {
      c.sigma = {s.get<double>()};
    } else {
      const Eigen::VectorXd v = vector_from(s, path + ".sigma");
      c.sigma.assign(v.data(), v.data() + v.size());
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    bad(path, e.what());
  }
  return c;
}

ThetaParams theta_from_json(const Json& j, const std::string& path) {
  ThetaParams t;
  t.theta1 = number(field(j, "theta1", path), path + ".theta1");
  t.theta2 = number(field(j, "theta2", path), path + ".theta2");
  t.theta3 = number(field(j, "theta3", path), path + ".theta3");
  return t;
}

SimulationConfig simulation_config_from_json(const Json& j, const std::string& path) {
  SimulationConfig c;
  c.spec = spec_from_json(field(j, "spec", path), path + ".spec");
  c.inner = inner_from_json(field(j, "inner", path), path + ".inner");
  if (j.contains("camera")) c.camera = camera_from_json(j.at("camera"), path + ".camera");
  c.m = static_cast<int>(integer(field(j, "m", path), path + ".m"));
  c.T = static_cast<int>(integer(field(j, "T", path), path + ".T"));
  if (j.contains("seed")) {
    const Json& s = j.at("seed");
    if (!s.is_number_integer()) bad(path + ".seed", "expected an integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("replicates"))
    c.replicates = static_cast<int>(integer(j.at("replicates"), path + ".replicates"));
  if (c.m < 1) bad(path + ".m", "must be >= 1");
  if (c.T < 1) bad(path + ".T", "must be >= 1");
  if (c.replicates < 1) bad(path + ".replicates", "must be >= 1");
  if (c.camera.sigma.size() != 1 && c.camera.sigma.size() != static_cast<std::size_t>(c.T))
    bad(path + ".camera.sigma", "must be a scalar or have length T");
  c.validate();
  return c;
}

SecondOrderParams second_order_from_json(const Json& j, const std::string& path) {
  SecondOrderParams g;
  g.m = number(field(j, "m", path), path + ".m");
  g.nu0 = number_or(j, "nu0", 1.0, path);
  g.lambda = vector_from(field(j, "lambda", path), path + ".lambda");
  g.alpha0 = vector_from(field(j, "alpha0", path), path + ".alpha0");
  g.alpha1 = j.contains("alpha1") ? vector_from(j.at("alpha1"), path + ".alpha1")
                                  : Eigen::VectorXd(Eigen::VectorXd::Zero(g.lambda.size()));
  if (j.contains("q00")) {
    g.q00 = number(j.at("q00"), path + ".q00");
  } else if (g.alpha0.size() == g.lambda.size()) {
    g.q00 = 1.0 / g.alpha0.cwiseQuotient(g.lambda).sum();
  }
  g.theta = theta_from_json(field(j, "theta", path), path + ".theta");
  try {
    require_valid(g);
  } catch (const Error& e) {
    bad(path, e.what());
  }
  return g;
}

Json to_json(const OuterModelSpec& spec) {
  Json q = Json::array();
  for (Eigen::Index x = 0; x < spec.q.rows(); ++x) q.push_back(vector_to(spec.q.row(x).transpose()));
  return {{"r", spec.r}, {"q", q}, {"nu", vector_to(spec.nu)}};
}

Json to_json(const InnerAlexaParams& inner) {
  return {{"p", inner.p}, {"q", inner.q}, {"rate", inner.rate}};
}

Json to_json(const CameraModel& camera) {
  Json sigma = camera.sigma.size() == 1 ? Json(camera.sigma.front()) : Json(camera.sigma);
  return {{"a", camera.a}, {"f2", camera.f2}, {"o", camera.o}, {"sigma", sigma}, {"p_d", camera.p_d}};
}

Json to_json(const ThetaParams& theta) {
  return {{"theta1", theta.theta1}, {"theta2", theta.theta2}, {"theta3", theta.theta3}};
}

Json to_json(const SimulationConfig& config) {
  return {{"spec", to_json(config.spec)},     {"inner", to_json(config.inner)},
          {"camera", to_json(config.camera)}, {"m", config.m},
          {"T", config.T},                    {"seed", config.seed},
          {"replicates", config.replicates}};
}

Json to_json(const SecondOrderParams& g) {
  return {{"m", g.m},
          {"nu0", g.nu0},
          {"q00", g.q00},
          {"lambda", vector_to(g.lambda)},
          {"alpha0", vector_to(g.alpha0)},
          {"alpha1", vector_to(g.alpha1)},
          {"theta", to_json(g.theta)}};
}

Json to_json(const FitResult& result) {
  Json profile = Json::array();
  for (const auto& [m, ll] : result.profile) profile.push_back({{"m", m}, {"loglik", ll}});
  const auto& c = result.diagnostics.constraints;
  Json diag = {{"converged", result.diagnostics.converged},
               {"iterations", result.diagnostics.iterations},
               {"evaluations", result.diagnostics.evaluations},
               {"sigma_condition", result.diagnostics.sigma_condition},
               {"constraint_residuals",
                {{"sum_alpha0", c.sum_alpha0},
                 {"inverse_alpha0", c.inverse_alpha0},
                 {"inverse_alpha1", c.inverse_alpha1},
                 {"alpha1_range", c.alpha1_range},
                 {"bleached", c.bleached}}}};
  if (!result.diagnostics.warning.empty()) diag["warning"] = result.diagnostics.warning;
  return {{"m_hat", result.m_hat},
          {"loglik", result.loglik},
          {"gamma_hat", to_json(result.gamma_hat)},
          {"profile", profile},
          {"diagnostics", diag}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::Io, "write failed for " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::Io, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string traces_to_csv(const std::vector<Trace>& traces) {
  std::string out;
  const bool many = traces.size() > 1;
  out += many ? "replicate,t,y\n" : "t,y\n";
  for (const auto& tr : traces) {
    for (Eigen::Index t = 0; t < tr.y.size(); ++t) {
      if (many) out += std::to_string(tr.replicate) + ",";
      out += std::to_string(t + 1) + "," + format_double(tr.y[t]) + "\n";
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> read_traces_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw Error(ErrorKind::Io, path.string() + ": empty trace file");
  std::size_t first = 0;
  int ycol = -1;
  int rcol = -1;
  if (is_header(rows[0])) {
    for (std::size_t c = 0; c < rows[0].size(); ++c) {
      if (rows[0][c] == "y") ycol = static_cast<int>(c);
      if (rows[0][c] == "replicate") rcol = static_cast<int>(c);
    }
    if (ycol < 0) throw Error(ErrorKind::Io, path.string() + ": no 'y' column");
    first = 1;
  } else {
    ycol = static_cast<int>(rows[0].size()) - 1;
  }
  std::map<long long, std::vector<double>> by_rep;
  for (std::size_t i = first; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (static_cast<int>(row.size()) <= std::max(ycol, rcol))
      throw Error(ErrorKind::Io, path.string() + ":" + std::to_string(i + 1) + ": short row");
    const long long rep =
        rcol >= 0 ? static_cast<long long>(parse_cell(row[static_cast<std::size_t>(rcol)], path, i + 1)) : 0;
    const double v = parse_cell(row[static_cast<std::size_t>(ycol)], path, i + 1);
    if (!std::isfinite(v)) throw Error(ErrorKind::Io, path.string() + ": non-finite value");
    by_rep[rep].push_back(v);
  }
  if (by_rep.empty()) throw Error(ErrorKind::Io, path.string() + ": no data rows");
  std::vector<Eigen::VectorXd> out;
  for (auto& [rep, ys] : by_rep)
    out.push_back(Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));
  return out;
}

std::string mean_to_csv(const Eigen::VectorXd& mu) {
  std::string out = "t,mu\n";
  for (Eigen::Index t = 0; t < mu.size(); ++t)
    out += std::to_string(t + 1) + "," + format_double(mu[t]) + "\n";
  return out;
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (k) out += ",";
      out += format_double(m(i, k));
    }
    out += "\n";
  }
  return out;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw Error(ErrorKind::Io, path.string() + ": empty matrix file");
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw Error(ErrorKind::Io, path.string() + ": ragged matrix");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = parse_cell(rows[i][k], path, i + 1);
  }
  return m;
}

Eigen::VectorXd read_mean_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  const std::size_t first = (!rows.empty() && is_header(rows[0])) ? 1 : 0;
  Eigen::VectorXd mu(static_cast<Eigen::Index>(rows.size() - first));
  for (std::size_t i = first; i < rows.size(); ++i)
    mu[static_cast<Eigen::Index>(i - first)] = parse_cell(rows[i].back(), path, i + 1);
  return mu;
}

std::string summary_to_csv(const MonteCarloMoments& mc, const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& Sigma) {
  std::string out = "t,mu_hat,var_hat,mu,var\n";
  for (Eigen::Index t = 0; t < mc.mu_hat.size(); ++t) {
    out += std::to_string(t + 1) + "," + format_double(mc.mu_hat[t]) + "," +
           format_double(mc.Sigma_hat(t, t)) + "," + format_double(mu[t]) + "," +
           format_double(Sigma(t, t)) + "\n";
  }
  return out;
}

std::vector<std::pair<double, double>> read_pairs_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  const std::size_t first = (!rows.empty() && is_header(rows[0])) ? 1 : 0;
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = first; i < rows.size(); ++i) {
    if (rows[i].size() < 2) throw Error(ErrorKind::Io, path.string() + ": expected mean,var");
    out.emplace_back(parse_cell(rows[i][0], path, i + 1), parse_cell(rows[i][1], path, i + 1));
  }
  return out;
}

Json to_json(const RunManifest& m) {
  return {{"command", m.command}, {"config_path", m.config_path}, {"seed", m.seed},
          {"outputs", m.outputs}, {"version", m.version},         {"timestamp", m.timestamp}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace htmm
