#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "htmm/error.hpp"
#include "htmm/io.hpp"

using namespace htmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "htmm_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
    return e.what();
  }
  FAIL("expected InvalidConfig");
  return {};
}

}  // namespace

TEST_CASE("config round trip") {
  const SimulationConfig c = htmm::testing::reference_config(3);
  const Json j = to_json(c);
  const SimulationConfig back = simulation_config_from_json(j);
  CHECK(back.spec.q == c.spec.q);
  CHECK(back.spec.nu == c.spec.nu);
  CHECK(back.inner.rate == c.inner.rate);
  CHECK(back.camera.sigma == c.camera.sigma);
  CHECK(back.m == 3);
  CHECK(config_hash(to_json(back)) == config_hash(j));
}

TEST_CASE("field paths in errors") {
  Json j = to_json(htmm::testing::reference_config(1));
  j["spec"]["q"][2][1] = -0.5;
  CHECK(error_text([&] { simulation_config_from_json(j); }).find("config.spec") != std::string::npos);

  Json k = to_json(htmm::testing::reference_config(1));
  k["inner"].erase("rate");
  CHECK(error_text([&] { simulation_config_from_json(k); }).find("config.inner.rate") !=
        std::string::npos);

  Json s = to_json(htmm::testing::reference_config(1));
  s["camera"]["sigma"] = 2.5;
  CHECK(simulation_config_from_json(s).camera.sigma == std::vector<double>{2.5});
}

TEST_CASE("doubles survive text") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 123456789.123456789})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv round trips") {
  Trace a;
  a.y = Eigen::Vector3d(1.0 / 3.0, -2.0, 1e-17);
  Trace b;
  b.y = Eigen::Vector3d(0.1, 0.2, 0.3);
  b.replicate = 1;

  const fs::path single = scratch("single.csv");
  write_atomic(single, traces_to_csv({a}));
  const auto one = read_traces_csv(single);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == a.y);

  const fs::path multi = scratch("multi.csv");
  write_atomic(multi, traces_to_csv({a, b}));
  const auto two = read_traces_csv(multi);
  REQUIRE(two.size() == 2);
  CHECK(two[1] == b.y);

  Eigen::MatrixXd m(2, 2);
  m << 1.0 / 7.0, 2.0, 2.0, std::sqrt(2.0);
  const fs::path mat = scratch("mat.csv");
  write_atomic(mat, matrix_to_csv(m));
  CHECK(read_matrix_csv(mat) == m);

  const fs::path mean = scratch("mean.csv");
  write_atomic(mean, mean_to_csv(a.y));
  CHECK(read_mean_csv(mean) == a.y);

  const fs::path empty = scratch("empty.csv");
  write_atomic(empty, "t,y\n");
  CHECK_THROWS_AS(read_traces_csv(empty), Error);
}

TEST_CASE("fit result json") {
  FitResult r;
  r.m_hat = 2;
  r.loglik = -12.5;
  r.profile = {{1, -20.0}, {2, -12.5}};
  r.gamma_hat.lambda = Eigen::Vector2d(0.9, 1.0);
  r.gamma_hat.alpha0 = Eigen::Vector2d(1.0, 0.0);
  r.gamma_hat.alpha1 = Eigen::Vector2d(0.0, 0.0);
  r.gamma_hat.q00 = 0.9;
  const Json j = to_json(r);
  CHECK(j["m_hat"] == 2);
  CHECK(j["profile"].size() == 2);
  const SecondOrderParams g = second_order_from_json(j["gamma_hat"]);
  CHECK(g.lambda == r.gamma_hat.lambda);
}
