#include <doctest.h>

#include <cmath>

#include "htmm/error.hpp"
#include "htmm/markov_core.hpp"
#include "htmm/oracles.hpp"
#include "htmm/rng.hpp"

using namespace htmm;

namespace {

Eigen::MatrixXd counterexample() {
  Eigen::MatrixXd M(4, 4);
  M.col(0) << 0.8, 0.1, 0.1, 0.0;
  M.col(1) << 0.0, 0.8, 0.1, 0.1;
  M.col(2) << 0.1, 0.0, 0.8, 0.1;
  M.col(3) << 0.0, 0.0, 0.0, 1.0;
  return M;
}

OuterModelSpec r1_spec(double q00) {
  OuterModelSpec s;
  s.r = 1;
  s.q.resize(2, 1);
  s.q << q00, 1.0 - q00;
  s.nu = Eigen::Vector2d(1.0, 0.0);
  return s;
}

// r = 3 model whose dark diagonals are drawn from [lo, 0.99].
OuterModelSpec diagonal_heavy_r3(Rng& rng, double lo) {
  OuterModelSpec s;
  s.r = 3;
  s.q = Eigen::MatrixXd::Zero(4, 3);
  for (int z = 0; z < 3; ++z) {
    const double keep = lo + (0.99 - lo) * rng.uniform();
    Eigen::Vector3d w(-std::log1p(-rng.uniform()), -std::log1p(-rng.uniform()),
                      -std::log1p(-rng.uniform()));
    w *= (1.0 - keep) / w.sum();
    for (int x = 0, j = 0; x < 4; ++x) s.q(x, z) = (x == z) ? keep : w[j++];
  }
  s.nu = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  return s;
}

}  // namespace

TEST_CASE("build_matrices: r = 1 collapses to the short-time matrix") {
  const auto m = build_matrices(r1_spec(0.9));
  Eigen::Matrix2d expected;
  expected << 0.9, 0.0, 0.1, 1.0;
  CHECK((m.total - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((m.long_time - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_matrices: all mass on the diagonal gives the identity") {
  OuterModelSpec s;
  s.r = 3;
  s.q = Eigen::MatrixXd::Zero(4, 3);
  s.q(0, 0) = s.q(1, 1) = s.q(2, 2) = 1.0;
  s.nu = Eigen::Vector4d(1, 0, 0, 0);
  const auto m = build_matrices(s);
  CHECK((m.total - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_matrices: sparsity and column sums on random specs") {
  for (int i = 0; i < 1000; ++i) {
    Rng rng = Rng::derive(11, {static_cast<std::uint64_t>(i)});
    OuterModelSpec s = diagonal_heavy_r3(rng, 0.0);
    s.nu = Eigen::Vector4d(0.25, 0.25, 0.25, 0.25);
    const auto m = build_matrices(s);
    for (const Eigen::MatrixXd* mat : {&m.long_time, &m.short_time, &m.total}) {
      CHECK((mat->colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(mat->minCoeff() >= -1e-14);
      CHECK(mat->maxCoeff() <= 1.0 + 1e-14);
    }
    CHECK(m.long_time.col(0).isApprox(Eigen::Vector4d::Unit(0)));
    CHECK(m.long_time.col(3).isApprox(Eigen::Vector4d::Unit(3)));
    CHECK(m.long_time(0, 1) == doctest::Approx(s.q(0, 1)));
    CHECK((m.short_time.rightCols(3) - Eigen::MatrixXd::Identity(4, 4).rightCols(3))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(m.total.col(3).isApprox(Eigen::Vector4d::Unit(3)));
  }
}

TEST_CASE("OuterModelSpec::validate rejects bad column sums and ranges") {
  OuterModelSpec s = r1_spec(0.9);
  s.q(0, 0) = 0.95;
  CHECK_THROWS_AS(s.validate(), Error);
  try {
    s.validate();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSpec);
  }
  s = r1_spec(0.9);
  s.nu = Eigen::Vector2d(0.7, 0.7);
  CHECK_THROWS_AS(build_matrices(s), Error);
  s = r1_spec(0.9);
  s.q << 1.2, -0.2;
  CHECK_THROWS_AS(build_matrices(s), Error);
}

TEST_CASE("spectral_decompose: triangular 2x2") {
  Eigen::Matrix2d M;
  M << 0.9, 0.0, 0.1, 1.0;
  const auto d = spectral_decompose(M);
  CHECK(d.lambda[0].real() == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(d.lambda[1].real() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.is_real);
  CHECK(d.is_positive);
  CHECK(std::abs(d.V(0, 1)) == 0.0);
  CHECK(std::abs(d.V(1, 1) - 1.0) == 0.0);
  CHECK((d.reconstruct() - M).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spectral_decompose: counterexample has complex eigenvalues") {
  const auto d = spectral_decompose(counterexample());
  CHECK_FALSE(d.is_real);
  CHECK(d.lambda[3].real() == doctest::Approx(1.0));
  CHECK(d.lambda[0].real() == doctest::Approx(0.93).epsilon(0.005));
  CHECK(d.lambda[1].real() == doctest::Approx(0.73).epsilon(0.01));
  CHECK(std::abs(d.lambda[1].imag()) == doctest::Approx(0.06).epsilon(0.1));
  CHECK((d.reconstruct() - counterexample()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("spectral_decompose: identity is accepted") {
  const auto d = spectral_decompose(Eigen::Matrix4d::Identity());
  for (int i = 0; i < 4; ++i) CHECK(d.lambda[i].real() == 1.0);
  CHECK(d.condition == doctest::Approx(1.0));
}

TEST_CASE("spectral_decompose: defective matrix is rejected") {
  // Jordan block on the two non-bleached states.
  Eigen::Matrix3d M;
  M << 0.5, 0.0, 0.0,
       0.5, 0.5, 0.0,
       0.0, 0.5, 1.0;
  try {
    spectral_decompose(M);
    FAIL("expected NotDiagonalizable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotDiagonalizable);
  }
}

TEST_CASE("spectral_decompose: reconstruction and ordering on random models") {
  for (int i = 0; i < 200; ++i) {
    Rng rng = Rng::derive(12, {static_cast<std::uint64_t>(i)});
    const auto spec = random_model(1 + i % 3, rng, 0.3);
    const auto M = build_matrices(spec).total;
    const auto d = spectral_decompose(M);
    CHECK((d.reconstruct() - M).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::Index r = spec.r;
    CHECK(d.lambda[r].real() == doctest::Approx(1.0));
    for (Eigen::Index x = 0; x + 1 < r; ++x) CHECK(d.lambda[x].real() >= d.lambda[x + 1].real());
    CHECK(d.lambda.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("check_real_spectrum_r2") {
  Eigen::Matrix3d M;
  M << 0.6, 0.4, 0.0,
       0.4, 0.6, 0.0,
       0.0, 0.0, 1.0;
  auto v = check_real_spectrum_r2(M);
  CHECK(v.real);
  CHECK(v.nonnegative);
  CHECK(v.diagonal_sufficient);

  M << 0.0, 1.0, 0.0,
       1.0, 0.0, 0.0,
       0.0, 0.0, 1.0;
  v = check_real_spectrum_r2(M);
  CHECK(v.real);
  CHECK_FALSE(v.nonnegative);
  CHECK(v.eigenvalues[0] == doctest::Approx(-1.0));
  CHECK(v.eigenvalues[1] == doctest::Approx(1.0));
  CHECK(v.eigenvalues[2] == doctest::Approx(1.0));

  CHECK_THROWS_AS(check_real_spectrum_r2(Eigen::Matrix4d::Identity()), Error);

  for (int i = 0; i < 1000; ++i) {
    Rng rng = Rng::derive(13, {static_cast<std::uint64_t>(i)});
    const auto spec = random_model(2, rng, 0.0);
    const auto verdict = check_real_spectrum_r2(build_matrices(spec).total);
    CHECK(verdict.discriminant >= 0.0);
    CHECK(verdict.real);
  }
}

TEST_CASE("check_real_spectrum_r3: counterexample") {
  const auto v = check_real_spectrum_r3(counterexample());
  CHECK(v.condition_value == doctest::Approx(-0.013).epsilon(0.1));
  CHECK(std::abs(v.condition_value + 0.013) < 1e-3);
  CHECK_FALSE(v.real);
  CHECK(v.lambda0 >= 0.8);
}

TEST_CASE("check_real_spectrum_r3: reducible block") {
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M(0, 0) = 0.9;
  M(3, 0) = 0.1;
  try {
    check_real_spectrum_r3(M);
    FAIL("expected NotIrreducible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotIrreducible);
  }
}

TEST_CASE("check_real_spectrum_r3 agrees with the eigen-solver on random models") {
  int compared = 0;
  for (int i = 0; compared < 1000 && i < 5000; ++i) {
    Rng rng = Rng::derive(14, {static_cast<std::uint64_t>(i)});
    const auto spec = diagonal_heavy_r3(rng, 0.2);
    const auto M = build_matrices(spec).total;
    SpectralDecomposition d;
    try {
      d = spectral_decompose(M);
    } catch (const Error&) {
      continue;
    }
    const auto v = check_real_spectrum_r3(M);
    const double max_diag = M.topLeftCorner(3, 3).diagonal().maxCoeff();
    CHECK(v.lambda0 >= max_diag - 1e-12);
    CHECK(v.real == d.is_real);
    ++compared;
  }
  CHECK(compared == 1000);
}

TEST_CASE("perron_eigenvalue matches the dominant eigenvalue") {
  Eigen::Matrix3d B;
  B << 0.7, 0.1, 0.2,
       0.1, 0.8, 0.05,
       0.15, 0.05, 0.7;
  const double lambda0 = perron_eigenvalue(B);
  const auto ev = B.eigenvalues();
  double best = 0.0;
  for (int i = 0; i < 3; ++i) best = std::max(best, ev[i].real());
  CHECK(lambda0 == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("check_gap_condition") {
  auto g = check_gap_condition({0.975, 0.95, 0.8}, 1.0);
  CHECK(g.mu1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.mu2 == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(g.satisfied);

  // Unsorted input is sorted internally.
  g = check_gap_condition({0.8, 0.975, 0.95}, 1.0);
  CHECK(g.mu1 == doctest::Approx(0.5));

  // (0.9, 0.5, ~0): mu1 = 0.2, mu2 = 0.5 and the inequality fails.
  g = check_gap_condition({0.9, 0.5, 1e-9}, 1.0);
  CHECK(g.mu1 == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(g.mu2 == doctest::Approx(0.5).epsilon(1e-8));
  CHECK_FALSE(g.satisfied);

  // mu2 <= 1/4 always satisfies the inequality.
  for (int i = 0; i < 1000; ++i) {
    Rng rng = Rng::derive(15, {static_cast<std::uint64_t>(i)});
    const double mu1 = 0.999 * rng.uniform() + 1e-4;
    const double mu2 = 0.25 * rng.uniform() + 1e-4;
    const double d3 = 0.5 * rng.uniform();
    const double d2 = 1.0 - mu2 * (1.0 - d3);
    const double d1 = 1.0 - mu1 * (1.0 - d2);
    if (d1 - d2 < 1e-9 || d2 - d3 < 1e-9) continue;
    CHECK(check_gap_condition({d1, d2, d3}, 1.0).satisfied);
  }

  // mu1 = mu2 = 0.9.
  g = check_gap_condition({0.19, 0.1, 0.0}, 1.0);
  CHECK(g.mu1 == doctest::Approx(0.9));
  CHECK(g.mu2 == doctest::Approx(0.9));
  CHECK_FALSE(g.satisfied);

  try {
    check_gap_condition({0.9, 0.9, 0.5}, 1.0);
    FAIL("expected DegenerateDiagonal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateDiagonal);
  }
}

TEST_CASE("diagonal >= 2/3 plus the gap condition keeps the spectrum in [0, 1]") {
  int accepted = 0;
  for (int i = 0; accepted < 1000 && i < 200000; ++i) {
    Rng rng = Rng::derive(16, {static_cast<std::uint64_t>(i)});
    const auto spec = diagonal_heavy_r3(rng, 2.0 / 3.0);
    const auto M = build_matrices(spec).total;
    const Eigen::Vector3d diag = M.topLeftCorner(3, 3).diagonal();
    if (diag.minCoeff() < 2.0 / 3.0) continue;
    const double lambda0 = perron_eigenvalue(M.topLeftCorner(3, 3));
    GapVerdict g;
    try {
      g = check_gap_condition({diag[0], diag[1], diag[2]}, lambda0);
    } catch (const Error&) {
      continue;
    }
    if (!g.satisfied) continue;
    ++accepted;
    const auto ev = M.eigenvalues();
    CHECK(ev.imag().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(ev.real().minCoeff() >= -1e-10);
    CHECK(ev.real().maxCoeff() <= 1.0 + 1e-10);
  }
  CHECK(accepted == 1000);
}

TEST_CASE("lump") {
  Eigen::Matrix4d M;
  M.col(0) << 0.7, 0.1, 0.1, 0.1;
  M.col(1) << 0.2, 0.5, 0.2, 0.1;
  M.col(2) << 0.2, 0.3, 0.4, 0.1;
  M.col(3) << 0.0, 0.0, 0.0, 1.0;

  StatePartition singletons{{{0}, {1}, {2}, {3}}};
  CHECK((lump(M, singletons) - M).cwiseAbs().maxCoeff() < 1e-15);

  StatePartition middle{{{0}, {1, 2}, {3}}};
  const Eigen::MatrixXd L = lump(M, middle);
  Eigen::Matrix3d expected;
  expected << 0.7, 0.2, 0.0,
              0.2, 0.7, 0.0,
              0.1, 0.1, 1.0;
  CHECK((L - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((L.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

  CHECK((lump(Eigen::Matrix4d::Identity(), middle) - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() == 0.0);

  M.col(2) << 0.3, 0.3, 0.3, 0.1;
  try {
    lump(M, middle);
    FAIL("expected NotLumpable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotLumpable);
  }

  StatePartition overlapping{{{0, 1}, {1, 2}, {3}}};
  CHECK_THROWS_AS(lump(Eigen::Matrix4d::Identity(), overlapping), Error);
}
