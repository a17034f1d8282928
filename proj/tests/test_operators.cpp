#include "doctest.h"

#include <cmath>
#include <random>

#include "dynamo/operators.hpp"
#include "dynamo/verify.hpp"

using namespace dynamo;

TEST_CASE("Bessel values against mpmath") {
  // mpmath besselj at 30 digits
  CHECK(bessel_j(0, kPi / 2) == doctest::Approx(0.472001215768234839).epsilon(1e-15));
  CHECK(kTwoPi * bessel_j(1, kPi / 2) == doctest::Approx(3.561460787168842).epsilon(1e-14));
  CHECK(bessel_j(1, kPi / 2) == doctest::Approx(0.566824088905873934).epsilon(1e-15));
  CHECK(bessel_j(0, 2.404825557695773) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("Hansen trapezoid rule agrees with the series") {
  for (double z : {0.1, 1.0, kPi / 2, 4.0})
    for (int n : {0, 1}) CHECK(std::abs(bessel_j_hansen(n, z) - bessel_j(n, z)) < 1e-14);
}

TEST_CASE("alpha and beta lie where the closed forms need them") {
  const AnalyticMatrixSet m = AnalyticMatrixSet::from_bessel();
  CHECK(m.alpha > 0.0);
  CHECK(m.alpha < 1.0);
  CHECK(m.beta > 0.0);
  CHECK(m.alpha == doctest::Approx(kAlphaFixture).epsilon(1e-15));
}

TEST_CASE("W eigenvalues at R = 1") {
  // independent numpy eigvalsh on the closed-form matrix
  const auto ev = fixture_matrices().w_eigenvalues(1.0);
  CHECK(ev[0] == doctest::Approx(13.125791883237241).epsilon(1e-13));
  CHECK(ev[1] == doctest::Approx(0.222785147686692).epsilon(1e-12));
  CHECK(ev[2] == doctest::Approx(0.003781350677452).epsilon(1e-10));
  const EigenDecomposition e = eigen3(fixture_matrices().w(1.0));
  CHECK(e.hermitian);
  CHECK(e.gap == doctest::Approx(0.219004).epsilon(1e-5));
  const auto vecs = fixture_matrices().w_eigenvectors(1.0);
  const Matrix3c W = fixture_matrices().w(1.0);
  for (int i = 0; i < 3; ++i) CHECK((W * vecs[i] - ev[i] * vecs[i]).norm() < 1e-12);
}

TEST_CASE("eigen3 on non-Hermitian matrices") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix3c A;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) A(r, c) = cplx(g(rng), g(rng));
    const EigenDecomposition e = eigen3(A);
    CHECK(!e.hermitian);
    CHECK(e.residual < 1e-10);
    CHECK((e.left * e.right - Matrix3c::Identity()).norm() < 1e-10);
    CHECK(std::abs(e.values[0]) >= std::abs(e.values[1]));
    CHECK(std::abs(e.values[1]) >= std::abs(e.values[2]));
  }
}

TEST_CASE("eigen3 flags a defective matrix") {
  Matrix3c J = Matrix3c::Zero();
  J(0, 0) = J(1, 1) = 2.0;
  J(0, 1) = 1.0;
  J(2, 2) = 0.5;
  const EigenDecomposition e = eigen3(J);
  CHECK(!e.reliable);
  CHECK(!e.simple());
}

TEST_CASE("numeric matrix elements reproduce the closed forms at low resolution") {
  const AnalyticMatrixSet m = fixture_matrices();
  SolverParams p{.dt = 1e-3, .N = 8};
  CHECK((matrix_element(u_flow(1.0), 0.0, 0.0, 1.0, kEz, kEz, p).A - m.u(1.0)).norm() < 1e-8);
  CHECK((matrix_element(v_flow(0.5), 0.0, 0.0, 1.0, kEz, kEz, p).A - m.v(0.5)).norm() < 1e-8);
  const ControlMatrix w = matrix_element(w_flow(1.0), 0.0, 0.0, 2.0, kEz, kEz, p);
  CHECK((w.A - m.w(1.0)).norm() < 1e-8);
  CHECK((w.A - w.A.adjoint()).norm() < 1e-8);
}

TEST_CASE("heat diagonal matrix elements") {
  SolverParams p{.dt = 1e-2, .N = 4};
  const double kappa = 0.03;
  const ControlMatrix d = matrix_element(zero_flow(0.0, 1.5), kappa, 0.0, 1.5, {1, 1, 0}, {1, 1, 0}, p);
  const double decay = std::exp(-4.0 * kPi * kPi * 2.0 * kappa * 1.5);
  CHECK((d.A - decay * Matrix3c::Identity()).norm() < 1e-15);
  const ControlMatrix off = matrix_element(zero_flow(0.0, 1.5), kappa, 0.0, 1.5, kEz, kEx, p);
  CHECK(off.A.norm() == 0.0);
}

TEST_CASE("translation identity for random tuples") {
  SolverParams p{.dt = 1e-3, .N = 4};
  CHECK(translation_identity_residual(w_flow(1.0), 0.0, kEz, {1, 0, 1}, {0.3, 0.1, 0.9}, p) < 1e-12);
  CHECK(translation_identity_residual(u_flow(2.0), 1e-3, {1, 1, 1}, kEz, {0.7, 0.2, 0.4}, p) < 1e-12);
}

TEST_CASE("averaged matrix warns when the grid can alias") {
  SolverParams p{.dt = 2e-3, .N = 2};
  const AveragedMatrix a = averaged_matrix(u_flow(1.0), 0.0, kEz, 3, p);
  CHECK(a.aliasing_warning);
  CHECK(!a.warning.empty());
  const AveragedMatrix b = averaged_matrix(u_flow(1.0), 0.0, kEz, 5, p);
  CHECK(!b.aliasing_warning);
}

TEST_CASE("averaged matrix of a single probe equals the diagonal element") {
  SolverParams p{.dt = 2e-3, .N = 2};
  const AveragedMatrix a = averaged_matrix(u_flow(1.0), 0.0, kEz, 5, p);
  const ControlMatrix d = matrix_element(u_flow(1.0), 0.0, 0.0, 1.0, kEz, kEz, p);
  CHECK((a.matrix.A - d.A).norm() < 1e-12);
}

TEST_CASE("control selection") {
  const AnalyticMatrixSet m = fixture_matrices();
  ControlMatrix a1, a2;
  a1.A = m.w(1.0);
  a2.A = m.w(-1.0);
  for (const Vec3c& v : {Vec3c{1.0, 0.0, 0.0}, Vec3c{0.0, 1.0, 0.0}, Vec3c{cplx(0.3, 1.0), cplx(-2.0, 0.1), 0.0}}) {
    const ControlChoice c = control_select(v, 0.0, a1, a2);
    CHECK((c.choice == 1 || c.choice == 2));
    CHECK(c.factor > std::exp(1.0));
    CHECK(std::max(c.projection[0], c.projection[1]) > kProjectionTol);
  }
  CHECK_THROWS_AS(control_select(Vec3c{0.0, 0.0, 1.0}, 0.0, a1, a2), std::invalid_argument);
  CHECK(span_margin(eigen3(a1.A), eigen3(a2.A)) > 0.1);
}

TEST_CASE("single-point scan at kappa = 0 reproduces the analytic row") {
  SolverParams p{.dt = 1e-3, .N = 6};
  const ScanResult s = kappa0_scan({0.0}, 1.0, p);
  REQUIRE(s.rows.size() == 1);
  CHECK(s.rows[0].pass);
  CHECK(s.rows[0].top1 == doctest::Approx(13.125791883237241).epsilon(1e-8));
  CHECK(s.rows[0].top2 == doctest::Approx(13.125791883237241).epsilon(1e-8));
  CHECK(s.kappa0 == 0.0);
}

TEST_CASE("strong diffusion fails the scan") {
  SolverParams p{.dt = 1e-3, .N = 4};
  const ScanResult s = kappa0_scan({1.0}, 1.0, p);
  CHECK(!s.rows[0].pass);
  CHECK(s.kappa0 < 0.0);
}
