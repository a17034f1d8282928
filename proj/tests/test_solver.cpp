#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "dynamo/solver.hpp"

using namespace dynamo;

namespace {

FourierField random_field(int N, int kmax, unsigned seed, bool solenoidal = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FourierField f(N);
  for (int x = -kmax; x <= kmax; ++x)
    for (int y = -kmax; y <= kmax; ++y)
      for (int z = -kmax; z <= kmax; ++z) {
        const WaveVector k{x, y, z};
        if (k.norm2() == 0) continue;
        Vec3c v{cplx(g(rng), g(rng)), cplx(g(rng), g(rng)), cplx(g(rng), g(rng))};
        if (solenoidal) {
          const cplx kv = dot(k, v);
          for (int i = 0; i < 3; ++i) v[i] -= kv * double(k[i]) / double(k.norm2());
        }
        f.at(k) = v;
      }
  return f;
}

}  // namespace

TEST_CASE("heat flow is exact and independent of the step") {
  const FourierField b = random_field(4, 3, 1);
  const double kappa = 0.02, t = 1.7;
  SolverParams coarse{.dt = 0.5, .N = 4};
  SolverParams fine{.dt = 1e-3, .N = 4};
  const FourierField a = propagate(b, zero_flow(0.0, t), kappa, 0.0, t, coarse);
  const FourierField c = propagate(b, zero_flow(0.0, t), kappa, 0.0, t, fine);
  CHECK(max_abs_difference(a, c) < 1e-15);
  const WaveVector k{2, -1, 3};
  const double decay = std::exp(-4.0 * kPi * kPi * k.norm2() * kappa * t);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(a[k][i] - decay * b[k][i]) <= 1e-14 * std::abs(b[k][i]));
  CHECK(max_abs_difference(a, heat(b, kappa, t)) < 1e-15);
}

TEST_CASE("forward and adjoint propagators are dual") {
  const FourierField b = random_field(4, 2, 2), c = random_field(4, 2, 3, false);
  SolverParams p{.dt = 2e-3, .N = 4};
  for (double kappa : {0.0, 0.01}) {
    const TimeFlow w = translate(w_flow(1.0), {0.1, 0.3, 0.7});
    const cplx lhs = inner(c, propagate(b, w, kappa, 0.0, 2.0, p));
    const cplx rhs = inner(adjoint_propagate(c, w, kappa, 0.0, 2.0, p), b);
    CHECK(std::abs(lhs - rhs) < 1e-11 * std::abs(lhs));
  }
}

TEST_CASE("Galerkin convolution agrees with the dealiased grid path") {
  const FourierField b = random_field(4, 2, 4);
  SolverParams direct{.dt = 2e-3, .N = 4};
  SolverParams grid = direct;
  grid.grid_path = true;
  const TimeFlow u = u_flow(0.8);
  const FourierField a = propagate(b, u, 1e-3, 0.0, 1.0, direct);
  const FourierField g = propagate(b, u, 1e-3, 0.0, 1.0, grid);
  CHECK(max_abs_difference(a, g) < 1e-11 * l2_norm(a));
}

TEST_CASE("active-support closure of a single mode under U") {
  const FourierField b = single_mode(6, kEz, Vec3c{1.0, 0.0, 0.0});
  const auto active = active_closure(b, u_flow(1.0), 0.0, 1.0);
  // modes e_z + m e_x, |m| <= 6
  CHECK(active.size() == 13);
  for (const auto& k : active) {
    CHECK(k.y == 0);
    CHECK(k.z == 1);
  }
}

TEST_CASE("solenoidal data stays solenoidal without projection") {
  const FourierField b = random_field(6, 1, 5);
  SolverParams p{.dt = 1e-3, .N = 6};
  const FourierField out = propagate(b, w_flow(1.0), 1e-3, 0.0, 2.0, p);
  CHECK(diagnose(out).max_divergence < 1e-8);
}

TEST_CASE("stability guard rejects steps outside the RK4 region") {
  const FourierField b = random_field(8, 1, 6);
  SolverParams p{.dt = 0.05, .N = 8};
  CHECK_THROWS_AS(propagate(b, u_flow(2.0), 0.0, 0.0, 1.0, p), SolverError);
  CHECK(stable_dt(u_flow(2.0), 0.0, 1.0, 8) < 0.05);
}

TEST_CASE("splitting windows follow the flow segments") {
  // solving [0,2] at once equals solving [0,1] then [1,2]
  const FourierField b = random_field(4, 1, 7);
  SolverParams p{.dt = 1e-3, .N = 4};
  const TimeFlow w = w_flow(0.7);
  const FourierField whole = propagate(b, w, 0.01, 0.0, 2.0, p);
  const FourierField half = propagate(propagate(b, w, 0.01, 0.0, 1.0, p), w, 0.01, 1.0, 2.0, p);
  CHECK(max_abs_difference(whole, half) == 0.0);
}

TEST_CASE("energy bounds hold for pure heat decay") {
  const FourierField b = sine_field(4, kEx, {0, 0, 1});
  SolverParams p{.dt = 1e-2, .N = 4};
  const SolveResult r = solve(b, zero_flow(0.0, 2.0), 0.05, 0.0, 2.0, p);
  const BoundMargins m = energy_growth_check(r.trace);
  REQUIRE(m.applicable);
  CHECK(m.upper_margin >= 0.0);
  CHECK(m.lower_margin >= 0.0);
  CHECK(m.ratio_margin >= 0.0);
  // one mode: the norm decays exactly like exp(-8 pi^2 kappa t)
  const auto& last = r.trace.samples.back();
  CHECK(last.l2sq == doctest::Approx(0.5 * std::exp(-8.0 * kPi * kPi * 0.05 * 2.0)).epsilon(1e-13));
}

TEST_CASE("energy bounds hold through the control flow") {
  const FourierField b = sine_field(6, kEx, {0, 0, 1});
  SolverParams p{.dt = 1e-3, .N = 6, .trace_every = 5};
  const SolveResult r = solve(b, w_flow(1.0), 1e-3, 0.0, 2.0, p);
  const BoundMargins m = energy_growth_check(r.trace);
  REQUIRE(m.applicable);
  CHECK(m.holds());
}

TEST_CASE("trace CSV lists watched modes") {
  const FourierField b = sine_field(3, kEx, {0, 0, 1});
  SolverParams p{.dt = 0.1, .N = 3, .watch = {kEx}};
  const SolveResult r = solve(b, zero_flow(0.0, 0.3), 0.01, 0.0, 0.3, p);
  std::ostringstream os;
  r.trace.write_csv(os);
  const std::string head = os.str().substr(0, os.str().find('\n'));
  CHECK(head.find("l2sq") != std::string::npos);
  CHECK(head.find("re_") != std::string::npos);
}
