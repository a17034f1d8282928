#include "doctest.h"

#include <cmath>
#include <random>

#include "dynamo/controller.hpp"

using namespace dynamo;

namespace {

ControllerParams small_params(int N) {
  ControllerParams p;
  p.solver.N = N;
  p.solver.dt = 1e-3;
  p.trace_every = 50;
  return p;
}

// Real solenoidal field on |k|_inf <= 1 with a nonzero e_z-transverse unit-mode part.
FourierField random_field(int N, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FourierField f(N, FourierField::Kind{true, true, true});
  for (int x = 0; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y)
      for (int z = -1; z <= 1; ++z) {
        if (x == 0 && (y < 0 || (y == 0 && z <= 0))) continue;
        const WaveVector k{x, y, z};
        Vec3c v{cplx(g(rng), g(rng)), cplx(g(rng), g(rng)), cplx(g(rng), g(rng))};
        const cplx kv = dot(k, v);
        for (int i = 0; i < 3; ++i) v[i] -= kv * double(k[i]) / double(k.norm2());
        f.at(k) = v;
        f.at(-k) = conj(v);
      }
  return f;
}

ScheduleState state_for(const FourierField& b, double kappa) {
  ScheduleState s;
  s.kappas = {kappa};
  s.fields = {ScaledField{b, 0}};
  s.certificates.resize(1);
  return s;
}

}  // namespace

TEST_CASE("visit sequence grows and then cycles through every diffusivity") {
  const std::vector<int> expect{0, 0, 1, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  for (std::size_t n = 0; n < expect.size(); ++n) CHECK(visit_index(static_cast<int>(n) + 1, 3) == expect[n]);
  CHECK(visit_index(7, 1) == 0);
  CHECK_THROWS(visit_index(0, 3));
}

TEST_CASE("power-of-two rescaling is exact") {
  const FourierField b = sine_field(3, kEx, {0, 0, 1});
  ScaledField f{cplx(std::ldexp(1.0, 200)) * b, 0};
  f.normalize();
  // |b| = 2^-1/2, so the scaled norm has binary exponent 199
  CHECK(f.exponent == 199);
  CHECK(max_abs_difference(cplx(2.0) * b, f.field) == 0.0);
  CHECK(f.log_l2sq() == doctest::Approx(std::log(0.5) + 400 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("unit-mode rate") {
  ScaledField f{sine_field(3, kEx, {0, 0, 1}), 10};
  // |bhat(e_x)|^2 = 1/4, scaled by 2^20
  CHECK(unit_mode_rate(f, 2.0) == doctest::Approx((std::log(0.25) + 20 * std::log(2.0)) / 2.0));
  CHECK(std::isinf(unit_mode_rate(f, 0.0)));
}

TEST_CASE("greedy block factor dominates the grid average") {
  ControllerParams p = small_params(4);
  ControlCache controls(p);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    ScheduleState s = state_for(random_field(4, seed), 0.0);
    const GrowthSegmentPlan plan =
        growth_segment(s, 0, controls, [](const ScheduleState&) { return false; }, 2.0, 1);
    REQUIRE(plan.blocks.size() == 1);
    const BlockRecord& b = plan.blocks[0];
    CHECK(b.realized >= std::abs(plan.lambda1) - 1e-6);
    CHECK(b.predicted >= b.grid_mean - 1e-9);
    CHECK(b.realized == doctest::Approx(b.predicted).epsilon(1e-9));
    CHECK(b.grid_mean == doctest::Approx(std::abs(plan.lambda1)).epsilon(1e-9));
    CHECK(b.mean_residual < 1e-9);
  }
}

TEST_CASE("transitive segment moves mass onto a unit mode") {
  ControllerParams p = small_params(4);
  FourierField b(4, FourierField::Kind{true, true, true});
  const WaveVector j{1, 1, 0};
  const Vec3c w{1.0, -1.0, cplx(0.0, 0.5)};
  b.at(j) = w;
  b.at(-j) = conj(w);
  ScheduleState s = state_for(b, 1e-3);
  CHECK(transitive_segment(s, 0, p, 1));
  REQUIRE(s.units.size() == 1);
  CHECK(s.t == 1.0);
  double best = 0.0;
  for (const auto& k : unit_modes()) best = std::max(best, norm(s.fields[0].field[k]));
  CHECK(best > p.coeff_tol * l2_norm(s.fields[0].field));
  // already has unit-mode mass: nothing to do
  CHECK(!transitive_segment(s, 0, p, 2));
  CHECK(s.units.size() == 1);
}

TEST_CASE("idle segment is pure heat on every field") {
  ControllerParams p = small_params(3);
  ScheduleState s;
  s.kappas = {0.0, 0.01};
  s.fields = {ScaledField{sine_field(3, kEx, {0, 0, 1}), 0}, ScaledField{sine_field(3, kEx, {0, 0, 1}), 0}};
  idle_segment(s, p, 1.0, 1);
  CHECK(s.t == 1.0);
  CHECK(s.fields[0].log_l2sq() == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(s.fields[1].log_l2sq() == doctest::Approx(std::log(0.5) - 8 * kPi * kPi * 0.01).epsilon(1e-13));
  REQUIRE(s.certificates[1].size() == 1);
  CHECK(!s.certificates[1][0].violated());
}

TEST_CASE("uncertified diffusivities are refused") {
  ControllerParams p = small_params(3);
  CHECK_THROWS_WITH_AS(run_growth(sine_field(3, kEx, {0, 0, 1}), 0.5, p), doctest::Contains("certified"),
                       std::invalid_argument);
}

TEST_CASE("growth run reaches the threshold and replays bit for bit") {
  ControllerParams p = small_params(4);
  const FourierField b0 = sine_field(4, kEx, {0, 0, 1});
  const ScheduleResult r = run_growth(b0, 1e-3, p);
  CHECK(r.report.status == "threshold reached");
  CHECK(unit_mode_rate(r.state.fields[0], r.state.t) >= 0.25);
  CHECK(r.report.min_block_factor_margin >= -1e-6);
  const ReplayResult rep = replay(b0, {1e-3}, r.state.units, p.solver);
  CHECK(relative_difference(rep.fields[0], r.state.fields[0]) == 0.0);
  const auto units = units_from_json(units_to_json(r.state.units));
  const ReplayResult again = replay(b0, {1e-3}, units, p.solver);
  CHECK(relative_difference(again.fields[0], r.state.fields[0]) == 0.0);
}

TEST_CASE("short horizon leaves a partial transcript") {
  ControllerParams p = small_params(3);
  p.growth_budget = 2.0;
  const ScheduleResult r = run_schedule(sine_field(3, kEx, {0, 0, 1}), {0.01}, 1.5, p);
  CHECK(r.state.t <= 1.5);
  CHECK(r.report.status.find("budget exhausted") == 0);
  CHECK(r.report.t_n.empty());
}
