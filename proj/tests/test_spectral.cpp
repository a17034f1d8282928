#include "doctest.h"

#include <cmath>
#include <random>

#include "dynamo/spectral.hpp"

using namespace dynamo;

namespace {

FourierField random_solenoidal(int N, int kmax, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FourierField f(N, FourierField::Kind{true, true, true});
  for (int x = 0; x <= kmax; ++x)
    for (int y = -kmax; y <= kmax; ++y)
      for (int z = -kmax; z <= kmax; ++z) {
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

}  // namespace

TEST_CASE("sine field coefficients and norms") {
  const FourierField b = sine_field(8, kEx, {0, 0, 1});
  CHECK(std::abs(b[kEx][2] - cplx(0, -0.5)) < 1e-15);
  CHECK(std::abs(b[-kEx][2] - cplx(0, 0.5)) < 1e-15);
  CHECK(l2_norm(b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(h1_seminorm(b) == doctest::Approx(kTwoPi / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(diagnose(b).ok());
}

TEST_CASE("solenoidal projection of a single mode") {
  FourierField f(2, {.solenoidal = true});
  f.at({1, 1, 0}) = Vec3c{1.0, 0.0, 0.0};
  const FourierField p = solenoidal_project(f);
  const Vec3c v = p[WaveVector{1, 1, 0}];
  CHECK(std::abs(v[0] - 0.5) < 1e-15);
  CHECK(std::abs(v[1] + 0.5) < 1e-15);
  CHECK(std::abs(v[2]) < 1e-15);
  CHECK(!diagnose(f).ok());
}

TEST_CASE("physical round trip is exact on the alias-free grid") {
  for (unsigned seed : {1u, 2u, 3u}) {
    const FourierField b = random_solenoidal(4, 4, seed);
    const FourierField back = from_physical(to_physical(b, 9), 4);
    CHECK(max_abs_difference(b, back) < 1e-13);
  }
}

TEST_CASE("physical values of sin(2 pi x) e_z") {
  const FourierField b = sine_field(3, kEx, {0, 0, 1});
  const PhysicalGrid g = to_physical(b, 7);
  for (int a = 0; a < 7; ++a) {
    const cplx v = g.values[g.index(a, 2, 5)][2];
    CHECK(std::abs(v - std::sin(kTwoPi * a / 7.0)) < 1e-14);
  }
}

TEST_CASE("Parseval and inner products") {
  const FourierField a = random_solenoidal(3, 2, 4), b = random_solenoidal(3, 2, 5);
  CHECK(std::abs(inner(a, a) - l2_norm_squared(a)) < 1e-12);
  CHECK(std::abs(inner(a, b) - std::conj(inner(b, a))) < 1e-12);
}

TEST_CASE("translation multiplies by the lattice phase and composes") {
  const FourierField b = random_solenoidal(3, 2, 6);
  const Vec3 y{0.13, 0.71, 0.4};
  const FourierField t = translate(b, y);
  const WaveVector k{1, -2, 1};
  const cplx phase = std::polar(1.0, -kTwoPi * (k.x * y[0] + k.y * y[1] + k.z * y[2]));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(t[k][i] - phase * b[k][i]) < 1e-14);
  CHECK(max_abs_difference(translate(t, {-y[0], -y[1], -y[2]}), b) < 1e-14);
  CHECK(l2_norm(t) == doctest::Approx(l2_norm(b)).epsilon(1e-14));
}

TEST_CASE("discrete rotations onto e_z") {
  for (const auto& k : unit_modes()) {
    const SignedPermutation P = rotation_to_ez(k);
    CHECK(P.apply(k) == kEz);
    CHECK(P.determinant() == 1);
    CHECK(P.transpose().apply(kEz) == k);
  }
  // sin(2 pi x) e_z seen from the frame where e_x points along e_z
  const FourierField b = rotate(sine_field(4, kEx, {0, 0, 1}), rotation_to_ez(kEx));
  CHECK(std::abs(b[kEz][1] - cplx(0, -0.5)) < 1e-15);
  CHECK(std::abs(b[kEz][0]) + std::abs(b[kEz][2]) < 1e-15);
  CHECK(diagnose(b).ok());
}

TEST_CASE("resize keeps low modes and JSON round trips") {
  const FourierField b = random_solenoidal(3, 2, 7);
  const FourierField big = resize(b, 6);
  CHECK(max_abs_difference(resize(big, 3), b) == 0.0);
  CHECK(max_abs_difference(field_from_json(to_json(b)), b) == 0.0);
}

TEST_CASE("diagnose reports broken reality") {
  FourierField f(2, {.real = true});
  f.at(kEx) = Vec3c{0.0, 1.0, 0.0};
  CHECK(!diagnose(f).ok());
  f.set_kind({});
  CHECK(diagnose(f).ok());
}
