#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace dynamo {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using Vec3c = std::array<cplx, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Integer lattice point of Z^3.
struct WaveVector {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr int norm_inf() const {
    const int ax = x < 0 ? -x : x;
    const int ay = y < 0 ? -y : y;
    const int az = z < 0 ? -z : z;
    return ax > ay ? (ax > az ? ax : az) : (ay > az ? ay : az);
  }
  constexpr int norm2() const { return x * x + y * y + z * z; }
  constexpr int operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr WaveVector operator+(WaveVector a, WaveVector b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr WaveVector operator-(WaveVector a, WaveVector b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr WaveVector operator-(WaveVector a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(WaveVector a, WaveVector b) = default;
};

inline constexpr WaveVector kEx{1, 0, 0};
inline constexpr WaveVector kEy{0, 1, 0};
inline constexpr WaveVector kEz{0, 0, 1};

/// The six signed unit lattice vectors, in a fixed order.
std::array<WaveVector, 6> unit_modes();

std::string to_string(WaveVector k);

// Small C^3 helpers.
Vec3c operator+(const Vec3c& a, const Vec3c& b);
Vec3c operator-(const Vec3c& a, const Vec3c& b);
Vec3c operator*(cplx s, const Vec3c& a);
double norm(const Vec3c& a);
double norm2(const Vec3c& a);
/// Bilinear a.b (no conjugation).
cplx dot(const Vec3c& a, const Vec3c& b);
/// Sesquilinear conj(a).b.
cplx vdot(const Vec3c& a, const Vec3c& b);
cplx dot(WaveVector k, const Vec3c& a);
Vec3c conj(const Vec3c& a);
Vec3c to_complex(WaveVector k);

/// Signed axis permutation acting on R^3 and Z^3: (P v)_i = sign_i * v_{perm_i}.
struct SignedPermutation {
  std::array<int, 3> perm{0, 1, 2};
  std::array<int, 3> sign{1, 1, 1};

  WaveVector apply(WaveVector k) const;
  Vec3c apply(const Vec3c& v) const;
  Vec3 apply(const Vec3& v) const;
  SignedPermutation transpose() const;
  int determinant() const;
  bool is_identity() const;

  friend bool operator==(const SignedPermutation&, const SignedPermutation&) = default;
};

/// Proper signed permutation P with P k = e_z, for a unit lattice vector k.
SignedPermutation rotation_to_ez(WaveVector k);

struct AliasingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Truncated Fourier series of a C^3 valued field on the unit torus,
///   b(x) = sum_k exp(2 pi i k.x) bhat(k),   |k|_inf <= N,
/// stored densely over the cube.
class FourierField {
 public:
  struct Kind {
    bool real = false;
    bool mean_zero = false;
    bool solenoidal = false;
    friend bool operator==(const Kind&, const Kind&) = default;
  };

  FourierField() = default;
  explicit FourierField(int N);
  FourierField(int N, Kind kind);

  int resolution() const { return N_; }
  int side() const { return 2 * N_ + 1; }
  std::size_t size() const { return coeffs_.size(); }
  const Kind& kind() const { return kind_; }
  void set_kind(Kind kind) { kind_ = kind; }

  bool contains(WaveVector k) const { return k.norm_inf() <= N_; }
  std::size_t index(WaveVector k) const {
    const std::size_t s = static_cast<std::size_t>(side());
    return (static_cast<std::size_t>(k.x + N_) * s + static_cast<std::size_t>(k.y + N_)) * s +
           static_cast<std::size_t>(k.z + N_);
  }
  WaveVector wave_vector(std::size_t idx) const;

  /// Stored coefficient, or zero outside the cube.
  Vec3c operator[](WaveVector k) const { return contains(k) ? coeffs_[index(k)] : Vec3c{}; }
  Vec3c& at(WaveVector k);

  std::span<Vec3c> data() { return coeffs_; }
  std::span<const Vec3c> data() const { return coeffs_; }

  bool is_zero() const;

 private:
  int N_ = 0;
  Kind kind_{};
  std::vector<Vec3c> coeffs_;
};

/// M^3 samples of a C^3 field at x = (a, b, c) / M.
struct PhysicalGrid {
  int M = 0;
  std::vector<Vec3c> values;

  std::size_t index(int a, int b, int c) const {
    return (static_cast<std::size_t>(a) * M + b) * static_cast<std::size_t>(M) + c;
  }
};

Vec3c fourier_coefficient(const FourierField& field, WaveVector k);

FourierField solenoidal_project(const FourierField& field);

PhysicalGrid to_physical(const FourierField& field, int M);
FourierField from_physical(const PhysicalGrid& grid, int N);

double l2_norm(const FourierField& field);
double h1_seminorm(const FourierField& field);
double l2_norm_squared(const FourierField& field);
double h1_seminorm_squared(const FourierField& field);

/// Sesquilinear L^2 inner product sum_k conj(a(k)).b(k).
cplx inner(const FourierField& a, const FourierField& b);
FourierField operator+(const FourierField& a, const FourierField& b);
FourierField operator-(const FourierField& a, const FourierField& b);
FourierField operator*(cplx s, const FourierField& a);
double max_abs_difference(const FourierField& a, const FourierField& b);

/// b(x - y): coefficients multiplied by exp(-2 pi i k.y).
FourierField translate(const FourierField& field, const Vec3& y);
/// b'(x) = P b(P^T x), i.e. b'(k') = P b(P^T k').
FourierField rotate(const FourierField& field, const SignedPermutation& P);
FourierField resize(const FourierField& field, int N);

/// Single Fourier mode v exp(2 pi i k.x).
FourierField single_mode(int N, WaveVector k, const Vec3c& v);
/// Real field sin(2 pi k.x) d.
FourierField sine_field(int N, WaveVector k, const Vec3& direction);

struct FieldDiagnostics {
  double max_divergence = 0.0;    // max_k |k . bhat(k)| / ||b||
  double mean_magnitude = 0.0;    // |bhat(0)|
  double reality_defect = 0.0;    // max_k |bhat(-k) - conj(bhat(k))|
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks the invariants the field's Kind claims, against tol_div.
FieldDiagnostics diagnose(const FourierField& field, double tol_div = 1e-10);

nlohmann::json to_json(const FourierField& field);
FourierField field_from_json(const nlohmann::json& j);

}  // namespace dynamo
