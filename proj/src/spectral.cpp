#include "dynamo/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace dynamo {

std::array<WaveVector, 6> unit_modes() {
  return {WaveVector{1, 0, 0}, WaveVector{-1, 0, 0}, WaveVector{0, 1, 0},
          WaveVector{0, -1, 0}, WaveVector{0, 0, 1}, WaveVector{0, 0, -1}};
}

std::string to_string(WaveVector k) {
  std::ostringstream os;
  os << '(' << k.x << ',' << k.y << ',' << k.z << ')';
  return os.str();
}

Vec3c operator+(const Vec3c& a, const Vec3c& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3c operator-(const Vec3c& a, const Vec3c& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3c operator*(cplx s, const Vec3c& a) { return {s * a[0], s * a[1], s * a[2]}; }
double norm2(const Vec3c& a) { return std::norm(a[0]) + std::norm(a[1]) + std::norm(a[2]); }
double norm(const Vec3c& a) { return std::sqrt(norm2(a)); }
cplx dot(const Vec3c& a, const Vec3c& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
cplx vdot(const Vec3c& a, const Vec3c& b) {
  return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] + std::conj(a[2]) * b[2];
}
cplx dot(WaveVector k, const Vec3c& a) {
  return static_cast<double>(k.x) * a[0] + static_cast<double>(k.y) * a[1] + static_cast<double>(k.z) * a[2];
}
Vec3c conj(const Vec3c& a) { return {std::conj(a[0]), std::conj(a[1]), std::conj(a[2])}; }
Vec3c to_complex(WaveVector k) { return {cplx(k.x), cplx(k.y), cplx(k.z)}; }

WaveVector SignedPermutation::apply(WaveVector k) const {
  return {sign[0] * k[perm[0]], sign[1] * k[perm[1]], sign[2] * k[perm[2]]};
}

Vec3c SignedPermutation::apply(const Vec3c& v) const {
  return {static_cast<double>(sign[0]) * v[perm[0]], static_cast<double>(sign[1]) * v[perm[1]],
          static_cast<double>(sign[2]) * v[perm[2]]};
}

Vec3 SignedPermutation::apply(const Vec3& v) const {
  return {sign[0] * v[perm[0]], sign[1] * v[perm[1]], sign[2] * v[perm[2]]};
}

SignedPermutation SignedPermutation::transpose() const {
  SignedPermutation t;
  for (int i = 0; i < 3; ++i) {
    t.perm[perm[i]] = i;
    t.sign[perm[i]] = sign[i];
  }
  return t;
}

int SignedPermutation::determinant() const {
  // parity of perm times product of signs
  int inversions = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (perm[i] > perm[j]) ++inversions;
  const int parity = (inversions % 2 == 0) ? 1 : -1;
  return parity * sign[0] * sign[1] * sign[2];
}

bool SignedPermutation::is_identity() const { return *this == SignedPermutation{}; }

SignedPermutation rotation_to_ez(WaveVector k) {
  if (k.norm2() != 1) throw std::invalid_argument("rotation_to_ez: not a unit lattice vector " + to_string(k));
  const int a = k.x != 0 ? 0 : (k.y != 0 ? 1 : 2);
  const int s = k[a];
  const int b = (a + 1) % 3;
  const int c = (a + 2) % 3;
  // rows: s e_b, e_c, s e_a
  SignedPermutation P;
  P.perm = {b, c, a};
  P.sign = {s, 1, s};
  return P;
}

// ---------------------------------------------------------------------------

FourierField::FourierField(int N) : FourierField(N, Kind{}) {}

FourierField::FourierField(int N, Kind kind) : N_(N), kind_(kind) {
  if (N < 0) throw std::invalid_argument("FourierField: negative resolution");
  const std::size_t s = static_cast<std::size_t>(2 * N + 1);
  coeffs_.assign(s * s * s, Vec3c{});
}

WaveVector FourierField::wave_vector(std::size_t idx) const {
  const std::size_t s = static_cast<std::size_t>(side());
  const int z = static_cast<int>(idx % s) - N_;
  idx /= s;
  const int y = static_cast<int>(idx % s) - N_;
  const int x = static_cast<int>(idx / s) - N_;
  return {x, y, z};
}

Vec3c& FourierField::at(WaveVector k) {
  if (!contains(k)) throw std::out_of_range("FourierField::at: " + to_string(k) + " outside resolution");
  return coeffs_[index(k)];
}

bool FourierField::is_zero() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](const Vec3c& v) {
    return v[0] == cplx{} && v[1] == cplx{} && v[2] == cplx{};
  });
}

Vec3c fourier_coefficient(const FourierField& field, WaveVector k) { return field[k]; }

FourierField solenoidal_project(const FourierField& field) {
  FourierField out = field;
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const WaveVector k = out.wave_vector(i);
    if (k.norm2() == 0) {
      data[i] = Vec3c{};
      continue;
    }
    const cplx kb = dot(k, data[i]);
    const cplx s = kb / static_cast<double>(k.norm2());
    data[i] = data[i] - s * to_complex(k);
  }
  auto kind = out.kind();
  kind.solenoidal = true;
  kind.mean_zero = true;
  out.set_kind(kind);
  return out;
}

namespace {

std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

int wrap(int k, int M) { return k < 0 ? k + M : k; }

// In-place 3D transform of one component. sign = FFTW_BACKWARD evaluates
// sum_k exp(+2 pi i k.x) c_k.
void transform(std::vector<cplx>& buf, int M, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_3d(M, M, M, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_plan_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

PhysicalGrid to_physical(const FourierField& field, int M) {
  const int N = field.resolution();
  if (M < 2 * N + 1)
    throw AliasingError("to_physical: M = " + std::to_string(M) + " < 2N+1 = " + std::to_string(2 * N + 1));
  PhysicalGrid grid{M, std::vector<Vec3c>(static_cast<std::size_t>(M) * M * M)};
  std::vector<cplx> buf(grid.values.size());
  for (int c = 0; c < 3; ++c) {
    std::fill(buf.begin(), buf.end(), cplx{});
    for (int x = -N; x <= N; ++x)
      for (int y = -N; y <= N; ++y)
        for (int z = -N; z <= N; ++z)
          buf[grid.index(wrap(x, M), wrap(y, M), wrap(z, M))] = field[{x, y, z}][c];
    transform(buf, M, FFTW_BACKWARD);
    for (std::size_t i = 0; i < buf.size(); ++i) grid.values[i][c] = buf[i];
  }
  return grid;
}

FourierField from_physical(const PhysicalGrid& grid, int N) {
  const int M = grid.M;
  if (M < 2 * N + 1)
    throw AliasingError("from_physical: M = " + std::to_string(M) + " < 2N+1 = " + std::to_string(2 * N + 1));
  FourierField out(N);
  std::vector<cplx> buf(grid.values.size());
  const double scale = 1.0 / (static_cast<double>(M) * M * M);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = grid.values[i][c];
    transform(buf, M, FFTW_FORWARD);
    for (int x = -N; x <= N; ++x)
      for (int y = -N; y <= N; ++y)
        for (int z = -N; z <= N; ++z)
          out.at({x, y, z})[c] = buf[grid.index(wrap(x, M), wrap(y, M), wrap(z, M))] * scale;
  }
  return out;
}

double l2_norm_squared(const FourierField& field) {
  double s = 0.0;
  for (const auto& v : field.data()) s += norm2(v);
  return s;
}

double h1_seminorm_squared(const FourierField& field) {
  double s = 0.0;
  const auto data = field.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double n2 = norm2(data[i]);
    if (n2 != 0.0) s += 4.0 * kPi * kPi * field.wave_vector(i).norm2() * n2;
  }
  return s;
}

double l2_norm(const FourierField& field) { return std::sqrt(l2_norm_squared(field)); }
double h1_seminorm(const FourierField& field) { return std::sqrt(h1_seminorm_squared(field)); }

namespace {
void require_same_shape(const FourierField& a, const FourierField& b, const char* what) {
  if (a.resolution() != b.resolution())
    throw std::invalid_argument(std::string(what) + ": resolution mismatch");
}
}  // namespace

cplx inner(const FourierField& a, const FourierField& b) {
  require_same_shape(a, b, "inner");
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += vdot(a.data()[i], b.data()[i]);
  return s;
}

FourierField operator+(const FourierField& a, const FourierField& b) {
  require_same_shape(a, b, "operator+");
  FourierField out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

FourierField operator-(const FourierField& a, const FourierField& b) {
  require_same_shape(a, b, "operator-");
  FourierField out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

FourierField operator*(cplx s, const FourierField& a) {
  FourierField out = a;
  for (auto& v : out.data()) v = s * v;
  return out;
}

double max_abs_difference(const FourierField& a, const FourierField& b) {
  require_same_shape(a, b, "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, norm(a.data()[i] - b.data()[i]));
  return m;
}

FourierField translate(const FourierField& field, const Vec3& y) {
  FourierField out = field;
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const WaveVector k = out.wave_vector(i);
    const double phase = -kTwoPi * (k.x * y[0] + k.y * y[1] + k.z * y[2]);
    data[i] = std::polar(1.0, phase) * data[i];
  }
  return out;
}

FourierField rotate(const FourierField& field, const SignedPermutation& P) {
  FourierField out(field.resolution(), field.kind());
  const SignedPermutation Pt = P.transpose();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const WaveVector k = out.wave_vector(i);
    out.data()[i] = P.apply(field[Pt.apply(k)]);
  }
  return out;
}

FourierField resize(const FourierField& field, int N) {
  FourierField out(N, field.kind());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = field[out.wave_vector(i)];
  return out;
}

FourierField single_mode(int N, WaveVector k, const Vec3c& v) {
  FourierField out(N);
  out.at(k) = v;
  return out;
}

FourierField sine_field(int N, WaveVector k, const Vec3& d) {
  // sin(t) = (e^{it} - e^{-it}) / 2i
  FourierField out(N, {.real = true, .mean_zero = true, .solenoidal = true});
  const cplx plus = 1.0 / cplx(0.0, 2.0);
  const Vec3c dc{d[0], d[1], d[2]};
  out.at(k) = plus * dc;
  out.at(-k) = std::conj(plus) * dc;
  return out;
}

FieldDiagnostics diagnose(const FourierField& field, double tol_div) {
  FieldDiagnostics d;
  const double l2 = l2_norm(field);
  const auto data = field.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const WaveVector k = field.wave_vector(i);
    if (l2 > 0.0 && k.norm2() > 0)
      d.max_divergence = std::max(d.max_divergence, std::abs(dot(k, data[i])) / (std::sqrt(k.norm2()) * l2));
    d.reality_defect = std::max(d.reality_defect, norm(data[i] - conj(field[-k])));
  }
  d.mean_magnitude = norm(field[{0, 0, 0}]);
  const auto& kind = field.kind();
  if (kind.solenoidal && d.max_divergence > tol_div)
    d.violations.push_back("divergence " + std::to_string(d.max_divergence) + " exceeds tol_div");
  if (kind.mean_zero && d.mean_magnitude > tol_div * std::max(l2, 1.0))
    d.violations.push_back("nonzero mean " + std::to_string(d.mean_magnitude));
  if (kind.real && d.reality_defect > tol_div * std::max(l2, 1.0))
    d.violations.push_back("reality defect " + std::to_string(d.reality_defect));
  return d;
}

nlohmann::json to_json(const FourierField& field) {
  nlohmann::json entries = nlohmann::json::array();
  const auto data = field.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec3c& v = data[i];
    if (v[0] == cplx{} && v[1] == cplx{} && v[2] == cplx{}) continue;
    const WaveVector k = field.wave_vector(i);
    entries.push_back({{"k", {k.x, k.y, k.z}},
                       {"re", {v[0].real(), v[1].real(), v[2].real()}},
                       {"im", {v[0].imag(), v[1].imag(), v[2].imag()}}});
  }
  const auto& kind = field.kind();
  return {{"N", field.resolution()},
          {"kind", {{"real", kind.real}, {"mean_zero", kind.mean_zero}, {"solenoidal", kind.solenoidal}}},
          {"entries", std::move(entries)}};
}

FourierField field_from_json(const nlohmann::json& j) {
  FourierField::Kind kind;
  if (j.contains("kind")) {
    kind.real = j["kind"].value("real", false);
    kind.mean_zero = j["kind"].value("mean_zero", false);
    kind.solenoidal = j["kind"].value("solenoidal", false);
  }
  FourierField out(j.at("N").get<int>(), kind);
  for (const auto& e : j.at("entries")) {
    const auto& k = e.at("k");
    const WaveVector kv{k.at(0).get<int>(), k.at(1).get<int>(), k.at(2).get<int>()};
    auto& c = out.at(kv);
    for (int i = 0; i < 3; ++i) c[i] = cplx(e.at("re").at(i).get<double>(), e.at("im").at(i).get<double>());
  }
  return out;
}

}  // namespace dynamo
