#include "dynamo/operators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dynamo/parallel.hpp"

namespace dynamo {

Vector3c to_eigen(const Vec3c& v) { return Vector3c(v[0], v[1], v[2]); }
Vec3c from_eigen(const Vector3c& v) { return {v(0), v(1), v(2)}; }

double bessel_j(int n, double z) {
  if (n != 0 && n != 1) throw std::invalid_argument("bessel_j: only orders 0 and 1 are supported");
  if (std::abs(z) > 10.0) throw std::invalid_argument("bessel_j: |z| must be <= 10");
  const double h = 0.5 * z;
  const double h2 = h * h;
  double term = n == 0 ? 1.0 : h;  // (z/2)^n / n!
  double sum = term;
  for (int m = 1; m < 200; ++m) {
    term *= -h2 / (static_cast<double>(m) * static_cast<double>(m + n));
    sum += term;
    if (std::abs(term) < 1e-17 * std::max(1.0, std::abs(sum))) break;
  }
  return sum;
}

double bessel_j_hansen(int n, double z, int points) {
  cplx acc = 0.0;
  for (int p = 0; p < points; ++p) {
    const double x = static_cast<double>(p) / points;
    acc += std::polar(1.0, z * std::sin(kTwoPi * x) + kTwoPi * n * x);
  }
  acc /= static_cast<double>(points);
  return (n % 2 == 0 ? 1.0 : -1.0) * acc.real();
}

EigenDecomposition eigen3(const Matrix3c& A) {
  EigenDecomposition e;
  const double scale = std::max(1.0, A.norm());
  e.hermitian = (A - A.adjoint()).norm() <= 1e-10 * scale;

  Eigen::Vector3cd vals;
  Matrix3c vecs;
  if (e.hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix3c> solver(0.5 * (A + A.adjoint()));
    vals = solver.eigenvalues().cast<cplx>();
    vecs = solver.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<Matrix3c> solver(A);
    vals = solver.eigenvalues();
    vecs = solver.eigenvectors();
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(vals(a)) > std::abs(vals(b)); });
  for (int i = 0; i < 3; ++i) {
    e.values[i] = vals(order[i]);
    Vector3c v = vecs.col(order[i]);
    // fix the phase so the largest component is real and positive
    int big = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(v(c)) > std::abs(v(big)) + 1e-14) big = c;
    v *= std::conj(v(big)) / std::abs(v(big));
    e.right.col(i) = v.normalized();
  }
  e.gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) e.gap = std::min(e.gap, std::abs(e.values[i] - e.values[j]));
  e.reliable = e.gap > kDefectiveGap;
  if (e.reliable) e.left = e.right.inverse();
  for (int i = 0; i < 3; ++i)
    e.residual = std::max(e.residual, (A * e.right.col(i) - e.values[i] * e.right.col(i)).norm());
  return e;
}

AnalyticMatrixSet AnalyticMatrixSet::from_bessel() {
  return {bessel_j(0, kPi / 2.0), kTwoPi * bessel_j(1, kPi / 2.0)};
}

Matrix3c AnalyticMatrixSet::u(double lambda) const {
  Matrix3c m = Matrix3c::Identity() * alpha;
  m(1, 0) = cplx(0.0, lambda * beta);
  return m;
}

Matrix3c AnalyticMatrixSet::v(double lambda) const {
  Matrix3c m = Matrix3c::Identity() * alpha;
  m(0, 1) = cplx(0.0, lambda * beta);
  return m;
}

Matrix3c AnalyticMatrixSet::w(double lambda) const {
  const double a2 = alpha * alpha;
  Matrix3c m = Matrix3c::Zero();
  m(0, 0) = a2 + lambda * lambda * beta * beta;
  m(0, 1) = cplx(0.0, -lambda * alpha * beta);
  m(1, 0) = cplx(0.0, lambda * alpha * beta);
  m(1, 1) = a2;
  m(2, 2) = a2;
  return m;
}

std::array<double, 3> AnalyticMatrixSet::w_eigenvalues(double lambda) const {
  const double b2 = beta * beta * lambda * lambda;
  const double a2 = alpha * alpha;
  const double root = 0.5 * std::abs(beta * lambda) * std::sqrt(b2 + 4.0 * a2);
  return {0.5 * b2 + a2 + root, a2, 0.5 * b2 + a2 - root};
}

std::array<Vector3c, 3> AnalyticMatrixSet::w_eigenvectors(double lambda) const {
  const auto ev = w_eigenvalues(lambda);
  const double a = alpha * alpha + lambda * lambda * beta * beta;
  auto block = [&](double mu) {
    Vector3c x(cplx(0.0, lambda * alpha * beta), a - mu, 0.0);
    if (x.norm() == 0.0) x = Vector3c(1.0, 0.0, 0.0);
    return Vector3c(x.normalized());
  };
  return {block(ev[0]), Vector3c(0.0, 0.0, 1.0), block(ev[2])};
}

ControlMatrix matrix_element(const TimeFlow& flow, double kappa, double s, double t, WaveVector k, WaveVector j,
                             const SolverParams& params) {
  const int N = params.N;
  if (k.norm_inf() > N || j.norm_inf() > N) throw std::invalid_argument("matrix_element: mode outside the cube");
  ControlMatrix out{Matrix3c::Zero(), flow.id(), kappa, s, t, k, j};
  SolverParams p = params;
  p.project_solenoidal = false;
  std::array<Vec3c, 3> cols;
  parallel_for(3, [&](std::size_t c) {
    Vec3c v{};
    v[c] = 1.0;
    cols[c] = propagate(single_mode(N, j, v), flow, kappa, s, t, p)[k];
  });
  for (int c = 0; c < 3; ++c) out.A.col(c) = to_eigen(cols[c]);
  return out;
}

double translation_identity_residual(const TimeFlow& flow, double kappa, WaveVector k, WaveVector j, const Vec3& y,
                                     const SolverParams& params) {
  const double s = flow.start(), t = flow.end();
  const ControlMatrix base = matrix_element(flow, kappa, s, t, k, j, params);
  const ControlMatrix moved = matrix_element(translate(flow, y), kappa, s, t, k, j, params);
  const WaveVector d = j - k;
  const cplx phase = std::polar(1.0, kTwoPi * (d.x * y[0] + d.y * y[1] + d.z * y[2]));
  return (moved.A - phase * base.A).norm();
}

AveragedMatrix averaged_matrix(const TimeFlow& flow, double kappa, WaveVector k, int M, const SolverParams& params,
                               const FourierField& others) {
  const int N = params.N;
  if (M < 1) throw std::invalid_argument("averaged_matrix: M must be positive");
  if (others.resolution() != N) throw std::invalid_argument("averaged_matrix: probe resolution mismatch");
  AveragedMatrix out;
  out.matrix = ControlMatrix{Matrix3c::Zero(), flow.id(), kappa, flow.start(), flow.end(), k, k};
  if (M < 2 * N + 1) {
    out.aliasing_warning = true;
    std::ostringstream os;
    os << "translation grid M=" << M << " < 2N+1=" << 2 * N + 1
       << ": lattice phases need not cancel, averaging can alias";
    out.warning = os.str();
  }
  SolverParams p = params;
  p.project_solenoidal = false;
  const std::size_t grid = static_cast<std::size_t>(M) * M * M;
  std::vector<std::array<Vec3c, 3>> samples(grid);
  parallel_for(grid, [&](std::size_t g) {
    const int a = static_cast<int>(g / (static_cast<std::size_t>(M) * M));
    const int b = static_cast<int>((g / M) % M);
    const int c = static_cast<int>(g % M);
    const Vec3 y{static_cast<double>(a) / M, static_cast<double>(b) / M, static_cast<double>(c) / M};
    const TimeFlow moved = translate(flow, y);
    for (int col = 0; col < 3; ++col) {
      FourierField probe = others;
      Vec3c v = probe[k];
      v[col] += 1.0;
      probe.at(k) = v;
      samples[g][col] = propagate(probe, moved, kappa, flow.start(), flow.end(), p)[k];
    }
  });
  for (int col = 0; col < 3; ++col) {
    Vec3c acc{};
    for (std::size_t g = 0; g < grid; ++g) acc = acc + samples[g][col];
    out.matrix.A.col(col) = to_eigen(cplx(1.0 / static_cast<double>(grid)) * acc);
  }
  return out;
}

AveragedMatrix averaged_matrix(const TimeFlow& flow, double kappa, WaveVector k, int M, const SolverParams& params) {
  return averaged_matrix(flow, kappa, k, M, params, FourierField(params.N));
}

namespace {

double growing_projection(const EigenDecomposition& e, const Vector3c& v) {
  if (!e.reliable) return 0.0;
  const Vector3c c = e.left * v;
  Vector3c part = Vector3c::Zero();
  for (int i = 0; i < 3; ++i)
    if (std::abs(e.values[i]) > std::exp(1.0)) part += c(i) * e.right.col(i);
  return part.norm() / v.norm();
}

}  // namespace

ControlChoice control_select(const Vec3c& v, double kappa, const ControlMatrix& A1, const ControlMatrix& A2,
                             double proj_tol) {
  const Vector3c ve = to_eigen(v);
  if (ve.norm() == 0.0) throw std::invalid_argument("control_select: v must be nonzero");
  if (std::abs(v[2]) > 1e-12 * ve.norm())
    throw std::invalid_argument("control_select: controls are only certified for e_z . v = 0");
  const EigenDecomposition e1 = eigen3(A1.A);
  const EigenDecomposition e2 = eigen3(A2.A);
  for (const auto* e : {&e1, &e2}) {
    if (!e->simple(kSimplicityGap)) {
      std::ostringstream os;
      os << "control_select: control matrix at kappa=" << kappa << " has simplicity gap " << e->gap
         << " below " << kSimplicityGap;
      throw ControlSelectionError(os.str());
    }
  }
  ControlChoice out;
  out.projection = {growing_projection(e1, ve), growing_projection(e2, ve)};
  if (out.projection[0] <= proj_tol && out.projection[1] <= proj_tol) {
    std::ostringstream os;
    os << "control_select: neither control certifies growth at kappa=" << kappa << " (projections "
       << out.projection[0] << ", " << out.projection[1] << " <= " << proj_tol << ")";
    throw ControlSelectionError(os.str());
  }
  out.choice = out.projection[1] > out.projection[0] ? 2 : 1;
  out.eig = out.choice == 1 ? e1 : e2;
  out.factor = std::abs(out.eig.values[0]);
  return out;
}

double span_margin(const EigenDecomposition& e1, const EigenDecomposition& e2, int samples) {
  double worst = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= samples; ++a) {
    const double theta = 0.5 * kPi * a / samples;
    for (int b = 0; b < samples; ++b) {
      const double psi = kTwoPi * b / samples;
      const Vector3c v(std::cos(theta), std::polar(std::sin(theta), psi), 0.0);
      worst = std::min(worst, std::max(growing_projection(e1, v), growing_projection(e2, v)));
    }
  }
  return worst;
}

ScanResult kappa0_scan(const std::vector<double>& kappas, double R, const SolverParams& params) {
  ScanResult out;
  out.R = R;
  out.N = params.N;
  out.dt = params.dt;
  std::vector<double> ks = kappas;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const TimeFlow u1 = w_flow(R), u2 = w_flow(-R);
  for (double kappa : ks) {
    if (kappa < 0.0) throw std::invalid_argument("kappa0_scan: diffusivities must be nonnegative");
    const EigenDecomposition e1 = eigen3(matrix_element(u1, kappa, 0.0, 2.0, kEz, kEz, params).A);
    const EigenDecomposition e2 = eigen3(matrix_element(u2, kappa, 0.0, 2.0, kEz, kEz, params).A);
    ScanRow row;
    row.kappa = kappa;
    row.gap = std::min(e1.gap, e2.gap);
    row.top1 = std::abs(e1.values[0]);
    row.top2 = std::abs(e2.values[0]);
    row.margin = span_margin(e1, e2);
    row.pass = row.top1 > std::exp(1.0) && row.top2 > std::exp(1.0) && row.gap > kSimplicityGap &&
               row.margin > kProjectionTol;
    out.rows.push_back(row);
  }
  for (const auto& row : out.rows) {
    if (!row.pass) break;
    out.kappa0 = row.kappa;
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const double dk = out.rows[i].kappa - out.rows[i - 1].kappa;
    out.lipschitz = std::max(out.lipschitz, std::abs(out.rows[i].margin - out.rows[i - 1].margin) / dk);
  }
  return out;
}

void ScanResult::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "kappa,gap,abs_lambda1_A1,abs_lambda1_A2,span_margin,pass\n";
  for (const auto& r : rows)
    os << r.kappa << ',' << r.gap << ',' << r.top1 << ',' << r.top2 << ',' << r.margin << ',' << (r.pass ? 1 : 0)
       << '\n';
  os.precision(old);
}

nlohmann::json to_json(const Matrix3c& A) {
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    re.push_back({A(r, 0).real(), A(r, 1).real(), A(r, 2).real()});
    im.push_back({A(r, 0).imag(), A(r, 1).imag(), A(r, 2).imag()});
  }
  return {{"re", re}, {"im", im}};
}

Matrix3c matrix_from_json(const nlohmann::json& j) {
  Matrix3c A;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) A(r, c) = cplx(j.at("re").at(r).at(c).get<double>(), j.at("im").at(r).at(c).get<double>());
  return A;
}

nlohmann::json to_json(const ControlMatrix& m) {
  return {{"matrix", to_json(m.A)},
          {"flow", m.flow_id},
          {"kappa", m.kappa},
          {"interval", {m.s, m.t}},
          {"k", {m.k.x, m.k.y, m.k.z}},
          {"j", {m.j.x, m.j.y, m.j.z}}};
}

nlohmann::json to_json(const EigenDecomposition& e) {
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& v : e.values) vals.push_back({v.real(), v.imag()});
  return {{"eigenvalues", vals},       {"eigenvectors", to_json(e.right)}, {"gap", e.gap},
          {"residual", e.residual},    {"hermitian", e.hermitian},         {"reliable", e.reliable}};
}

}  // namespace dynamo
