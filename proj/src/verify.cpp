#include "dynamo/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace dynamo {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

template <class F>
Check timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Check c = f();
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

Check margin_check(std::string name, double margin, std::string detail) {
  Check c;
  c.name = std::move(name);
  c.measured = margin;
  c.allowed = -kMarginRoundoff;
  c.passed = margin >= -kMarginRoundoff;
  c.detail = std::move(detail);
  return c;
}

// Real, mean-free, solenoidal field with random coefficients on |k|_inf <= kmax.
FourierField random_field(int N, int kmax, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  FourierField f(N, FourierField::Kind{true, true, true});
  for (int x = -kmax; x <= kmax; ++x)
    for (int y = -kmax; y <= kmax; ++y)
      for (int z = -kmax; z <= kmax; ++z) {
        const WaveVector k{x, y, z};
        // one representative of each +-k pair
        if (x < 0 || (x == 0 && (y < 0 || (y == 0 && z <= 0)))) continue;
        Vec3c v{cplx(g(rng), g(rng)), cplx(g(rng), g(rng)), cplx(g(rng), g(rng))};
        const cplx kv = dot(k, v);
        const double k2 = k.norm2();
        for (int i = 0; i < 3; ++i) v[i] -= kv * double(k[i]) / k2;
        f.at(k) = v;
        f.at(-k) = conj(v);
      }
  return f;
}

TimeFlow family_flow(char family, double lambda) {
  switch (family) {
    case 'U': return u_flow(lambda);
    case 'V': return v_flow(lambda);
    case 'W': return w_flow(lambda);
  }
  throw std::invalid_argument(std::string("unknown flow family '") + family + "'");
}

Matrix3c family_matrix(char family, double lambda, const AnalyticMatrixSet& m) {
  switch (family) {
    case 'U': return m.u(lambda);
    case 'V': return m.v(lambda);
    case 'W': return m.w(lambda);
  }
  throw std::invalid_argument(std::string("unknown flow family '") + family + "'");
}

}  // namespace

AnalyticMatrixSet fixture_matrices() { return AnalyticMatrixSet{kAlphaFixture, kBetaFixture}; }

Check bound_check(std::string name, double measured, double allowed, std::string detail) {
  Check c;
  c.name = std::move(name);
  c.measured = measured;
  c.allowed = allowed;
  c.passed = measured < allowed;
  c.detail = std::move(detail);
  return c;
}

bool CheckSuite::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json CheckSuite::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"measured", std::isfinite(c.measured) ? nlohmann::json(c.measured) : nlohmann::json(nullptr)},
                   {"allowed", c.allowed},
                   {"detail", c.detail}});
  }
  const auto failed = std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; });
  return {{"suite", name}, {"passed", ok()}, {"failures", failed}, {"checks", arr}};
}

void CheckSuite::write_junit(std::ostream& os) const {
  const auto failed = std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; });
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<testsuite name=\"" << xml_escape(name) << "\" tests=\"" << checks.size() << "\" failures=\"" << failed
     << "\">\n";
  for (const auto& c : checks) {
    os << "  <testcase classname=\"" << xml_escape(name) << "\" name=\"" << xml_escape(c.name) << "\"";
    if (c.passed) {
      os << "/>\n";
      continue;
    }
    os << ">\n    <failure message=\"measured " << fmt(c.measured) << ", allowed " << fmt(c.allowed) << "\">"
       << xml_escape(c.detail) << "</failure>\n  </testcase>\n";
  }
  os << "</testsuite>\n";
}

std::string to_string(const Check& c) {
  std::ostringstream os;
  os << (c.passed ? "PASS " : "FAIL ") << c.name << ": measured " << fmt(c.measured) << ", allowed " << fmt(c.allowed);
  if (!c.detail.empty()) os << " (" << c.detail << ")";
  return os.str();
}

Check check_bessel(const AnalyticMatrixSet& fixtures) {
  const double z = kPi / 2.0;
  const double a_series = bessel_j(0, z), a_hansen = bessel_j_hansen(0, z);
  const double b_series = kTwoPi * bessel_j(1, z), b_hansen = kTwoPi * bessel_j_hansen(1, z);
  const double err = std::max({std::abs(a_series - a_hansen), std::abs(b_series - b_hansen),
                               std::abs(a_series - fixtures.alpha), std::abs(b_series - fixtures.beta)});
  std::ostringstream os;
  os.precision(17);
  os << "alpha=" << a_series << " beta=" << b_series;
  Check c = bound_check("bessel fixtures", err, 1e-13, os.str());
  if (!(fixtures.alpha > 0.0 && fixtures.alpha < 1.0 && fixtures.beta > 0.0)) {
    c.passed = false;
    c.detail += "; alpha must lie in (0,1) and beta must be positive";
  }
  return c;
}

double matrix_error(char family, double lambda, const AnalyticMatrixSet& fixtures, const SolverParams& params) {
  const TimeFlow flow = family_flow(family, lambda);
  const ControlMatrix m = matrix_element(flow, 0.0, flow.start(), flow.end(), kEz, kEz, params);
  return (m.A - family_matrix(family, lambda, fixtures)).norm();
}

Check check_matrix(char family, double lambda, const AnalyticMatrixSet& fixtures, const SolverParams& params,
                   double tol) {
  return timed([&] {
    // large amplitudes need a smaller step than the configured one
    const TimeFlow flow = family_flow(family, lambda);
    SolverParams p = params;
    p.dt = std::min(p.dt, 0.9 * stable_dt(flow, flow.start(), flow.end(), p.N));
    return bound_check(std::string("matrix ") + family + "(" + fmt(lambda) + ")",
                       matrix_error(family, lambda, fixtures, p), tol,
                       "N=" + std::to_string(p.N) + " dt=" + fmt(p.dt));
  });
}

std::vector<Check> check_eigen(const AnalyticMatrixSet& fixtures, double R, double tol) {
  const EigenDecomposition e = eigen3(fixtures.w(R));
  const auto closed = fixtures.w_eigenvalues(R);
  double err = 0.0;
  for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(e.values[i] - closed[i]));
  std::vector<Check> out;
  out.push_back(bound_check("eigen closed forms", err, tol,
                            "lambda = " + fmt(closed[0]) + ", " + fmt(closed[1]) + ", " + fmt(closed[2])));
  Check top;
  top.name = "eigen top exceeds e";
  top.measured = std::abs(e.values[0]);
  top.allowed = std::exp(1.0);
  top.passed = top.measured > top.allowed;
  out.push_back(top);
  Check gap;
  gap.name = "eigen simplicity gap";
  gap.measured = e.gap;
  gap.allowed = 0.1;
  gap.passed = e.gap > 0.1;
  out.push_back(gap);
  out.push_back(bound_check("eigen residual", e.residual, tol));
  return out;
}

Check check_translation(double kappa, int count, std::uint64_t seed, const SolverParams& params, double tol) {
  return timed([&] {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uy(0.0, 1.0);
    std::uniform_int_distribution<int> uk(-1, 1);
    const TimeFlow flow = w_flow(1.0);
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
      const Vec3 y{uy(rng), uy(rng), uy(rng)};
      WaveVector k{}, j{};
      while (k.norm2() == 0) k = {uk(rng), uk(rng), uk(rng)};
      while (j.norm2() == 0) j = {uk(rng), uk(rng), uk(rng)};
      worst = std::max(worst, translation_identity_residual(flow, kappa, k, j, y, params));
    }
    return bound_check("translation identity kappa=" + fmt(kappa), worst, tol,
                       std::to_string(count) + " random tuples, N=" + std::to_string(params.N));
  });
}

Check check_averaging(double kappa, int M, std::uint64_t seed, const SolverParams& params, double tol) {
  return timed([&] {
    std::mt19937_64 rng(seed);
    FourierField others = random_field(params.N, std::min(params.N, 2), rng);
    others.at(kEz) = Vec3c{};
    others.at(-kEz) = Vec3c{};
    const TimeFlow flow = w_flow(1.0);
    const AveragedMatrix avg = averaged_matrix(flow, kappa, kEz, M, params, others);
    const ControlMatrix diag = matrix_element(flow, kappa, flow.start(), flow.end(), kEz, kEz, params);
    Check c = bound_check("averaged matrix kappa=" + fmt(kappa), (avg.matrix.A - diag.A).norm(), tol,
                          "M=" + std::to_string(M) + " N=" + std::to_string(params.N));
    if (avg.aliasing_warning) c.detail += "; warning: " + avg.warning;
    return c;
  });
}

Check check_selection(const SolverParams& params, double tol) {
  return timed([&] {
    SolverParams p = params;
    p.project_solenoidal = false;
    double worst = 0.0;
    int count = 0;
    // V_1: row e_z, columns k with e_x.(k-e_z) != 0 or e_z.(k-e_z) != 0
    const TimeFlow v = v_flow(1.0);
    for (int x = -2; x <= 2; ++x)
      for (int y = -2; y <= 2; ++y)
        for (int z = -2; z <= 2; ++z) {
          const WaveVector k{x, y, z};
          if (k.x == 0 && k.z == 1) continue;
          for (int col = 0; col < 3; ++col) {
            Vec3c e{};
            e[col] = 1.0;
            worst = std::max(worst, norm(propagate(single_mode(p.N, k, e), v, 0.0, 0.0, 1.0, p)[kEz]));
          }
          ++count;
        }
    // U_1: column e_z, rows k with e_y.(k-e_z) != 0
    const TimeFlow u = u_flow(1.0);
    for (int col = 0; col < 3; ++col) {
      Vec3c e{};
      e[col] = 1.0;
      const FourierField out = propagate(single_mode(p.N, kEz, e), u, 0.0, 0.0, 1.0, p);
      for (int x = -2; x <= 2; ++x)
        for (int y = -2; y <= 2; ++y)
          for (int z = -2; z <= 2; ++z) {
            if (y == 0) continue;
            worst = std::max(worst, norm(out[WaveVector{x, y, z}]));
            if (col == 0) ++count;
          }
    }
    return bound_check("selection-rule zeros", worst, tol, std::to_string(count) + " off-target elements");
  });
}

Check check_heat(double kappa, double t, std::uint64_t seed, const SolverParams& params, double tol) {
  std::mt19937_64 rng(seed);
  const FourierField b = random_field(params.N, std::min(params.N, 2), rng);
  const FourierField out = propagate(b, zero_flow(0.0, t), kappa, 0.0, t, params);
  double worst = 0.0;
  const auto in = b.data();
  const auto res = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double n = norm(in[i]);
    if (n == 0.0) continue;
    const WaveVector k = b.wave_vector(i);
    const double decay = std::exp(-4.0 * kPi * kPi * k.norm2() * kappa * t);
    const Vec3c expect = cplx(decay) * in[i];
    worst = std::max(worst, norm(res[i] - expect) / norm(expect));
  }
  return bound_check("heat exactness kappa=" + fmt(kappa), worst, tol, "t=" + fmt(t));
}

std::vector<Check> check_energy_bounds(double kappa, const SolverParams& params) {
  std::vector<Check> out;
  const FourierField b0 = standard_initial_field(params.N);
  for (const auto& flow : {zero_flow(0.0, 2.0), w_flow(1.0)}) {
    SolverParams p = params;
    p.trace_every = 10;
    const SolveResult r = solve(b0, flow, kappa, flow.start(), flow.end(), p);
    const BoundMargins m = energy_growth_check(r.trace);
    const std::string tag = flow.id() + " kappa=" + fmt(kappa);
    if (!m.applicable) {
      Check c;
      c.name = "energy bounds " + tag;
      c.passed = false;
      c.detail = "not applicable: " + m.note;
      out.push_back(c);
      continue;
    }
    out.push_back(margin_check("upper energy bound " + tag, m.upper_margin, "log-space margin"));
    out.push_back(margin_check("lower energy bound " + tag, m.lower_margin, "log-space margin"));
    out.push_back(margin_check("ratio bound " + tag, m.ratio_margin, "log-space margin"));
  }
  return out;
}

Check check_solenoidal(double kappa, const SolverParams& params, double tol) {
  std::mt19937_64 rng(7);
  const FourierField b = random_field(params.N, 1, rng);
  SolverParams p = params;
  p.project_solenoidal = false;
  const FourierField out = propagate(b, w_flow(1.0), kappa, 0.0, 2.0, p);
  return bound_check("solenoidal preservation kappa=" + fmt(kappa), diagnose(out).max_divergence, tol);
}

ConvergenceResult self_convergence(char family, double lambda, const AnalyticMatrixSet& fixtures,
                                   const SolverParams& params) {
  ConvergenceResult r;
  SolverParams fine = params;
  fine.dt = params.dt / 2.0;
  r.error_coarse = matrix_error(family, lambda, fixtures, params);
  r.error_fine = matrix_error(family, lambda, fixtures, fine);
  r.ratio = r.error_fine > 0.0 ? r.error_coarse / r.error_fine : std::numeric_limits<double>::infinity();
  return r;
}

Check check_self_convergence(char family, double lambda, const AnalyticMatrixSet& fixtures,
                             const SolverParams& params, double lo, double hi) {
  return timed([&] {
    const ConvergenceResult r = self_convergence(family, lambda, fixtures, params);
    Check c;
    c.name = std::string("self-convergence ") + family + "(" + fmt(lambda) + ")";
    c.measured = r.ratio;
    c.allowed = hi;
    c.passed = r.ratio >= lo && r.ratio <= hi;
    c.detail = "errors " + fmt(r.error_coarse) + " -> " + fmt(r.error_fine) + ", expected ratio in [" + fmt(lo) +
               ", " + fmt(hi) + "]";
    return c;
  });
}

FourierField standard_initial_field(int N) { return sine_field(N, kEx, {0.0, 0.0, 1.0}); }

}  // namespace dynamo
