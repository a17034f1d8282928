#include "dynamo/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "dynamo/parallel.hpp"

namespace dynamo {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

std::string describe(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void check_kappa(double kappa, const ControllerParams& params) {
  if (kappa < 0.0) throw std::invalid_argument("diffusivity must be nonnegative");
  if (kappa > params.kappa0 && !params.allow_uncertified)
    throw std::invalid_argument("diffusivity " + describe(kappa) + " is outside the certified range [0, " +
                                describe(params.kappa0) + "]");
}

int wrap(int d, int M) {
  const int N = (M - 1) / 2;
  if (d > N) d -= M;
  if (d < -N) d += M;
  return d;
}

// g(y) = sum_j w_j exp(2 pi i (j - e_z) . y) on the grid y = (a, b, c) / M, index (a M + b) M + c.
std::vector<cplx> translation_scan(const std::vector<std::pair<WaveVector, cplx>>& weights, int N, int M) {
  const std::size_t total = static_cast<std::size_t>(M) * M * M;
  std::vector<cplx> g(total);
  if (M == 2 * N + 1) {
    FourierField w(N);
    for (const auto& [j, wj] : weights) {
      const WaveVector d = j - kEz;
      const WaveVector dw{wrap(d.x, M), wrap(d.y, M), wrap(d.z, M)};
      Vec3c v = w[dw];
      v[0] += wj;
      w.at(dw) = v;
    }
    const PhysicalGrid grid = to_physical(w, M);
    for (std::size_t i = 0; i < total; ++i) g[i] = grid.values[i][0];
    return g;
  }
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t a) {
    for (int b = 0; b < M; ++b)
      for (int c = 0; c < M; ++c) {
        cplx acc = 0.0;
        for (const auto& [j, wj] : weights) {
          const WaveVector d = j - kEz;
          const double phase = kTwoPi * (d.x * double(a) + d.y * double(b) + d.z * double(c)) / M;
          acc += wj * std::polar(1.0, phase);
        }
        g[(a * M + b) * static_cast<std::size_t>(M) + c] = acc;
      }
  });
  return g;
}

WaveVector strongest_unit_mode(const FourierField& f, double* magnitude) {
  WaveVector best{};
  double m = -1.0;
  for (const auto& k : unit_modes()) {
    const double n = norm(f[k]);
    if (n > m) {
      m = n;
      best = k;
    }
  }
  if (magnitude) *magnitude = m;
  return best;
}

}  // namespace

void ScaledField::normalize() {
  const double l2 = l2_norm(field);
  if (!(l2 > 0.0) || !std::isfinite(l2)) return;
  const int e = std::ilogb(l2);
  if (std::abs(e) <= 32) return;
  const double s = std::ldexp(1.0, -e);
  for (auto& v : field.data()) v = cplx(s) * v;
  exponent += e;
}

double ScaledField::log_l2sq() const { return std::log(l2_norm_squared(field)) + 2.0 * exponent * kLn2; }

double ScaledField::log_coeff_sq(WaveVector k) const {
  const double n2 = norm2(field[k]);
  if (n2 == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(n2) + 2.0 * exponent * kLn2;
}

double unit_mode_rate(const ScaledField& b, double t) {
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& k : unit_modes()) best = std::max(best, b.log_coeff_sq(k) / t);
  return best;
}

const ControlData& ControlCache::get(double kappa, int sign) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = cache_[{kappa, sign}];
  if (slot) return *slot;
  const int N = params_.solver.N;
  const TimeFlow u = w_flow(sign * params_.R);
  auto data = std::make_unique<ControlData>();
  data->matrix = matrix_element(u, kappa, 0.0, 2.0, kEz, kEz, params_.solver);
  data->eig = eigen3(data->matrix.A);
  if (data->eig.reliable) {
    const Vector3c r = data->eig.left.row(0).transpose();
    const FourierField final_row = single_mode(N, kEz, conj(from_eigen(r)));
    SolverParams p = params_.solver;
    p.project_solenoidal = false;
    data->adjoint_rows = adjoint_propagate(final_row, u, kappa, 0.0, 2.0, p);
  }
  slot = std::move(data);
  return *slot;
}

double GrowthSegmentPlan::min_factor() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) m = std::min(m, b.factor);
  return m;
}

UniqueContinuationCertificate unique_continuation_certificate(const SolverTrace& trace) {
  UniqueContinuationCertificate c;
  c.kappa = trace.kappa;
  c.margins = energy_growth_check(trace);
  if (!trace.samples.empty()) {
    c.t_begin = trace.samples.front().t;
    c.t_end = trace.samples.back().t;
    if (trace.samples.front().l2sq > 0.0) c.rho0 = trace.samples.front().h1sq / trace.samples.front().l2sq;
  }
  return c;
}

TimeFlow ScheduleState::flow() const {
  if (units.empty()) return zero_flow(0.0, 0.0);
  TimeFlow f = merge(units);
  f.set_id("schedule");
  return f;
}

void ScheduleState::advance(const TimeFlow& unit, const ControllerParams& params, const std::string& kind, int visit,
                            int kappa_index) {
  SolverParams p = params.solver;
  p.trace_every = params.trace_every;
  if (certificates.size() != fields.size()) certificates.resize(fields.size());
  std::vector<UniqueContinuationCertificate> certs(fields.size());
  parallel_for(fields.size(), [&](std::size_t i) {
    SolveResult r = solve(fields[i].field, unit, kappas[i], unit.start(), unit.end(), p);
    if (certify) certs[i] = unique_continuation_certificate(r.trace);
    fields[i].field = std::move(r.field);
    fields[i].normalize();
  });
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!(l2_norm(fields[i].field) > params.field_tol))
      throw std::runtime_error("field for kappa=" + describe(kappas[i]) + " vanished at t=" + describe(unit.end()));
    if (certify) certificates[i].push_back(certs[i]);
  }
  units.push_back(unit);
  events.push_back({kind, unit.start(), unit.end(), visit, kappa_index});
  t = unit.end();
  if (on_advance) on_advance(*this);
}

double RateSample::max_rate() const { return *std::max_element(rates.begin(), rates.end()); }

int visit_index(int n, int count) {
  if (n < 1 || count < 1) throw std::invalid_argument("visit_index: n and count must be positive");
  // blocks 1; 1 2; 1 2 3; ... of growing length, capped at `count`
  int len = 1;
  while (true) {
    const int l = std::min(len, count);
    if (n <= l) return n - 1;
    n -= l;
    ++len;
  }
}

GrowthSegmentPlan growth_segment(ScheduleState& state, int index, ControlCache& controls,
                                 const std::function<bool(const ScheduleState&)>& done, double budget, int visit) {
  const ControllerParams& params = controls.params();
  const double kappa = state.kappas.at(index);
  check_kappa(kappa, params);
  const int N = params.solver.N;
  const int M = params.grid();

  GrowthSegmentPlan plan;
  plan.kappa = kappa;
  const FourierField& b = state.fields[index].field;
  const double l2 = l2_norm(b);
  if (!(l2 > params.field_tol)) throw std::runtime_error("growth_segment: field vanished");
  double mag = 0.0;
  plan.target = strongest_unit_mode(b, &mag);
  if (!(mag > params.coeff_tol * l2))
    throw std::runtime_error("growth_segment: no unit-mode coefficient above coeff_tol (largest " + describe(mag / l2) +
                             " relative)");
  plan.rotation = rotation_to_ez(plan.target);
  const SignedPermutation back = plan.rotation.transpose();

  const ControlData& d1 = controls.get(kappa, +1);
  const ControlData& d2 = controls.get(kappa, -1);
  const Vec3c v = plan.rotation.apply(b[plan.target]);
  const ControlChoice choice = control_select(v, kappa, d1.matrix, d2.matrix);
  plan.choice = choice.choice;
  const ControlData& data = choice.choice == 1 ? d1 : d2;
  const TimeFlow control = w_flow(choice.choice == 1 ? params.R : -params.R);
  plan.lambda1 = data.eig.values[0];
  const Vector3c r = data.eig.left.row(0).transpose();
  auto project = [&](const Vec3c& x) { return (r.transpose() * to_eigen(x))(0); };

  const double t_start = state.t;
  while (!done(state)) {
    if (state.t + 2.0 > t_start + budget + 1e-9) break;
    const ScaledField before = state.fields[index];
    const FourierField bp = rotate(before.field, plan.rotation);
    const cplx proj = project(bp[kEz]);

    std::vector<std::pair<WaveVector, cplx>> weights;
    const auto rows = data.adjoint_rows.data();
    const auto vals = bp.data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const cplx wj = vdot(rows[i], vals[i]);
      if (wj != 0.0) weights.emplace_back(bp.wave_vector(i), wj);
    }
    const std::vector<cplx> g = translation_scan(weights, N, M);
    std::size_t best = 0;
    cplx mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      mean += g[i];
      if (std::abs(g[i]) > std::abs(g[best])) best = i;
    }
    mean /= static_cast<double>(g.size());

    BlockRecord rec;
    const int a = static_cast<int>(best / (static_cast<std::size_t>(M) * M));
    const int bb = static_cast<int>((best / M) % M);
    const int c = static_cast<int>(best % M);
    rec.translation = {double(a) / M, double(bb) / M, double(c) / M};
    rec.t_begin = state.t;
    const double base = std::abs(proj);
    rec.predicted = std::abs(g[best]) / base;
    rec.grid_mean = std::abs(mean) / base;
    rec.mean_residual = std::abs(mean - plan.lambda1 * proj) / base;

    TimeFlow unit = rotate(translate(control, rec.translation), back).shifted(state.t);
    unit.set_id("growth");
    state.advance(unit, params, "growth-block", visit, index);

    const ScaledField& after = state.fields[index];
    const cplx proj_after = project(rotate(after.field, plan.rotation)[kEz]);
    rec.realized = std::abs(proj_after) / base * std::ldexp(1.0, static_cast<int>(after.exponent - before.exponent));
    rec.factor = rec.realized;
    plan.blocks.push_back(rec);
  }
  plan.threshold_reached = done(state);
  plan.status = plan.threshold_reached ? "threshold reached" : "budget exhausted";
  return plan;
}

bool transitive_segment(ScheduleState& state, int index, const ControllerParams& params, int visit) {
  const FourierField& b = state.fields[index].field;
  const double l2 = l2_norm(b);
  if (!(l2 > params.field_tol)) throw std::runtime_error("transitive_segment: field vanished");
  double mag = 0.0;
  strongest_unit_mode(b, &mag);
  if (mag > params.coeff_tol * l2) return false;

  // largest coefficient away from the unit modes
  std::size_t jbest = 0;
  double jmag = -1.0;
  const auto vals = b.data();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double n = norm(vals[i]);
    if (n > jmag) {
      jmag = n;
      jbest = i;
    }
  }
  const WaveVector j = b.wave_vector(jbest);
  const Vec3c w = vals[jbest];
  int axis = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(w[i]) > std::abs(w[axis])) axis = i;
  WaveVector target{};
  (axis == 0 ? target.x : axis == 1 ? target.y : target.z) = 1;
  if (j == target) target = -target;
  const SignedPermutation P = rotation_to_ez(target);
  const SignedPermutation back = P.transpose();
  const WaveVector jr = P.apply(j);
  const Vec3c wr = P.apply(w);

  const int M = params.grid();
  const std::size_t grid = static_cast<std::size_t>(M) * M * M;
  const std::size_t max_attempts = std::min<std::size_t>(grid, 64);
  double best_seen = 0.0;
  for (int h = 0; h <= params.eps_halvings; ++h) {
    const double eps = std::ldexp(params.eps0, -h);
    for (std::size_t g = 0; g < max_attempts; ++g) {
      const Vec3 y{double(g / (static_cast<std::size_t>(M) * M)) / M, double((g / M) % M) / M, double(g % M) / M};
      const TransitiveFlow tf = transitive_flow(jr, wr, eps, y);
      TimeFlow unit = rotate(tf.flow, back).shifted(state.t);
      unit.set_id("transitive");
      FourierField out;
      try {
        out = propagate(b, unit, state.kappas[index], unit.start(), unit.end(), params.solver);
      } catch (const SolverError&) {
        break;  // too strong for the time step: try a smaller amplitude
      }
      const double c = norm(out[target]);
      const double lo = l2_norm(out);
      best_seen = std::max(best_seen, c / lo);
      if (c > params.coeff_tol * lo) {
        state.advance(unit, params, "transitive", visit, index);
        return true;
      }
    }
  }
  throw std::runtime_error("transitive_segment: scan exhausted, largest relative unit-mode coefficient " +
                           describe(best_seen));
}

void idle_segment(ScheduleState& state, const ControllerParams& params, double duration, int visit) {
  TimeFlow unit = zero_flow(state.t, state.t + duration);
  unit.set_id("idle");
  state.advance(unit, params, "idle", visit, -1);
}

namespace {

ScheduleState initial_state(const FourierField& b0, const std::vector<double>& kappas, const ControllerParams& params) {
  if (kappas.empty()) throw std::invalid_argument("at least one diffusivity is required");
  if (b0.resolution() != params.solver.N) throw std::invalid_argument("initial field resolution does not match N");
  if (!(l2_norm(b0) > params.field_tol)) throw std::invalid_argument("initial field is zero");
  const FieldDiagnostics diag = diagnose(b0);
  if (!diag.ok()) throw std::invalid_argument("initial field fails its invariants: " + diag.violations.front());
  for (double k : kappas) check_kappa(k, params);
  ScheduleState s;
  s.kappas = kappas;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    ScaledField f{b0, 0};
    f.normalize();
    s.fields.push_back(std::move(f));
  }
  s.certificates.resize(kappas.size());
  return s;
}

void attach_sampler(ScheduleState& state, GrowthReport& report) {
  report.per_kappa.resize(state.kappas.size());
  for (std::size_t i = 0; i < state.kappas.size(); ++i) report.per_kappa[i].kappa = state.kappas[i];
  const double threshold = report.threshold;
  state.on_advance = [&report, threshold](const ScheduleState& s) {
    for (std::size_t i = 0; i < s.fields.size(); ++i) {
      RateSample r;
      r.t = s.t;
      const auto modes = unit_modes();
      for (int m = 0; m < 6; ++m) r.rates[m] = s.fields[i].log_coeff_sq(modes[m]) / s.t;
      r.log_l2sq = s.fields[i].log_l2sq();
      auto& kr = report.per_kappa[i];
      kr.min_l2_log = std::min(kr.min_l2_log, r.log_l2sq);
      if (r.max_rate() >= threshold && (kr.crossing_times.empty() || kr.crossing_times.back() != s.t))
        kr.crossing_times.push_back(s.t);
      kr.samples.push_back(r);
    }
  };
}

void finish_report(const ScheduleState& state, GrowthReport& report) {
  report.events = state.events;
  for (std::size_t i = 0; i < state.fields.size(); ++i) {
    auto& kr = report.per_kappa[i];
    kr.final_rate = unit_mode_rate(state.fields[i], state.t);
    for (const auto& s : kr.samples) kr.best_rate = std::max(kr.best_rate, s.max_rate());
    for (const auto& c : state.certificates[i]) {
      if (!c.applicable()) continue;
      ++kr.certificates;
      kr.min_lower_margin = std::min(kr.min_lower_margin, c.margins.lower_margin);
      kr.min_upper_margin = std::min(kr.min_upper_margin, c.margins.upper_margin);
      kr.min_ratio_margin = std::min(kr.min_ratio_margin, c.margins.ratio_margin);
      if (c.violated()) ++kr.certificate_violations;
    }
  }
  for (const auto& p : report.plans)
    for (const auto& b : p.blocks)
      report.min_block_factor_margin = std::min(report.min_block_factor_margin, b.factor - std::abs(p.lambda1));
}

}  // namespace

ScheduleResult run_growth(const FourierField& b0, double kappa, const ControllerParams& params) {
  ScheduleResult out;
  out.state = initial_state(b0, {kappa}, params);
  out.report.threshold = params.threshold;
  out.report.horizon = params.growth_budget;
  attach_sampler(out.state, out.report);
  ControlCache controls(params);
  auto done = [&](const ScheduleState& s) { return unit_mode_rate(s.fields[0], s.t) >= params.threshold; };
  transitive_segment(out.state, 0, params, 1);
  const double budget = params.growth_budget - out.state.t;
  GrowthSegmentPlan plan = growth_segment(out.state, 0, controls, done, budget, 1);
  out.report.status = plan.status;
  if (plan.threshold_reached) {
    out.report.t_n.push_back(out.state.t);
    out.report.per_kappa[0].visit_end_times.push_back(out.state.t);
  }
  out.report.plans.push_back(std::move(plan));
  out.state.on_advance = nullptr;
  finish_report(out.state, out.report);
  return out;
}

ScheduleResult run_schedule(const FourierField& b0, const std::vector<double>& kappas, double horizon,
                            const ControllerParams& params) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  ScheduleResult out;
  out.state = initial_state(b0, kappas, params);
  out.report.threshold = params.threshold;
  out.report.horizon = horizon;
  attach_sampler(out.state, out.report);
  ControlCache controls(params);
  const int count = static_cast<int>(kappas.size());
  ScheduleState& state = out.state;
  out.report.status = "horizon reached";
  for (int n = 1; state.t < horizon; ++n) {
    const int idx = visit_index(n, count);
    const double t_prev = state.t;
    auto done = [&](const ScheduleState& s) { return unit_mode_rate(s.fields[idx], s.t) >= params.threshold; };
    if (state.t + 1.0 > horizon) {
      if (out.report.t_n.empty()) out.report.status = "budget exhausted: horizon too short for a complete visit";
      break;
    }
    idle_segment(state, params, 1.0, n);
    if (state.t + 1.0 <= horizon) transitive_segment(state, idx, params, n);
    const double budget = std::min(params.growth_budget, horizon - state.t);
    GrowthSegmentPlan plan = growth_segment(state, idx, controls, done, budget, n);
    const bool reached = plan.threshold_reached;
    const bool horizon_cut = !reached && budget < params.growth_budget;
    out.report.plans.push_back(std::move(plan));
    if (!reached) {
      if (!horizon_cut)
        out.report.status = "budget exhausted at visit " + std::to_string(n);
      else if (out.report.t_n.empty())
        out.report.status = "budget exhausted: horizon too short for a complete visit";
      break;
    }
    out.report.t_n.push_back(state.t);
    // the visit's window [t_{n-1}, t_n] contains a crossing for its diffusivity
    auto& kr = out.report.per_kappa[idx];
    const bool crossed = std::any_of(kr.crossing_times.begin(), kr.crossing_times.end(),
                                     [&](double t) { return t > t_prev && t <= state.t; });
    if (crossed) kr.visit_end_times.push_back(state.t);
  }
  state.on_advance = nullptr;
  finish_report(state, out.report);
  return out;
}

double relative_difference(const ScaledField& a, const ScaledField& b) {
  const double s = std::ldexp(1.0, static_cast<int>(b.exponent - a.exponent));
  double diff = 0.0;
  const auto da = a.field.data();
  const auto db = b.field.data();
  if (da.size() != db.size()) return std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < da.size(); ++i) diff += norm2(da[i] - cplx(s) * db[i]);
  const double ref = l2_norm(a.field);
  return ref > 0.0 ? std::sqrt(diff) / ref : std::sqrt(diff);
}

ReplayResult replay(const FourierField& b0, const std::vector<double>& kappas, const std::vector<TimeFlow>& units,
                    const SolverParams& solver) {
  ReplayResult out;
  out.fields.resize(kappas.size());
  parallel_for(kappas.size(), [&](std::size_t i) {
    ScaledField f{b0, 0};
    f.normalize();
    for (const auto& u : units) {
      f.field = propagate(f.field, u, kappas[i], u.start(), u.end(), solver);
      f.normalize();
    }
    out.fields[i] = std::move(f);
  });
  return out;
}

nlohmann::json units_to_json(const std::vector<TimeFlow>& units) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& u : units) arr.push_back(to_json(u));
  return arr;
}

std::vector<TimeFlow> units_from_json(const nlohmann::json& j) {
  std::vector<TimeFlow> out;
  for (const auto& u : j) out.push_back(flow_from_json(u));
  return out;
}

void GrowthReport::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "kappa,t,rate_px,rate_mx,rate_py,rate_my,rate_pz,rate_mz,max_rate,log_l2sq\n";
  for (const auto& kr : per_kappa)
    for (const auto& s : kr.samples) {
      os << kr.kappa << ',' << s.t;
      for (double r : s.rates) os << ',' << r;
      os << ',' << s.max_rate() << ',' << s.log_l2sq << '\n';
    }
  os.precision(old);
}

nlohmann::json GrowthReport::to_json() const {
  auto finite = [](double x) -> nlohmann::json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  nlohmann::json kj = nlohmann::json::array();
  for (const auto& kr : per_kappa) {
    kj.push_back({{"kappa", kr.kappa},
                  {"crossing_times", kr.crossing_times},
                  {"visit_end_times", kr.visit_end_times},
                  {"final_rate", finite(kr.final_rate)},
                  {"best_rate", finite(kr.best_rate)},
                  {"unique_continuation",
                   {{"certificates", kr.certificates},
                    {"violations", kr.certificate_violations},
                    {"min_lower_margin", finite(kr.min_lower_margin)},
                    {"min_upper_margin", finite(kr.min_upper_margin)},
                    {"min_ratio_margin", finite(kr.min_ratio_margin)},
                    {"constant", kRatioConstant}}},
                  {"min_log_l2sq", finite(kr.min_l2_log)}});
  }
  nlohmann::json pj = nlohmann::json::array();
  for (const auto& p : plans) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : p.blocks)
      blocks.push_back({{"t", b.t_begin},
                        {"y", b.translation},
                        {"predicted", b.predicted},
                        {"grid_mean", b.grid_mean},
                        {"realized", b.realized},
                        {"mean_residual", b.mean_residual}});
    pj.push_back({{"kappa", p.kappa},
                  {"target", {p.target.x, p.target.y, p.target.z}},
                  {"control", p.choice == 1 ? "W_R" : "W_-R"},
                  {"lambda1", {p.lambda1.real(), p.lambda1.imag()}},
                  {"status", p.status},
                  {"blocks", blocks}});
  }
  nlohmann::json ej = nlohmann::json::array();
  for (const auto& e : events)
    ej.push_back({{"kind", e.kind}, {"t0", e.t_begin}, {"t1", e.t_end}, {"visit", e.visit}, {"field", e.kappa_index}});
  return {{"status", status},
          {"threshold", threshold},
          {"horizon", horizon},
          {"t_n", t_n},
          {"min_block_factor_margin", finite(min_block_factor_margin)},
          {"per_kappa", kj},
          {"growth_segments", pj},
          {"events", ej}};
}

}  // namespace dynamo
