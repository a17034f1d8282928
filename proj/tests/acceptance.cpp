// Acceptance suite. Usage: acceptance [criterion ...]; no arguments runs all of them.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "dynamo/config.hpp"
#include "dynamo/controller.hpp"
#include "dynamo/verify.hpp"

using namespace dynamo;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string summary;
};

void line(int id, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.summary << std::endl;
}

std::string sci(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

SolverParams fine_params() {
  SolverParams p;
  p.N = 32;
  p.dt = 2.5e-4;
  return p;
}

Outcome criterion1() {
  const AnalyticMatrixSet fixtures = fixture_matrices();
  const SolverParams p = fine_params();
  const RunConfig cfg;
  Outcome o{true, ""};
  std::ostringstream os;
  for (double lambda : {0.5, 1.0, 2.0}) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (char family : {'U', 'V', 'W'}) worst = std::max(worst, matrix_error(family, lambda, fixtures, p));
    const double secs = since(t0);
    const bool ok = worst < cfg.tol("matrix") && secs < 60.0;
    o.pass = o.pass && ok;
    os << "lambda=" << lambda << " max Frobenius error " << sci(worst) << " in " << sci(secs) << " s; ";
  }
  o.summary = os.str() + "limits 1e-05 and 60 s per lambda (N=32, dt=2.5e-4)";
  return o;
}

Outcome criterion2() {
  const RunConfig cfg;
  const auto checks = check_eigen(fixture_matrices(), 1.0, cfg.tol("eigen"));
  Outcome o{true, ""};
  std::ostringstream os;
  for (const auto& c : checks) {
    o.pass = o.pass && c.passed;
    os << c.name << " " << sci(c.measured) << "; ";
  }
  o.summary = os.str();
  return o;
}

Outcome criterion3() {
  const RunConfig cfg;
  Outcome o{true, ""};
  std::ostringstream os;
  for (double kappa : {0.0, 1e-3}) {
    const Check c = check_translation(kappa, 20, cfg.seed, cfg.solver(), cfg.tol("translation"));
    o.pass = o.pass && c.passed;
    os << "kappa=" << kappa << " max residual " << sci(c.measured) << "; ";
  }
  o.summary = os.str() + "limit 1e-10 over 20 random (y,k,j), N=16";
  return o;
}

Outcome criterion4() {
  const RunConfig cfg;
  SolverParams p = cfg.solver();
  p.N = 3;
  Outcome o{true, ""};
  std::ostringstream os;
  for (double kappa : {0.0, 1e-3}) {
    const Check c = check_averaging(kappa, 2 * p.N + 1, cfg.seed, p, cfg.tol("averaging"));
    o.pass = o.pass && c.passed;
    os << "kappa=" << kappa << " |averaged - diagonal| " << sci(c.measured) << "; ";
  }
  o.summary = os.str() + "limit 1e-10, N=3, M=7, random extra probe mass";
  return o;
}

Outcome criterion5() {
  const RunConfig cfg;
  const Check c = check_selection(cfg.solver(), cfg.tol("selection"));
  return {c.passed, "max off-target element " + sci(c.measured) + " over " + c.detail + ", limit 1e-10"};
}

Outcome criterion6() {
  const RunConfig cfg;
  Outcome o{true, ""};
  std::ostringstream os;
  for (double kappa : {1e-3, 1e-1}) {
    const Check c = check_heat(kappa, 3.0, cfg.seed, cfg.solver(), cfg.tol("heat"));
    o.pass = o.pass && c.passed;
    os << "kappa=" << kappa << " max relative error " << sci(c.measured) << "; ";
  }
  o.summary = os.str() + "limit 1e-12 at t=3";
  return o;
}

Outcome criterion7() {
  const RunConfig cfg;
  Outcome o{true, ""};
  std::ostringstream os;
  for (double kappa : {0.0, 1e-3}) {
    const auto t0 = Clock::now();
    const ScheduleResult r = run_growth(standard_initial_field(cfg.N), kappa, cfg.controller());
    const double secs = since(t0);
    const bool reached = r.report.status == "threshold reached" && r.state.t <= 60.0;
    const double rate = unit_mode_rate(r.state.fields[0], r.state.t);
    const double margin = r.report.min_block_factor_margin;
    const bool ok = reached && rate >= 0.25 && margin >= -cfg.tol("block_factor") && secs < 300.0;
    o.pass = o.pass && ok;
    os << "kappa=" << kappa << " rate " << sci(rate) << " at t=" << r.state.t << ", min(block factor - |lambda1|) "
       << sci(margin) << ", " << sci(secs) << " s; ";
  }
  o.summary = os.str() + "needs rate >= 0.25 within t <= 60, margin >= -1e-6, < 300 s";
  return o;
}

struct ScheduleRun {
  ScheduleResult result;
  double seconds = 0.0;
};

ScheduleRun run_criterion8_schedule() {
  const RunConfig cfg;
  const auto t0 = Clock::now();
  ScheduleRun run{run_schedule(standard_initial_field(cfg.N), cfg.kappas, cfg.horizon, cfg.controller()), 0.0};
  run.seconds = since(t0);
  return run;
}

Outcome criterion8(const ScheduleRun& run) {
  Outcome o{run.seconds < 900.0, ""};
  std::ostringstream os;
  for (const auto& kr : run.result.report.per_kappa) {
    std::set<double> times(kr.visit_end_times.begin(), kr.visit_end_times.end());
    o.pass = o.pass && times.size() >= 2 && times.size() == kr.visit_end_times.size();
    os << "kappa=" << kr.kappa << " threshold at " << times.size() << " visit ends";
    if (!times.empty()) os << " (first t=" << *times.begin() << ")";
    os << "; ";
  }
  o.summary = os.str() + "status '" + run.result.report.status + "', horizon 300, " + sci(run.seconds) +
              " s (limit 900 s)";
  return o;
}

Outcome criterion9(const ScheduleRun& run) {
  Outcome o{true, ""};
  std::ostringstream os;
  for (std::size_t i = 0; i < run.result.state.certificates.size(); ++i) {
    double lower = INFINITY, ratio = INFINITY;
    int segments = 0, inapplicable = 0;
    for (const auto& c : run.result.state.certificates[i]) {
      ++segments;
      if (!c.applicable()) {
        ++inapplicable;
        continue;
      }
      lower = std::min(lower, c.margins.lower_margin);
      ratio = std::min(ratio, c.margins.ratio_margin);
    }
    o.pass = o.pass && inapplicable == 0 && lower >= -kMarginRoundoff && ratio >= -kMarginRoundoff;
    os << "kappa=" << run.result.state.kappas[i] << " " << segments << " segments, min lower margin " << sci(lower)
       << ", min ratio margin " << sci(ratio) << "; ";
  }
  o.summary = os.str() + "log-space margins must be >= 0 (|margin| <= 1e-12 is the equality case)";
  return o;
}

Outcome criterion10() {
  const AnalyticMatrixSet fixtures = fixture_matrices();
  const RunConfig cfg;
  const double lo = cfg.tol("convergence_lo"), hi = cfg.tol("convergence_hi");
  Outcome o{true, ""};
  std::ostringstream os;
  for (char family : {'U', 'V', 'W'}) {
    const ConvergenceResult r = self_convergence(family, 1.0, fixtures, fine_params());
    o.pass = o.pass && r.ratio >= lo && r.ratio <= hi;
    os << family << "(1): " << sci(r.error_coarse) << " -> " << sci(r.error_fine) << ", ratio " << sci(r.ratio)
       << "; ";
  }
  o.summary = os.str() + "expected ratio in [3.5, 4.5], dt 2.5e-4 -> 1.25e-4";
  return o;
}

Outcome criterion11(const ScheduleRun& run) {
  const RunConfig cfg;
  const auto& state = run.result.state;
  // re-simulate from the exported flow, not the in-memory units
  const std::string exported = units_to_json(state.units).dump();
  const std::vector<TimeFlow> units = units_from_json(nlohmann::json::parse(exported));
  const ReplayResult rep = replay(standard_initial_field(cfg.N), state.kappas, units, cfg.solver());
  double worst = 0.0;
  for (std::size_t i = 0; i < rep.fields.size(); ++i)
    worst = std::max(worst, relative_difference(state.fields[i], rep.fields[i]));

  // identical config twice: byte-identical CSV and JSON
  RunConfig small;
  small.horizon = 30.0;
  auto render = [&] {
    const ScheduleResult r = run_schedule(standard_initial_field(small.N), small.kappas, small.horizon,
                                          small.controller());
    std::ostringstream csv;
    r.report.write_csv(csv);
    nlohmann::json j = provenance(small);
    j["report"] = r.report.to_json();
    return dump(j) + csv.str() + units_to_json(r.state.units).dump();
  };
  const std::string first = render();
  const std::string second = render();
  const bool identical = first == second;

  Outcome o{worst < cfg.tol("replay") && identical, ""};
  o.summary = "replay of exported flow: max relative difference " + sci(worst) + " (limit 1e-08); repeated " +
              "horizon-30 schedule reports " + (identical ? "byte-identical" : "DIFFER") + " (" +
              std::to_string(first.size()) + " bytes)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
  if (wanted.empty())
    for (int i = 1; i <= 11; ++i) wanted.insert(i);

  const std::map<int, std::function<Outcome()>> standalone{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {10, criterion10}};
  bool ok = true;
  std::optional<ScheduleRun> schedule;
  for (int id : wanted) {
    Outcome o;
    try {
      if (auto it = standalone.find(id); it != standalone.end()) {
        o = it->second();
      } else if (id == 8 || id == 9 || id == 11) {
        if (!schedule) schedule = run_criterion8_schedule();
        o = id == 8 ? criterion8(*schedule) : id == 9 ? criterion9(*schedule) : criterion11(*schedule);
      } else {
        std::cerr << "unknown criterion " << id << "\n";
        return 2;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    line(id, o);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
