// Command-line driver: verify, grow, schedule, scan-kappa0, replay.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "dynamo/config.hpp"
#include "dynamo/controller.hpp"
#include "dynamo/parallel.hpp"
#include "dynamo/verify.hpp"

namespace fs = std::filesystem;
using namespace dynamo;

namespace {

enum Exit { kOk = 0, kCheckFailure = 1, kUsage = 2 };

struct Overrides {
  std::string config_path;
  std::optional<int> N, M, threads;
  std::optional<double> dt, R, horizon, budget;
  std::optional<std::uint64_t> seed;
  std::vector<double> kappas;
  std::string output, certificate;
  bool overwrite = false;
  bool allow_uncertified = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON run configuration");
  app->add_option("--N", o.N, "spectral cutoff |k|_inf <= N");
  app->add_option("--dt", o.dt, "time step");
  app->add_option("--M", o.M, "translation grid per axis (0 = 2N+1)");
  app->add_option("--R", o.R, "control amplitude");
  app->add_option("--horizon", o.horizon, "schedule horizon");
  app->add_option("--budget", o.budget, "time budget per growth segment");
  app->add_option("--seed", o.seed, "seed for randomized checks");
  app->add_option("--output,-o", o.output, "output directory");
  app->add_option("--certificate", o.certificate, "certificate.json from scan-kappa0");
  app->add_flag("--overwrite", o.overwrite, "reuse a non-empty output directory");
  app->add_flag("--allow-uncertified", o.allow_uncertified, "accept diffusivities above kappa0_emp");
  app->add_option("--threads", o.threads, "worker cap (default: DYNAMO_FORGE_THREADS or all cores)");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
  if (o.N) c.N = *o.N;
  if (o.M) c.M = *o.M;
  if (o.dt) c.dt = *o.dt;
  if (o.R) c.R = *o.R;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.budget) c.growth_budget = *o.budget;
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (!o.kappas.empty()) c.kappas = o.kappas;
  if (!o.output.empty()) c.output = o.output;
  if (!o.certificate.empty()) c.certificate = o.certificate;
  if (o.overwrite) c.overwrite = true;
  if (o.allow_uncertified) c.allow_uncertified = true;
  if (!c.certificate.empty()) c.kappa0 = read_certificate(c.certificate);
  c.validate();
  if (c.threads > 0) set_worker_count(c.threads);
  return c;
}

void write_csv(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  write_text(path, os.str());
}

nlohmann::json flow_document(const RunConfig& cfg, const FourierField& b0, const ScheduleState& state) {
  nlohmann::json j = provenance(cfg);
  j["N"] = cfg.N;
  j["dt"] = cfg.dt;
  j["kappas"] = state.kappas;
  j["initial_field"] = to_json(b0);
  j["units"] = units_to_json(state.units);
  j["flow"] = to_json(state.flow());
  return j;
}

nlohmann::json fields_document(const std::vector<double>& kappas, const std::vector<ScaledField>& fields) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < fields.size(); ++i)
    arr.push_back({{"kappa", kappas[i]}, {"exponent", fields[i].exponent}, {"field", to_json(fields[i].field)}});
  return {{"fields", arr}};
}

nlohmann::json crossing_table(const GrowthReport& report) {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& kr : report.per_kappa)
    t.push_back({{"kappa", kr.kappa},
                 {"visit_crossings", kr.visit_end_times.size()},
                 {"visit_end_times", kr.visit_end_times},
                 {"crossing_times", kr.crossing_times}});
  return t;
}

int cmd_verify(const RunConfig& cfg, bool fault_alpha) {
  prepare_output(cfg.output, cfg.overwrite);
  AnalyticMatrixSet fixtures = fixture_matrices();
  if (fault_alpha) fixtures.alpha += 1e-3;
  const SolverParams p = cfg.solver();
  CheckSuite suite;
  suite.name = "verify";
  auto add = [&](Check c) {
    std::cout << to_string(c) << std::endl;
    suite.add(std::move(c));
  };
  add(check_bessel(fixtures));
  for (char family : {'U', 'V', 'W'})
    for (double lambda : {0.5, 1.0, 2.0}) add(check_matrix(family, lambda, fixtures, p, cfg.tol("matrix")));
  for (auto& c : check_eigen(fixtures, cfg.R, cfg.tol("eigen"))) add(std::move(c));

  SolverParams small = p;
  small.N = std::min(cfg.N, 8);
  for (double kappa : {0.0, 1e-3}) add(check_translation(kappa, 20, cfg.seed, small, cfg.tol("translation")));

  SolverParams tiny = p;
  tiny.N = std::min(cfg.N, 2);
  const int M = cfg.M > 0 ? cfg.M : 2 * tiny.N + 1;
  std::vector<std::string> warnings;
  if (cfg.M > 0 && cfg.M < 2 * cfg.N + 1)
    warnings.push_back("translation grid M=" + std::to_string(cfg.M) + " < 2N+1=" + std::to_string(2 * cfg.N + 1) +
                       ": averaged matrices can alias");
  for (double kappa : {0.0, 1e-3}) add(check_averaging(kappa, M, cfg.seed, tiny, cfg.tol("averaging")));
  add(check_selection(p, cfg.tol("selection")));
  for (double kappa : {1e-3, 1e-1}) add(check_heat(kappa, 3.0, cfg.seed, p, cfg.tol("heat")));
  for (auto& c : check_energy_bounds(1e-3, p)) add(std::move(c));
  add(check_solenoidal(1e-3, p, cfg.tol("solenoidal")));
  add(check_self_convergence('U', 1.0, fixtures, p, cfg.tol("convergence_lo"), cfg.tol("convergence_hi")));

  for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
  nlohmann::json j = provenance(cfg);
  j["summary"] = suite.to_json();
  j["warnings"] = warnings;
  j["fault_injection"] = fault_alpha;
  const fs::path out(cfg.output);
  write_text(out / "verify.json", dump(j));
  std::ostringstream junit;
  suite.write_junit(junit);
  write_text(out / "verify_junit.xml", junit.str());
  const auto failed = std::count_if(suite.checks.begin(), suite.checks.end(), [](const Check& c) { return !c.passed; });
  std::cout << (suite.ok() ? "verify: all " + std::to_string(suite.checks.size()) + " checks passed"
                           : "verify: " + std::to_string(failed) + " of " + std::to_string(suite.checks.size()) +
                                 " checks failed")
            << std::endl;
  return suite.ok() ? kOk : kCheckFailure;
}

int cmd_grow(RunConfig cfg, double kappa) {
  cfg.kappas = {kappa};
  cfg.validate();
  prepare_output(cfg.output, cfg.overwrite);
  const FourierField b0 = standard_initial_field(cfg.N);
  const ScheduleResult r = run_growth(b0, kappa, cfg.controller());
  const fs::path out(cfg.output);
  write_csv(out / "grow_rates.csv", [&](std::ostream& os) { r.report.write_csv(os); });
  nlohmann::json j = provenance(cfg);
  j["report"] = r.report.to_json();
  j["threshold_time"] = r.report.t_n.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.report.t_n.front());
  write_text(out / "grow_summary.json", dump(j));
  write_text(out / "flow.json", dump(flow_document(cfg, b0, r.state)));
  write_text(out / "final_fields.json", dump(fields_document(r.state.kappas, r.state.fields)));
  std::cout << "grow kappa=" << kappa << ": " << r.report.status << " at t=" << r.state.t
            << ", rate=" << unit_mode_rate(r.state.fields[0], r.state.t) << std::endl;
  return r.report.status == "threshold reached" ? kOk : kCheckFailure;
}

std::vector<ScaledField> load_fields(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  std::vector<ScaledField> out;
  for (const auto& f : j.at("fields")) out.push_back({field_from_json(f.at("field")), f.at("exponent").get<long>()});
  return out;
}

int compare_fields(const std::vector<ScaledField>& a, const std::vector<ScaledField>& b, const std::vector<double>& kappas,
                   double tol, nlohmann::json& report) {
  if (a.size() != b.size()) throw ConfigError("field count does not match the flow's diffusivity list");
  bool ok = true;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = relative_difference(b[i], a[i]);
    ok = ok && d <= tol;
    rows.push_back({{"kappa", kappas[i]}, {"relative_difference", d}});
    std::cout << "replay kappa=" << kappas[i] << ": relative difference " << d << std::endl;
  }
  report["comparison"] = rows;
  report["tolerance"] = tol;
  report["passed"] = ok;
  return ok ? kOk : kCheckFailure;
}

int cmd_schedule(const RunConfig& cfg, bool replay_check) {
  prepare_output(cfg.output, cfg.overwrite);
  const FourierField b0 = standard_initial_field(cfg.N);
  const ScheduleResult r = run_schedule(b0, cfg.kappas, cfg.horizon, cfg.controller());
  const fs::path out(cfg.output);
  write_csv(out / "schedule_rates.csv", [&](std::ostream& os) { r.report.write_csv(os); });
  nlohmann::json j = provenance(cfg);
  j["report"] = r.report.to_json();
  j["crossings"] = crossing_table(r.report);
  write_text(out / "schedule_summary.json", dump(j));
  write_text(out / "flow.json", dump(flow_document(cfg, b0, r.state)));
  write_text(out / "final_fields.json", dump(fields_document(r.state.kappas, r.state.fields)));
  for (const auto& kr : r.report.per_kappa)
    std::cout << "kappa=" << kr.kappa << ": threshold held at " << kr.visit_end_times.size()
              << " visit ends, certificate violations " << kr.certificate_violations << std::endl;
  std::cout << "schedule: " << r.report.status << " at t=" << r.state.t << std::endl;
  int status = r.report.status == "horizon reached" ? kOk : kCheckFailure;
  if (replay_check) {
    const ReplayResult rep = replay(b0, r.state.kappas, r.state.units, cfg.solver());
    nlohmann::json rj = provenance(cfg);
    if (compare_fields(rep.fields, r.state.fields, r.state.kappas, cfg.tol("replay"), rj) != kOk) status = kCheckFailure;
    write_text(out / "replay.json", dump(rj));
  }
  return status;
}

int cmd_scan(const RunConfig& cfg, std::vector<double> grid) {
  prepare_output(cfg.output, cfg.overwrite);
  if (grid.empty()) grid = {0.0, 1e-3, 2e-3, 5e-3, 1e-2, 1.5e-2, 2e-2, 5e-2, 0.1, 1.0};
  const ScanResult scan = kappa0_scan(grid, cfg.R, cfg.solver());
  const fs::path out(cfg.output);
  write_csv(out / "kappa0_scan.csv", [&](std::ostream& os) { scan.write_csv(os); });
  write_text(out / "certificate.json", dump(certificate_json(scan, cfg)));
  for (const auto& row : scan.rows)
    std::cout << "kappa=" << row.kappa << " |lambda1|=" << row.top1 << "," << row.top2 << " gap=" << row.gap
              << " margin=" << row.margin << (row.pass ? " pass" : " FAIL") << "\n";
  std::cout << "kappa0_emp=" << scan.kappa0 << std::endl;
  return kOk;
}

int cmd_replay(const RunConfig& cfg, const std::string& flow_path, const std::string& fields_path) {
  std::ifstream in(flow_path);
  if (!in) throw ConfigError("cannot read flow file " + flow_path);
  nlohmann::json doc;
  in >> doc;
  SolverParams p = cfg.solver();
  p.N = doc.at("N").get<int>();
  p.dt = doc.at("dt").get<double>();
  const std::vector<double> kappas = doc.at("kappas").get<std::vector<double>>();
  const FourierField b0 = field_from_json(doc.at("initial_field"));
  const std::vector<TimeFlow> units = units_from_json(doc.at("units"));
  prepare_output(cfg.output, cfg.overwrite);
  const ReplayResult rep = replay(b0, kappas, units, p);
  nlohmann::json j;
  j["source_config_hash"] = doc.value("config_hash", "");
  j["kappas"] = kappas;
  nlohmann::json logs = nlohmann::json::array();
  for (const auto& f : rep.fields) logs.push_back(f.log_l2sq());
  j["final_log_l2sq"] = logs;
  int status = kOk;
  if (!fields_path.empty()) status = compare_fields(rep.fields, load_fields(fields_path), kappas, cfg.tol("replay"), j);
  write_text(fs::path(cfg.output) / "replay.json", dump(j));
  write_text(fs::path(cfg.output) / "final_fields.json", dump(fields_document(kappas, rep.fields)));
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinematic dynamo constructions on the 3-torus"};
  app.require_subcommand(1);
  Overrides o;

  auto* verify = app.add_subcommand("verify", "run the verification suite");
  bool fault_alpha = false;
  add_common(verify, o);
  verify->add_flag("--fault-alpha", fault_alpha, "test mode: corrupt the alpha fixture");

  auto* grow = app.add_subcommand("grow", "single-diffusivity growth run from sin(2 pi x) e_z");
  double kappa = 0.0;
  add_common(grow, o);
  grow->add_option("--kappa", kappa, "diffusivity")->required();

  auto* schedule = app.add_subcommand("schedule", "multi-diffusivity schedule");
  bool replay_check = false;
  add_common(schedule, o);
  schedule->add_option("--kappas", o.kappas, "diffusivities");
  schedule->add_flag("--replay-check", replay_check, "re-simulate the exported flow and compare");

  auto* scan = app.add_subcommand("scan-kappa0", "certify the diffusivity range of the controls");
  std::vector<double> grid;
  add_common(scan, o);
  scan->add_option("--grid", grid, "diffusivities to scan");

  auto* rep = app.add_subcommand("replay", "re-simulate an exported flow");
  std::string flow_path, fields_path;
  add_common(rep, o);
  rep->add_option("--flow", flow_path, "flow.json")->required();
  rep->add_option("--fields", fields_path, "final_fields.json to compare against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  RunConfig cfg;
  try {
    if (*grow) {
      // grow validates against its own single diffusivity
      Overrides go = o;
      go.kappas = {kappa};
      cfg = resolve(go);
    } else {
      cfg = resolve(o);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*verify) return cmd_verify(cfg, fault_alpha);
    if (*grow) return cmd_grow(cfg, kappa);
    if (*schedule) return cmd_schedule(cfg, replay_check);
    if (*scan) return cmd_scan(cfg, grid);
    if (*rep) return cmd_replay(cfg, flow_path, fields_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailure;
  }
  return kUsage;
}
