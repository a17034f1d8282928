#include "dynamo/config.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dynamo {

std::map<std::string, double> default_tolerances() {
  return {
      {"matrix", 1e-5},       // Frobenius error against the closed forms
      {"eigen", 1e-10},       // eigenvalues against closed forms
      {"translation", 1e-10},
      {"averaging", 1e-10},
      {"selection", 1e-10},
      {"heat", 1e-12},        // relative, per mode
      {"solenoidal", 1e-8},
      {"replay", 1e-8},
      {"block_factor", 1e-6},
      {"coeff", 1e-12},       // relative size of a coefficient counted as nonzero
      {"convergence_lo", 3.5},
      {"convergence_hi", 4.5},
  };
}

double RunConfig::tol(const std::string& key) const {
  auto it = tolerances.find(key);
  if (it == tolerances.end()) throw ConfigError("unknown tolerance '" + key + "'");
  return it->second;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (N < 2 || N > 64) fail("N must lie in [2, 64]");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
  if (M < 0 || (M > 0 && M < 3)) fail("M must be 0 (auto) or at least 3");
  if (!(R > 0.0) || !std::isfinite(R)) fail("R must be positive");
  if (kappas.empty()) fail("kappas must list at least one diffusivity");
  if (!(horizon > 0.0)) fail("horizon must be positive");
  if (!(growth_budget >= 2.0)) fail("growth_budget must allow one block (>= 2)");
  if (threads < 0) fail("threads must be >= 0");
  const auto defaults = default_tolerances();
  for (const auto& [key, value] : tolerances) {
    if (!defaults.count(key)) fail("unknown tolerance '" + key + "'");
    if (!(value > 0.0) || !std::isfinite(value)) fail("tolerance '" + key + "' must be positive");
  }
  for (const auto& [key, value] : defaults)
    if (!tolerances.count(key)) fail("missing tolerance '" + key + "'");
  if (!(kappa0 >= 0.0)) fail("kappa0 must be nonnegative");
  for (double k : kappas) {
    if (!(k >= 0.0) || !std::isfinite(k)) fail("diffusivities must be finite and nonnegative");
    if (k > kappa0 && !allow_uncertified) {
      std::ostringstream os;
      os << "kappa=" << k << " exceeds the certified kappa0_emp=" << kappa0
         << " (run scan-kappa0 or pass --allow-uncertified)";
      fail(os.str());
    }
  }
}

SolverParams RunConfig::solver() const {
  SolverParams p;
  p.N = N;
  p.dt = dt;
  return p;
}

ControllerParams RunConfig::controller() const {
  ControllerParams p;
  p.solver = solver();
  p.R = R;
  p.M = M;
  p.coeff_tol = tol("coeff");
  p.factor_tol = tol("block_factor");
  p.growth_budget = growth_budget;
  p.kappa0 = kappa0;
  p.allow_uncertified = allow_uncertified;
  return p;
}

nlohmann::json RunConfig::to_json() const {
  return {{"N", N},
          {"dt", dt},
          {"M", M},
          {"R", R},
          {"kappas", kappas},
          {"horizon", horizon},
          {"growth_budget", growth_budget},
          {"seed", seed},
          {"tolerances", tolerances},
          {"kappa0", kappa0},
          {"allow_uncertified", allow_uncertified}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"N",       "dt",          "M",          "R",        "kappas",
                                           "horizon", "growth_budget", "seed",     "tolerances", "kappa0",
                                           "certificate", "allow_uncertified", "output", "overwrite", "threads"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig c;
  try {
    c.N = j.value("N", c.N);
    c.dt = j.value("dt", c.dt);
    c.M = j.value("M", c.M);
    c.R = j.value("R", c.R);
    c.kappas = j.value("kappas", c.kappas);
    c.horizon = j.value("horizon", c.horizon);
    c.growth_budget = j.value("growth_budget", c.growth_budget);
    c.seed = j.value("seed", c.seed);
    c.kappa0 = j.value("kappa0", c.kappa0);
    c.certificate = j.value("certificate", c.certificate);
    c.allow_uncertified = j.value("allow_uncertified", c.allow_uncertified);
    c.output = j.value("output", c.output);
    c.overwrite = j.value("overwrite", c.overwrite);
    c.threads = j.value("threads", c.threads);
    if (j.contains("tolerances")) {
      if (!j["tolerances"].is_object()) throw ConfigError("tolerances must be an object");
      for (const auto& [key, value] : j["tolerances"].items()) {
        if (!c.tolerances.count(key)) throw ConfigError("unknown tolerance '" + key + "'");
        c.tolerances[key] = value.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::string config_hash(const RunConfig& config) {
  const std::string body = config.to_json().dump();
  const std::string blob = "blob " + std::to_string(body.size()) + '\0' + body;
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), md);
  std::string hex;
  char buf[3];
  for (unsigned char b : md) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

nlohmann::json provenance(const RunConfig& config) {
  return {{"config", config.to_json()}, {"config_hash", config_hash(config)}, {"tolerances", config.tolerances}};
}

double read_certificate(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read certificate " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    const double k = j.at("kappa0_emp").get<double>();
    if (!(k >= 0.0)) throw ConfigError("certificate " + path.string() + " certifies no diffusivity");
    return k;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed certificate " + path.string() + ": " + e.what());
  }
}

nlohmann::json certificate_json(const ScanResult& scan, const RunConfig& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : scan.rows)
    rows.push_back({{"kappa", r.kappa},
                    {"gap", r.gap},
                    {"top1", r.top1},
                    {"top2", r.top2},
                    {"span_margin", r.margin},
                    {"pass", r.pass}});
  nlohmann::json j = provenance(config);
  j["kappa0_emp"] = scan.kappa0;
  j["lipschitz"] = scan.lipschitz;
  j["R"] = scan.R;
  j["N"] = scan.N;
  j["dt"] = scan.dt;
  j["rows"] = rows;
  return j;
}

void prepare_output(const std::filesystem::path& dir, bool overwrite) {
  namespace fs = std::filesystem;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !overwrite)
      throw ConfigError("output directory " + dir.string() + " is not empty (pass --overwrite to reuse it)");
  }
  fs::create_directories(dir);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace dynamo
