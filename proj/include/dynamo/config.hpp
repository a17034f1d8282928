#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynamo/controller.hpp"

namespace dynamo {

/// Largest diffusivity certified by the default scan (N=16, dt=1e-3, R=1).
inline constexpr double kDefaultKappa0 = 0.01;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::map<std::string, double> default_tolerances();

struct RunConfig {
  int N = 16;
  double dt = 1e-3;
  int M = 0;  // 0 means 2N+1
  double R = 1.0;
  std::vector<double> kappas{0.0, 1e-3, 1e-2};
  double horizon = 300.0;
  double growth_budget = 60.0;
  std::uint64_t seed = 1;
  std::map<std::string, double> tolerances = default_tolerances();
  double kappa0 = kDefaultKappa0;
  std::string certificate;  // optional certificate.json that overrides kappa0
  bool allow_uncertified = false;
  // not part of the hash
  std::string output = "dynamo-out";
  bool overwrite = false;
  int threads = 0;

  int grid() const { return M > 0 ? M : 2 * N + 1; }
  double tol(const std::string& key) const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Resolution, budgets and tolerances as controller parameters.
  ControllerParams controller() const;
  SolverParams solver() const;

  /// Fields that determine results, with a stable key order.
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

/// git-style blob SHA-1 of the canonical config JSON.
std::string config_hash(const RunConfig& config);
/// {"config": ..., "config_hash": ..., "tolerances": ...}
nlohmann::json provenance(const RunConfig& config);

/// Reads kappa0 from a certificate written by scan-kappa0.
double read_certificate(const std::filesystem::path& path);
nlohmann::json certificate_json(const ScanResult& scan, const RunConfig& config);

/// Creates `dir`, refusing to reuse a non-empty directory unless `overwrite`.
void prepare_output(const std::filesystem::path& dir, bool overwrite);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string dump(const nlohmann::json& j);

}  // namespace dynamo
