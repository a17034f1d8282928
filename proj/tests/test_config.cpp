#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "dynamo/config.hpp"

using namespace dynamo;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dynamo_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("default config validates and hashes like a git blob") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  // git hash-object of the canonical JSON
  CHECK(config_hash(c) == "1ab4f3cf031b30e35e90299e815f5e84877ce9fe");
  CHECK(c.grid() == 33);
}

TEST_CASE("hash ignores where results go but not what they are") {
  RunConfig a, b;
  b.output = "elsewhere";
  b.overwrite = true;
  b.threads = 3;
  CHECK(config_hash(a) == config_hash(b));
  b.dt = 5e-4;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("JSON round trip") {
  RunConfig c;
  c.N = 12;
  c.kappas = {0.0, 0.005};
  c.tolerances["replay"] = 1e-9;
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("schema violations are named") {
  CHECK_THROWS_WITH_AS(RunConfig::from_json({{"N", 16}, {"colour", "red"}}), doctest::Contains("colour"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::from_json({{"tolerances", {{"bogus", 1.0}}}}), doctest::Contains("bogus"),
                       ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"N", "sixteen"}}), ConfigError);
  RunConfig c;
  c.tolerances["heat"] = -1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("heat"), ConfigError);
  c = RunConfig{};
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.kappas.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("diffusivities above the certified range need an override") {
  RunConfig c;
  c.kappas = {0.05};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("kappa0_emp"), ConfigError);
  c.allow_uncertified = true;
  CHECK_NOTHROW(c.validate());
  CHECK(c.controller().allow_uncertified);
}

TEST_CASE("certificate sets kappa0") {
  ScanResult s;
  s.rows.push_back({0.0, 0.2, 13.1, 13.1, 0.13, true});
  s.rows.push_back({0.02, 0.1, 2.0, 2.0, 0.1, false});
  s.kappa0 = 0.0;
  s.N = 16;
  const fs::path dir = scratch_dir("cert");
  prepare_output(dir, false);
  write_text(dir / "certificate.json", dump(certificate_json(s, RunConfig{})));
  CHECK(read_certificate(dir / "certificate.json") == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("output directories are not silently reused") {
  const fs::path dir = scratch_dir("out");
  CHECK_NOTHROW(prepare_output(dir, false));
  CHECK_NOTHROW(prepare_output(dir, false));  // still empty
  write_text(dir / "report.json", "{}\n");
  CHECK_THROWS_WITH_AS(prepare_output(dir, false), doctest::Contains("--overwrite"), ConfigError);
  CHECK_NOTHROW(prepare_output(dir, true));
  fs::remove_all(dir);
}

TEST_CASE("reports embed the config and its hash") {
  const RunConfig c;
  const nlohmann::json p = provenance(c);
  CHECK(p.at("config_hash") == config_hash(c));
  CHECK(p.at("tolerances").at("replay") == 1e-8);
  CHECK(dump(p) == dump(provenance(c)));
}
