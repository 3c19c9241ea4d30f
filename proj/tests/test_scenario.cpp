#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "imelab/scenario.hpp"

using namespace imelab;

namespace {

std::string config_path(const std::string& name) {
  return std::string(IMELAB_CONFIG_DIR) + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string out_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("imelab_test_" + tag);
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("config round trip is idempotent") {
  for (const char* name :
       {"single_mode_opo.json", "two_mode_opo_optimize.json", "two_mode_ime_decompose.json",
        "single_mode_hd_sweep.json"}) {
    const ScenarioConfig first = ScenarioConfig::from_file(config_path(name));
    const std::string once = first.to_json_text();
    const ScenarioConfig second = ScenarioConfig::from_json_text(once);
    CHECK(second.to_json_text() == once);
  }
}

TEST_CASE("unknown keys are rejected everywhere") {
  CHECK_THROWS_WITH_AS(
      ScenarioConfig::from_json_text(R"({"system": {"n_modes": 1, "gamma": [1]}, "bogus": 1})"),
      doctest::Contains("unknown key"), ValidationError);
  CHECK_THROWS_WITH_AS(
      ScenarioConfig::from_json_text(R"({"system": {"n_modes": 1, "gamma": [1], "oops": []}})"),
      doctest::Contains("unknown key"), ValidationError);
  CHECK_THROWS_WITH_AS(
      ScenarioConfig::from_json_text(
          R"({"system": {"n_modes": 1, "gamma": [1]}, "grid": {"max": 5, "pts": 3}})"),
      doctest::Contains("unknown key"), ValidationError);
}

TEST_CASE("parse errors carry context") {
  CHECK_THROWS_WITH_AS(ScenarioConfig::from_json_text("{"),
                       doctest::Contains("parse error"), ValidationError);
  CHECK_THROWS_WITH_AS(
      ScenarioConfig::from_json_text(R"({"system": {"n_modes": 1}})"),
      doctest::Contains("gamma"), ValidationError);
  CHECK_THROWS_WITH_AS(
      ScenarioConfig::from_json_text(
          R"({"system": {"n_modes": 1, "gamma": [1], "g": [[1, 1, 0]]}})"),
      doctest::Contains("(row, col, re, im)"), ValidationError);
}

TEST_CASE("hermitian completion and the inconsistent-entry error path") {
  const ScenarioConfig half = ScenarioConfig::from_json_text(
      R"({"system": {"n_modes": 2, "gamma": [1, 1], "g": [[1, 2, 0.1, 0.2]]}})");
  const QuadraticSystem sys = half.build_system();
  CHECK(sys.g(1, 0) == std::conj(sys.g(0, 1)));

  const ScenarioConfig bad = ScenarioConfig::from_file(config_path("invalid_non_hermitian.json"));
  CHECK_THROWS_WITH_AS(bad.build_system(), doctest::Contains("not Hermitian"),
                       ValidationError);
}

TEST_CASE("spectrum scenario writes the documented CSV contract") {
  const ScenarioConfig cfg =
      ScenarioConfig::from_file(config_path("single_mode_opo_spectrum.json"));
  const std::string dir = out_dir("spectrum");
  const ScenarioResult result = run_scenario(cfg, dir);
  REQUIRE(result.files.size() == 1);
  const std::string text = slurp(result.files[0]);
  CHECK(text.rfind("omega,linear,db\n", 0) == 0);
  // 2001 data rows plus header.
  CHECK(std::count(text.begin(), text.end(), '\n') == 2002);
}

TEST_CASE("abmd scenario writes d, supermode dB and per-column files") {
  ScenarioConfig cfg = ScenarioConfig::from_file(config_path("single_mode_opo.json"));
  cfg.grid_points = 401;  // keep the unit test quick
  const std::string dir = out_dir("abmd");
  const ScenarioResult result = run_scenario(cfg, dir);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "abmd_d.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "supermodes.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "supermode_1.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "supermode_2.csv"));
  const std::string d_text = slurp((std::filesystem::path(dir) / "abmd_d.csv").string());
  CHECK(d_text.rfind("omega,d1,d2\n", 0) == 0);
  const std::string u_text = slurp((std::filesystem::path(dir) / "supermode_1.csv").string());
  CHECK(u_text.rfind("omega,re(u_1),im(u_1),re(u_2),im(u_2)\n", 0) == 0);
}

TEST_CASE("optimize scenario is byte-stable for a fixed seed") {
  ScenarioConfig cfg = ScenarioConfig::from_file(config_path("single_mode_opo_optimize.json"));
  cfg.grid_points = 401;
  cfg.optimize->starts = 3;
  cfg.optimize->max_iterations = 300;
  const std::string dir_a = out_dir("opt_a");
  const std::string dir_b = out_dir("opt_b");
  const ScenarioResult a = run_scenario(cfg, dir_a);
  const ScenarioResult b = run_scenario(cfg, dir_b);
  CHECK(a.converged == b.converged);
  const std::string report_a = slurp((std::filesystem::path(dir_a) / "match_report.txt").string());
  const std::string report_b = slurp((std::filesystem::path(dir_b) / "match_report.txt").string());
  CHECK(report_a == report_b);
  CHECK(report_a.find("seed 7") != std::string::npos);
  CHECK(slurp((std::filesystem::path(dir_a) / "detected.csv").string()) ==
        slurp((std::filesystem::path(dir_b) / "detected.csv").string()));
}

TEST_CASE("optimize scenario requires an explicit seed") {
  ScenarioConfig cfg = ScenarioConfig::from_file(config_path("single_mode_opo_optimize.json"));
  cfg.optimize->seed_given = false;
  CHECK_THROWS_WITH_AS(run_scenario(cfg, out_dir("opt_noseed")),
                       doctest::Contains("seed"), ValidationError);
}

TEST_CASE("decompose scenario emits a netlist that verify accepts") {
  ScenarioConfig cfg = ScenarioConfig::from_file(config_path("two_mode_ime_decompose.json"));
  cfg.grid_points = 201;
  cfg.decompose->cavity_fit = 1;  // quick
  const std::string dir = out_dir("decompose");
  const ScenarioResult result = run_scenario(cfg, dir);
  const std::string netlist_path = (std::filesystem::path(dir) / "netlist.txt").string();
  CHECK(std::filesystem::exists(netlist_path));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "mzi_mesh.txt"));

  // Netlist round trip through the serialized form.
  const MeshNetlist parsed = read_netlist(netlist_path);
  CHECK(parsed.factor_count() == 1);
  CHECK(parsed.n_modes == 2);
  CHECK(parsed.grid.size() == 201);

  ScenarioConfig verify_cfg = cfg;
  verify_cfg.analysis = Analysis::kVerify;
  verify_cfg.decompose.reset();
  verify_cfg.verify_netlist = netlist_path;
  const std::string verify_dir = out_dir("verify");
  const ScenarioResult verified = run_scenario(verify_cfg, verify_dir);
  const std::string report =
      slurp((std::filesystem::path(verify_dir) / "verify_report.txt").string());
  // Reconstruction error limited only by the 12-digit serialization.
  const std::size_t pos = report.find("max_error ");
  REQUIRE(pos != std::string::npos);
  const double max_error = std::stod(report.substr(pos + 10));
  CHECK(max_error < 1e-9);
}

TEST_CASE("hd-sweep scenario writes envelope and exact optimum") {
  ScenarioConfig cfg = ScenarioConfig::from_file(config_path("single_mode_hd_sweep.json"));
  cfg.grid_points = 201;
  cfg.sweep->resolution_deg = 2.0;
  const std::string dir = out_dir("sweep");
  const ScenarioResult result = run_scenario(cfg, dir);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "envelope.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "optimal.csv"));

  // Explicit LO lists additionally get per-LO spectra.
  cfg.sweep->lo_list = {{0.0}, {0.7}, {1.3}};
  const std::string dir2 = out_dir("sweep_list");
  run_scenario(cfg, dir2);
  CHECK(std::filesystem::exists(std::filesystem::path(dir2) / "hd_sweep_01.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir2) / "hd_sweep_03.csv"));
}

TEST_CASE("analysis names round trip") {
  for (Analysis a : {Analysis::kSpectrum, Analysis::kAbmd, Analysis::kHdSweep,
                     Analysis::kOptimizeIme, Analysis::kDecompose, Analysis::kVerify})
    CHECK(analysis_from_name(analysis_name(a)) == a);
  CHECK_THROWS_AS(analysis_from_name("bogus"), ValidationError);
}
