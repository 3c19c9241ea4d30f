#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imelab/ime.hpp"
#include "imelab/mesh.hpp"

namespace imelab {

enum class Analysis { kSpectrum, kAbmd, kHdSweep, kOptimizeIme, kDecompose, kVerify };

std::string analysis_name(Analysis a);
Analysis analysis_from_name(const std::string& name);

// One scenario = one JSON document.  Unknown keys anywhere are rejected.
// Complex entries are (row, col, re, im) tuples, 1-based, in gamma_ref units;
// if only one triangle of G (or F) is listed the other is filled in by
// Hermitian (symmetric) completion.
struct ScenarioConfig {
  std::string name;
  Analysis analysis = Analysis::kSpectrum;

  // system
  int n_modes = 0;
  std::vector<double> gamma;
  std::vector<std::array<double, 4>> g_entries;
  std::vector<std::array<double, 4>> f_entries;

  // grid
  double grid_max = kDefaultGridMax;
  int grid_points = kDefaultGridPoints;

  // analysis-specific
  std::vector<double> lo_angles;                       // spectrum / optimize warm LO
  int target_index = 0;                                // 0 = most squeezed (N+1)
  struct StageConfig {
    std::vector<double> gamma;                         // length 1 = equal damping
    std::vector<double> detunings;
    std::vector<std::array<double, 4>> couplings;      // (m, n, theta, phi)
  };
  std::vector<StageConfig> ime_stages;

  struct SweepConfig {
    double resolution_deg = kDefaultSweepResolutionDeg;
    std::vector<std::vector<double>> lo_list;          // explicit family (angles)
  };
  std::optional<SweepConfig> sweep;

  struct OptimizeConfig {
    int stages = 1;
    bool equal_damping = true;
    Band band{-3.0, 3.0};
    std::string objective = "db-deviation";            // | "overlap" | "stationary"
    std::uint64_t seed = 0;                            // mandatory (explicit)
    bool seed_given = false;
    int starts = OptimizeOptions{}.multi_starts;
    double tol_db = kDefaultMatchTolDb;
    int max_iterations = NelderMeadOptions{}.max_iterations;
    std::vector<std::vector<double>> warm_starts;
  };
  std::optional<OptimizeConfig> optimize;

  struct DecomposeConfig {
    std::string ordering = "triangular";
    bool mzi = false;
    int cavity_fit = 0;                                // cavities per phase profile
    Band band{-kDefaultGridMax, kDefaultGridMax};
    std::uint64_t seed = 1;
  };
  std::optional<DecomposeConfig> decompose;

  std::string verify_netlist;                          // path for analysis=verify

  static ScenarioConfig from_json_text(const std::string& text);
  static ScenarioConfig from_file(const std::string& path);
  std::string to_json_text() const;

  QuadraticSystem build_system() const;
  FrequencyGrid build_grid() const;
  ImeChain build_chain() const;
  int resolved_target_index() const;                   // default: N + 1
};

struct ScenarioResult {
  std::vector<std::string> files;  // paths written, in order
  bool converged = true;           // false => CLI exit 3
  std::string summary;             // one-line outcome for the console
};

// Runs the configured analysis and writes the output bundle into out_dir.
// Deterministic for identical config and seed.  Throws ValidationError /
// UnstableSystemError on bad input and IoError on filesystem failures.
ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& out_dir);

// Format helpers shared by the writers (12 significant digits).
std::string format_sig(double v);
void write_noise_csv(const std::string& path, const NoiseSpectrum& spectrum);
void write_netlist(const std::string& path, const MeshNetlist& netlist,
                   const NetlistReport& report);
MeshNetlist read_netlist(const std::string& path);

}  // namespace imelab
