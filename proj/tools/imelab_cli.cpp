// imelab command line: run scenario configurations end to end and export
// plot-ready CSV / netlist bundles.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "imelab/scenario.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitIo = 4;

void print_error_record(const std::string& kind, const std::string& message) {
  // Machine-readable one-line record on stderr.
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped.push_back('\\');
    if (c == '\n') {
      escaped += "\\n";
      continue;
    }
    escaped.push_back(c);
  }
  std::cerr << "{\"error\":\"" << kind << "\",\"message\":\"" << escaped << "\"}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imelab: multimode squeezed-light spectra, morphing supermodes and "
               "interferometers with memory effect"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir = "out";
  int grid_points = -1;
  double grid_max = -1.0;
  long long seed = -1;

  app.add_option("--config", config_path, "scenario configuration (JSON)")
      ->required();
  app.add_option("--out", out_dir, "output directory (default: out)");
  app.add_option("--grid-points", grid_points, "override grid point count (odd)");
  app.add_option("--grid-max", grid_max, "override grid half-width (gamma_ref units)");
  app.add_option("--seed", seed, "override optimizer seed");

  const std::vector<std::string> subcommands = {"spectrum",     "abmd",      "hd-sweep",
                                                "optimize-ime", "decompose", "verify"};
  for (const auto& name : subcommands) app.add_subcommand(name, "run a " + name + " scenario");

  CLI11_PARSE(app, argc, argv);
  const std::string chosen = app.get_subcommands().front()->get_name();

  try {
    imelab::ScenarioConfig config = imelab::ScenarioConfig::from_file(config_path);
    const imelab::Analysis requested = imelab::analysis_from_name(chosen);
    if (config.analysis != requested) {
      // The config names a different analysis: reject rather than guess.
      throw imelab::ValidationError("config analysis \"" +
                                    imelab::analysis_name(config.analysis) +
                                    "\" does not match subcommand \"" + chosen + "\"");
    }
    if (grid_points > 0) config.grid_points = grid_points;
    if (grid_max > 0.0) config.grid_max = grid_max;
    if (seed >= 0) {
      if (!config.optimize) config.optimize.emplace();
      config.optimize->seed = static_cast<std::uint64_t>(seed);
      config.optimize->seed_given = true;
    }

    const imelab::ScenarioResult result = imelab::run_scenario(config, out_dir);
    std::cout << result.summary << "\n";
    for (const auto& file : result.files) std::cout << "  wrote " << file << "\n";
    if (!result.converged) {
      print_error_record("non-convergence",
                         "optimizer did not converge; best-found result was written");
      return kExitNonConvergence;
    }
    return 0;
  } catch (const imelab::IoError& err) {
    print_error_record("io", err.what());
    return kExitIo;
  } catch (const imelab::ValidationError& err) {
    print_error_record("validation", err.what());
    return kExitValidation;
  } catch (const imelab::UnstableSystemError& err) {
    print_error_record("validation", err.what());
    return kExitValidation;
  } catch (const imelab::ContinuationError& err) {
    print_error_record("validation", err.what());
    return kExitValidation;
  } catch (const std::exception& err) {
    print_error_record("internal", err.what());
    return 1;
  }
}
