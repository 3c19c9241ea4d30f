#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "imelab/rng.hpp"

namespace imelab {

using Objective = std::function<double(const std::vector<double>&)>;

struct NelderMeadOptions {
  int max_iterations = 4000;       // per simplex run
  int restarts = 8;                // shrinking restarts around the best point;
                                   // the loop stops early at diminishing returns
  double f_tolerance = 1e-12;      // simplex spread convergence
  double restart_improvement = 1e-10;  // converged when a restart gains less
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Downhill simplex with shrinking restarts.  Deterministic for fixed inputs.
NelderMeadResult nelder_mead(const Objective& objective, std::vector<double> x0,
                             std::vector<double> step0,
                             const NelderMeadOptions& options = {});

struct MultiStartOptions {
  std::uint64_t seed = 1;
  int starts = 32;
  int threads = 0;  // 0 = hardware concurrency
  NelderMeadOptions local;
};

// Draws `starts` initial points with `sample(rng)`, runs nelder_mead from
// each (plus any explicit warm starts) and returns the best result.  The
// outcome is independent of the thread count: starts are indexed and the
// reduction breaks ties by index.
NelderMeadResult multi_start_minimize(
    const Objective& objective, const std::function<std::vector<double>(Rng&)>& sample,
    const std::function<std::vector<double>(const std::vector<double>&)>& step_for,
    const std::vector<std::vector<double>>& warm_starts, const MultiStartOptions& options);

}  // namespace imelab
