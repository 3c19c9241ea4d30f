#include "imelab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace imelab {

FrequencyGrid FrequencyGrid::uniform_symmetric(double omega_max, int points) {
  if (!(omega_max > 0.0)) throw ValidationError("grid: omega_max must be positive");
  if (points < 3 || points % 2 == 0)
    throw ValidationError("grid: point count must be odd and at least 3");
  const int half = (points - 1) / 2;
  const double step = omega_max / half;
  FrequencyGrid grid;
  grid.symmetric = true;
  grid.omegas.resize(static_cast<std::size_t>(points));
  grid.omegas[static_cast<std::size_t>(half)] = 0.0;
  for (int i = 1; i <= half; ++i) {
    const double w = step * i;
    grid.omegas[static_cast<std::size_t>(half + i)] = w;
    grid.omegas[static_cast<std::size_t>(half - i)] = -w;  // exact negation
  }
  return grid;
}

FrequencyGrid FrequencyGrid::from_points(std::vector<double> omegas, bool symmetric) {
  if (omegas.empty()) throw ValidationError("grid: empty");
  for (std::size_t k = 1; k < omegas.size(); ++k) {
    if (!(omegas[k] > omegas[k - 1])) {
      std::ostringstream msg;
      msg << "grid: omegas not strictly increasing at index " << k;
      throw ValidationError(msg.str());
    }
  }
  if (symmetric) {
    const std::size_t n = omegas.size();
    for (std::size_t k = 0; k < n; ++k) {
      if (omegas[n - 1 - k] != -omegas[k]) {
        std::ostringstream msg;
        msg << "grid: flagged symmetric but omega = " << omegas[k]
            << " has no exact mirror";
        throw ValidationError(msg.str());
      }
    }
  }
  FrequencyGrid grid;
  grid.omegas = std::move(omegas);
  grid.symmetric = symmetric;
  return grid;
}

std::vector<int> FrequencyGrid::indices_in(double lo, double hi) const {
  std::vector<int> out;
  for (int k = 0; k < size(); ++k)
    if (omegas[static_cast<std::size_t>(k)] >= lo && omegas[static_cast<std::size_t>(k)] <= hi)
      out.push_back(k);
  return out;
}

bool FrequencyGrid::same_as(const FrequencyGrid& other) const {
  return symmetric == other.symmetric && omegas == other.omegas;
}

FrequencyGrid default_grid() {
  return FrequencyGrid::uniform_symmetric(kDefaultGridMax, kDefaultGridPoints);
}

}  // namespace imelab
