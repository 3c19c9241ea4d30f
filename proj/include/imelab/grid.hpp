#pragma once

#include <vector>

#include "imelab/common.hpp"

namespace imelab {

inline constexpr double kDefaultGridMax = 5.0;
inline constexpr int kDefaultGridPoints = 2001;

// Sampled frequency axis in units of the reference damping gamma_ref.
// A grid with the `symmetric` flag contains -omega for every omega, exactly
// (bitwise), so conjugate mirroring introduces no rounding.
struct FrequencyGrid {
  std::vector<double> omegas;  // strictly increasing
  bool symmetric = false;

  int size() const { return static_cast<int>(omegas.size()); }
  double at(int k) const { return omegas[static_cast<std::size_t>(k)]; }

  // Index of -omega_k; on a validated symmetric grid this is size()-1-k.
  int mirror_index(int k) const { return size() - 1 - k; }

  // Uniform grid on [-omega_max, omega_max] with an odd number of points,
  // symmetric about 0.
  static FrequencyGrid uniform_symmetric(double omega_max, int points);

  // Validates monotonicity and, when flagged, exact symmetry.
  static FrequencyGrid from_points(std::vector<double> omegas, bool symmetric);

  // Grid points with lo <= omega <= hi, as indices into this grid.
  std::vector<int> indices_in(double lo, double hi) const;

  bool same_as(const FrequencyGrid& other) const;
};

FrequencyGrid default_grid();

}  // namespace imelab
