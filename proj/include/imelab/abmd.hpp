#pragma once

#include <string>
#include <vector>

#include "imelab/gaussian_dynamics.hpp"

namespace imelab {

// Tolerances of the decomposition contracts.
inline constexpr double kBmdInputTol = 1e-8;        // input symplectic defect
inline constexpr double kBmdReconstructTol = 1e-10; // single-point reconstruction
inline constexpr double kAbmdTol = 1e-8;            // grid-level invariants
inline constexpr double kDegenerateClusterTol = 1e-8;  // |d_i - d_j| clustering

// Single-frequency symplectic singular value decomposition
//   s = u diag(d) v^dag,
// u and v unitary and conjugate-symplectic, d = (d_1..d_N | 1/d_1..1/d_N)
// with d_1 >= ... >= d_N >= 1.  Reciprocal pairing is exact by construction.
struct BmdPoint {
  Eigen::MatrixXcd u;
  Eigen::MatrixXcd v;
  Eigen::VectorXd d;
  bool has_degenerate_cluster = false;
};

BmdPoint pointwise_bmd(const Eigen::MatrixXcd& s);

// Smooth-in-omega factorization S(omega) = U(omega) D(omega) V^dag(omega) of
// a transfer grid: per-point factorizations stitched by optimal column
// assignment, degenerate-subspace rotation and per-pair phase continuation so
// the factors vary smoothly and inherit conjugate symmetry.  Column k of U is
// the k-th morphing supermode; its noise is d_k^2 * vacuum_level (anti-
// squeezed for k <= N, squeezed for k > N).
struct MorphingDecomposition {
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<Eigen::MatrixXcd> u;
  std::vector<Eigen::MatrixXcd> v;
  std::vector<Eigen::VectorXd> d;

  const Eigen::MatrixXcd& u_at(int k) const { return u[static_cast<std::size_t>(k)]; }
  const Eigen::VectorXd& d_at(int k) const { return d[static_cast<std::size_t>(k)]; }
  // Noise level of supermode `column` (1-based, in [1, 2N]) at grid point k.
  double supermode_noise(int column, int k) const;
};

MorphingDecomposition continue_decomposition(const TransferGrid& transfer);

// The linear map R -> U^dag(omega) R onto optimally (anti-)squeezed
// quadratures, with human-readable row labels.  Row N+i is the i-th squeezed
// supermode quadrature with noise d_i^{-2}(omega) * vacuum_level.
struct SupermodeQuadratures {
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<Eigen::MatrixXcd> u_dagger;
  std::vector<std::string> row_labels;

  // Row `row` (1-based) at grid point k as a combination of input
  // quadratures, e.g. "0.5 x_1 + 0.866 y_1".
  std::string describe_row(int row, int k, const std::vector<std::string>& input_labels) const;
};

SupermodeQuadratures supermode_quadratures(const MorphingDecomposition& decomp);

}  // namespace imelab
