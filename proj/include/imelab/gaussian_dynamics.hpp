#pragma once

#include <vector>

#include "imelab/common.hpp"
#include "imelab/grid.hpp"

namespace imelab {

// Validation tolerances for quadratic-system inputs.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kSymmetricTol = 1e-12;
// Transfer grids must satisfy conjugate symmetry and S J S^dag = J to this
// tolerance.
inline constexpr double kTransferTol = 1e-10;
// Resolvent condition estimate above which the system is reported unstable.
inline constexpr double kResolventCondLimit = 1e12;

// Open N-mode system with quadratic Hamiltonian
//   H = hbar sum G_mn a_m^dag a_n + (hbar/2) sum [F_mn a_m^dag a_n^dag + h.c.]
// and per-mode damping Gamma.  All rates are in units of gamma_ref (the first
// mode's damping in the bundled scenarios); frequencies share those units.
struct QuadraticSystem {
  int n_modes = 0;
  Eigen::MatrixXcd g;      // Hermitian
  Eigen::MatrixXcd f;      // symmetric; identically zero for passive systems
  Eigen::VectorXd gamma;   // positive

  // Validates Hermiticity of G, symmetry of F and positivity of the dampings;
  // throws ValidationError naming the offending entry.
  static QuadraticSystem make(Eigen::MatrixXcd g, Eigen::MatrixXcd f,
                              Eigen::VectorXd gamma);

  bool passive() const { return max_abs(f) == 0.0; }
};

// Quadrature-space drift coupling matrix
//   M = [[Im(G+F), Re(G-F)], [-Re(G+F), -Im(G+F)^T]].
// The result is Hamiltonian: (J M)^T = J M.
Eigen::MatrixXd build_coupling_matrix(const QuadraticSystem& sys);

// max |(J m)^T - J m|; zero (to rounding) for every coupling matrix.
double hamiltonian_defect(const Eigen::MatrixXd& m);

// -max Re eig(M - Gamma); positive iff the system is stable (below
// oscillation threshold).
double stability_margin(const QuadraticSystem& sys);
bool is_stable(const QuadraticSystem& sys);

// Sampled transfer function S(omega) = sqrt(2 Gamma) (i omega I + Gamma -
// M)^-1 sqrt(2 Gamma) - I, one 2N x 2N complex matrix per grid point.
//
// On symmetric grids only omega >= 0 is evaluated; the negative side is the
// exact conjugate, so S(-omega) = S(omega)* holds bitwise.
struct TransferGrid {
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<Eigen::MatrixXcd> s;

  const Eigen::MatrixXcd& at(int k) const { return s[static_cast<std::size_t>(k)]; }
  // S(-omega_k); requires a symmetric grid.
  const Eigen::MatrixXcd& at_mirror(int k) const {
    return s[static_cast<std::size_t>(grid.mirror_index(k))];
  }
};

TransferGrid transfer_function(const QuadraticSystem& sys, const FrequencyGrid& grid);

// Pointwise composition: (second * first)(omega), the transfer of `first`
// followed by `second`.
TransferGrid compose(const TransferGrid& second, const TransferGrid& first);

// Change to the (a | a^dag) amplitude representation, L^dag S(omega) L.  For
// passive systems the result is block-diagonal diag(U(omega), U*(-omega)).
std::vector<Eigen::MatrixXcd> to_amplitude_rep(const TransferGrid& transfer);

// Upper-left N x N block of the amplitude representation.  Throws
// ValidationError if any off-diagonal block exceeds `tol` (active system).
std::vector<Eigen::MatrixXcd> amplitude_upper_blocks(const TransferGrid& transfer,
                                                     double tol = kTransferTol);

}  // namespace imelab
