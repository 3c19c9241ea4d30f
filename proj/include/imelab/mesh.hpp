#pragma once

#include <cstdint>
#include <vector>

#include "imelab/common.hpp"
#include "imelab/grid.hpp"

namespace imelab {

inline constexpr double kMeshUnitaryTol = 1e-10;
inline constexpr double kNullEntryFloor = 1e-14;

enum class MeshOrdering { kTriangular, kRectangular };
enum class NullPivot { kSameColumn, kSameRow };

// Frequency-dependent two-level unitary on modes (m, n), m < n (0-based),
// with active block
//   [[e^{i phi} a, -b], [e^{i phi} b^*, a^*]],   |a|^2 + |b|^2 = 1,
// e^{i phi} its determinant.  All other modes pass through untouched.
struct TwoLevelFactor {
  int m = 0;
  int n = 0;
  std::vector<Complex> a;
  std::vector<Complex> b;
  std::vector<double> phi;  // unwrapped along omega

  Eigen::Matrix2cd block(int k) const;
  Eigen::MatrixXcd embedded(int n_modes, int k) const;
  static TwoLevelFactor from_blocks(int m, int n,
                                    const std::vector<Eigen::Matrix2cd>& blocks,
                                    int anchor);
};

// One nulling step.  Returns the det-1 factor T built from the target and
// pivot entries; kSameColumn applies u <- T_emb u (pivot in the same column),
// kSameRow applies u <- u T_emb^dag (pivot in the same row).  When both
// entries are below kNullEntryFloor the factor is the identity.
struct NullStep {
  int m = 0;
  int n = 0;
  Eigen::Matrix2cd t;
};

NullStep null_factor(Eigen::MatrixXcd& u, int target_row, int target_col,
                     NullPivot pivot, int partner = -1);

struct NullOp {
  int row = 0;
  int col = 0;
  NullPivot pivot = NullPivot::kSameColumn;
  int partner = 0;
  bool left = true;  // left-multiplication (T u) vs right (u T^dag)
};

// Deterministic nulling sequences: triangular nulls column by column from the
// bottom left going up; rectangular alternates column and row nulling along
// anti-diagonals.
std::vector<NullOp> mesh_nulling_order(int n_modes, MeshOrdering ordering);

// Compiled mesh: U(omega) = factors[0](omega) * ... * factors.back()(omega)
// * diag(exp(i residual_phases(omega, :))).  The final diagonal left over by
// the nulling sweep is folded into the factors' determinant phases; the
// residual layer is non-zero only for modes no factor touches.
struct MeshNetlist {
  MeshOrdering ordering = MeshOrdering::kTriangular;
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<TwoLevelFactor> factors;
  Eigen::MatrixXd residual_phases;  // points x N, radians

  Eigen::MatrixXcd reconstruct(int k) const;
  int factor_count() const { return static_cast<int>(factors.size()); }
};

MeshNetlist two_mode_decompose(const std::vector<Eigen::MatrixXcd>& u_grid,
                               const FrequencyGrid& grid, MeshOrdering ordering);

// Mach-Zehnder refactorization T = diag(e^{i alpha1}, e^{i alpha2}) T_MZI,
// T_MZI = [[e^{i phi} cos th, -sin th], [e^{i phi} sin th, cos th]].
struct MziStage {
  int m = 0;
  int n = 0;
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> alpha1;
  std::vector<double> alpha2;

  Eigen::Matrix2cd mzi_block(int k) const;   // T_MZI alone
  Eigen::Matrix2cd full_block(int k) const;  // with the external phases
};

MziStage mzi_factorize(const TwoLevelFactor& factor);

// Whole-mesh MZI form U(omega) = Phi(omega) * prod T_MZI(omega): external
// phases pushed leftward through the mesh into one diagonal layer.
struct MziMesh {
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<MziStage> stages;
  Eigen::MatrixXd global_phases;  // points x N, the Phi layer, radians

  Eigen::MatrixXcd reconstruct(int k) const;
};

MziMesh to_mzi_mesh(const MeshNetlist& netlist);

// Chain of detuned single-mode cavities approximating a frequency-dependent
// phase profile; stage k contributes 2 atan2(omega + delta_k, gamma_k) and a
// frequency-independent constant is free.
struct CavityChainStage {
  double gamma = 1.0;
  double delta = 0.0;
};

struct CavityChain {
  std::vector<CavityChainStage> stages;
  double constant = 0.0;
  double fit_residual = 0.0;  // sup-norm phase error over the fit band
  bool converged = true;

  double phase(double omega) const;
};

CavityChain fit_cavity_chain(const std::vector<double>& target_phase,
                             const std::vector<double>& omegas, int n_cavities,
                             std::uint64_t seed = 1);

struct NetlistReport {
  double max_error = 0.0;          // reconstruction, max over grid
  int factor_count = 0;
  double smoothness = 0.0;         // max factor step |dB|_F / d omega
  double det_error = 0.0;          // |prod det T - det U|, max over grid
  double max_residual_phase = 0.0; // radians
};

NetlistReport netlist_verify(const MeshNetlist& netlist,
                             const std::vector<Eigen::MatrixXcd>& u_grid);

}  // namespace imelab
