#pragma once

#include <cstdint>
#include <vector>

#include "imelab/abmd.hpp"
#include "imelab/nelder_mead.hpp"
#include "imelab/spectra.hpp"

namespace imelab {

// One passive multimode cavity stage: Hermitian generator G_IME (detunings on
// the diagonal, couplings theta_d e^{i phi_d} off it), positive dampings, no
// pair production.
struct ImeStage {
  Eigen::MatrixXcd g;
  Eigen::VectorXd gamma;

  static ImeStage make(Eigen::MatrixXcd g, Eigen::VectorXd gamma);
  QuadraticSystem as_system() const;
  int n_modes() const { return static_cast<int>(gamma.size()); }
};

// Ordered cascade; the first stage acts on the source output first.
struct ImeChain {
  std::vector<ImeStage> stages;

  int n_modes() const { return stages.empty() ? 0 : stages.front().n_modes(); }
};

// Composite transfer of the chain: S = S_last ... S_2 S_1, each stage a
// passive empty-cavity network (unitary at every omega).
TransferGrid ime_transfer(const ImeChain& chain, const FrequencyGrid& grid);

// Frequency-dependent LO produced by pulling a constant real LO back through
// the IME: qtilde^dag(omega) = q^T S_IME(omega).  Unit norm at every omega,
// conjugate symmetric.
struct GeneralizedLO {
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<Eigen::VectorXcd> qtilde;
};

GeneralizedLO generalized_lo(const LocalOscillator& lo, const TransferGrid& ime);

// |qtilde^dag(omega) U_col(omega)|^2 against supermode column `target_index`
// (1-based, in [1, 2N]); values in [0, 1].
std::vector<double> overlap_spectrum(const GeneralizedLO& qtilde,
                                     const MorphingDecomposition& decomp,
                                     int target_index);

// Noise spectral power of a standard HD behind the IME.  Evaluates both
// sigma' = S_IME sigma S_IME^T(-omega) with Q and the generalized-LO form
// qtilde^dag sigma qtilde and cross-checks them to 1e-10.
NoiseSpectrum detected_spectrum(const LocalOscillator& lo, const TransferGrid& ime,
                                const SpectralCovariance& source_sigma);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kDefaultMatchTolDb = 0.5;

// Per-omega diagnostic of how well the detected spectrum tracks the target
// supermode.  band_fraction is the fraction of band grid points with
// |detected_db - target_db| <= tol_db.
struct MatchReport {
  FrequencyGrid grid;
  std::vector<double> overlap;
  std::vector<double> detected_db;
  std::vector<double> target_db;
  Band band;
  double tol_db = kDefaultMatchTolDb;
  double band_fraction = 0.0;
};

MatchReport make_match_report(const GeneralizedLO& qtilde,
                              const MorphingDecomposition& decomp, int target_index,
                              const NoiseSpectrum& detected, const Band& band,
                              double tol_db = kDefaultMatchTolDb);

// Objectives for the IME parameter search:
//  - kDbDeviation: band mean of (detected_db - target_db)^2  (default)
//  - kNegOverlap: negative band mean of the target-column overlap
//  - kStationary: band mean of |d/domega (S_IME(omega) U(omega))|_F^2, the
//    all-supermodes stationary mode-matching merit (no LO involved)
enum class ImeObjective { kDbDeviation, kNegOverlap, kStationary };

struct ImeTopology {
  int n_stages = 1;
  bool equal_damping = true;  // one damping per stage, as in the case studies
};

// Parameter vector layout (all rates in gamma_ref units, phases in radians):
// for each stage [gamma (1 entry, or N without equal damping), Delta_1..N,
// then per pair (m<n, row-major) theta_d, phi_d], followed by the 2N-1 LO
// angles.  Objective kStationary has no LO block.
class ImeParameterization {
 public:
  ImeParameterization(int n_modes, ImeTopology topology, bool with_lo);

  int parameter_count() const { return count_; }
  int stage_parameter_count() const { return stage_count_; }
  bool with_lo() const { return with_lo_; }
  ImeChain chain_from(const std::vector<double>& params) const;
  LocalOscillator lo_from(const std::vector<double>& params) const;
  std::vector<double> pack(const ImeChain& chain, const std::vector<double>& lo_angles) const;
  std::vector<std::string> parameter_labels() const;

 private:
  int n_modes_;
  ImeTopology topology_;
  bool with_lo_;
  int stage_count_ = 0;
  int count_ = 0;
};

// Search boxes for the multi-start sampling.
inline constexpr double kDetuningBox = 6.0;    // Delta in [-6, 6]
inline constexpr double kDampingBoxHi = 6.0;   // gamma in (0, 6]
inline constexpr double kCouplingBoxHi = 6.0;  // theta_d in [0, 6]
inline constexpr double kMinStageDamping = 1e-3;

struct OptimizeOptions {
  std::uint64_t seed = 1;
  int multi_starts = 32;
  int threads = 0;
  double tol_db = kDefaultMatchTolDb;
  NelderMeadOptions local{};
  // Explicit starting points in the ImeParameterization layout, tried in
  // addition to the random multi-starts.
  std::vector<std::vector<double>> warm_starts;
  // Optimization runs on every band grid point at most this many points
  // (uniform decimation); the report always uses the full grid.
  int max_band_points = 201;
};

struct OptimizeImeResult {
  ImeChain chain;
  LocalOscillator lo;
  MatchReport report;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> parameters;
  std::uint64_t seed = 0;
  ImeObjective objective_kind = ImeObjective::kDbDeviation;
  ImeTopology topology;
  int target_index = 0;
  Band band;
};

OptimizeImeResult optimize_ime(const QuadraticSystem& source, int target_index,
                               const ImeTopology& topology, const Band& band,
                               ImeObjective objective, const OptimizeOptions& options,
                               const FrequencyGrid& grid = default_grid());

// Objective value of an explicit parameter vector under the same setup
// (used to score published parameter sets against a found optimum).
double ime_objective_value(const QuadraticSystem& source, int target_index,
                           const ImeTopology& topology, const Band& band,
                           ImeObjective objective, const FrequencyGrid& grid,
                           const std::vector<double>& params,
                           int max_band_points = 201);

}  // namespace imelab
