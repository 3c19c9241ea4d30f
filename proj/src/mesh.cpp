#include "imelab/mesh.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "imelab/nelder_mead.hpp"

namespace imelab {

namespace {

Complex unit_phase(double phi) { return std::exp(Complex(0.0, phi)); }

void check_unitary(const Eigen::MatrixXcd& u, double omega, bool has_omega) {
  if (unitarity_defect(u) > kMeshUnitaryTol * std::max(1.0, max_abs(u))) {
    std::ostringstream msg;
    msg << "mesh: input matrix is not unitary (defect " << unitarity_defect(u);
    if (has_omega) msg << " at omega = " << omega;
    msg << ")";
    throw ValidationError(msg.str());
  }
}

}  // namespace

Eigen::Matrix2cd TwoLevelFactor::block(int k) const {
  const std::size_t i = static_cast<std::size_t>(k);
  const Complex det = unit_phase(phi[i]);
  Eigen::Matrix2cd blk;
  blk << det * a[i], -b[i], det * std::conj(b[i]), std::conj(a[i]);
  return blk;
}

Eigen::MatrixXcd TwoLevelFactor::embedded(int n_modes, int k) const {
  Eigen::MatrixXcd full = Eigen::MatrixXcd::Identity(n_modes, n_modes);
  const Eigen::Matrix2cd blk = block(k);
  full(m, m) = blk(0, 0);
  full(m, n) = blk(0, 1);
  full(n, m) = blk(1, 0);
  full(n, n) = blk(1, 1);
  return full;
}

TwoLevelFactor TwoLevelFactor::from_blocks(int m, int n,
                                           const std::vector<Eigen::Matrix2cd>& blocks,
                                           int anchor) {
  TwoLevelFactor f;
  f.m = m;
  f.n = n;
  f.a.resize(blocks.size());
  f.b.resize(blocks.size());
  f.phi.resize(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Eigen::Matrix2cd& blk = blocks[k];
    // For unitary blocks B(0,0) = det conj(B(1,1)) and B(1,0) = -det
    // conj(B(0,1)), so this parameterization is exact.
    const Complex det = blk(0, 0) * blk(1, 1) - blk(0, 1) * blk(1, 0);
    f.phi[k] = std::arg(det);
    f.a[k] = std::conj(blk(1, 1));
    f.b[k] = -blk(0, 1);
  }
  f.phi = unwrap_phases(std::move(f.phi), anchor);
  return f;
}

NullStep null_factor(Eigen::MatrixXcd& u, int target_row, int target_col,
                     NullPivot pivot, int partner) {
  const int dim = static_cast<int>(u.rows());
  check_unitary(u, 0.0, false);
  if (target_row < 0 || target_row >= dim || target_col < 0 || target_col >= dim)
    throw ValidationError("null_factor: target out of range");

  NullStep step;
  if (pivot == NullPivot::kSameColumn) {
    if (partner < 0) partner = target_row + 1 < dim ? target_row + 1 : target_row - 1;
    if (partner == target_row || partner < 0 || partner >= dim)
      throw ValidationError("null_factor: bad partner row");
    step.m = std::min(target_row, partner);
    step.n = std::max(target_row, partner);
    const Complex tgt = u(target_row, target_col);
    const Complex piv = u(partner, target_col);
    const double norm = std::sqrt(std::norm(tgt) + std::norm(piv));
    if (norm < kNullEntryFloor) {
      step.t = Eigen::Matrix2cd::Identity();
      return step;
    }
    // Rows (m, n) of T; the target row combination cancels, the pivot row
    // collects the amplitude.  det T = 1.
    if (target_row == step.m) {
      step.t << piv / norm, -tgt / norm, std::conj(tgt) / norm, std::conj(piv) / norm;
    } else {
      step.t << std::conj(piv) / norm, std::conj(tgt) / norm, -tgt / norm, piv / norm;
    }
    Eigen::RowVectorXcd row_m = u.row(step.m);
    Eigen::RowVectorXcd row_n = u.row(step.n);
    u.row(step.m) = step.t(0, 0) * row_m + step.t(0, 1) * row_n;
    u.row(step.n) = step.t(1, 0) * row_m + step.t(1, 1) * row_n;
  } else {
    if (partner < 0) partner = target_col + 1 < dim ? target_col + 1 : target_col - 1;
    if (partner == target_col || partner < 0 || partner >= dim)
      throw ValidationError("null_factor: bad partner column");
    step.m = std::min(target_col, partner);
    step.n = std::max(target_col, partner);
    const Complex tgt = u(target_row, target_col);
    const Complex piv = u(target_row, partner);
    const double norm = std::sqrt(std::norm(tgt) + std::norm(piv));
    if (norm < kNullEntryFloor) {
      step.t = Eigen::Matrix2cd::Identity();
      return step;
    }
    // u <- u T^dag zeroes the target and moves its weight onto the partner
    // column.  det T = 1.
    if (target_col == step.m) {
      step.t << std::conj(piv) / norm, -std::conj(tgt) / norm, tgt / norm, piv / norm;
    } else {
      step.t << piv / norm, tgt / norm, -std::conj(tgt) / norm, std::conj(piv) / norm;
    }
    const Eigen::Matrix2cd tdag = step.t.adjoint();
    Eigen::VectorXcd col_m = u.col(step.m);
    Eigen::VectorXcd col_n = u.col(step.n);
    u.col(step.m) = tdag(0, 0) * col_m + tdag(1, 0) * col_n;
    u.col(step.n) = tdag(0, 1) * col_m + tdag(1, 1) * col_n;
  }
  return step;
}

std::vector<NullOp> mesh_nulling_order(int n_modes, MeshOrdering ordering) {
  std::vector<NullOp> ops;
  const int n = n_modes;
  if (ordering == MeshOrdering::kTriangular) {
    for (int c = 0; c <= n - 2; ++c)
      for (int r = n - 1; r >= c + 1; --r)
        ops.push_back({r, c, NullPivot::kSameColumn, r - 1, true});
    return ops;
  }
  for (int k = 1; k <= n - 1; ++k) {
    if (k % 2 == 1) {
      for (int j = 0; j <= k - 1; ++j)
        ops.push_back({n - 1 - j, k - 1 - j, NullPivot::kSameRow, k - j, false});
    } else {
      for (int j = 1; j <= k; ++j)
        ops.push_back({n + j - k - 1, j - 1, NullPivot::kSameColumn, n + j - k - 2, true});
    }
  }
  return ops;
}

namespace {

double ue_step_norm(const std::vector<Eigen::Matrix2cd>& samples, int k) {
  return (samples[static_cast<std::size_t>(k) + 1] - samples[static_cast<std::size_t>(k)])
      .norm();
}

// Factor slot in netlist order plus the diagonal's position among them.
struct SweepLayout {
  std::vector<NullOp> ops;          // application order
  std::vector<int> netlist_slot;    // op index -> netlist position
  int diagonal_slot = 0;            // diagonal sits before this netlist position
};

SweepLayout sweep_layout(int n_modes, MeshOrdering ordering) {
  SweepLayout layout;
  layout.ops = mesh_nulling_order(n_modes, ordering);
  const int total = static_cast<int>(layout.ops.size());
  layout.netlist_slot.resize(static_cast<std::size_t>(total));
  // Left ops appear daggered, in application order, before the diagonal;
  // right ops appear undaggered after it, in reverse application order.
  int left_count = 0;
  for (const auto& op : layout.ops) left_count += op.left ? 1 : 0;
  int next_left = 0;
  int next_right = total - 1;
  for (int i = 0; i < total; ++i) {
    if (layout.ops[static_cast<std::size_t>(i)].left)
      layout.netlist_slot[static_cast<std::size_t>(i)] = next_left++;
    else
      layout.netlist_slot[static_cast<std::size_t>(i)] = next_right--;
  }
  layout.diagonal_slot = left_count;
  return layout;
}

}  // namespace

Eigen::MatrixXcd MeshNetlist::reconstruct(int k) const {
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(n_modes, n_modes);
  for (const auto& f : factors) u = u * f.embedded(n_modes, k);
  for (int m = 0; m < n_modes; ++m) u.col(m) *= unit_phase(residual_phases(k, m));
  return u;
}

MeshNetlist two_mode_decompose(const std::vector<Eigen::MatrixXcd>& u_grid,
                               const FrequencyGrid& grid, MeshOrdering ordering) {
  if (u_grid.empty() || static_cast<int>(u_grid.size()) != grid.size())
    throw ValidationError("two_mode_decompose: grid and matrices disagree");
  const int n = static_cast<int>(u_grid.front().rows());
  if (n < 2) throw ValidationError("two_mode_decompose: needs at least two modes");
  const SweepLayout layout = sweep_layout(n, ordering);
  const int total = static_cast<int>(layout.ops.size());
  const int points = grid.size();

  int anchor = 0;
  for (int k = 0; k < points; ++k)
    if (grid.at(k) == 0.0) anchor = k;

  std::vector<std::vector<Eigen::Matrix2cd>> blocks(
      static_cast<std::size_t>(total),
      std::vector<Eigen::Matrix2cd>(static_cast<std::size_t>(points)));
  std::vector<std::pair<int, int>> slot_modes(static_cast<std::size_t>(total));
  Eigen::MatrixXd residual(points, n);

  for (int k = 0; k < points; ++k) {
    Eigen::MatrixXcd work = u_grid[static_cast<std::size_t>(k)];
    if (static_cast<int>(work.rows()) != n || static_cast<int>(work.cols()) != n)
      throw ValidationError("two_mode_decompose: inconsistent matrix sizes");
    check_unitary(work, grid.at(k), true);

    for (int i = 0; i < total; ++i) {
      const NullOp& op = layout.ops[static_cast<std::size_t>(i)];
      const NullStep step = null_factor(work, op.row, op.col, op.pivot, op.partner);
      const int slot = layout.netlist_slot[static_cast<std::size_t>(i)];
      slot_modes[static_cast<std::size_t>(slot)] = {step.m, step.n};
      // Left ops enter the netlist as T^dag, right ops as T itself.
      blocks[static_cast<std::size_t>(slot)][static_cast<std::size_t>(k)] =
          op.left ? Eigen::Matrix2cd(step.t.adjoint()) : step.t;
    }

    // The nulling sweep leaves a unit-modulus diagonal.
    const double off = max_abs(Eigen::MatrixXcd(
        work - Eigen::MatrixXcd(work.diagonal().asDiagonal())));
    if (off > 1e-8) {
      std::ostringstream msg;
      msg << "two_mode_decompose: nulling left a non-diagonal remainder (" << off
          << ") at omega = " << grid.at(k);
      throw ValidationError(msg.str());
    }
    Eigen::VectorXcd diag = work.diagonal();

    // Fold diagonal phases into factor determinants, sweeping right through
    // the post-diagonal factors then left through the rest.
    auto absorb = [&](int slot, bool from_left) {
      const auto [fm, fn] = slot_modes[static_cast<std::size_t>(slot)];
      Eigen::Matrix2cd d2 = Eigen::Matrix2cd::Zero();
      d2(0, 0) = diag(fm);
      d2(1, 1) = diag(fn);
      auto& blk = blocks[static_cast<std::size_t>(slot)][static_cast<std::size_t>(k)];
      blk = from_left ? Eigen::Matrix2cd(d2 * blk) : Eigen::Matrix2cd(blk * d2);
      diag(fm) = 1.0;
      diag(fn) = 1.0;
    };
    for (int slot = layout.diagonal_slot; slot < total; ++slot) absorb(slot, true);
    for (int slot = layout.diagonal_slot - 1; slot >= 0; --slot) absorb(slot, false);
    for (int m = 0; m < n; ++m) residual(k, m) = std::arg(diag(m));
  }

  // Factors inherit smoothness from the input; an O(1) jump between
  // neighboring samples marks a discontinuity the mesh cannot realize.
  for (int slot = 0; slot < total; ++slot) {
    for (int k = 0; k + 1 < points; ++k) {
      const double step_norm =
          ue_step_norm(blocks[static_cast<std::size_t>(slot)], k);
      if (step_norm > 0.8) {
        std::ostringstream msg;
        msg << "two_mode_decompose: factor on modes ("
            << slot_modes[static_cast<std::size_t>(slot)].first + 1 << ", "
            << slot_modes[static_cast<std::size_t>(slot)].second + 1
            << ") varies discontinuously between omega = " << grid.at(k) << " and "
            << grid.at(k + 1) << " (step " << step_norm << ")";
        throw ValidationError(msg.str());
      }
    }
  }

  MeshNetlist netlist;
  netlist.ordering = ordering;
  netlist.grid = grid;
  netlist.n_modes = n;
  netlist.residual_phases = residual;
  for (int slot = 0; slot < total; ++slot) {
    bool is_identity = true;
    for (int k = 0; k < points && is_identity; ++k)
      is_identity = max_abs(Eigen::MatrixXcd(
                        blocks[static_cast<std::size_t>(slot)][static_cast<std::size_t>(k)] -
                        Eigen::Matrix2cd::Identity())) < kNullEntryFloor;
    if (is_identity) continue;  // entry was already null at every omega
    const auto [fm, fn] = slot_modes[static_cast<std::size_t>(slot)];
    netlist.factors.push_back(TwoLevelFactor::from_blocks(
        fm, fn, blocks[static_cast<std::size_t>(slot)], anchor));
  }
  return netlist;
}

Eigen::Matrix2cd MziStage::mzi_block(int k) const {
  const std::size_t i = static_cast<std::size_t>(k);
  const Complex det = unit_phase(phi[i]);
  const double c = std::cos(theta[i]);
  const double s = std::sin(theta[i]);
  Eigen::Matrix2cd blk;
  blk << det * c, -s, det * s, c;
  return blk;
}

Eigen::Matrix2cd MziStage::full_block(int k) const {
  const std::size_t i = static_cast<std::size_t>(k);
  Eigen::Matrix2cd blk = mzi_block(k);
  blk.row(0) *= unit_phase(alpha1[i]);
  blk.row(1) *= unit_phase(alpha2[i]);
  return blk;
}

MziStage mzi_factorize(const TwoLevelFactor& factor) {
  const std::size_t points = factor.a.size();
  MziStage stage;
  stage.m = factor.m;
  stage.n = factor.n;
  stage.theta.resize(points);
  stage.phi.resize(points);
  stage.alpha1.resize(points);
  stage.alpha2.resize(points);
  for (std::size_t k = 0; k < points; ++k) {
    const Complex a = factor.a[k];
    const Complex b = factor.b[k];
    const double abs_a = std::abs(a);
    const double abs_b = std::abs(b);
    stage.theta[k] = std::atan2(abs_b, abs_a);
    if (abs_b < kNullEntryFloor) {
      stage.alpha2[k] = -std::arg(a);
      stage.alpha1[k] = factor.phi[k] + std::arg(a);
      stage.phi[k] = 0.0;
    } else if (abs_a < kNullEntryFloor) {
      stage.alpha1[k] = std::arg(b);
      stage.alpha2[k] = factor.phi[k] - std::arg(b);
      stage.phi[k] = 0.0;
    } else {
      stage.alpha1[k] = std::arg(b);
      stage.alpha2[k] = -std::arg(a);
      stage.phi[k] = factor.phi[k] + std::arg(a) - std::arg(b);
    }
  }
  stage.phi = unwrap_phases(std::move(stage.phi));
  stage.alpha1 = unwrap_phases(std::move(stage.alpha1));
  stage.alpha2 = unwrap_phases(std::move(stage.alpha2));
  return stage;
}

Eigen::MatrixXcd MziMesh::reconstruct(int k) const {
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(n_modes, n_modes);
  for (const auto& s : stages) {
    Eigen::MatrixXcd emb = Eigen::MatrixXcd::Identity(n_modes, n_modes);
    const Eigen::Matrix2cd blk = s.mzi_block(k);
    emb(s.m, s.m) = blk(0, 0);
    emb(s.m, s.n) = blk(0, 1);
    emb(s.n, s.m) = blk(1, 0);
    emb(s.n, s.n) = blk(1, 1);
    u = u * emb;
  }
  for (int m = 0; m < n_modes; ++m) u.row(m) *= unit_phase(global_phases(k, m));
  return u;
}

MziMesh to_mzi_mesh(const MeshNetlist& netlist) {
  MziMesh mesh;
  mesh.grid = netlist.grid;
  mesh.n_modes = netlist.n_modes;
  const int points = netlist.grid.size();
  mesh.global_phases = Eigen::MatrixXd::Zero(points, netlist.n_modes);
  for (const auto& f : netlist.factors) mesh.stages.push_back(mzi_factorize(f));

  // Push external phases leftward: M(th, ph) diag(e^{i dm}, e^{i dn}) =
  // e^{i dn} M(th, ph + dm - dn), so a pending diagonal propagates through
  // each stage turning its differential part into the internal phase.
  for (int k = 0; k < points; ++k) {
    Eigen::VectorXd pending = netlist.residual_phases.row(k).transpose();
    for (int s = static_cast<int>(mesh.stages.size()) - 1; s >= 0; --s) {
      MziStage& stage = mesh.stages[static_cast<std::size_t>(s)];
      const std::size_t i = static_cast<std::size_t>(k);
      const double pm = pending(stage.m);
      const double pn = pending(stage.n);
      stage.phi[i] += pm - pn;
      // The emitted common phase e^{i pn} joins this stage's external phases
      // to the left of its MZI.
      pending(stage.m) = stage.alpha1[i] + pn;
      pending(stage.n) = stage.alpha2[i] + pn;
    }
    mesh.global_phases.row(k) = pending.transpose();
  }
  for (auto& stage : mesh.stages) {
    for (std::size_t k = 0; k < stage.alpha1.size(); ++k) {
      stage.alpha1[k] = 0.0;
      stage.alpha2[k] = 0.0;
    }
    stage.phi = unwrap_phases(std::move(stage.phi));
  }
  return mesh;
}

double CavityChain::phase(double omega) const {
  double total = constant;
  for (const auto& s : stages) total += 2.0 * std::atan2(omega + s.delta, s.gamma);
  return total;
}

namespace {

double chain_mean_square(const std::vector<double>& target,
                         const std::vector<double>& omegas,
                         const std::vector<double>& params, double* constant_out) {
  const std::size_t n_cav = params.size() / 2;
  double mean = 0.0;
  std::vector<double> model(omegas.size(), 0.0);
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    double ph = 0.0;
    for (std::size_t c = 0; c < n_cav; ++c) {
      const double gamma = std::max(std::abs(params[2 * c]), 1e-9);
      ph += 2.0 * std::atan2(omegas[k] + params[2 * c + 1], gamma);
    }
    model[k] = ph;
    mean += (target[k] - ph) / static_cast<double>(omegas.size());
  }
  double ms = 0.0;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    const double r = target[k] - model[k] - mean;
    ms += r * r / static_cast<double>(omegas.size());
  }
  if (constant_out) *constant_out = mean;
  return ms;
}

}  // namespace

CavityChain fit_cavity_chain(const std::vector<double>& target_phase,
                             const std::vector<double>& omegas, int n_cavities,
                             std::uint64_t seed) {
  if (target_phase.size() != omegas.size() || omegas.empty())
    throw ValidationError("fit_cavity_chain: target and grid sizes differ");
  if (n_cavities < 1) throw ValidationError("fit_cavity_chain: need n_cavities >= 1");

  const double mean =
      std::accumulate(target_phase.begin(), target_phase.end(), 0.0) /
      static_cast<double>(target_phase.size());
  double variance = 0.0;
  for (double t : target_phase) variance += (t - mean) * (t - mean);
  variance /= static_cast<double>(target_phase.size());
  if (variance < 1e-20) {
    // Constant target: realizable as a frequency-independent phase alone.
    CavityChain flat;
    flat.constant = mean;
    flat.fit_residual = 0.0;
    flat.converged = true;
    return flat;
  }

  const double lo = omegas.front(), hi = omegas.back();
  std::vector<double> best_prev;
  CavityChain result;
  CavityChain best;
  best.fit_residual = std::numeric_limits<double>::infinity();
  for (int count = 1; count <= n_cavities; ++count) {
    Objective objective = [&](const std::vector<double>& p) {
      return chain_mean_square(target_phase, omegas, p, nullptr);
    };
    auto sample = [&](Rng& rng) {
      std::vector<double> p;
      for (int c = 0; c < count; ++c) {
        p.push_back(rng.uniform(0.1, 0.5 * (hi - lo) + 0.1));
        p.push_back(rng.uniform(-hi, -lo));
      }
      return p;
    };
    auto step_for = [&](const std::vector<double>& p) {
      return std::vector<double>(p.size(), 0.25 * (hi - lo) / count);
    };
    std::vector<std::vector<double>> warm;
    // Evenly spread centers.
    std::vector<double> spread;
    for (int c = 0; c < count; ++c) {
      spread.push_back(0.3 * (hi - lo) / count);
      spread.push_back(-(lo + (hi - lo) * (c + 1) / (count + 1.0)));
    }
    warm.push_back(spread);
    if (!best_prev.empty()) {
      // Nested warm start: previous stages plus one wide (phase-flat) cavity.
      std::vector<double> nested = best_prev;
      nested.push_back(1e4);
      nested.push_back(0.0);
      warm.push_back(nested);
    }
    MultiStartOptions ms;
    ms.seed = seed + static_cast<std::uint64_t>(count);
    ms.starts = 12;
    ms.local.max_iterations = 3000;
    ms.local.restarts = 4;
    ms.local.f_tolerance = 1e-24;
    const NelderMeadResult found = multi_start_minimize(objective, sample, step_for, warm, ms);
    best_prev = found.x;

    result.stages.clear();
    for (int c = 0; c < count; ++c)
      result.stages.push_back(
          {std::max(std::abs(found.x[static_cast<std::size_t>(2 * c)]), 1e-9),
           found.x[static_cast<std::size_t>(2 * c) + 1]});
    chain_mean_square(target_phase, omegas, found.x, &result.constant);
    result.converged = found.converged;
    double sup = 0.0;
    for (std::size_t k = 0; k < omegas.size(); ++k)
      sup = std::max(sup, std::abs(result.phase(omegas[k]) - target_phase[k]));
    result.fit_residual = sup;
    // Nested fits never get worse; extra stages that do not help are dropped.
    if (result.fit_residual <= best.fit_residual) best = result;
  }
  return best;
}

NetlistReport netlist_verify(const MeshNetlist& netlist,
                             const std::vector<Eigen::MatrixXcd>& u_grid) {
  if (static_cast<int>(u_grid.size()) != netlist.grid.size())
    throw ValidationError("netlist_verify: grid mismatch");
  NetlistReport report;
  report.factor_count = netlist.factor_count();
  const int points = netlist.grid.size();
  for (int k = 0; k < points; ++k) {
    const Eigen::MatrixXcd recon = netlist.reconstruct(k);
    report.max_error = std::max(
        report.max_error, max_abs(Eigen::MatrixXcd(recon - u_grid[static_cast<std::size_t>(k)])));
    Complex det_prod(1.0, 0.0);
    for (const auto& f : netlist.factors) det_prod *= unit_phase(f.phi[static_cast<std::size_t>(k)]);
    report.det_error = std::max(
        report.det_error,
        std::abs(det_prod - u_grid[static_cast<std::size_t>(k)].determinant()));
    report.max_residual_phase = std::max(
        report.max_residual_phase, netlist.residual_phases.row(k).cwiseAbs().maxCoeff());
  }
  for (int k = 0; k + 1 < points; ++k) {
    const double dw = netlist.grid.at(k + 1) - netlist.grid.at(k);
    for (const auto& f : netlist.factors) {
      const double step_norm = (f.block(k + 1) - f.block(k)).norm();
      report.smoothness = std::max(report.smoothness, step_norm / dw);
    }
  }
  return report;
}

}  // namespace imelab
