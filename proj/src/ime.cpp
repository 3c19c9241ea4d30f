#include "imelab/ime.hpp"

#include <cmath>
#include <sstream>

#include "imelab/nelder_mead.hpp"

namespace imelab {

ImeStage ImeStage::make(Eigen::MatrixXcd g, Eigen::VectorXd gamma) {
  const int n = static_cast<int>(gamma.size());
  // Reuses the system validation; F = 0 is the passivity requirement.
  QuadraticSystem sys = QuadraticSystem::make(
      std::move(g), Eigen::MatrixXcd::Zero(n, n), std::move(gamma));
  return ImeStage{std::move(sys.g), std::move(sys.gamma)};
}

QuadraticSystem ImeStage::as_system() const {
  const int n = n_modes();
  return QuadraticSystem::make(g, Eigen::MatrixXcd::Zero(n, n), gamma);
}

TransferGrid ime_transfer(const ImeChain& chain, const FrequencyGrid& grid) {
  if (chain.stages.empty()) throw ValidationError("ime_transfer: empty chain");
  if (!grid.symmetric) throw ValidationError("ime_transfer: needs a symmetric grid");
  const int n = chain.n_modes();
  for (const auto& stage : chain.stages)
    if (stage.n_modes() != n)
      throw ValidationError("ime_transfer: stages have differing mode counts");
  TransferGrid total = transfer_function(chain.stages.front().as_system(), grid);
  for (std::size_t s = 1; s < chain.stages.size(); ++s)
    total = compose(transfer_function(chain.stages[s].as_system(), grid), total);
  return total;
}

GeneralizedLO generalized_lo(const LocalOscillator& lo, const TransferGrid& ime) {
  if (lo.n_modes() != ime.n_modes)
    throw ValidationError("generalized_lo: LO and IME dimensions differ");
  GeneralizedLO out;
  out.grid = ime.grid;
  out.n_modes = ime.n_modes;
  out.qtilde.resize(ime.s.size());
  const Eigen::VectorXcd q = lo.q.cast<Complex>();
  for (std::size_t k = 0; k < ime.s.size(); ++k) {
    out.qtilde[k] = ime.s[k].adjoint() * q;
    const double norm = out.qtilde[k].norm();
    if (std::abs(norm - 1.0) > 1e-10) {
      std::ostringstream msg;
      msg << "generalized_lo: |qtilde| = " << norm << " at omega = "
          << ime.grid.at(static_cast<int>(k)) << "; IME transfer is not passive";
      throw ValidationError(msg.str());
    }
  }
  return out;
}

std::vector<double> overlap_spectrum(const GeneralizedLO& qtilde,
                                     const MorphingDecomposition& decomp,
                                     int target_index) {
  if (target_index < 1 || target_index > 2 * decomp.n_modes)
    throw ValidationError("overlap_spectrum: target index out of range");
  if (!qtilde.grid.same_as(decomp.grid))
    throw ValidationError("overlap_spectrum: grids differ");
  std::vector<double> out(qtilde.qtilde.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const Complex z = qtilde.qtilde[k].dot(decomp.u[k].col(target_index - 1));
    out[k] = std::norm(z);
  }
  return out;
}

NoiseSpectrum detected_spectrum(const LocalOscillator& lo, const TransferGrid& ime,
                                const SpectralCovariance& source_sigma) {
  if (!ime.grid.same_as(source_sigma.grid))
    throw ValidationError("detected_spectrum: IME and covariance grids differ");
  if (lo.n_modes() != source_sigma.n_modes || ime.n_modes != source_sigma.n_modes)
    throw ValidationError("detected_spectrum: dimension mismatch");
  const Eigen::VectorXcd q = lo.q.cast<Complex>();
  NoiseSpectrum out;
  out.grid = source_sigma.grid;
  out.values.resize(source_sigma.sigma.size());
  out.db.resize(source_sigma.sigma.size());
  for (int k = 0; k < source_sigma.grid.size(); ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    // Covariance behind the IME, then the plain HD quadratic form.
    const Eigen::MatrixXcd sigma_prime =
        ime.at(k) * source_sigma.sigma[i] * ime.at_mirror(k).transpose();
    const Complex direct = q.dot(sigma_prime * q);
    // Generalized-LO route.
    const Eigen::VectorXcd qt = ime.at(k).adjoint() * q;
    const Complex via_lo = qt.dot(source_sigma.sigma[i] * qt);
    if (std::abs(direct - via_lo) > 1e-10 * std::max(1.0, std::abs(direct))) {
      std::ostringstream msg;
      msg << "detected_spectrum: evaluation paths disagree by "
          << std::abs(direct - via_lo) << " at omega = " << source_sigma.grid.at(k);
      throw ValidationError(msg.str());
    }
    if (std::abs(direct.imag()) > kNoiseImagTol) {
      std::ostringstream msg;
      msg << "detected_spectrum: imaginary residue " << direct.imag()
          << " at omega = " << source_sigma.grid.at(k);
      throw ValidationError(msg.str());
    }
    out.values[i] = direct.real();
    out.db[i] = to_db(direct.real());
  }
  return out;
}

MatchReport make_match_report(const GeneralizedLO& qtilde,
                              const MorphingDecomposition& decomp, int target_index,
                              const NoiseSpectrum& detected, const Band& band,
                              double tol_db) {
  MatchReport report;
  report.grid = detected.grid;
  report.overlap = overlap_spectrum(qtilde, decomp, target_index);
  report.detected_db = detected.db;
  report.band = band;
  report.tol_db = tol_db;
  report.target_db.resize(detected.db.size());
  for (int k = 0; k < detected.grid.size(); ++k)
    report.target_db[static_cast<std::size_t>(k)] =
        20.0 * std::log10(decomp.d_at(k)(target_index - 1));
  const std::vector<int> in_band = detected.grid.indices_in(band.lo, band.hi);
  if (!in_band.empty()) {
    int hits = 0;
    for (int k : in_band)
      if (std::abs(report.detected_db[static_cast<std::size_t>(k)] -
                   report.target_db[static_cast<std::size_t>(k)]) <= tol_db)
        ++hits;
    report.band_fraction = static_cast<double>(hits) / static_cast<double>(in_band.size());
  }
  return report;
}

// ---------------------------------------------------------------------------

ImeParameterization::ImeParameterization(int n_modes, ImeTopology topology, bool with_lo)
    : n_modes_(n_modes), topology_(topology), with_lo_(with_lo) {
  const int pairs = n_modes * (n_modes - 1) / 2;
  stage_count_ = (topology.equal_damping ? 1 : n_modes) + n_modes + 2 * pairs;
  count_ = topology.n_stages * stage_count_ + (with_lo ? 2 * n_modes - 1 : 0);
}

ImeChain ImeParameterization::chain_from(const std::vector<double>& params) const {
  ImeChain chain;
  const int n = n_modes_;
  int at = 0;
  for (int s = 0; s < topology_.n_stages; ++s) {
    Eigen::VectorXd gamma(n);
    if (topology_.equal_damping) {
      gamma.setConstant(params[static_cast<std::size_t>(at)]);
      ++at;
    } else {
      for (int m = 0; m < n; ++m) gamma(m) = params[static_cast<std::size_t>(at++)];
    }
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
    for (int m = 0; m < n; ++m) g(m, m) = params[static_cast<std::size_t>(at++)];
    for (int m = 0; m < n; ++m) {
      for (int j = m + 1; j < n; ++j) {
        const double theta = params[static_cast<std::size_t>(at++)];
        const double phi = params[static_cast<std::size_t>(at++)];
        g(m, j) = theta * std::exp(Complex(0.0, -phi));
        g(j, m) = theta * std::exp(Complex(0.0, phi));
      }
    }
    chain.stages.push_back(ImeStage::make(std::move(g), std::move(gamma)));
  }
  return chain;
}

LocalOscillator ImeParameterization::lo_from(const std::vector<double>& params) const {
  if (!with_lo_) throw ValidationError("parameterization has no LO block");
  std::vector<double> angles(params.end() - (2 * n_modes_ - 1), params.end());
  return LocalOscillator::from_angles(angles, n_modes_);
}

std::vector<std::string> ImeParameterization::parameter_labels() const {
  std::vector<std::string> labels;
  for (int s = 1; s <= topology_.n_stages; ++s) {
    std::ostringstream prefix;
    prefix << "stage" << s << ".";
    if (topology_.equal_damping) {
      labels.push_back(prefix.str() + "gamma");
    } else {
      for (int m = 1; m <= n_modes_; ++m)
        labels.push_back(prefix.str() + "gamma_" + std::to_string(m));
    }
    for (int m = 1; m <= n_modes_; ++m)
      labels.push_back(prefix.str() + "delta_" + std::to_string(m));
    for (int m = 1; m <= n_modes_; ++m) {
      for (int j = m + 1; j <= n_modes_; ++j) {
        const std::string pair = std::to_string(m) + std::to_string(j);
        labels.push_back(prefix.str() + "theta_" + pair);
        labels.push_back(prefix.str() + "phi_" + pair);
      }
    }
  }
  if (with_lo_)
    for (int i = 1; i <= 2 * n_modes_ - 1; ++i)
      labels.push_back("lo.angle_" + std::to_string(i));
  return labels;
}

std::vector<double> ImeParameterization::pack(const ImeChain& chain,
                                              const std::vector<double>& lo_angles) const {
  std::vector<double> params;
  for (const auto& stage : chain.stages) {
    if (topology_.equal_damping) {
      params.push_back(stage.gamma(0));
    } else {
      for (int m = 0; m < n_modes_; ++m) params.push_back(stage.gamma(m));
    }
    for (int m = 0; m < n_modes_; ++m) params.push_back(stage.g(m, m).real());
    for (int m = 0; m < n_modes_; ++m) {
      for (int j = m + 1; j < n_modes_; ++j) {
        params.push_back(std::abs(stage.g(m, j)));
        params.push_back(-std::arg(stage.g(m, j)));
      }
    }
  }
  if (with_lo_) params.insert(params.end(), lo_angles.begin(), lo_angles.end());
  if (static_cast<int>(params.size()) != count_)
    throw ValidationError("pack: parameter count mismatch");
  return params;
}

namespace {

// Shared objective machinery for optimize_ime and ime_objective_value.
struct ObjectiveContext {
  ImeParameterization param;
  FrequencyGrid eval_grid;            // non-negative half of the band, decimated
  double step = 0.0;                  // eval grid spacing (uniform)
  std::vector<Eigen::MatrixXcd> sigma;     // source covariance on eval grid
  std::vector<Eigen::MatrixXcd> u;         // supermode matrices on eval grid
  std::vector<double> target_db;
  int target_index = 0;
  ImeObjective kind = ImeObjective::kDbDeviation;
  int n_modes = 0;
  int n_stages = 1;

  ObjectiveContext(const QuadraticSystem& source, int target, const ImeTopology& topo,
                   const Band& band, ImeObjective objective, const FrequencyGrid& grid,
                   int max_band_points)
      : param(source.n_modes, topo, objective != ImeObjective::kStationary),
        target_index(target),
        kind(objective),
        n_modes(source.n_modes),
        n_stages(topo.n_stages) {
    if (target < 1 || target > 2 * source.n_modes)
      throw ValidationError("optimize_ime: target index out of range");
    if (!(band.lo < band.hi)) throw ValidationError("optimize_ime: empty band");

    const TransferGrid transfer = transfer_function(source, grid);
    const SpectralCovariance cov = spectral_covariance(transfer);
    const MorphingDecomposition decomp = continue_decomposition(transfer);

    std::vector<int> in_band = grid.indices_in(std::max(band.lo, 0.0), band.hi);
    if (in_band.empty()) throw ValidationError("optimize_ime: band misses the grid");
    int stride = 1;
    const int limit = std::max(2, (max_band_points + 1) / 2);
    while (static_cast<int>(in_band.size()) / stride > limit) ++stride;

    std::vector<double> omegas;
    for (std::size_t i = 0; i < in_band.size(); i += static_cast<std::size_t>(stride)) {
      const int k = in_band[i];
      omegas.push_back(grid.at(k));
      sigma.push_back(cov.sigma[static_cast<std::size_t>(k)]);
      u.push_back(decomp.u[static_cast<std::size_t>(k)]);
      target_db.push_back(20.0 * std::log10(decomp.d_at(k)(target - 1)));
    }
    eval_grid = FrequencyGrid::from_points(std::move(omegas), false);
    step = eval_grid.size() > 1 ? eval_grid.at(1) - eval_grid.at(0) : 1.0;
  }

  // Composite IME transfer on the evaluation grid.
  std::vector<Eigen::MatrixXcd> stages_transfer(const ImeChain& chain) const {
    TransferGrid total = transfer_function(chain.stages.front().as_system(), eval_grid);
    for (std::size_t s = 1; s < chain.stages.size(); ++s)
      total = compose(transfer_function(chain.stages[s].as_system(), eval_grid), total);
    return std::move(total.s);
  }

  double operator()(const std::vector<double>& params) const {
    // Keep stage dampings physical; everything else is unconstrained.
    const int per_stage = param.stage_parameter_count();
    const int gammas = per_stage - n_modes - n_modes * (n_modes - 1);
    for (int s = 0; s < n_stages; ++s) {
      for (int gidx = 0; gidx < gammas; ++gidx) {
        const double gval = params[static_cast<std::size_t>(s * per_stage + gidx)];
        if (!(gval >= kMinStageDamping)) return 1e7 + 1e3 * std::abs(gval - kMinStageDamping);
      }
    }
    double obj = 0.0;
    const ImeChain chain = param.chain_from(params);
    const std::vector<Eigen::MatrixXcd> s_ime = stages_transfer(chain);
    const int points = eval_grid.size();
    if (kind == ImeObjective::kStationary) {
      for (int k = 0; k + 1 < points; ++k) {
        const Eigen::MatrixXcd diff =
            s_ime[static_cast<std::size_t>(k + 1)] * u[static_cast<std::size_t>(k + 1)] -
            s_ime[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(k)];
        obj += diff.squaredNorm() / (step * step);
      }
      obj /= std::max(1, points - 1);
    } else {
      const Eigen::VectorXcd q = param.lo_from(params).q.cast<Complex>();
      for (int k = 0; k < points; ++k) {
        const std::size_t i = static_cast<std::size_t>(k);
        const Eigen::VectorXcd qt = s_ime[i].adjoint() * q;
        if (kind == ImeObjective::kDbDeviation) {
          const double power = qt.dot(sigma[i] * qt).real();
          const double dev = to_db(power) - target_db[i];
          obj += dev * dev;
        } else {
          obj -= std::norm(qt.dot(u[i].col(target_index - 1)));
        }
      }
      obj /= points;
    }
    return std::isfinite(obj) ? obj : 1e8;
  }
};

}  // namespace

double ime_objective_value(const QuadraticSystem& source, int target_index,
                           const ImeTopology& topology, const Band& band,
                           ImeObjective objective, const FrequencyGrid& grid,
                           const std::vector<double>& params, int max_band_points) {
  const ObjectiveContext ctx(source, target_index, topology, band, objective, grid,
                             max_band_points);
  if (static_cast<int>(params.size()) != ctx.param.parameter_count())
    throw ValidationError("ime_objective_value: wrong parameter count");
  return ctx(params);
}

OptimizeImeResult optimize_ime(const QuadraticSystem& source, int target_index,
                               const ImeTopology& topology, const Band& band,
                               ImeObjective objective, const OptimizeOptions& options,
                               const FrequencyGrid& grid) {
  if (!is_stable(source)) throw ValidationError("optimize_ime: source system is unstable");
  if (topology.n_stages < 1) throw ValidationError("optimize_ime: needs at least one stage");

  const ObjectiveContext ctx(source, target_index, topology, band, objective, grid,
                             options.max_band_points);
  const int n = source.n_modes;
  const int pairs = n * (n - 1) / 2;

  auto sample = [&](Rng& rng) {
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(ctx.param.parameter_count()));
    for (int s = 0; s < topology.n_stages; ++s) {
      const int gammas = topology.equal_damping ? 1 : n;
      for (int i = 0; i < gammas; ++i) x.push_back(rng.uniform(0.2, kDampingBoxHi));
      for (int i = 0; i < n; ++i) x.push_back(rng.uniform(-kDetuningBox, kDetuningBox));
      for (int i = 0; i < pairs; ++i) {
        x.push_back(rng.uniform(0.0, kCouplingBoxHi));
        x.push_back(rng.uniform(0.0, 2.0 * M_PI));
      }
    }
    if (objective != ImeObjective::kStationary)
      for (int i = 0; i < 2 * n - 1; ++i) x.push_back(rng.uniform(0.0, 2.0 * M_PI));
    return x;
  };
  auto step_for = [&](const std::vector<double>& x) {
    std::vector<double> step(x.size(), 0.4);
    return step;
  };

  MultiStartOptions ms;
  ms.seed = options.seed;
  ms.starts = options.multi_starts;
  ms.threads = options.threads;
  ms.local = options.local;
  for (const auto& warm : options.warm_starts)
    if (static_cast<int>(warm.size()) != ctx.param.parameter_count())
      throw ValidationError("optimize_ime: warm start has wrong parameter count");
  const NelderMeadResult found =
      multi_start_minimize(std::cref(ctx), sample, step_for, options.warm_starts, ms);

  OptimizeImeResult out;
  out.parameters = found.x;
  out.objective = found.f;
  out.converged = found.converged;
  out.seed = options.seed;
  out.objective_kind = objective;
  out.topology = topology;
  out.target_index = target_index;
  out.band = band;
  out.chain = ctx.param.chain_from(found.x);
  out.lo = objective != ImeObjective::kStationary
               ? ctx.param.lo_from(found.x)
               : LocalOscillator::from_angles(std::vector<double>(2 * n - 1, 0.0), n);

  const TransferGrid source_transfer = transfer_function(source, grid);
  const SpectralCovariance cov = spectral_covariance(source_transfer);
  const MorphingDecomposition decomp = continue_decomposition(source_transfer);
  const TransferGrid ime = ime_transfer(out.chain, grid);
  const NoiseSpectrum detected = detected_spectrum(out.lo, ime, cov);
  const GeneralizedLO qtilde = generalized_lo(out.lo, ime);
  out.report = make_match_report(qtilde, decomp, target_index, detected, band,
                                 options.tol_db);
  return out;
}

}  // namespace imelab
