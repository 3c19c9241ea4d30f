#include "imelab/spectra.hpp"

#include <cmath>
#include <sstream>

namespace imelab {

double vacuum_level() {
  static const double v = 1.0 / (2.0 * std::sqrt(2.0 * M_PI));
  return v;
}

double to_db(double linear) { return 10.0 * std::log10(linear / vacuum_level()); }

SpectralCovariance spectral_covariance(const TransferGrid& transfer) {
  if (!transfer.grid.symmetric)
    throw ValidationError("spectral_covariance: needs a symmetric grid (S(-omega) required)");
  const double norm = 1.0 / (2.0 * std::sqrt(2.0 * M_PI));
  SpectralCovariance out;
  out.grid = transfer.grid;
  out.n_modes = transfer.n_modes;
  out.sigma.resize(transfer.s.size());
  for (int k = 0; k < transfer.grid.size(); ++k)
    out.sigma[static_cast<std::size_t>(k)] =
        norm * transfer.at(k) * transfer.at_mirror(k).transpose();
  return out;
}

LocalOscillator LocalOscillator::from_vector(Eigen::VectorXd q) {
  if (q.size() < 2 || q.size() % 2 != 0)
    throw ValidationError("LO: length must be 2N");
  const double norm = q.norm();
  if (std::abs(norm - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "LO: norm " << norm << " is not 1 within 1e-12";
    throw ValidationError(msg.str());
  }
  return LocalOscillator{std::move(q)};
}

LocalOscillator LocalOscillator::from_angles(const std::vector<double>& angles,
                                             int n_modes) {
  const int n = n_modes;
  if (static_cast<int>(angles.size()) != 2 * n - 1) {
    std::ostringstream msg;
    msg << "LO: expected " << 2 * n - 1 << " angles for " << n << " modes, got "
        << angles.size();
    throw ValidationError(msg.str());
  }
  Eigen::VectorXd rho = Eigen::VectorXd::Ones(n);
  for (int m = 0; m < n - 1; ++m) {
    const double a = angles[static_cast<std::size_t>(n + m)];
    rho(m) *= std::cos(a);
    for (int j = m + 1; j < n; ++j) rho(j) *= std::sin(a);
  }
  Eigen::VectorXd q(2 * n);
  for (int m = 0; m < n; ++m) {
    q(m) = rho(m) * std::cos(angles[static_cast<std::size_t>(m)]);
    q(n + m) = rho(m) * std::sin(angles[static_cast<std::size_t>(m)]);
  }
  return LocalOscillator{std::move(q)};
}

NoiseSpectrum noise_spectral_power(const SpectralCovariance& sigma,
                                   const LocalOscillator& lo) {
  if (lo.n_modes() != sigma.n_modes)
    throw ValidationError("noise_spectral_power: LO and sigma dimensions differ");
  const Eigen::VectorXcd q = lo.q.cast<Complex>();
  NoiseSpectrum out;
  out.grid = sigma.grid;
  out.values.resize(sigma.sigma.size());
  out.db.resize(sigma.sigma.size());
  for (std::size_t k = 0; k < sigma.sigma.size(); ++k) {
    const Complex z = q.dot(sigma.sigma[k] * q);  // q^dag sigma q, q real
    if (std::abs(z.imag()) > kNoiseImagTol) {
      std::ostringstream msg;
      msg << "noise spectral power has imaginary residue " << z.imag()
          << " at omega = " << sigma.grid.at(static_cast<int>(k))
          << "; upstream covariance is inconsistent";
      throw ValidationError(msg.str());
    }
    out.values[k] = z.real();
    out.db[k] = to_db(z.real());
  }
  return out;
}

HdSweep hd_sweep(const SpectralCovariance& sigma,
                 const std::vector<LocalOscillator>& family) {
  if (family.empty()) throw ValidationError("hd_sweep: empty LO family");
  HdSweep out;
  out.spectra.reserve(family.size());
  for (const auto& lo : family) out.spectra.push_back(noise_spectral_power(sigma, lo));
  out.envelope.grid = sigma.grid;
  const std::size_t points = out.spectra.front().values.size();
  out.envelope.values.assign(points, 0.0);
  out.envelope.db.resize(points);
  for (std::size_t k = 0; k < points; ++k) {
    double best = out.spectra.front().values[k];
    for (const auto& spec : out.spectra) best = std::min(best, spec.values[k]);
    out.envelope.values[k] = best;
    out.envelope.db[k] = to_db(best);
  }
  return out;
}

std::vector<LocalOscillator> lo_sweep_family(int n_modes, double resolution_deg) {
  if (!(resolution_deg > 0.0))
    throw ValidationError("lo_sweep_family: resolution must be positive");
  if (n_modes > 2)
    throw ValidationError(
        "lo_sweep_family: dense product sweeps are only provided for N <= 2; "
        "pass an explicit LO list instead");
  const double step = resolution_deg * M_PI / 180.0;
  // Q and -Q give the same noise power, so a half turn suffices for phases.
  auto axis = [&](double span) {
    std::vector<double> vals;
    const int count = static_cast<int>(std::floor(span / step + 1e-9)) + 1;
    vals.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) vals.push_back(i * step);
    return vals;
  };
  std::vector<LocalOscillator> family;
  if (n_modes == 1) {
    for (double a : axis(M_PI)) family.push_back(LocalOscillator::from_angles({a}, 1));
    return family;
  }
  const std::vector<double> phases = axis(M_PI);
  const std::vector<double> mags = axis(M_PI / 2.0);
  for (double p1 : phases)
    for (double p2 : phases)
      for (double m1 : mags)
        family.push_back(LocalOscillator::from_angles({p1, p2, m1}, 2));
  return family;
}

std::vector<double> optimal_real_lo_power(const SpectralCovariance& sigma) {
  std::vector<double> out(sigma.sigma.size());
  for (std::size_t k = 0; k < sigma.sigma.size(); ++k) {
    const Eigen::MatrixXd re = sigma.sigma[k].real();
    const Eigen::MatrixXd sym = 0.5 * (re + re.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    out[k] = eig.eigenvalues().minCoeff();
  }
  return out;
}

}  // namespace imelab
