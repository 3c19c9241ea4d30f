#pragma once

#include <vector>

#include "imelab/gaussian_dynamics.hpp"

namespace imelab {

// All spectra keep the literal normalization of the spectral covariance,
// sigma = S S^T(-omega) / (2 sqrt(2 pi)), so vacuum noise sits at this level
// and at 0 dB.
double vacuum_level();
double to_db(double linear);

inline constexpr double kSigmaTol = 1e-10;
// |Im Q^T sigma Q| above this is a hard error (the quadratic form is exactly
// real for Hermitian conjugate-symmetric sigma and real Q).
inline constexpr double kNoiseImagTol = 1e-12;
// Default angular resolution of LO sweep families, degrees.
inline constexpr double kDefaultSweepResolutionDeg = 0.5;

// Spectral covariance of the output state, sigma(omega) = S(omega)
// S^T(-omega) / (2 sqrt(2 pi)); Hermitian, conjugate symmetric, positive
// semidefinite.
struct SpectralCovariance {
  FrequencyGrid grid;
  int n_modes = 0;
  std::vector<Eigen::MatrixXcd> sigma;

  const Eigen::MatrixXcd& at(int k) const { return sigma[static_cast<std::size_t>(k)]; }
};

SpectralCovariance spectral_covariance(const TransferGrid& transfer);

// Real unit vector of LO quadrature weights, Q = (Re alpha | Im alpha).
struct LocalOscillator {
  Eigen::VectorXd q;

  int n_modes() const { return static_cast<int>(q.size()) / 2; }

  // Validates unit norm within 1e-12.
  static LocalOscillator from_vector(Eigen::VectorXd q);

  // Hyperspherical parameterization, unit norm by construction.  angles =
  // [phase_1..phase_N, mag_1..mag_{N-1}]: mode m carries complex amplitude
  // rho_m exp(i phase_m) with magnitudes rho on the unit sphere,
  //   rho_1 = cos(mag_1), rho_2 = sin(mag_1) cos(mag_2), ...
  // For N = 1 this is Q = (cos theta | sin theta); for N = 2 it reproduces
  // the three-angle two-color form with (theta_1, theta_2, theta_3) =
  // (phase_1, mag_1, phase_2).
  static LocalOscillator from_angles(const std::vector<double>& angles, int n_modes);
};

struct NoiseSpectrum {
  FrequencyGrid grid;
  std::vector<double> values;  // linear, absolute normalization
  std::vector<double> db;      // 10 log10(value / vacuum_level)
};

// Homodyne noise spectral power Sigma_Q(omega) = Q^T sigma(omega) Q.
NoiseSpectrum noise_spectral_power(const SpectralCovariance& sigma,
                                   const LocalOscillator& lo);

struct HdSweep {
  std::vector<NoiseSpectrum> spectra;  // one per LO, family order
  NoiseSpectrum envelope;              // pointwise min over the family
};

HdSweep hd_sweep(const SpectralCovariance& sigma,
                 const std::vector<LocalOscillator>& family);

// Uniform angle grids with endpoints included, resolution in degrees; the
// full 2N-1 dimensional product family.  Feasible for N <= 2.
std::vector<LocalOscillator> lo_sweep_family(int n_modes, double resolution_deg);

// Exact envelope over all real unit LOs: min_Q Q^T sigma Q = lambda_min(Re
// sigma), per grid point (linear, absolute normalization).
std::vector<double> optimal_real_lo_power(const SpectralCovariance& sigma);

}  // namespace imelab
