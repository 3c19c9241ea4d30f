#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imelab/spectra.hpp"
#include "test_support.hpp"

using namespace imelab;
using imelab::testing::random_stable_system;
using imelab::testing::random_unit_lo;

namespace {

QuadraticSystem single_mode_opo(double delta, double g, double gamma = 1.0) {
  Eigen::MatrixXcd gm(1, 1), fm(1, 1);
  gm(0, 0) = delta;
  fm(0, 0) = Complex(0.0, g);
  Eigen::VectorXd gv(1);
  gv(0) = gamma;
  return QuadraticSystem::make(gm, fm, gv);
}

// Closed-form transfer of the resonant single-mode OPO (Delta = 0): the
// 2x2 resolvent is diagonal, so S comes out in scalar form.  Independent of
// the library's LU path.
Eigen::Matrix2cd opo_transfer_oracle(double omega, double g, double gamma) {
  const Complex iw(0.0, omega);
  Eigen::Matrix2cd s = Eigen::Matrix2cd::Zero();
  s(0, 0) = (gamma + g - iw) / (gamma - g + iw);
  s(1, 1) = (gamma - g - iw) / (gamma + g + iw);
  return s;
}

TransferGrid identity_transfer(int n_modes, int points) {
  TransferGrid t;
  t.grid = FrequencyGrid::uniform_symmetric(3.0, points);
  t.n_modes = n_modes;
  t.s.assign(static_cast<std::size_t>(points),
             Eigen::MatrixXcd::Identity(2 * n_modes, 2 * n_modes));
  return t;
}

}  // namespace

TEST_CASE("identity transfer gives vacuum covariance at the documented level") {
  const SpectralCovariance sigma = spectral_covariance(identity_transfer(2, 21));
  const double vac = 1.0 / (2.0 * std::sqrt(2.0 * M_PI));
  CHECK(vacuum_level() == doctest::Approx(vac).epsilon(1e-15));
  for (const auto& m : sigma.sigma)
    CHECK(max_abs(Eigen::MatrixXcd(m - vac * Eigen::MatrixXcd::Identity(4, 4))) < 1e-15);
}

TEST_CASE("covariance requires a symmetric grid") {
  TransferGrid t;
  t.grid = FrequencyGrid::from_points({0.5, 1.0}, false);
  t.n_modes = 1;
  t.s.assign(2, Eigen::MatrixXcd::Identity(2, 2));
  CHECK_THROWS_AS(spectral_covariance(t), ValidationError);
}

TEST_CASE("resonant OPO covariance matches the closed-form oracle") {
  const double g = 0.5, gamma = 1.0;
  const QuadraticSystem sys = single_mode_opo(0.0, g, gamma);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(4.0, 401);
  const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
  for (int k = 0; k < grid.size(); k += 37) {
    const Eigen::Matrix2cd s = opo_transfer_oracle(grid.at(k), g, gamma);
    const Eigen::Matrix2cd expected = s * s.adjoint() * vacuum_level();
    CHECK(max_abs(Eigen::MatrixXcd(sigma.at(k) - expected)) < 1e-12);
  }
  // At omega = 0 the variance ratios take the (gamma±g)^2 form.
  const int zero = grid.size() / 2;
  CHECK(sigma.at(zero)(0, 0).real() / vacuum_level() ==
        doctest::Approx(std::pow((gamma + g) / (gamma - g), 2)).epsilon(1e-12));
  CHECK(sigma.at(zero)(1, 1).real() / vacuum_level() ==
        doctest::Approx(std::pow((gamma - g) / (gamma + g), 2)).epsilon(1e-12));
}

TEST_CASE("covariance invariants: Hermitian, conjugate symmetric, PSD") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 3);
    const QuadraticSystem sys = random_stable_system(rng, n);
    const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 101);
    const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
    for (int k = 0; k < grid.size(); ++k) {
      const Eigen::MatrixXcd& m = sigma.at(k);
      CHECK(max_abs(Eigen::MatrixXcd(m - m.adjoint())) < 1e-10);
      CHECK(max_abs(Eigen::MatrixXcd(
                sigma.at(grid.mirror_index(k)) - m.conjugate())) < 1e-10);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m, Eigen::EigenvaluesOnly);
      CHECK(eig.eigenvalues().minCoeff() > -1e-10);
    }
  }
}

TEST_CASE("detuned single-mode OPO has a real covariance") {
  const QuadraticSystem sys = single_mode_opo(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 201);
  const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
  double max_imag = 0.0, max_offdiag = 0.0;
  for (int k = 0; k < grid.size(); ++k) {
    max_imag = std::max(max_imag, max_abs(Eigen::MatrixXcd(
                                      Complex(0, 1) * sigma.at(k).imag().cast<Complex>())));
    max_offdiag = std::max(max_offdiag, std::abs(sigma.at(k)(0, 1)));
  }
  CHECK(max_imag < 1e-10);     // no hidden squeezing in this example
  CHECK(max_offdiag > 1e-3);   // but genuinely rotated (morphing) quadratures
}

TEST_CASE("noise power follows the two-by-two closed form and ignores Im sigma") {
  // sigma = [[alpha, gc + i dl], [gc - i dl, beta]] measured along
  // Q = (cos th | sin th) gives cos^2 alpha + sin^2 beta + 2 cos sin gc.
  const double alpha = 2.0, beta = 0.5, gc = 0.3;
  FrequencyGrid grid = FrequencyGrid::uniform_symmetric(1.0, 3);
  for (double dl : {0.0, 0.7}) {
    SpectralCovariance sigma;
    sigma.grid = grid;
    sigma.n_modes = 1;
    Eigen::Matrix2cd m;
    m << alpha, Complex(gc, dl), Complex(gc, -dl), beta;
    sigma.sigma.assign(3, m);
    // Conjugate symmetry across the grid: flip the imaginary part at -omega.
    Eigen::Matrix2cd m_neg = m.conjugate();
    sigma.sigma[0] = m_neg;
    for (double th : {0.0, 0.4, 1.1, 2.0, 3.0}) {
      std::vector<double> angle{th};
      const NoiseSpectrum spec =
          noise_spectral_power(sigma, LocalOscillator::from_angles(angle, 1));
      const double expected = std::cos(th) * std::cos(th) * alpha +
                              std::sin(th) * std::sin(th) * beta +
                              2.0 * std::cos(th) * std::sin(th) * gc;
      CHECK(spec.values[1] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("Im sigma carries no HD-visible information (two-mode OPO)") {
  Eigen::MatrixXcd g(2, 2), f(2, 2);
  g << 0.8, 0.1, 0.1, 1.0;
  f << 0.0, Complex(0.0, 1.0), Complex(0.0, 1.0), 0.0;
  Eigen::VectorXd gamma(2);
  gamma << 1.0, 1.0;
  const QuadraticSystem sys = QuadraticSystem::make(g, f, gamma);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 101);
  const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
  double max_imag = 0.0;
  for (const auto& m : sigma.sigma)
    max_imag = std::max(max_imag, m.imag().cwiseAbs().maxCoeff());
  REQUIRE(max_imag > 1e-2);  // this source genuinely hides correlations

  SpectralCovariance realified = sigma;
  for (auto& m : realified.sigma) m = m.real().cast<Complex>();
  Rng rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    const LocalOscillator lo = LocalOscillator::from_vector(random_unit_lo(rng, 2));
    const NoiseSpectrum full = noise_spectral_power(sigma, lo);
    const NoiseSpectrum real_only = noise_spectral_power(realified, lo);
    for (std::size_t k = 0; k < full.values.size(); ++k)
      CHECK(full.values[k] == doctest::Approx(real_only.values[k]).epsilon(1e-13));
  }
}

TEST_CASE("noise power is real for random systems and LOs") {
  Rng rng(41);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 101);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 3);
    const QuadraticSystem sys = random_stable_system(rng, n);
    const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
    const LocalOscillator lo = LocalOscillator::from_vector(random_unit_lo(rng, n));
    // The imaginary-residue assertion (1e-12) lives inside the call.
    const NoiseSpectrum spec = noise_spectral_power(sigma, lo);
    // Sigma_Q(omega) = Sigma_Q(-omega).
    for (int k = 0; k < grid.size(); ++k)
      CHECK(spec.values[static_cast<std::size_t>(k)] ==
            doctest::Approx(spec.values[static_cast<std::size_t>(grid.mirror_index(k))])
                .epsilon(1e-10));
  }
}

TEST_CASE("vacuum through any passive network stays at 0 dB for every LO") {
  Rng rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const QuadraticSystem sys = imelab::testing::random_passive_system(rng, 2);
    const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(4.0, 81);
    const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
    const LocalOscillator lo = LocalOscillator::from_vector(random_unit_lo(rng, 2));
    const NoiseSpectrum spec = noise_spectral_power(sigma, lo);
    for (double db : spec.db) CHECK(std::abs(db) < 1e-9);
  }
}

TEST_CASE("LO parameterization reproduces the two-color three-angle form") {
  const double t1 = 10.44, t2 = 1.47, t3 = 7.69;
  const LocalOscillator lo = LocalOscillator::from_angles({t1, t3, t2}, 2);
  Eigen::VectorXd expected(4);
  expected << std::cos(t1) * std::cos(t2), std::cos(t3) * std::sin(t2),
      std::sin(t1) * std::cos(t2), std::sin(t3) * std::sin(t2);
  CHECK((lo.q - expected).cwiseAbs().maxCoeff() < 1e-15);

  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 4);
    std::vector<double> angles;
    for (int i = 0; i < 2 * n - 1; ++i) angles.push_back(rng.uniform(0.0, 2.0 * M_PI));
    CHECK(LocalOscillator::from_angles(angles, n).q.norm() ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(LocalOscillator::from_angles({0.1, 0.2}, 1), ValidationError);
  Eigen::VectorXd bad(2);
  bad << 1.0, 0.5;
  CHECK_THROWS_AS(LocalOscillator::from_vector(bad), ValidationError);
}

TEST_CASE("hd_sweep: singleton family equals noise_spectral_power, envelope is the min") {
  Rng rng(53);
  const QuadraticSystem sys = single_mode_opo(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(4.0, 101);
  const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
  const LocalOscillator lo = LocalOscillator::from_vector(random_unit_lo(rng, 1));
  const HdSweep single = hd_sweep(sigma, {lo});
  const NoiseSpectrum direct = noise_spectral_power(sigma, lo);
  for (std::size_t k = 0; k < direct.values.size(); ++k) {
    CHECK(single.spectra[0].values[k] == direct.values[k]);
    CHECK(single.envelope.values[k] == direct.values[k]);
  }
  CHECK_THROWS_AS(hd_sweep(sigma, {}), ValidationError);

  std::vector<LocalOscillator> family;
  for (int i = 0; i < 8; ++i)
    family.push_back(LocalOscillator::from_angles({i * M_PI / 8.0}, 1));
  const HdSweep sweep = hd_sweep(sigma, family);
  for (std::size_t k = 0; k < sweep.envelope.values.size(); ++k) {
    double manual = sweep.spectra[0].values[k];
    for (const auto& s : sweep.spectra) manual = std::min(manual, s.values[k]);
    CHECK(sweep.envelope.values[k] == manual);
  }
}

TEST_CASE("dense sweep envelope approaches the exact real-LO optimum") {
  const QuadraticSystem sys = single_mode_opo(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(3.0, 31);
  const SpectralCovariance sigma = spectral_covariance(transfer_function(sys, grid));
  const std::vector<double> optimal = optimal_real_lo_power(sigma);
  std::vector<LocalOscillator> family;
  for (int i = 0; i < 720; ++i)
    family.push_back(LocalOscillator::from_angles({i * M_PI / 720.0}, 1));
  const HdSweep sweep = hd_sweep(sigma, family);
  for (std::size_t k = 0; k < optimal.size(); ++k) {
    CHECK(sweep.envelope.values[k] >= optimal[k] - 1e-12);
    // Quadratic touching: a 0.25 deg angle mesh leaves an O(dtheta^2) gap.
    CHECK(sweep.envelope.values[k] <= optimal[k] * (1.0 + 3e-4));
  }
}

TEST_CASE("dense sweep families") {
  const std::vector<LocalOscillator> family = lo_sweep_family(1, 1.0);
  CHECK(family.size() == 181);  // endpoints included over a half turn
  CHECK_THROWS_AS(lo_sweep_family(3, 10.0), ValidationError);
  CHECK_THROWS_AS(lo_sweep_family(1, 0.0), ValidationError);
}
