#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imelab/abmd.hpp"
#include "imelab/spectra.hpp"
#include "test_support.hpp"

using namespace imelab;
using namespace imelab::testing;

namespace {

Eigen::MatrixXcd reconstruct(const BmdPoint& p) {
  return p.u * p.d.asDiagonal().toDenseMatrix().cast<Complex>() * p.v.adjoint();
}

void check_point_invariants(const Eigen::MatrixXcd& s, const BmdPoint& p, double tol) {
  const int n2 = static_cast<int>(s.rows());
  CHECK(max_abs(Eigen::MatrixXcd(reconstruct(p) - s)) < tol);
  CHECK(unitarity_defect(p.u) < tol);
  CHECK(unitarity_defect(p.v) < tol);
  CHECK(symplectic_defect(p.u) < tol);
  CHECK(symplectic_defect(p.v) < tol);
  for (int i = 0; i < n2 / 2; ++i) {
    CHECK(p.d(i) >= 1.0 - 1e-12);
    CHECK(p.d(i) * p.d(n2 / 2 + i) == doctest::Approx(1.0).epsilon(1e-12));
    if (i > 0) CHECK(p.d(i) <= p.d(i - 1) + 1e-12);
  }
}

void check_decomposition_invariants(const TransferGrid& transfer,
                                    const MorphingDecomposition& decomp, double tol) {
  const FrequencyGrid& grid = transfer.grid;
  const int n = decomp.n_modes;
  for (int k = 0; k < grid.size(); ++k) {
    const Eigen::MatrixXcd recon =
        decomp.u_at(k) * decomp.d_at(k).asDiagonal().toDenseMatrix().cast<Complex>() *
        decomp.v[static_cast<std::size_t>(k)].adjoint();
    CHECK(max_abs(Eigen::MatrixXcd(recon - transfer.at(k))) < tol);
    CHECK(unitarity_defect(decomp.u_at(k)) < tol);
    CHECK(unitarity_defect(decomp.v[static_cast<std::size_t>(k)]) < tol);
    CHECK(symplectic_defect(decomp.u_at(k)) < tol);
    CHECK(symplectic_defect(decomp.v[static_cast<std::size_t>(k)]) < tol);
    const int mk = grid.mirror_index(k);
    CHECK(max_abs(Eigen::MatrixXcd(decomp.u_at(mk) - decomp.u_at(k).conjugate())) < tol);
    CHECK((decomp.d_at(mk) - decomp.d_at(k)).cwiseAbs().maxCoeff() < tol);
    for (int i = 0; i < n; ++i)
      CHECK(decomp.d_at(k)(i) * decomp.d_at(k)(n + i) ==
            doctest::Approx(1.0).epsilon(1e-10));
  }
}

double max_step_norm(const MorphingDecomposition& decomp) {
  double worst = 0.0;
  for (int k = 0; k + 1 < decomp.grid.size(); ++k)
    worst = std::max(worst, (decomp.u_at(k + 1) - decomp.u_at(k)).norm());
  return worst;
}

}  // namespace

TEST_CASE("pointwise bmd of the identity is canonical") {
  const BmdPoint p = pointwise_bmd(Eigen::MatrixXcd::Identity(4, 4));
  CHECK(max_abs(Eigen::MatrixXcd(p.u - Eigen::MatrixXcd::Identity(4, 4))) < 1e-14);
  CHECK(max_abs(Eigen::MatrixXcd(p.v - Eigen::MatrixXcd::Identity(4, 4))) < 1e-14);
  CHECK((p.d - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pointwise bmd of a single-mode squeezer") {
  const double r = 1.0;
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(2, 2);
  s(0, 0) = std::exp(r);
  s(1, 1) = std::exp(-r);
  const BmdPoint p = pointwise_bmd(s);
  CHECK(p.d(0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(p.d(1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(max_abs(Eigen::MatrixXcd(p.u - Eigen::MatrixXcd::Identity(2, 2))) < 1e-12);
  CHECK(max_abs(Eigen::MatrixXcd(p.v - Eigen::MatrixXcd::Identity(2, 2))) < 1e-12);
}

TEST_CASE("pointwise bmd d1 agrees with a general-purpose SVD oracle") {
  const QuadraticSystem sys = single_mode_opo_system(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(3.0, 7);
  const TransferGrid transfer = transfer_function(sys, grid);
  for (int k = 0; k < grid.size(); ++k) {
    const BmdPoint p = pointwise_bmd(transfer.at(k));
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(transfer.at(k));
    CHECK(p.d(0) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-10));
    check_point_invariants(transfer.at(k), p, kBmdReconstructTol);
  }
}

TEST_CASE("pointwise bmd rejects non-symplectic input") {
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(2, 2);
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(pointwise_bmd(bad), ValidationError);
  CHECK_THROWS_AS(pointwise_bmd(Eigen::MatrixXcd::Identity(3, 3)), ValidationError);
}

TEST_CASE("continuation requires a symmetric grid") {
  const QuadraticSystem sys = single_mode_opo_system(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::from_points({0.0, 0.5, 1.0}, false);
  const TransferGrid transfer = transfer_function(sys, grid);
  CHECK_THROWS_AS(continue_decomposition(transfer), ValidationError);
}

TEST_CASE("pointwise bmd on random omega-symplectic inputs") {
  Rng rng(61);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 3);
    const QuadraticSystem sys = random_stable_system(rng, n);
    const double omega = rng.uniform(-4.0, 4.0);
    const FrequencyGrid grid = FrequencyGrid::from_points({omega}, false);
    const TransferGrid transfer = transfer_function(sys, grid);
    const BmdPoint p = pointwise_bmd(transfer.at(0));
    check_point_invariants(transfer.at(0), p, kBmdReconstructTol);
  }
}

TEST_CASE("real input gives real factors") {
  const QuadraticSystem sys = single_mode_opo_system(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::from_points({0.0}, false);
  const TransferGrid transfer = transfer_function(sys, grid);
  const BmdPoint p = pointwise_bmd(transfer.at(0));
  CHECK(max_abs(Eigen::MatrixXcd(p.u.imag().cast<Complex>())) < 1e-12);
  CHECK(max_abs(Eigen::MatrixXcd(p.v.imag().cast<Complex>())) < 1e-12);
  check_point_invariants(transfer.at(0), p, kBmdReconstructTol);
}

TEST_CASE("single-mode OPO: morphing supermodes are a real rotation") {
  const QuadraticSystem sys = single_mode_opo_system(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 401);
  const TransferGrid transfer = transfer_function(sys, grid);
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  check_decomposition_invariants(transfer, decomp, kAbmdTol);
  for (int k = 0; k < grid.size(); k += 17) {
    const Eigen::MatrixXcd& u = decomp.u_at(k);
    CHECK(max_abs(Eigen::MatrixXcd(u.imag().cast<Complex>())) < 1e-8);
    // Rotation structure [[c, s], [-s, c]].
    CHECK(std::abs(u(0, 0) - u(1, 1)) < 1e-8);
    CHECK(std::abs(u(0, 1) + u(1, 0)) < 1e-8);
    CHECK(std::abs(std::norm(u(0, 0)) + std::norm(u(0, 1)) - 1.0) < 1e-8);
  }
}

TEST_CASE("two-mode OPO develops complex supermodes (hidden squeezing)") {
  const QuadraticSystem sys = two_mode_opo_system();
  REQUIRE(is_stable(sys));
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 401);
  const TransferGrid transfer = transfer_function(sys, grid);
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  check_decomposition_invariants(transfer, decomp, kAbmdTol);
  double max_imag = 0.0;
  for (int k = 0; k < grid.size(); ++k)
    max_imag = std::max(
        max_imag, max_abs(Eigen::MatrixXcd(decomp.u_at(k).imag().cast<Complex>())));
  CHECK(max_imag > 1e-3);
}

TEST_CASE("four-mode system: four squeezed and four anti-squeezed spectra") {
  const QuadraticSystem sys = four_mode_system();
  REQUIRE(is_stable(sys));
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 801);
  const TransferGrid transfer = transfer_function(sys, grid);
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  check_decomposition_invariants(transfer, decomp, kAbmdTol);
  for (int i = 0; i < 4; ++i) {
    double max_db = 0.0;
    for (int k = 0; k < grid.size(); ++k)
      max_db = std::max(max_db, 20.0 * std::log10(decomp.d_at(k)(i)));
    CHECK(max_db > 0.1);  // anti-squeezed above 0 dB; the pair is below
  }
}

TEST_CASE("exactly degenerate pair of squeezers is tracked smoothly") {
  // Two uncoupled identical resonant squeezers: d_1(omega) = d_2(omega).
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(2, 2);
  Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(2, 2);
  f(0, 0) = Complex(0.0, 0.6);
  f(1, 1) = Complex(0.0, 0.6);
  Eigen::VectorXd gamma(2);
  gamma << 1.0, 1.0;
  const QuadraticSystem sys = QuadraticSystem::make(g, f, gamma);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(4.0, 201);
  const TransferGrid transfer = transfer_function(sys, grid);
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  check_decomposition_invariants(transfer, decomp, kAbmdTol);
  for (int k = 0; k < grid.size(); ++k)
    CHECK(decomp.d_at(k)(0) == doctest::Approx(decomp.d_at(k)(1)).epsilon(1e-10));
}

TEST_CASE("smoothness constant halves under grid refinement") {
  const QuadraticSystem sys = two_mode_opo_system();
  const TransferGrid coarse =
      transfer_function(sys, FrequencyGrid::uniform_symmetric(5.0, 501));
  const TransferGrid fine =
      transfer_function(sys, FrequencyGrid::uniform_symmetric(5.0, 1001));
  const double c1 = max_step_norm(continue_decomposition(coarse));
  const double c2 = max_step_norm(continue_decomposition(fine));
  CHECK(c2 / c1 == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("max anti-squeezing converges under grid refinement") {
  const QuadraticSystem sys = single_mode_opo_system(2.0, 1.0);
  auto max_d1 = [&](int points) {
    const TransferGrid transfer =
        transfer_function(sys, FrequencyGrid::uniform_symmetric(5.0, points));
    const MorphingDecomposition decomp = continue_decomposition(transfer);
    double best = 0.0;
    for (int k = 0; k < decomp.grid.size(); ++k)
      best = std::max(best, decomp.d_at(k)(0));
    return best;
  };
  CHECK(std::abs(max_d1(2001) - max_d1(4001)) < 1e-6);
}

TEST_CASE("supermode quadratures: map, labels and congruence") {
  const QuadraticSystem sys = single_mode_opo_system(2.0, 1.0);
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 401);
  const TransferGrid transfer = transfer_function(sys, grid);
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  const SupermodeQuadratures map = supermode_quadratures(decomp);
  CHECK(map.row_labels.size() == 2);
  CHECK(map.row_labels[1] == "supermode 1 squeezed quadrature (noise d_1^-2)");

  // Row 2 of U^dag is (sin th, cos th) with th the rotation angle of U.
  for (int k = 100; k < grid.size(); k += 83) {
    const Eigen::MatrixXcd& u = decomp.u_at(k);
    const double theta = std::atan2(u(0, 1).real(), u(1, 1).real());
    const Eigen::MatrixXcd& ud = map.u_dagger[static_cast<std::size_t>(k)];
    CHECK(std::abs(ud(1, 0) - Complex(std::sin(theta), 0.0)) < 1e-8);
    CHECK(std::abs(ud(1, 1) - Complex(std::cos(theta), 0.0)) < 1e-8);
  }

  // U^dag sigma U is diagonal with entries d^2 * vacuum.
  const SpectralCovariance sigma = spectral_covariance(transfer);
  Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(grid.size()));
    const Eigen::MatrixXcd cong = decomp.u_at(k).adjoint() * sigma.at(k) * decomp.u_at(k);
    for (int i = 0; i < 2; ++i) {
      const double expected = decomp.supermode_noise(i + 1, k);
      CHECK(std::abs(cong(i, i).real() - expected) < 1e-8);
      CHECK(decomp.d_at(k)(i) * decomp.d_at(k)(i) * vacuum_level() ==
            doctest::Approx(expected));
    }
    CHECK(std::abs(cong(0, 1)) < 1e-8);
  }

  const std::string desc = map.describe_row(2, grid.size() / 2, {"x_1", "y_1"});
  CHECK(desc.find("y_1") != std::string::npos);
}

TEST_CASE("identity map for the identity decomposition") {
  TransferGrid transfer;
  transfer.grid = FrequencyGrid::uniform_symmetric(1.0, 5);
  transfer.n_modes = 1;
  transfer.s.assign(5, Eigen::MatrixXcd::Identity(2, 2));
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  const SupermodeQuadratures map = supermode_quadratures(decomp);
  for (const auto& ud : map.u_dagger)
    CHECK(max_abs(Eigen::MatrixXcd(ud - Eigen::MatrixXcd::Identity(2, 2))) < 1e-12);
}

TEST_CASE("random stable systems satisfy all decomposition invariants") {
  Rng rng(71);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 4);
    const QuadraticSystem sys = random_stable_system(rng, n);
    const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 301);
    const TransferGrid transfer = transfer_function(sys, grid);
    const MorphingDecomposition decomp = continue_decomposition(transfer);
    check_decomposition_invariants(transfer, decomp, kAbmdTol);
  }
}

TEST_CASE("envelope consistency: real-LO optimum never beats d1^-2") {
  const QuadraticSystem sys = two_mode_opo_system();
  const FrequencyGrid grid = FrequencyGrid::uniform_symmetric(5.0, 201);
  const TransferGrid transfer = transfer_function(sys, grid);
  const SpectralCovariance sigma = spectral_covariance(transfer);
  const MorphingDecomposition decomp = continue_decomposition(transfer);
  const std::vector<double> optimal = optimal_real_lo_power(sigma);
  for (int k = 0; k < grid.size(); ++k) {
    const double bound = vacuum_level() / std::pow(decomp.d_at(k)(0), 2);
    CHECK(optimal[static_cast<std::size_t>(k)] >= bound - 1e-9);
  }
}
