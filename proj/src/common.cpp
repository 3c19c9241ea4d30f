#include "imelab/common.hpp"

#include <cmath>
#include <sstream>

#include "imelab/rng.hpp"

namespace imelab {

Eigen::MatrixXd symplectic_form(int n_modes) {
  const int n = n_modes;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  j.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return j;
}

Eigen::MatrixXcd amplitude_to_quadrature_basis(int n_modes) {
  const int n = n_modes;
  const double r = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  l.topLeftCorner(n, n) = r * Eigen::MatrixXcd::Identity(n, n);
  l.topRightCorner(n, n) = r * Eigen::MatrixXcd::Identity(n, n);
  l.bottomLeftCorner(n, n) = -i * r * Eigen::MatrixXcd::Identity(n, n);
  l.bottomRightCorner(n, n) = i * r * Eigen::MatrixXcd::Identity(n, n);
  return l;
}

double max_abs(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

double max_abs(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

double symplectic_defect(const Eigen::MatrixXcd& s) {
  const int n = static_cast<int>(s.rows()) / 2;
  const Eigen::MatrixXcd j = symplectic_form(n).cast<Complex>();
  return max_abs(Eigen::MatrixXcd(s * j * s.adjoint() - j));
}

double unitarity_defect(const Eigen::MatrixXcd& m) {
  return max_abs(Eigen::MatrixXcd(m.adjoint() * m -
                                  Eigen::MatrixXcd::Identity(m.cols(), m.cols())));
}

Eigen::MatrixXcd polar_unitary(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

std::vector<double> unwrap_phases(std::vector<double> phases, int anchor) {
  const double two_pi = 2.0 * M_PI;
  const int n = static_cast<int>(phases.size());
  auto step = [&](int from, int to) {
    double d = phases[static_cast<std::size_t>(to)] - phases[static_cast<std::size_t>(from)];
    phases[static_cast<std::size_t>(to)] -= two_pi * std::round(d / two_pi);
  };
  for (int k = anchor + 1; k < n; ++k) step(k - 1, k);
  for (int k = anchor - 1; k >= 0; --k) step(k + 1, k);
  return phases;
}

std::string format_complex(const Complex& z) {
  std::ostringstream out;
  out << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
  return out.str();
}

double Rng::normal() {
  // Box-Muller; u1 bounded away from 0.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Rng Rng::fork(std::uint64_t stream) const {
  Rng child(state_ ^ (0xa0761d6478bd642full + stream * 0xe7037ed1a0b428dbull));
  child.next_u64();
  return child;
}

}  // namespace imelab
