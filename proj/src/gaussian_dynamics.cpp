#include "imelab/gaussian_dynamics.hpp"

#include <cmath>
#include <sstream>

namespace imelab {

namespace {

// Largest off-tolerance entry of m - ref, formatted for error messages.
void throw_entry_error(const char* what, const Eigen::MatrixXcd& deviation) {
  Eigen::Index row = 0, col = 0;
  deviation.cwiseAbs().maxCoeff(&row, &col);
  std::ostringstream msg;
  msg << what << ": entry (" << row + 1 << ", " << col + 1 << ") deviates by "
      << deviation.cwiseAbs()(row, col);
  throw ValidationError(msg.str());
}

}  // namespace

QuadraticSystem QuadraticSystem::make(Eigen::MatrixXcd g, Eigen::MatrixXcd f,
                                      Eigen::VectorXd gamma) {
  const int n = static_cast<int>(gamma.size());
  if (n < 1) throw ValidationError("system: needs at least one mode");
  if (g.rows() != n || g.cols() != n || f.rows() != n || f.cols() != n)
    throw ValidationError("system: G and F must be N x N with N = len(gamma)");
  const Eigen::MatrixXcd g_dev = g - g.adjoint();
  if (max_abs(g_dev) > kHermitianTol) throw_entry_error("G is not Hermitian", g_dev);
  const Eigen::MatrixXcd f_dev = f - f.transpose();
  if (max_abs(f_dev) > kSymmetricTol) throw_entry_error("F is not symmetric", f_dev);
  for (int m = 0; m < n; ++m) {
    if (!(gamma(m) > 0.0)) {
      std::ostringstream msg;
      msg << "system: gamma(" << m + 1 << ") = " << gamma(m) << " must be positive";
      throw ValidationError(msg.str());
    }
  }
  QuadraticSystem sys;
  sys.n_modes = n;
  sys.g = std::move(g);
  sys.f = std::move(f);
  sys.gamma = std::move(gamma);
  return sys;
}

Eigen::MatrixXd build_coupling_matrix(const QuadraticSystem& sys) {
  const int n = sys.n_modes;
  const Eigen::MatrixXcd gpf = sys.g + sys.f;
  const Eigen::MatrixXcd gmf = sys.g - sys.f;
  Eigen::MatrixXd m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = gpf.imag();
  m.topRightCorner(n, n) = gmf.real();
  m.bottomLeftCorner(n, n) = -gpf.real();
  m.bottomRightCorner(n, n) = -gpf.imag().transpose();
  return m;
}

double hamiltonian_defect(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows()) / 2;
  const Eigen::MatrixXd jm = symplectic_form(n) * m;
  return max_abs(Eigen::MatrixXd(jm.transpose() - jm));
}

double stability_margin(const QuadraticSystem& sys) {
  Eigen::MatrixXd drift = build_coupling_matrix(sys);
  drift.diagonal().head(sys.n_modes) -= sys.gamma;
  drift.diagonal().tail(sys.n_modes) -= sys.gamma;
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(drift, /*computeEigenvectors=*/false);
  return -eig.eigenvalues().real().maxCoeff();
}

bool is_stable(const QuadraticSystem& sys) { return stability_margin(sys) > 0.0; }

namespace {

Eigen::MatrixXcd transfer_at(const Eigen::MatrixXd& coupling,
                             const Eigen::VectorXd& sqrt_two_gamma,
                             const Eigen::VectorXd& gamma2, double omega) {
  const int dim = static_cast<int>(coupling.rows());
  Eigen::MatrixXcd a = (-coupling).cast<Complex>();
  a.diagonal() += gamma2.cast<Complex>();
  a.diagonal().array() += Complex(0.0, omega);

  const double a_norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::MatrixXcd a_inv = a.partialPivLu().inverse();
  const double inv_norm = a_inv.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(a_norm * inv_norm < kResolventCondLimit)) {
    std::ostringstream msg;
    msg << "unstable system: resolvent condition " << a_norm * inv_norm
        << " at omega = " << omega;
    throw UnstableSystemError(msg.str());
  }

  Eigen::MatrixXcd s = sqrt_two_gamma.cast<Complex>().asDiagonal() * a_inv *
                       sqrt_two_gamma.cast<Complex>().asDiagonal();
  s -= Eigen::MatrixXcd::Identity(dim, dim);
  return s;
}

}  // namespace

TransferGrid transfer_function(const QuadraticSystem& sys, const FrequencyGrid& grid) {
  const int n = sys.n_modes;
  const Eigen::MatrixXd coupling = build_coupling_matrix(sys);
  Eigen::VectorXd gamma2(2 * n);
  gamma2 << sys.gamma, sys.gamma;
  const Eigen::VectorXd sqrt_two_gamma = (2.0 * gamma2.array()).sqrt();

  TransferGrid out;
  out.grid = grid;
  out.n_modes = n;
  out.s.resize(static_cast<std::size_t>(grid.size()));
  if (grid.symmetric) {
    // Evaluate omega >= 0 and mirror by conjugation; Property 1 holds exactly.
    for (int k = grid.size() - 1; k >= 0; --k) {
      const double w = grid.at(k);
      if (w >= 0.0) {
        out.s[static_cast<std::size_t>(k)] = transfer_at(coupling, sqrt_two_gamma, gamma2, w);
      } else {
        out.s[static_cast<std::size_t>(k)] =
            out.s[static_cast<std::size_t>(grid.mirror_index(k))].conjugate();
      }
    }
  } else {
    for (int k = 0; k < grid.size(); ++k)
      out.s[static_cast<std::size_t>(k)] = transfer_at(coupling, sqrt_two_gamma, gamma2, grid.at(k));
  }
  return out;
}

TransferGrid compose(const TransferGrid& second, const TransferGrid& first) {
  if (!second.grid.same_as(first.grid))
    throw ValidationError("compose: transfer grids differ");
  if (second.n_modes != first.n_modes)
    throw ValidationError("compose: mode counts differ");
  TransferGrid out;
  out.grid = first.grid;
  out.n_modes = first.n_modes;
  out.s.resize(first.s.size());
  for (std::size_t k = 0; k < first.s.size(); ++k) out.s[k] = second.s[k] * first.s[k];
  return out;
}

std::vector<Eigen::MatrixXcd> to_amplitude_rep(const TransferGrid& transfer) {
  const Eigen::MatrixXcd l = amplitude_to_quadrature_basis(transfer.n_modes);
  const Eigen::MatrixXcd l_dag = l.adjoint();
  std::vector<Eigen::MatrixXcd> out(transfer.s.size());
  for (std::size_t k = 0; k < transfer.s.size(); ++k) out[k] = l_dag * transfer.s[k] * l;
  return out;
}

std::vector<Eigen::MatrixXcd> amplitude_upper_blocks(const TransferGrid& transfer,
                                                     double tol) {
  const int n = transfer.n_modes;
  std::vector<Eigen::MatrixXcd> amp = to_amplitude_rep(transfer);
  std::vector<Eigen::MatrixXcd> out(amp.size());
  for (std::size_t k = 0; k < amp.size(); ++k) {
    const double off = std::max(max_abs(Eigen::MatrixXcd(amp[k].topRightCorner(n, n))),
                                max_abs(Eigen::MatrixXcd(amp[k].bottomLeftCorner(n, n))));
    if (off > tol) {
      std::ostringstream msg;
      msg << "amplitude representation is not block-diagonal (off-block " << off
          << " at omega = " << transfer.grid.at(static_cast<int>(k))
          << "); system is not passive";
      throw ValidationError(msg.str());
    }
    out[k] = amp[k].topLeftCorner(n, n);
  }
  return out;
}

}  // namespace imelab
