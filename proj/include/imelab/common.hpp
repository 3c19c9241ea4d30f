#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace imelab {

using Complex = std::complex<double>;

// An input violated a documented precondition or a type invariant.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The resolvent is numerically singular: the system sits at or above its
// oscillation threshold at the named frequency.
struct UnstableSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Smooth continuation could not disambiguate factors at the current grid
// resolution; the message names the offending omega interval.
struct ContinuationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// N-mode symplectic form J = [[0, I], [-I, 0]] on (x_1..x_N | y_1..y_N).
Eigen::MatrixXd symplectic_form(int n_modes);

// Basis change L from complex amplitudes (a | a^dag) to quadratures (x | y):
// R = L xi with L = (1/sqrt 2) [[I, I], [-iI, iI]].  L is unitary.
Eigen::MatrixXcd amplitude_to_quadrature_basis(int n_modes);

double max_abs(const Eigen::MatrixXcd& m);
double max_abs(const Eigen::MatrixXd& m);

// Deviation from the conjugate-symplectic condition, max |S J S^dag - J|.
double symplectic_defect(const Eigen::MatrixXcd& s);

// Deviation from unitarity, max |M^dag M - I|.
double unitarity_defect(const Eigen::MatrixXcd& m);

// Closest unitary in Frobenius norm (polar factor via SVD).
Eigen::MatrixXcd polar_unitary(const Eigen::MatrixXcd& m);

// Adds 2*pi multiples so consecutive samples jump by less than pi; the sample
// at `anchor` keeps its principal value and the curve is unwrapped outward
// from there.
std::vector<double> unwrap_phases(std::vector<double> phases, int anchor = 0);

std::string format_complex(const Complex& z);

}  // namespace imelab
