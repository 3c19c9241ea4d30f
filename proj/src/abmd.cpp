#include "imelab/abmd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "imelab/spectra.hpp"

namespace imelab {

namespace {

// ---------------------------------------------------------------------------
// Optimal assignment (Hungarian algorithm with potentials, O(n^3), minimizes
// total cost).  Returns row -> column.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] != 0)
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

// ---------------------------------------------------------------------------
// Amplitude-representation factors of one conjugate-symplectic matrix.
//
// In the (a | a^dag) basis a conjugate-symplectic s becomes a U(N,N) matrix
// AMP with blocks [[A, B], [C, D]], and the decomposition takes the Cartan
// form AMP = diag(P, Q) SIG diag(R, T)^dag with SIG = [[Ch, Sh], [Sh, Ch]].
// H = AMP AMP^dag then has blocks H11 = P C2 P^dag, H22 = Q C2 Q^dag and
// H12 = P S2 Q^dag with C2 = cosh(2r), S2 = sinh(2r), which reduces the
// factorization to two Hermitian eigenproblems plus a relative alignment of
// Q against P through H12.
struct PairFactors {
  Eigen::MatrixXcd p, q;   // N x N unitary
  Eigen::VectorXd ch, sh;  // cosh r_i >= 1, sinh r_i >= 0, descending in ch
  bool has_degenerate_cluster = false;
};

void eig_descending(const Eigen::MatrixXcd& h, Eigen::MatrixXcd& vectors,
                    Eigen::VectorXd& values) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const int n = static_cast<int>(h.rows());
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  // Stable so ties keep the solver's order (identity input stays identity).
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  vectors.resize(n, n);
  values.resize(n);
  for (int k = 0; k < n; ++k) {
    vectors.col(k) = es.eigenvectors().col(idx[static_cast<std::size_t>(k)]);
    values(k) = es.eigenvalues()(idx[static_cast<std::size_t>(k)]);
  }
}

// Connected components of |d_i - d_j| <= tol.  Pairs are not assumed sorted:
// after permutation toward a previous frame the d values track labels, not
// magnitude order.
std::vector<std::vector<int>> clusters_by_d(const Eigen::VectorXd& ch,
                                            const Eigen::VectorXd& sh) {
  const int n = static_cast<int>(ch.size());
  std::vector<int> root(static_cast<std::size_t>(n));
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](int i) {
    while (root[static_cast<std::size_t>(i)] != i) i = root[static_cast<std::size_t>(i)];
    return i;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double di = ch(i) + sh(i), dj = ch(j) + sh(j);
      if (std::abs(di - dj) <= kDegenerateClusterTol * std::max({1.0, di, dj}))
        root[static_cast<std::size_t>(find(j))] = find(i);
    }
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> group_of(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (group_of[static_cast<std::size_t>(r)] < 0) {
      group_of[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
      groups.push_back({});
    }
    groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(r)])].push_back(i);
  }
  return groups;
}

double mean_sinh2r(const Eigen::VectorXd& ch, const Eigen::VectorXd& sh,
                   const std::vector<int>& cluster) {
  double acc = 0.0;
  for (int i : cluster) acc += 2.0 * ch(i) * sh(i);
  return acc / static_cast<double>(cluster.size());
}

PairFactors raw_factors(const Eigen::MatrixXcd& amp) {
  const int n = static_cast<int>(amp.rows()) / 2;
  const Eigen::MatrixXcd h = amp * amp.adjoint();
  const Eigen::MatrixXcd h12 = h.topRightCorner(n, n);
  const double align_floor = 1e-12 * std::max(1.0, max_abs(h));

  PairFactors f;
  Eigen::VectorXd lam1, lam2;
  eig_descending(h.topLeftCorner(n, n), f.p, lam1);
  eig_descending(h.bottomRightCorner(n, n), f.q, lam2);
  const Eigen::VectorXd lam = (0.5 * (lam1 + lam2)).cwiseMax(1.0);  // cosh 2r
  f.ch = ((lam.array() + 1.0) / 2.0).sqrt();
  f.sh = ((lam.array() - 1.0).max(0.0) / 2.0).sqrt();

  // Align Q's phases (and degenerate subspaces) against P through H12, so
  // P^dag H12 Q is positive diagonal wherever sinh(2r) resolves it.
  for (const auto& cluster : clusters_by_d(f.ch, f.sh)) {
    if (cluster.size() > 1) f.has_degenerate_cluster = true;
    if (mean_sinh2r(f.ch, f.sh, cluster) <= align_floor) continue;
    const int c = static_cast<int>(cluster.size());
    Eigen::MatrixXcd p_cl(n, c), q_cl(n, c);
    for (int j = 0; j < c; ++j) {
      p_cl.col(j) = f.p.col(cluster[static_cast<std::size_t>(j)]);
      q_cl.col(j) = f.q.col(cluster[static_cast<std::size_t>(j)]);
    }
    const Eigen::MatrixXcd w = p_cl.adjoint() * h12 * q_cl;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXcd rot = svd.matrixV() * svd.matrixU().adjoint();
    q_cl = q_cl * rot;
    for (int j = 0; j < c; ++j) f.q.col(cluster[static_cast<std::size_t>(j)]) = q_cl.col(j);
  }
  return f;
}

// Real orthogonal basis that diagonalizes the commuting real-symmetric pair
// (x, y); y is diagonalized within degenerate eigenspaces of x.
Eigen::MatrixXd joint_real_diagonalizer(const Eigen::MatrixXd& x,
                                        const Eigen::MatrixXd& y) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(x);
  Eigen::MatrixXd e = ex.eigenvectors();
  const Eigen::VectorXd vals = ex.eigenvalues();
  const int n = static_cast<int>(x.rows());
  int start = 0;
  while (start < n) {
    int stop = start + 1;
    while (stop < n && std::abs(vals(stop) - vals(start)) < 1e-8) ++stop;
    if (stop - start > 1) {
      const Eigen::MatrixXd sub = e.middleCols(start, stop - start);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(
          Eigen::MatrixXd(sub.transpose() * y * sub));
      e.middleCols(start, stop - start) = sub * ey.eigenvectors();
    }
    start = stop;
  }
  return e;
}

// At omega = 0 the input is real and a real decomposition exists; in the
// amplitude representation that means Q = conj(P).  Fix P's gauge so
// W = P^dag H12 conj(P) comes out positive diagonal, then conjugate.
void realify_base(PairFactors& f, const Eigen::MatrixXcd& h12, double h_scale) {
  const double align_floor = 1e-12 * std::max(1.0, h_scale);
  const int n = static_cast<int>(f.p.rows());
  for (const auto& cluster : clusters_by_d(f.ch, f.sh)) {
    const double s2 = mean_sinh2r(f.ch, f.sh, cluster);
    if (s2 <= align_floor) continue;
    if (cluster.size() == 1) {
      const int i = cluster.front();
      const Complex w = f.p.col(i).dot(h12 * f.p.col(i).conjugate());
      f.p.col(i) *= std::exp(Complex(0.0, 0.5 * std::arg(w)));
      continue;
    }
    // W ~= s2 Z Z^T with Z unitary; Omega = W/s2 is unitary symmetric, so
    // Re/Im(Omega) commute and a real orthogonal basis diagonalizes both.
    const int c = static_cast<int>(cluster.size());
    Eigen::MatrixXcd p_cl(n, c);
    for (int j = 0; j < c; ++j) p_cl.col(j) = f.p.col(cluster[static_cast<std::size_t>(j)]);
    Eigen::MatrixXcd w = p_cl.adjoint() * h12 * p_cl.conjugate() / s2;
    w = 0.5 * (w + w.transpose()).eval();
    const Eigen::MatrixXd e = joint_real_diagonalizer(w.real(), w.imag());
    Eigen::VectorXcd half_phase(c);
    for (int j = 0; j < c; ++j) {
      const double xr = e.col(j).dot(w.real() * e.col(j));
      const double yr = e.col(j).dot(w.imag() * e.col(j));
      half_phase(j) = std::exp(Complex(0.0, 0.5 * std::atan2(yr, xr)));
    }
    const Eigen::MatrixXcd z =
        e.cast<Complex>() * half_phase.asDiagonal() * e.transpose().cast<Complex>();
    p_cl = p_cl * z;
    for (int j = 0; j < c; ++j) f.p.col(cluster[static_cast<std::size_t>(j)]) = p_cl.col(j);
  }
  f.q = f.p.conjugate();
}

// A degenerate cluster at the base point has an arbitrary internal gauge; the
// first marching step resolves the split, so the base cluster is rotated
// toward it (by a real rotation when the base must stay real).  Returns true
// if any cluster was re-gauged.
bool regauge_base_clusters(PairFactors& base, const PairFactors& next, bool keep_real) {
  bool changed = false;
  const int rows = static_cast<int>(base.p.rows());
  for (const auto& cluster : clusters_by_d(base.ch, base.sh)) {
    if (cluster.size() <= 1) continue;
    const int c = static_cast<int>(cluster.size());
    Eigen::MatrixXcd p_b(rows, c), q_b(rows, c), p_n(rows, c), q_n(rows, c);
    for (int j = 0; j < c; ++j) {
      const int i = cluster[static_cast<std::size_t>(j)];
      p_b.col(j) = base.p.col(i);
      q_b.col(j) = base.q.col(i);
      p_n.col(j) = next.p.col(i);
      q_n.col(j) = next.q.col(i);
    }
    Eigen::MatrixXcd rot;
    if (keep_real) {
      // Reality pins the cluster mixing to a real rotation (up to column
      // signs), but the next point's per-pair phases are still arbitrary
      // gauge.  Normalize each overlap column to its most-real orientation
      // (half the argument of sum w_k^2) before the real Procrustes.
      auto most_real = [](Eigen::VectorXcd w) {
        const Complex square_sum = (w.array() * w.array()).sum();
        w *= std::exp(Complex(0.0, -0.5 * std::arg(square_sum)));
        return Eigen::VectorXd(w.real());
      };
      const Eigen::MatrixXcd a = p_b.adjoint() * p_n;
      const Eigen::MatrixXcd b = q_b.adjoint() * q_n;
      Eigen::MatrixXd m(c, c);
      for (int j = 0; j < c; ++j) {
        Eigen::VectorXd wa = most_real(a.col(j));
        Eigen::VectorXd wb = most_real(b.col(j));
        if (wa.dot(wb) < 0.0) wb = -wb;  // half-arg leaves a sign ambiguity
        m.col(j) = wa + wb;
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
      rot = (svd.matrixU() * svd.matrixV().transpose()).cast<Complex>();
    } else {
      rot = polar_unitary(p_b.adjoint() * p_n + q_b.adjoint() * q_n);
    }
    p_b = p_b * rot;
    q_b = q_b * rot;
    for (int j = 0; j < c; ++j) {
      const int i = cluster[static_cast<std::size_t>(j)];
      base.p.col(i) = p_b.col(j);
      base.q.col(i) = q_b.col(j);
    }
    changed = true;
  }
  return changed;
}

void apply_pair_permutation(PairFactors& f, const std::vector<int>& prev_to_cur) {
  const int n = static_cast<int>(f.ch.size());
  Eigen::MatrixXcd p(f.p.rows(), n), q(f.q.rows(), n);
  Eigen::VectorXd ch(n), sh(n);
  for (int i = 0; i < n; ++i) {
    const int j = prev_to_cur[static_cast<std::size_t>(i)];
    p.col(i) = f.p.col(j);
    q.col(i) = f.q.col(j);
    ch(i) = f.ch(j);
    sh(i) = f.sh(j);
  }
  f.p = std::move(p);
  f.q = std::move(q);
  f.ch = std::move(ch);
  f.sh = std::move(sh);
}

void align_to_previous(PairFactors& f, const PairFactors& prev, double omega_lo,
                       double omega_hi, double h_scale) {
  const int n = static_cast<int>(f.ch.size());
  const double align_floor = 1e-12 * std::max(1.0, h_scale);

  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = -(std::norm(prev.p.col(i).dot(f.p.col(j))) +
                     std::norm(prev.q.col(i).dot(f.q.col(j))));
  apply_pair_permutation(f, hungarian_min(cost));

  // Pairs straddling a branch crossing through omega = 0 sit at ~0.5 overlap
  // against a real base frame; only genuinely ambiguous assignments (worse
  // than that) are refinement errors.
  for (int i = 0; i < n; ++i) {
    const double overlap = 0.5 * (std::norm(prev.p.col(i).dot(f.p.col(i))) +
                                  std::norm(prev.q.col(i).dot(f.q.col(i))));
    if (overlap < 0.3) {
      std::ostringstream msg;
      msg << "continuation cannot disambiguate supermode " << i + 1
          << " between omega = " << omega_lo << " and omega = " << omega_hi
          << " (overlap " << overlap << "); refine the grid";
      throw ContinuationError(msg.str());
    }
  }

  // Degenerate clusters: rotate toward the previous frame.  Squeezed
  // clusters are H12-locked, so P and Q take the same rotation.
  for (const auto& cluster : clusters_by_d(f.ch, f.sh)) {
    if (cluster.size() <= 1) continue;
    f.has_degenerate_cluster = true;
    const int c = static_cast<int>(cluster.size());
    Eigen::MatrixXcd p_cl(f.p.rows(), c), q_cl(f.q.rows(), c);
    Eigen::MatrixXcd p_prev(f.p.rows(), c), q_prev(f.q.rows(), c);
    for (int j = 0; j < c; ++j) {
      const int i = cluster[static_cast<std::size_t>(j)];
      p_cl.col(j) = f.p.col(i);
      q_cl.col(j) = f.q.col(i);
      p_prev.col(j) = prev.p.col(i);
      q_prev.col(j) = prev.q.col(i);
    }
    if (mean_sinh2r(f.ch, f.sh, cluster) > align_floor) {
      const Eigen::MatrixXcd rot =
          polar_unitary(p_cl.adjoint() * p_prev + q_cl.adjoint() * q_prev);
      p_cl = p_cl * rot;
      q_cl = q_cl * rot;
    } else {
      p_cl = p_cl * polar_unitary(p_cl.adjoint() * p_prev);
      q_cl = q_cl * polar_unitary(q_cl.adjoint() * q_prev);
    }
    for (int j = 0; j < c; ++j) {
      const int i = cluster[static_cast<std::size_t>(j)];
      f.p.col(i) = p_cl.col(j);
      f.q.col(i) = q_cl.col(j);
    }
  }

  // Per-pair global phases; mirrored into V by construction downstream.
  for (int i = 0; i < n; ++i) {
    if (2.0 * f.ch(i) * f.sh(i) > align_floor) {
      const Complex z = prev.p.col(i).dot(f.p.col(i)) + prev.q.col(i).dot(f.q.col(i));
      const Complex c = std::abs(z) > 0.0 ? std::conj(z) / std::abs(z) : Complex(1.0, 0.0);
      f.p.col(i) *= c;
      f.q.col(i) *= c;
    } else {
      // Unsqueezed pair: the relative phase between p and q is pure gauge.
      const Complex zp = prev.p.col(i).dot(f.p.col(i));
      const Complex zq = prev.q.col(i).dot(f.q.col(i));
      if (std::abs(zp) > 0.0) f.p.col(i) *= std::conj(zp) / std::abs(zp);
      if (std::abs(zq) > 0.0) f.q.col(i) *= std::conj(zq) / std::abs(zq);
    }
  }
}

// Assemble quadrature-space u, v, d.  V is solved row-wise from
// M = diag(P,Q)^dag AMP = SIG diag(R,T)^dag, a perfectly conditioned least
// squares since cosh^2 + sinh^2 >= 1, then projected to the closest unitary.
void finish_point(const Eigen::MatrixXcd& amp, const PairFactors& f,
                  const Eigen::MatrixXcd& l, Eigen::MatrixXcd& u_out,
                  Eigen::MatrixXcd& v_out, Eigen::VectorXd& d_out) {
  const int n = static_cast<int>(f.ch.size());
  const Eigen::MatrixXcd m_top = f.p.adjoint() * amp.topRows(n);
  const Eigen::MatrixXcd m_bot = f.q.adjoint() * amp.bottomRows(n);

  Eigen::MatrixXcd r_dag(n, n), t_dag(n, n);
  for (int i = 0; i < n; ++i) {
    const double wsum = f.ch(i) * f.ch(i) + f.sh(i) * f.sh(i);
    r_dag.row(i) =
        (f.ch(i) * m_top.row(i).head(n) + f.sh(i) * m_bot.row(i).head(n)) / wsum;
    t_dag.row(i) =
        (f.sh(i) * m_top.row(i).tail(n) + f.ch(i) * m_bot.row(i).tail(n)) / wsum;
  }
  r_dag = polar_unitary(r_dag);
  t_dag = polar_unitary(t_dag);

  Eigen::MatrixXcd u_amp = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  u_amp.topLeftCorner(n, n) = f.p;
  u_amp.bottomRightCorner(n, n) = f.q;
  Eigen::MatrixXcd v_amp = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  v_amp.topLeftCorner(n, n) = r_dag.adjoint();
  v_amp.bottomRightCorner(n, n) = t_dag.adjoint();

  u_out = l * u_amp * l.adjoint();
  v_out = l * v_amp * l.adjoint();
  d_out.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    d_out(i) = f.ch(i) + f.sh(i);
    d_out(n + i) = 1.0 / d_out(i);
  }
}

void check_symplectic_input(const Eigen::MatrixXcd& s, double omega, bool has_omega) {
  if (s.rows() != s.cols() || s.rows() % 2 != 0 || s.rows() == 0)
    throw ValidationError("bmd: input must be 2N x 2N");
  const double scale = std::max(1.0, max_abs(s));
  if (symplectic_defect(s) > kBmdInputTol * scale * scale) {
    std::ostringstream msg;
    msg << "bmd: input is not omega-symplectic (defect " << symplectic_defect(s);
    if (has_omega) msg << " at omega = " << omega;
    msg << ")";
    throw ValidationError(msg.str());
  }
}

bool nearly_real(const Eigen::MatrixXcd& s) {
  return max_abs(Eigen::MatrixXcd(s.imag().cast<Complex>())) <=
         1e-13 * std::max(1.0, max_abs(s));
}

}  // namespace

BmdPoint pointwise_bmd(const Eigen::MatrixXcd& s) {
  check_symplectic_input(s, 0.0, false);
  const int n = static_cast<int>(s.rows()) / 2;
  const Eigen::MatrixXcd l = amplitude_to_quadrature_basis(n);
  const Eigen::MatrixXcd amp = l.adjoint() * s * l;
  PairFactors f = raw_factors(amp);
  if (nearly_real(s)) {
    const Eigen::MatrixXcd h = amp * amp.adjoint();
    realify_base(f, h.topRightCorner(n, n), max_abs(h));
  }
  BmdPoint out;
  out.has_degenerate_cluster = f.has_degenerate_cluster;
  finish_point(amp, f, l, out.u, out.v, out.d);
  return out;
}

MorphingDecomposition continue_decomposition(const TransferGrid& transfer) {
  const FrequencyGrid& grid = transfer.grid;
  if (!grid.symmetric)
    throw ValidationError("continue_decomposition: needs a symmetric grid");
  const int n = transfer.n_modes;
  const int points = grid.size();
  const Eigen::MatrixXcd l = amplitude_to_quadrature_basis(n);

  int base = -1;
  for (int k = 0; k < points; ++k)
    if (grid.at(k) == 0.0) base = k;
  if (base < 0) base = points / 2;  // symmetric grid without 0: march from center

  MorphingDecomposition out;
  out.grid = grid;
  out.n_modes = n;
  out.u.resize(static_cast<std::size_t>(points));
  out.v.resize(static_cast<std::size_t>(points));
  out.d.resize(static_cast<std::size_t>(points));

  PairFactors prev;
  Eigen::MatrixXcd base_amp;
  const bool base_real = grid.at(base) == 0.0;
  for (int k = base; k < points; ++k) {
    const Eigen::MatrixXcd& s = transfer.at(k);
    check_symplectic_input(s, grid.at(k), true);
    const Eigen::MatrixXcd amp = l.adjoint() * s * l;
    PairFactors f = raw_factors(amp);
    if (k == base) {
      if (base_real) {
        const Eigen::MatrixXcd h = amp * amp.adjoint();
        realify_base(f, h.topRightCorner(n, n), max_abs(h));
      }
      base_amp = amp;
    } else {
      if (k == base + 1 && regauge_base_clusters(prev, f, base_real)) {
        finish_point(base_amp, prev, l, out.u[static_cast<std::size_t>(base)],
                     out.v[static_cast<std::size_t>(base)],
                     out.d[static_cast<std::size_t>(base)]);
      }
      align_to_previous(f, prev, grid.at(k - 1), grid.at(k),
                        max_abs(Eigen::MatrixXcd(amp * amp.adjoint())));
    }
    finish_point(amp, f, l, out.u[static_cast<std::size_t>(k)],
                 out.v[static_cast<std::size_t>(k)], out.d[static_cast<std::size_t>(k)]);
    prev = std::move(f);
  }
  // Negative side by conjugation; inherits conjugate symmetry exactly.
  for (int k = base - 1; k >= 0; --k) {
    const int m = grid.mirror_index(k);
    out.u[static_cast<std::size_t>(k)] = out.u[static_cast<std::size_t>(m)].conjugate();
    out.v[static_cast<std::size_t>(k)] = out.v[static_cast<std::size_t>(m)].conjugate();
    out.d[static_cast<std::size_t>(k)] = out.d[static_cast<std::size_t>(m)];
  }
  return out;
}

double MorphingDecomposition::supermode_noise(int column, int k) const {
  if (column < 1 || column > 2 * n_modes)
    throw ValidationError("supermode_noise: column out of range");
  const double dk = d[static_cast<std::size_t>(k)](column - 1);
  return dk * dk * vacuum_level();
}

SupermodeQuadratures supermode_quadratures(const MorphingDecomposition& decomp) {
  SupermodeQuadratures out;
  out.grid = decomp.grid;
  out.n_modes = decomp.n_modes;
  out.u_dagger.reserve(decomp.u.size());
  for (const auto& u : decomp.u) out.u_dagger.push_back(u.adjoint());
  for (int i = 1; i <= decomp.n_modes; ++i) {
    std::ostringstream label;
    label << "supermode " << i << " anti-squeezed quadrature (noise d_" << i << "^2)";
    out.row_labels.push_back(label.str());
  }
  for (int i = 1; i <= decomp.n_modes; ++i) {
    std::ostringstream label;
    label << "supermode " << i << " squeezed quadrature (noise d_" << i << "^-2)";
    out.row_labels.push_back(label.str());
  }
  return out;
}

std::string SupermodeQuadratures::describe_row(
    int row, int k, const std::vector<std::string>& input_labels) const {
  const Eigen::MatrixXcd& ud = u_dagger[static_cast<std::size_t>(k)];
  std::ostringstream text;
  for (int j = 0; j < 2 * n_modes; ++j) {
    const Complex c = ud(row - 1, j);
    if (std::abs(c) < 1e-12) continue;
    if (text.tellp() > 0) text << " + ";
    text << "(" << format_complex(c) << ") ";
    if (j < static_cast<int>(input_labels.size()))
      text << input_labels[static_cast<std::size_t>(j)];
    else if (j < n_modes)
      text << "x_" << j + 1;
    else
      text << "y_" << j - n_modes + 1;
  }
  return text.str();
}

}  // namespace imelab
