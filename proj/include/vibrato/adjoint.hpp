#pragma once

#include "vibrato/assembly.hpp"
#include "vibrato/common.hpp"
#include "vibrato/grid.hpp"
#include "vibrato/newmark.hpp"

#include <array>
#include <vector>

namespace vibrato {

namespace detail {

/// Discrete topology signature of an element: classification plus, for cut
/// elements, the corner sign pattern and the saddle pairing. The design
/// derivative of the element matrices is smooth only while this stays
/// fixed.
inline int cut_signature(const std::array<double, 4>& corners, double h) {
  const Phase ph = classify(corners, h);
  if (ph == Phase::Solid) return -1;
  if (ph == Phase::Acoustic) return -2;
  const auto c = snap_corners(corners, h);
  int code = 0;
  for (int k = 0; k < 4; ++k)
    if (c[k] > 0.0) code |= 1 << k;
  const bool saddle = (code == 5 || code == 10);
  if (saddle) {
    const double vc = 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]);
    code |= (vc > 0.0) ? 16 : 32;
  }
  return code;
}

}  // namespace detail

/// Central finite difference of the cut-integrated element matrices with
/// respect to one corner level-set value, step 1e-6*h, re-tessellating for
/// each evaluation. When the perturbation crosses a topology change the
/// difference falls back to the one-sided variant on the consistent side.
struct CornerDerivative {
  ElementMatrices d;
  bool one_sided = false;
  bool degenerate = false;  // topology changed on both sides; derivative zeroed
};

inline CornerDerivative element_matrix_derivative(const std::array<double, 4>& corners,
                                                  const MaterialParams& mat, double h,
                                                  int corner) {
  const double delta = 1e-6 * h;
  const int sig0 = detail::cut_signature(corners, h);

  std::array<double, 4> up = corners, dn = corners;
  up[corner] += delta;
  dn[corner] -= delta;
  const int sig_up = detail::cut_signature(up, h);
  const int sig_dn = detail::cut_signature(dn, h);

  CornerDerivative out;
  if (sig_up == sig0 && sig_dn == sig0) {
    const ElementMatrices eu = element_matrices_for_corners(up, mat, h);
    const ElementMatrices ed = element_matrices_for_corners(dn, mat, h);
    out.d.M = (eu.M - ed.M) / (2.0 * delta);
    out.d.C = (eu.C - ed.C) / (2.0 * delta);
    out.d.K = (eu.K - ed.K) / (2.0 * delta);
  } else if (sig_up == sig0 || sig_dn == sig0) {
    const ElementMatrices e0 = element_matrices_for_corners(corners, mat, h);
    out.one_sided = true;
    if (sig_up == sig0) {
      const ElementMatrices eu = element_matrices_for_corners(up, mat, h);
      out.d.M = (eu.M - e0.M) / delta;
      out.d.C = (eu.C - e0.C) / delta;
      out.d.K = (eu.K - e0.K) / delta;
    } else {
      const ElementMatrices ed = element_matrices_for_corners(dn, mat, h);
      out.d.M = (e0.M - ed.M) / delta;
      out.d.C = (e0.C - ed.C) / delta;
      out.d.K = (e0.K - ed.K) / delta;
    }
  } else {
    out.degenerate = true;
  }
  return out;
}

/// Adjoint multipliers recorded per step (only kept when requested; the
/// production path accumulates sensitivities on the fly instead).
struct AdjointTrace {
  std::vector<Vector> lam, lamd, lamdd;
};

/// Fully discrete adjoint of the Newmark recurrence. One factorization of
/// Khat (shared with the forward solver) serves every reverse step through
/// transpose solves; the n = 0 step uses the mass factorization.
class AdjointSolver {
 public:
  AdjointSolver(const DuctMesh& mesh, const SystemMatrices& sys, const TransientSolver& ts,
                const Discretization& disc, const MaterialParams& mat, const Vector& sbar,
                int nthreads = 1)
      : mesh_(mesh), sys_(sys), ts_(ts), disc_(disc), nthreads_(nthreads) {
    derivs_.resize(disc_.cut_elems.size());
    parallel_for_chunks(disc_.cut_elems.size(), nthreads, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const auto corners = corner_values(mesh_, sbar, disc_.cut_elems[k]);
        for (int j = 0; j < 4; ++j)
          derivs_[k][j] = element_matrix_derivative(corners, mat, mesh_.h(), j);
      }
    });
  }

  int num_one_sided() const {
    int c = 0;
    for (const auto& d : derivs_)
      for (const auto& cd : d) c += cd.one_sided ? 1 : 0;
    return c;
  }

  /// seed_trace[n] = dPhi/d(outlet trace sample n), n = 0..N-1. The seed on
  /// the state is seed_trace[n] * outlet_weights, living in the v slot only.
  /// Returns dPhi/dsbar on all mesh nodes (zero away from cut elements).
  Vector sensitivity(const StateHistory& hist, const Vector& seed_trace,
                     AdjointTrace* record = nullptr) const {
    const int N = hist.nsteps();
    require(seed_trace.size() == N, "adjoint: seed length must equal the trace length");
    const NewmarkParams& nm = ts_.params();
    const double a1 = nm.a1(), a2 = nm.a2(), a3 = nm.a3(), a4 = nm.a4(), a5 = nm.a5(),
                 a6 = nm.a6();

    const std::size_t ncut = disc_.cut_elems.size();
    std::vector<std::array<double, 4>> acc(ncut, {0.0, 0.0, 0.0, 0.0});

    auto seed_v = [&](int n) -> Vector {
      if (n >= N || seed_trace[n] == 0.0) return Vector::Zero(sys_.ndof);
      return seed_trace[n] * sys_.outlet_weights;
    };

    Vector lam, lamd, lamdd;        // step n+1 multipliers
    Vector lam_n, lamd_n, lamdd_n;  // step n
    if (record) {
      record->lam.assign(N + 1, Vector());
      record->lamd.assign(N + 1, Vector());
      record->lamdd.assign(N + 1, Vector());
    }

    for (int n = N; n >= 1; --n) {
      Vector rhs1 = -seed_v(n);
      Vector rhs2 = Vector::Zero(sys_.ndof);
      Vector rhs3 = Vector::Zero(sys_.ndof);
      if (n < N) {
        rhs1 += sys_.M.transpose() * (a6 * lam) + sys_.C.transpose() * (a3 * lam) -
                a3 * lamd - a6 * lamdd;
        rhs2 += sys_.M.transpose() * (a4 * lam) - sys_.C.transpose() * (a1 * lam) +
                a1 * lamd - a4 * lamdd;
        rhs3 += sys_.M.transpose() * (a5 * lam) - sys_.C.transpose() * (a2 * lam) +
                a2 * lamd - a5 * lamdd;
      }
      lamd_n = rhs2;
      lamdd_n = rhs3;
      lam_n = ts_.khat_solver().solve_transpose(rhs1 + a3 * lamd_n + a6 * lamdd_n);

      accumulate_step(lam_n, hist.v[n], hist.vd[n], hist.vdd[n], acc);

      if (record) {
        record->lam[n] = lam_n;
        record->lamd[n] = lamd_n;
        record->lamdd[n] = lamdd_n;
      }
      lam = lam_n;
      lamd = lamd_n;
      lamdd = lamdd_n;
    }

    // n = 0: A0 has identity v and v-dot rows and M in the v-ddot row.
    Vector rhs1 = -seed_v(0) + sys_.M.transpose() * (a6 * lam) +
                  sys_.C.transpose() * (a3 * lam) - a3 * lamd - a6 * lamdd;
    Vector rhs2 = sys_.M.transpose() * (a4 * lam) - sys_.C.transpose() * (a1 * lam) +
                  a1 * lamd - a4 * lamdd;
    Vector rhs3 = sys_.M.transpose() * (a5 * lam) - sys_.C.transpose() * (a2 * lam) +
                  a2 * lamd - a5 * lamdd;
    const Vector lam0 = rhs1;
    const Vector lamd0 = rhs2;
    const Vector lamdd0 = ts_.mass_solver().solve_transpose(rhs3);
    if (record) {
      record->lam[0] = lam0;
      record->lamd[0] = lamd0;
      record->lamdd[0] = lamdd0;
    }

    accumulate_initial(lamdd0, hist.vdd[0], acc);

    Vector g = Vector::Zero(mesh_.num_nodes());
    for (std::size_t k = 0; k < ncut; ++k) {
      const auto nodes = mesh_.elem_nodes(disc_.cut_elems[k]);
      for (int j = 0; j < 4; ++j) g[nodes[j]] += acc[k][j];
    }
    return g;
  }

 private:
  using Local = Eigen::Matrix<double, 12, 1>;

  Local gather(const std::array<int, 12>& dofs, const Vector& x) const {
    Local out;
    for (int i = 0; i < 12; ++i) out[i] = x[dofs[i]];
    return out;
  }

  void accumulate_step(const Vector& lam, const Vector& v, const Vector& vd,
                       const Vector& vdd, std::vector<std::array<double, 4>>& acc) const {
    parallel_for_chunks(disc_.cut_elems.size(), nthreads_, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const auto dofs = mesh_.elem_dofs(disc_.cut_elems[k]);
        const Local le = gather(dofs, lam);
        const Local ve = gather(dofs, v);
        const Local vde = gather(dofs, vd);
        const Local vdde = gather(dofs, vdd);
        for (int j = 0; j < 4; ++j) {
          const auto& d = derivs_[k][j];
          if (d.degenerate) continue;
          acc[k][j] += le.dot(d.d.K * ve + d.d.C * vde + d.d.M * vdde);
        }
      }
    });
  }

  void accumulate_initial(const Vector& lamdd0, const Vector& vdd0,
                          std::vector<std::array<double, 4>>& acc) const {
    parallel_for_chunks(disc_.cut_elems.size(), nthreads_, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const auto dofs = mesh_.elem_dofs(disc_.cut_elems[k]);
        const Local le = gather(dofs, lamdd0);
        const Local ve = gather(dofs, vdd0);
        for (int j = 0; j < 4; ++j) {
          const auto& d = derivs_[k][j];
          if (d.degenerate) continue;
          acc[k][j] += le.dot(d.d.M * ve);
        }
      }
    });
  }

  const DuctMesh& mesh_;
  const SystemMatrices& sys_;
  const TransientSolver& ts_;
  const Discretization& disc_;
  int nthreads_;
  std::vector<std::array<CornerDerivative, 4>> derivs_;
};

}  // namespace vibrato
