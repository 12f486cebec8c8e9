#pragma once

#include "vibrato/common.hpp"
#include "vibrato/cut_cell.hpp"
#include "vibrato/grid.hpp"
#include "vibrato/materials.hpp"

#include <array>
#include <vector>

namespace vibrato {

/// Dense element blocks over the local DOFs [ux0 uy0 .. ux3 uy3 p0..p3].
struct ElementMatrices {
  Eigen::Matrix<double, 12, 12> M = Eigen::Matrix<double, 12, 12>::Zero();
  Eigen::Matrix<double, 12, 12> C = Eigen::Matrix<double, 12, 12>::Zero();
  Eigen::Matrix<double, 12, 12> K = Eigen::Matrix<double, 12, 12>::Zero();
};

namespace detail {

struct VolumePoint {
  double x, y, w;
  bool solid;
};

inline void shape_values(double h, double x, double y, std::array<double, 4>& N,
                         std::array<double, 4>& dNdx, std::array<double, 4>& dNdy) {
  const double xi = x / h, eta = y / h;
  N = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
  dNdx = {-(1 - eta) / h, (1 - eta) / h, eta / h, -eta / h};
  dNdy = {-(1 - xi) / h, -xi / h, xi / h, (1 - xi) / h};
}

/// Accumulates mass/damping/stiffness contributions of one volume point.
/// Structural blocks use E = alpha*E_s, rho = alpha*rho_s with alpha = 1 on
/// solid points and alpha_void on acoustic points; the acoustic blocks use
/// 1/rho_a(x) and 1/K_a(x) with the reciprocal contrast.
inline void add_volume_point(const MaterialParams& mat, double h, const VolumePoint& pt,
                             ElementMatrices& em) {
  std::array<double, 4> N, dNdx, dNdy;
  shape_values(h, pt.x, pt.y, N, dNdx, dNdy);

  const double a_s = pt.solid ? 1.0 : mat.alpha_void;
  const double a_a = pt.solid ? mat.alpha_void : 1.0;
  const double E = a_s * mat.E_s;
  const double rho = a_s * mat.rho_s;
  const double wk_a = a_a / mat.rho_a;           // 1/rho_a(x)
  const double wm_a = a_a / mat.bulk_modulus();  // 1/K_a(x)
  const double ad = mat.alpha_d();
  const double bd = mat.beta_d();

  // plane stress
  const double c0 = E / (1.0 - mat.nu * mat.nu);
  const double c1 = c0, c2 = c0 * mat.nu, c3 = c0 * 0.5 * (1.0 - mat.nu);

  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      // structural stiffness: B_a^T C B_b (2x2 block)
      const double kxx = c1 * dNdx[a] * dNdx[b] + c3 * dNdy[a] * dNdy[b];
      const double kxy = c2 * dNdx[a] * dNdy[b] + c3 * dNdy[a] * dNdx[b];
      const double kyx = c2 * dNdy[a] * dNdx[b] + c3 * dNdx[a] * dNdy[b];
      const double kyy = c1 * dNdy[a] * dNdy[b] + c3 * dNdx[a] * dNdx[b];
      const double mss = rho * N[a] * N[b];
      em.K(2 * a, 2 * b) += pt.w * kxx;
      em.K(2 * a, 2 * b + 1) += pt.w * kxy;
      em.K(2 * a + 1, 2 * b) += pt.w * kyx;
      em.K(2 * a + 1, 2 * b + 1) += pt.w * kyy;
      em.M(2 * a, 2 * b) += pt.w * mss;
      em.M(2 * a + 1, 2 * b + 1) += pt.w * mss;
      // Rayleigh damping on the structural blocks only
      em.C(2 * a, 2 * b) += pt.w * (ad * mss + bd * kxx);
      em.C(2 * a, 2 * b + 1) += pt.w * bd * kxy;
      em.C(2 * a + 1, 2 * b) += pt.w * bd * kyx;
      em.C(2 * a + 1, 2 * b + 1) += pt.w * (ad * mss + bd * kyy);
      // acoustic blocks
      em.K(8 + a, 8 + b) += pt.w * wk_a * (dNdx[a] * dNdx[b] + dNdy[a] * dNdy[b]);
      em.M(8 + a, 8 + b) += pt.w * wm_a * N[a] * N[b];
    }
  }
}

/// Interface coupling at one Gauss point with normal n pointing from solid
/// into acoustic: K(u,p) += w N_u^T n N_p and M(p,u) -= w N_p^T n^T N_u.
/// The interface is the physical boundary, so no contrast enters here.
inline void add_interface_point(double h, double x, double y, double w,
                                const std::array<double, 2>& n, ElementMatrices& em) {
  std::array<double, 4> N, dNdx, dNdy;
  shape_values(h, x, y, N, dNdx, dNdy);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int d = 0; d < 2; ++d) {
        em.K(2 * a + d, 8 + b) += w * N[a] * n[d] * N[b];
        em.M(8 + b, 2 * a + d) -= w * N[b] * n[d] * N[a];
      }
}

inline std::vector<VolumePoint> gauss_square(double h, bool solid) {
  const double g = 0.5 / std::sqrt(3.0);
  const double q[2] = {h * (0.5 - g), h * (0.5 + g)};
  const double w = 0.25 * h * h;
  std::vector<VolumePoint> pts;
  pts.reserve(4);
  for (double x : q)
    for (double y : q) pts.push_back({x, y, w, solid});
  return pts;
}

inline void gauss_triangle(const CutTriangle& t, std::vector<VolumePoint>& pts) {
  const double area = t.area();
  // degree-2 rule with barycentric (2/3, 1/6, 1/6) permutations
  static const double bary[3][3] = {
      {2. / 3, 1. / 6, 1. / 6}, {1. / 6, 2. / 3, 1. / 6}, {1. / 6, 1. / 6, 2. / 3}};
  for (const auto& b : bary) {
    const double x = b[0] * t.v[0][0] + b[1] * t.v[1][0] + b[2] * t.v[2][0];
    const double y = b[0] * t.v[0][1] + b[1] * t.v[1][1] + b[2] * t.v[2][1];
    pts.push_back({x, y, area / 3.0, t.solid});
  }
}

}  // namespace detail

/// Element matrices of an uncut element of the given phase.
inline ElementMatrices uncut_element_matrices(Phase phase, const MaterialParams& mat,
                                              double h) {
  require(phase != Phase::Cut, "uncut_element_matrices: element is cut");
  ElementMatrices em;
  for (const auto& pt : detail::gauss_square(h, phase == Phase::Solid))
    detail::add_volume_point(mat, h, pt, em);
  return em;
}

/// Element matrices of a cut element from its sub-triangle and interface
/// quadrature.
inline ElementMatrices cut_element_matrices(const CutQuadrature& quad,
                                            const MaterialParams& mat, double h) {
  ElementMatrices em;
  std::vector<detail::VolumePoint> pts;
  pts.reserve(quad.triangles.size() * 3);
  for (const auto& t : quad.triangles) detail::gauss_triangle(t, pts);
  for (const auto& pt : pts) detail::add_volume_point(mat, h, pt, em);

  const double g = 0.5 / std::sqrt(3.0);
  for (const auto& seg : quad.segments) {
    const double len = seg.length();
    const double mx = 0.5 * (seg.a[0] + seg.b[0]), my = 0.5 * (seg.a[1] + seg.b[1]);
    const double dx = seg.b[0] - seg.a[0], dy = seg.b[1] - seg.a[1];
    for (double sgn : {-1.0, 1.0}) {
      const double x = mx + sgn * g * dx;
      const double y = my + sgn * g * dy;
      detail::add_interface_point(h, x, y, 0.5 * len, seg.normal, em);
    }
  }
  return em;
}

/// Element matrices for arbitrary corner level-set values (classifies and,
/// if cut, tessellates first). Used directly by the semi-analytic design
/// derivative.
inline ElementMatrices element_matrices_for_corners(const std::array<double, 4>& corners,
                                                    const MaterialParams& mat, double h) {
  const Phase phase = classify(corners, h);
  if (phase == Phase::Cut) return cut_element_matrices(tessellate(corners, h), mat, h);
  return uncut_element_matrices(phase, mat, h);
}

/// Geometry-dependent discretization data of one design: classification and
/// the cut-element quadratures.
struct Discretization {
  std::vector<Phase> phases;
  std::vector<int> cut_elems;             // element ids, ascending
  std::vector<CutQuadrature> cut_quads;   // aligned with cut_elems

  int num_cut() const { return static_cast<int>(cut_elems.size()); }
};

inline Discretization discretize(const DuctMesh& mesh, const Vector& sbar, int nthreads = 1) {
  Discretization d;
  d.phases = classify_elements(mesh, sbar);
  for (int e = 0; e < mesh.num_elems(); ++e)
    if (d.phases[e] == Phase::Cut) d.cut_elems.push_back(e);
  d.cut_quads.resize(d.cut_elems.size());
  parallel_for_chunks(d.cut_elems.size(), nthreads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      d.cut_quads[k] =
          tessellate(corner_values(mesh, sbar, d.cut_elems[k]), mesh.h());
  });
  return d;
}

/// Assembled global system over the stacked [u; p] DOFs. All clamped-DOF
/// rows and columns are cleared at assembly, with unit diagonals in M and K,
/// so the clamped displacements stay exactly zero as long as right-hand
/// sides are masked (the solver wrapper does that).
struct SystemMatrices {
  SparseMatrix M, C, K, Khat;
  Vector inlet_shape;            // source shape; load h^n = inlet_shape * dp_in/dt(t_n)
  Vector outlet_weights;         // boundary integral weights of the outlet trace
  std::vector<char> clamped;     // per-DOF Dirichlet mask
  int ndof = 0;
};

/// Scatter-adds element blocks, absorbing-boundary terms and the inlet
/// source shape; applies the displacement clamp.
inline SystemMatrices assemble_system(const DuctMesh& mesh, const Discretization& disc,
                                      const MaterialParams& mat, int nthreads = 1) {
  SystemMatrices sys;
  sys.ndof = mesh.num_dofs();
  sys.clamped.assign(sys.ndof, 0);
  for (int node : mesh.clamped_nodes()) {
    sys.clamped[mesh.ux_dof(node)] = 1;
    sys.clamped[mesh.uy_dof(node)] = 1;
  }

  const ElementMatrices solid_em = uncut_element_matrices(Phase::Solid, mat, mesh.h());
  const ElementMatrices acoustic_em = uncut_element_matrices(Phase::Acoustic, mat, mesh.h());

  std::vector<ElementMatrices> cut_ems(disc.cut_elems.size());
  parallel_for_chunks(disc.cut_elems.size(), nthreads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      cut_ems[k] = cut_element_matrices(disc.cut_quads[k], mat, mesh.h());
  });

  std::vector<Triplet> tm, tc, tk;
  const std::size_t guess = static_cast<std::size_t>(mesh.num_elems()) * 144;
  tm.reserve(guess);
  tc.reserve(guess);
  tk.reserve(guess);

  auto scatter = [&](int e, const ElementMatrices& em) {
    const auto dofs = mesh.elem_dofs(e);
    for (int i = 0; i < 12; ++i) {
      if (sys.clamped[dofs[i]]) continue;
      for (int j = 0; j < 12; ++j) {
        if (sys.clamped[dofs[j]]) continue;
        if (em.M(i, j) != 0.0) tm.emplace_back(dofs[i], dofs[j], em.M(i, j));
        if (em.C(i, j) != 0.0) tc.emplace_back(dofs[i], dofs[j], em.C(i, j));
        if (em.K(i, j) != 0.0) tk.emplace_back(dofs[i], dofs[j], em.K(i, j));
      }
    }
  };

  std::size_t next_cut = 0;
  for (int e = 0; e < mesh.num_elems(); ++e) {
    switch (disc.phases[e]) {
      case Phase::Solid: scatter(e, solid_em); break;
      case Phase::Acoustic: scatter(e, acoustic_em); break;
      case Phase::Cut: scatter(e, cut_ems[next_cut++]); break;
    }
  }
  require(next_cut == disc.cut_quads.size(), "assemble: cut element bookkeeping broke");

  // absorbing boundaries: C gains 1/(rho_a c_a) * edge mass on inlet and outlet
  const double h = mesh.h();
  const double cw = 1.0 / (mat.rho_a * mat.c_a);
  auto add_absorbing = [&](const std::vector<std::array<int, 2>>& edges) {
    for (const auto& ed : edges) {
      const int p0 = mesh.p_dof(ed[0]), p1 = mesh.p_dof(ed[1]);
      tc.emplace_back(p0, p0, cw * h / 3.0);
      tc.emplace_back(p1, p1, cw * h / 3.0);
      tc.emplace_back(p0, p1, cw * h / 6.0);
      tc.emplace_back(p1, p0, cw * h / 6.0);
    }
  };
  add_absorbing(mesh.inlet_edges());
  add_absorbing(mesh.outlet_edges());

  // inlet source shape: g = 2/(rho_a c_a) * int N_p^T dGamma
  sys.inlet_shape = Vector::Zero(sys.ndof);
  for (const auto& ed : mesh.inlet_edges()) {
    sys.inlet_shape[mesh.p_dof(ed[0])] += 2.0 * cw * 0.5 * h;
    sys.inlet_shape[mesh.p_dof(ed[1])] += 2.0 * cw * 0.5 * h;
  }

  // outlet trace weights: trapezoid-consistent 1D boundary integral
  sys.outlet_weights = Vector::Zero(sys.ndof);
  for (const auto& ed : mesh.outlet_edges()) {
    sys.outlet_weights[mesh.p_dof(ed[0])] += 0.5 * h;
    sys.outlet_weights[mesh.p_dof(ed[1])] += 0.5 * h;
  }

  for (int dof = 0; dof < sys.ndof; ++dof)
    if (sys.clamped[dof]) {
      tm.emplace_back(dof, dof, 1.0);
      tk.emplace_back(dof, dof, 1.0);
    }

  sys.M.resize(sys.ndof, sys.ndof);
  sys.C.resize(sys.ndof, sys.ndof);
  sys.K.resize(sys.ndof, sys.ndof);
  sys.M.setFromTriplets(tm.begin(), tm.end());
  sys.C.setFromTriplets(tc.begin(), tc.end());
  sys.K.setFromTriplets(tk.begin(), tk.end());
  return sys;
}

/// Khat = K + a6 M + a3 C; carries the Dirichlet structure of its parts.
inline void effective_stiffness(SystemMatrices& sys, double a3, double a6) {
  sys.Khat = sys.K + a6 * sys.M + a3 * sys.C;
}

}  // namespace vibrato
