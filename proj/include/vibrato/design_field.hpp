#pragma once

#include "vibrato/common.hpp"
#include "vibrato/grid.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace vibrato {

/// Design parameterization chain on the design span of the duct:
///
///   s (nodal in [0,1]) --map_bounds--> s~ (nodal, |s~| <= h/2)
///     --node_to_cell--> s~_c --pde_filter--> sbar_c --cell_to_node--> sbar
///
/// sbar is the nodal level-set field: positive marks solid, negative
/// acoustic. Nodes outside the design span are frozen at -h/2 (open
/// channel). Every stage is linear, and the reverse chain applies the
/// transposes in reverse order.
///
/// The filter solves (-r^2 lap + 1) sbar_c = s~_c with a finite-volume
/// 5-point stencil and Neumann boundaries on the design-cell grid. The
/// operator is symmetric, so one Cholesky factorization serves both the
/// forward solve and its transpose in the chain rule. r = 0 reduces to the
/// identity.
class DesignChain {
 public:
  DesignChain(const DuctMesh& mesh, double filter_radius)
      : mesh_(mesh), radius_(filter_radius) {
    require(filter_radius >= 0.0, "design: filter radius must be >= 0");
    ncx_ = mesh.design_cols();
    ncy_ = mesh.design_rows();
    build_filter_matrix();
  }

  const DuctMesh& mesh() const { return mesh_; }
  double filter_radius() const { return radius_; }
  double frozen_value() const { return -0.5 * mesh_.h(); }
  int num_cells() const { return ncx_ * ncy_; }

  /// s~ = h*(s - 1/2); rejects out-of-bound design values.
  Vector map_bounds(const Vector& s) const {
    require(s.size() == mesh_.num_design_nodes(), "map_bounds: design vector size mismatch");
    for (Eigen::Index k = 0; k < s.size(); ++k)
      require(s[k] >= 0.0 && s[k] <= 1.0, "map_bounds: design variable outside [0,1]");
    return mesh_.h() * (s.array() - 0.5);
  }

  Vector map_bounds_transpose(const Vector& g) const { return mesh_.h() * g; }

  /// Cell value = mean of its 4 corner nodes.
  Vector node_to_cell(const Vector& nodal) const {
    require(nodal.size() == mesh_.num_design_nodes(), "node_to_cell: size mismatch");
    Vector cells(num_cells());
    for (int cj = 0; cj < ncy_; ++cj)
      for (int ci = 0; ci < ncx_; ++ci) {
        const auto c = cell_corners(ci, cj);
        cells[cj * ncx_ + ci] =
            0.25 * (nodal[c[0]] + nodal[c[1]] + nodal[c[2]] + nodal[c[3]]);
      }
    return cells;
  }

  Vector node_to_cell_transpose(const Vector& cells) const {
    require(cells.size() == num_cells(), "node_to_cell_transpose: size mismatch");
    Vector nodal = Vector::Zero(mesh_.num_design_nodes());
    for (int cj = 0; cj < ncy_; ++cj)
      for (int ci = 0; ci < ncx_; ++ci) {
        const auto c = cell_corners(ci, cj);
        const double v = 0.25 * cells[cj * ncx_ + ci];
        for (int k : c) nodal[k] += v;
      }
    return nodal;
  }

  Vector pde_filter(const Vector& cells) const {
    require(cells.size() == num_cells(), "pde_filter: size mismatch");
    if (radius_ == 0.0) return cells;
    Vector out = filter_solver_.solve(cells);
    require(filter_solver_.info() == Eigen::Success, "pde_filter: solve failed");
    return out;
  }

  /// The filter matrix is symmetric; the transpose solve reuses the factorization.
  Vector pde_filter_transpose(const Vector& cells) const { return pde_filter(cells); }

  /// Node value = mean of adjacent design cells (4 interior, 2 edge, 1 corner).
  Vector cell_to_node(const Vector& cells) const {
    require(cells.size() == num_cells(), "cell_to_node: size mismatch");
    Vector nodal(mesh_.num_design_nodes());
    for (int j = 0; j <= ncy_; ++j)
      for (int i = 0; i <= ncx_; ++i) {
        double sum = 0.0;
        int cnt = 0;
        for (int cj = j - 1; cj <= j; ++cj)
          for (int ci = i - 1; ci <= i; ++ci)
            if (ci >= 0 && ci < ncx_ && cj >= 0 && cj < ncy_) {
              sum += cells[cj * ncx_ + ci];
              ++cnt;
            }
        nodal[j * (ncx_ + 1) + i] = sum / cnt;
      }
    return nodal;
  }

  Vector cell_to_node_transpose(const Vector& nodal) const {
    require(nodal.size() == mesh_.num_design_nodes(), "cell_to_node_transpose: size mismatch");
    Vector cells = Vector::Zero(num_cells());
    for (int j = 0; j <= ncy_; ++j)
      for (int i = 0; i <= ncx_; ++i) {
        int cnt = 0;
        for (int cj = j - 1; cj <= j; ++cj)
          for (int ci = i - 1; ci <= i; ++ci)
            if (ci >= 0 && ci < ncx_ && cj >= 0 && cj < ncy_) ++cnt;
        const double v = nodal[j * (ncx_ + 1) + i] / cnt;
        for (int cj = j - 1; cj <= j; ++cj)
          for (int ci = i - 1; ci <= i; ++ci)
            if (ci >= 0 && ci < ncx_ && cj >= 0 && cj < ncy_) cells[cj * ncx_ + ci] += v;
      }
    return cells;
  }

  /// Full chain: design variables -> nodal level-set field on every mesh
  /// node, frozen at -h/2 outside the design span.
  Vector physical_field(const Vector& s) const {
    const Vector sbar_d = cell_to_node(pde_filter(node_to_cell(map_bounds(s))));
    Vector sbar = Vector::Constant(mesh_.num_nodes(), frozen_value());
    const auto& dn = mesh_.design_nodes();
    for (std::size_t k = 0; k < dn.size(); ++k) sbar[dn[k]] = sbar_d[k];
    return sbar;
  }

  /// Reverse chain: dPhi/dsbar (all mesh nodes) -> dPhi/ds (design nodes).
  Vector chain_rule(const Vector& g_sbar) const {
    require(g_sbar.size() == mesh_.num_nodes(), "chain_rule: expected full nodal field");
    Vector g_d(mesh_.num_design_nodes());
    const auto& dn = mesh_.design_nodes();
    for (std::size_t k = 0; k < dn.size(); ++k) g_d[k] = g_sbar[dn[k]];
    return map_bounds_transpose(
        node_to_cell_transpose(pde_filter_transpose(cell_to_node_transpose(g_d))));
  }

  /// Level-set field of the empty duct (all acoustic).
  Vector empty_field() const { return Vector::Constant(mesh_.num_nodes(), frozen_value()); }

 private:
  std::array<int, 4> cell_corners(int ci, int cj) const {
    const int w = ncx_ + 1;
    return {cj * w + ci, cj * w + ci + 1, (cj + 1) * w + ci + 1, (cj + 1) * w + ci};
  }

  void build_filter_matrix() {
    if (radius_ == 0.0) return;
    const double k = (radius_ / mesh_.h()) * (radius_ / mesh_.h());
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(num_cells()) * 5);
    for (int cj = 0; cj < ncy_; ++cj)
      for (int ci = 0; ci < ncx_; ++ci) {
        const int c = cj * ncx_ + ci;
        int deg = 0;
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        for (int q = 0; q < 4; ++q) {
          const int ni = ci + di[q], nj = cj + dj[q];
          if (ni < 0 || ni >= ncx_ || nj < 0 || nj >= ncy_) continue;
          trips.emplace_back(c, nj * ncx_ + ni, -k);
          ++deg;
        }
        trips.emplace_back(c, c, 1.0 + k * deg);
      }
    SparseMatrix A(num_cells(), num_cells());
    A.setFromTriplets(trips.begin(), trips.end());
    filter_solver_.compute(A);
    require(filter_solver_.info() == Eigen::Success, "pde_filter: factorization failed");
  }

  const DuctMesh& mesh_;
  double radius_;
  int ncx_ = 0, ncy_ = 0;
  Eigen::SimplicialLDLT<SparseMatrix> filter_solver_;
};

struct InitialDesignParams {
  int r1 = 7;
  int r2 = 7;
  double lx = 0.1;
  double ly = 0.1;
  double threshold = 0.01;
};

/// Cosine-lattice initial guess: an array of solid discs in an acoustic
/// background, evaluated at the global nodal coordinates of the design span.
inline Vector initial_design(const DuctMesh& mesh, const InitialDesignParams& prm) {
  Vector s(mesh.num_design_nodes());
  const auto& dn = mesh.design_nodes();
  for (std::size_t k = 0; k < dn.size(); ++k) {
    const double x = mesh.node_x(dn[k]);
    const double y = mesh.node_y(dn[k]);
    const double sv =
        std::cos(prm.r1 * M_PI * x / prm.lx) * std::cos(prm.r2 * M_PI * y / prm.ly) + 0.1;
    s[k] = (sv >= prm.threshold) ? 0.0 : 1.0;
  }
  return s;
}

}  // namespace vibrato
