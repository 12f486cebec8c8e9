#pragma once

#include "vibrato/common.hpp"

#include <array>
#include <vector>

namespace vibrato {

/// Structured uniform quad mesh of an acoustic duct:
///
///   |<- inlet ->|<------ design ------>|<- outlet ->|
///
/// square elements of edge h_e, ny rows. Node (i,j) sits at (i*h_e, j*h_e).
/// Left boundary radiates the incoming wave, right boundary absorbs and is
/// the transmission measurement line. Displacement DOFs are clamped on the
/// top and bottom walls of the design span.
///
/// DOF layout is blocked: [u_x u_y per node ... | p per node ...], so the
/// displacement DOFs of node k are (2k, 2k+1) and its pressure DOF is
/// 2*num_nodes + k.
class DuctMesh {
 public:
  DuctMesh(int inlet_elems, int design_elems, int outlet_elems, int ny, double h_e)
      : inlet_elems_(inlet_elems),
        design_elems_(design_elems),
        outlet_elems_(outlet_elems),
        ny_(ny),
        h_(h_e) {
    require(inlet_elems >= 1 && design_elems >= 1 && outlet_elems >= 1 && ny >= 1,
            "mesh: all element counts must be positive");
    require(h_e > 0.0, "mesh: element size must be positive");
    nx_ = inlet_elems_ + design_elems_ + outlet_elems_;

    design_node_.assign(num_nodes(), 0);
    design_nodes_.clear();
    for (int j = 0; j <= ny_; ++j) {
      for (int i = inlet_elems_; i <= inlet_elems_ + design_elems_; ++i) {
        const int k = node_index(i, j);
        design_node_[k] = 1;
        design_nodes_.push_back(k);
      }
    }

    clamped_nodes_.clear();
    for (int i = inlet_elems_; i <= inlet_elems_ + design_elems_; ++i) {
      clamped_nodes_.push_back(node_index(i, 0));
      clamped_nodes_.push_back(node_index(i, ny_));
    }
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double h() const { return h_; }
  int inlet_elems() const { return inlet_elems_; }
  int design_elems() const { return design_elems_; }
  int outlet_elems() const { return outlet_elems_; }

  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int num_elems() const { return nx_ * ny_; }
  int num_dofs() const { return 3 * num_nodes(); }

  int node_index(int i, int j) const { return j * (nx_ + 1) + i; }
  int elem_index(int i, int j) const { return j * nx_ + i; }
  int elem_col(int e) const { return e % nx_; }
  int elem_row(int e) const { return e / nx_; }

  double node_x(int k) const { return h_ * (k % (nx_ + 1)); }
  double node_y(int k) const { return h_ * (k / (nx_ + 1)); }

  /// Corner nodes of element e, counterclockwise from the lower-left.
  std::array<int, 4> elem_nodes(int e) const {
    const int i = elem_col(e), j = elem_row(e);
    return {node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1),
            node_index(i, j + 1)};
  }

  int ux_dof(int node) const { return 2 * node; }
  int uy_dof(int node) const { return 2 * node + 1; }
  int p_dof(int node) const { return 2 * num_nodes() + node; }

  /// Local DOFs of an element in the order [ux0 uy0 ... ux3 uy3 p0 p1 p2 p3].
  std::array<int, 12> elem_dofs(int e) const {
    const auto n = elem_nodes(e);
    return {ux_dof(n[0]), uy_dof(n[0]), ux_dof(n[1]), uy_dof(n[1]),
            ux_dof(n[2]), uy_dof(n[2]), ux_dof(n[3]), uy_dof(n[3]),
            p_dof(n[0]),  p_dof(n[1]),  p_dof(n[2]),  p_dof(n[3])};
  }

  bool is_design_node(int k) const { return design_node_[k] != 0; }
  const std::vector<int>& design_nodes() const { return design_nodes_; }
  int num_design_nodes() const { return static_cast<int>(design_nodes_.size()); }

  /// Design cells: elements whose four corners are all design nodes.
  int design_cols() const { return design_elems_; }
  int design_rows() const { return ny_; }
  int design_col0() const { return inlet_elems_; }
  int design_cell_elem(int ci, int cj) const { return elem_index(design_col0() + ci, cj); }

  /// Nodes with u = 0 (top and bottom walls of the design span).
  const std::vector<int>& clamped_nodes() const { return clamped_nodes_; }

  /// Vertical boundary edges as node pairs (bottom node, top node).
  std::vector<std::array<int, 2>> inlet_edges() const { return column_edges(0); }
  std::vector<std::array<int, 2>> outlet_edges() const { return column_edges(nx_); }

  double height() const { return h_ * ny_; }
  double length() const { return h_ * nx_; }
  double design_x0() const { return h_ * inlet_elems_; }
  double design_x1() const { return h_ * (inlet_elems_ + design_elems_); }

 private:
  std::vector<std::array<int, 2>> column_edges(int i) const {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(ny_);
    for (int j = 0; j < ny_; ++j) edges.push_back({node_index(i, j), node_index(i, j + 1)});
    return edges;
  }

  int inlet_elems_, design_elems_, outlet_elems_, ny_, nx_;
  double h_;
  std::vector<char> design_node_;
  std::vector<int> design_nodes_;
  std::vector<int> clamped_nodes_;
};

}  // namespace vibrato
