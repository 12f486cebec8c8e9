#pragma once

#include "vibrato/common.hpp"
#include "vibrato/grid.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace vibrato {

enum class Phase { Solid, Acoustic, Cut };

/// Sub-triangle of a cut element in element-local coordinates, tagged with
/// the phase it belongs to. Vertices are counterclockwise.
struct CutTriangle {
  std::array<std::array<double, 2>, 3> v;
  bool solid;

  double area() const {
    const double ax = v[1][0] - v[0][0], ay = v[1][1] - v[0][1];
    const double bx = v[2][0] - v[0][0], by = v[2][1] - v[0][1];
    return 0.5 * (ax * by - ay * bx);
  }
};

/// Straight interface chord between two edge zero-crossings. The normal is
/// the unit vector pointing from the solid phase into the acoustic phase.
struct InterfaceSegment {
  std::array<double, 2> a, b;
  std::array<double, 2> normal;

  double length() const { return std::hypot(b[0] - a[0], b[1] - a[1]); }
  std::array<double, 2> midpoint() const {
    return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
  }
};

struct CutQuadrature {
  std::vector<CutTriangle> triangles;
  std::vector<InterfaceSegment> segments;

  double solid_area() const {
    double s = 0.0;
    for (const auto& t : triangles)
      if (t.solid) s += t.area();
    return s;
  }
  double acoustic_area() const {
    double s = 0.0;
    for (const auto& t : triangles)
      if (!t.solid) s += t.area();
    return s;
  }
};

/// Keeps nodal level-set values away from zero so that classification is
/// unambiguous and edge crossings stay clear of corners. Exact zeros land on
/// the solid side.
inline double snap_level_value(double v, double h) {
  const double vmin = 1e-10 * h;
  if (v == 0.0) return vmin;
  if (v > -vmin && v < vmin) return v > 0.0 ? vmin : -vmin;
  return v;
}

inline std::array<double, 4> snap_corners(const std::array<double, 4>& c, double h) {
  return {snap_level_value(c[0], h), snap_level_value(c[1], h), snap_level_value(c[2], h),
          snap_level_value(c[3], h)};
}

/// Sign rule on the four corner values (counterclockwise from lower-left).
inline Phase classify(const std::array<double, 4>& corners, double h) {
  const auto c = snap_corners(corners, h);
  int pos = 0;
  for (double v : c) pos += (v > 0.0) ? 1 : 0;
  if (pos == 4) return Phase::Solid;
  if (pos == 0) return Phase::Acoustic;
  return Phase::Cut;
}

/// Unit normal of a directed segment that keeps the solid phase on its left,
/// i.e. the right-hand perpendicular. All emitted phase polygons are
/// counterclockwise, so chords traversed along the solid polygon boundary
/// yield normals pointing into the acoustic phase.
inline std::array<double, 2> segment_normal(const std::array<double, 2>& a,
                                            const std::array<double, 2>& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len = std::hypot(dx, dy);
  require(len > 0.0, "segment_normal: zero-length segment");
  return {dy / len, -dx / len};
}

namespace detail {

inline void fan_triangulate(const std::vector<std::array<double, 2>>& poly, bool solid,
                            std::vector<CutTriangle>& out) {
  for (std::size_t k = 1; k + 1 < poly.size(); ++k)
    out.push_back(CutTriangle{{poly[0], poly[k], poly[k + 1]}, solid});
}

}  // namespace detail

/// Marching-squares tessellation of one cut element. Edge crossings are
/// placed by linear interpolation of the snapped corner values; each phase
/// region is fan-triangulated. The ambiguous saddle is resolved by the sign
/// of the bilinear center value (the corner mean): a positive center joins
/// the solid corners through the middle, a nonpositive one keeps two
/// disjoint solid corner triangles.
inline CutQuadrature tessellate(const std::array<double, 4>& corners, double h) {
  require(classify(corners, h) == Phase::Cut, "tessellate: element is not cut");
  const auto c = snap_corners(corners, h);
  const std::array<std::array<double, 2>, 4> xy = {{{0.0, 0.0}, {h, 0.0}, {h, h}, {0.0, h}}};

  std::array<std::array<double, 2>, 4> cross{};
  std::array<bool, 4> crossed{};
  for (int k = 0; k < 4; ++k) {
    const int k1 = (k + 1) % 4;
    crossed[k] = (c[k] > 0.0) != (c[k1] > 0.0);
    if (crossed[k]) {
      const double t = c[k] / (c[k] - c[k1]);
      cross[k] = {xy[k][0] + t * (xy[k1][0] - xy[k][0]),
                  xy[k][1] + t * (xy[k1][1] - xy[k][1])};
    }
  }

  CutQuadrature quad;
  const bool saddle = (c[0] > 0.0) == (c[2] > 0.0) && (c[1] > 0.0) == (c[3] > 0.0);
  if (!saddle) {
    std::vector<std::array<double, 2>> solid_poly, acoustic_poly;
    int leave = -1, enter = -1;
    for (int k = 0; k < 4; ++k) {
      (c[k] > 0.0 ? solid_poly : acoustic_poly).push_back(xy[k]);
      if (crossed[k]) {
        solid_poly.push_back(cross[k]);
        acoustic_poly.push_back(cross[k]);
        (c[k] > 0.0 ? leave : enter) = k;
      }
    }
    detail::fan_triangulate(solid_poly, true, quad.triangles);
    detail::fan_triangulate(acoustic_poly, false, quad.triangles);
    quad.segments.push_back(InterfaceSegment{
        cross[leave], cross[enter], segment_normal(cross[leave], cross[enter])});
  } else {
    // Saddle: solid corners on one diagonal, all four edges crossed. The
    // solid diagonal is translated to corners 0/2 by relabeling.
    const bool solid02 = c[0] > 0.0;
    auto corner = [&](int k) { return xy[solid02 ? k : (k + 1) % 4]; };
    auto cr = [&](int k) { return cross[solid02 ? k : (k + 1) % 4]; };
    const double vc = 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]);
    if (vc > 0.0) {
      detail::fan_triangulate(
          {corner(0), cr(0), cr(1), corner(2), cr(2), cr(3)}, true, quad.triangles);
      detail::fan_triangulate({cr(0), corner(1), cr(1)}, false, quad.triangles);
      detail::fan_triangulate({cr(2), corner(3), cr(3)}, false, quad.triangles);
      quad.segments.push_back(InterfaceSegment{cr(0), cr(1), segment_normal(cr(0), cr(1))});
      quad.segments.push_back(InterfaceSegment{cr(2), cr(3), segment_normal(cr(2), cr(3))});
    } else {
      detail::fan_triangulate({corner(0), cr(0), cr(3)}, true, quad.triangles);
      detail::fan_triangulate({corner(2), cr(2), cr(1)}, true, quad.triangles);
      detail::fan_triangulate(
          {cr(0), corner(1), cr(1), cr(2), corner(3), cr(3)}, false, quad.triangles);
      quad.segments.push_back(InterfaceSegment{cr(0), cr(3), segment_normal(cr(0), cr(3))});
      quad.segments.push_back(InterfaceSegment{cr(2), cr(1), segment_normal(cr(2), cr(1))});
    }
  }
  return quad;
}

/// Corner level-set values of element e in local counterclockwise order.
inline std::array<double, 4> corner_values(const DuctMesh& mesh, const Vector& sbar, int e) {
  const auto n = mesh.elem_nodes(e);
  return {sbar[n[0]], sbar[n[1]], sbar[n[2]], sbar[n[3]]};
}

inline std::vector<Phase> classify_elements(const DuctMesh& mesh, const Vector& sbar) {
  require(sbar.size() == mesh.num_nodes(), "classify_elements: field size mismatch");
  std::vector<Phase> phases(mesh.num_elems());
  for (int e = 0; e < mesh.num_elems(); ++e)
    phases[e] = classify(corner_values(mesh, sbar, e), mesh.h());
  return phases;
}

/// Bilinear interpolation of corner values at local coordinates.
inline double bilinear_value(const std::array<double, 4>& c, double h, double x, double y) {
  const double xi = x / h, eta = y / h;
  return c[0] * (1 - xi) * (1 - eta) + c[1] * xi * (1 - eta) + c[2] * xi * eta +
         c[3] * (1 - xi) * eta;
}

inline std::array<double, 2> bilinear_gradient(const std::array<double, 4>& c, double h,
                                               double x, double y) {
  const double xi = x / h, eta = y / h;
  return {(-c[0] * (1 - eta) + c[1] * (1 - eta) + c[2] * eta - c[3] * eta) / h,
          (-c[0] * (1 - xi) - c[1] * xi + c[2] * xi + c[3] * (1 - xi)) / h};
}

}  // namespace vibrato
