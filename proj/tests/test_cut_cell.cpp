#include "vibrato/cut_cell.hpp"
#include "vibrato/signal.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vibrato;

namespace {

double total_area(const CutQuadrature& q) { return q.solid_area() + q.acoustic_area(); }

double interface_length(const CutQuadrature& q) {
  double len = 0.0;
  for (const auto& s : q.segments) len += s.length();
  return len;
}

}  // namespace

TEST_CASE("classification follows the corner sign rule") {
  const double h = 1.0;
  CHECK(classify({1, 1, 1, 1}, h) == Phase::Solid);
  CHECK(classify({-1, -1, -1, -1}, h) == Phase::Acoustic);
  CHECK(classify({1, -1, -1, -1}, h) == Phase::Cut);
  CHECK(classify({-1, 1, 1, 1}, h) == Phase::Cut);

  SECTION("exact zeros snap to the solid side") {
    CHECK(classify({0, 1, 1, 1}, h) == Phase::Solid);
    CHECK(classify({0, -1, -1, -1}, h) == Phase::Cut);
    CHECK(classify({0, 0, 0, 0}, h) == Phase::Solid);
  }
}

TEST_CASE("corner cut gives the analytic triangle area") {
  const double h = 1.0;
  const CutQuadrature q = tessellate({1, -1, -1, -1}, h);
  // crossings at the midpoints of both adjacent edges: legs h/2
  CHECK_THAT(q.solid_area(), Catch::Matchers::WithinRel(h * h / 8.0, 1e-12));
  CHECK_THAT(q.acoustic_area(), Catch::Matchers::WithinRel(7.0 * h * h / 8.0, 1e-12));
  CHECK(q.segments.size() == 1);
  CHECK_THAT(interface_length(q),
             Catch::Matchers::WithinRel(std::hypot(0.5, 0.5) * h, 1e-12));
}

TEST_CASE("horizontal midline cut splits the element in half") {
  const double h = 2e-3;
  const CutQuadrature q = tessellate({1, 1, -1, -1}, h);
  CHECK_THAT(q.solid_area(), Catch::Matchers::WithinRel(0.5 * h * h, 1e-12));
  CHECK_THAT(q.acoustic_area(), Catch::Matchers::WithinRel(0.5 * h * h, 1e-12));
  CHECK_THAT(interface_length(q), Catch::Matchers::WithinRel(h, 1e-12));
}

TEST_CASE("degenerate saddle with zero center yields two solid corner triangles") {
  const double h = 1.0;
  const CutQuadrature q = tessellate({1, -1, 1, -1}, h);
  int solid_tris = 0;
  for (const auto& t : q.triangles)
    if (t.solid) ++solid_tris;
  CHECK(solid_tris == 2);
  CHECK_THAT(q.solid_area(), Catch::Matchers::WithinRel(h * h / 4.0, 1e-12));
  CHECK(q.segments.size() == 2);

  SECTION("every solid sub-triangle sits in a positive quadrant of the bilinear") {
    for (const auto& t : q.triangles) {
      const double cx = (t.v[0][0] + t.v[1][0] + t.v[2][0]) / 3.0;
      const double cy = (t.v[0][1] + t.v[1][1] + t.v[2][1]) / 3.0;
      const double val = bilinear_value({1, -1, 1, -1}, h, cx, cy);
      if (t.solid) CHECK(val > 0.0);
    }
  }
}

TEST_CASE("generic saddle follows the bilinear center sign") {
  const double h = 1.0;

  SECTION("positive center connects the solid corners") {
    const CutQuadrature q = tessellate({1.0, -0.1, 1.0, -0.1}, h);
    // acoustic regions are the two disjoint corner triangles
    int acoustic_tris = 0;
    for (const auto& t : q.triangles)
      if (!t.solid) ++acoustic_tris;
    CHECK(acoustic_tris == 2);
    CHECK(q.solid_area() > 0.5 * h * h);
  }

  SECTION("negative center separates the solid corners") {
    const CutQuadrature q = tessellate({0.1, -1.0, 0.1, -1.0}, h);
    int solid_tris = 0;
    for (const auto& t : q.triangles)
      if (t.solid) ++solid_tris;
    CHECK(solid_tris == 2);
    CHECK(q.solid_area() < 0.5 * h * h);
  }
}

TEST_CASE("interface normals point from solid into acoustic") {
  const double h = 1.0;

  SECTION("horizontal cut, solid above") {
    const CutQuadrature q = tessellate({-1, -1, 1, 1}, h);
    REQUIRE(q.segments.size() == 1);
    CHECK_THAT(q.segments[0].normal[0], Catch::Matchers::WithinAbs(0.0, 1e-14));
    CHECK_THAT(q.segments[0].normal[1], Catch::Matchers::WithinAbs(-1.0, 1e-14));
  }

  SECTION("vertical cut, solid left") {
    const CutQuadrature q = tessellate({1, -1, -1, 1}, h);
    REQUIRE(q.segments.size() == 1);
    CHECK_THAT(q.segments[0].normal[0], Catch::Matchers::WithinAbs(1.0, 1e-14));
    CHECK_THAT(q.segments[0].normal[1], Catch::Matchers::WithinAbs(0.0, 1e-14));
  }

  SECTION("diagonal cut at 45 degrees, solid upper-left") {
    // corners: (0,0) on contour-ish, choose values putting the zero line on
    // the main diagonal with solid above it
    const CutQuadrature q = tessellate({-1, -3, -1, 1}, h);
    REQUIRE(q.segments.size() == 1);
    const auto mid = q.segments[0].midpoint();
    const auto grad = bilinear_gradient({-1, -3, -1, 1}, h, mid[0], mid[1]);
    const double dot =
        q.segments[0].normal[0] * grad[0] + q.segments[0].normal[1] * grad[1];
    CHECK(dot < 0.0);  // normal descends the level-set field
  }

  SECTION("rotating by 45 degrees: solid upper-left triangle") {
    const CutQuadrature q = tessellate({-1, -1, -1, 1}, h);
    REQUIRE(q.segments.size() == 1);
    const double s2 = std::sqrt(2.0) / 2.0;
    CHECK_THAT(q.segments[0].normal[0], Catch::Matchers::WithinAbs(s2, 1e-12));
    CHECK_THAT(q.segments[0].normal[1], Catch::Matchers::WithinAbs(-s2, 1e-12));
  }
}

TEST_CASE("normals descend the bilinear field for random cuts") {
  Xoshiro256 rng(99);
  const double h = 1.0;
  int tested = 0;
  while (tested < 500) {
    std::array<double, 4> c;
    for (auto& v : c) v = rng.next_symmetric();
    if (classify(c, h) != Phase::Cut) continue;
    const auto cs = snap_corners(c, h);
    const bool saddle = (cs[0] > 0) == (cs[2] > 0) && (cs[1] > 0) == (cs[3] > 0);
    if (saddle) continue;
    ++tested;
    const CutQuadrature q = tessellate(c, h);
    for (const auto& seg : q.segments) {
      const auto mid = seg.midpoint();
      const auto grad = bilinear_gradient(c, h, mid[0], mid[1]);
      CHECK(seg.normal[0] * grad[0] + seg.normal[1] * grad[1] < 0.0);
    }
  }
}

TEST_CASE("phase areas always partition the element") {
  Xoshiro256 rng(123);
  const double h = 2e-3;
  int cut_count = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::array<double, 4> c;
    for (auto& v : c) v = 0.5 * h * rng.next_symmetric();
    if (classify(c, h) != Phase::Cut) continue;
    ++cut_count;
    const CutQuadrature q = tessellate(c, h);
    CHECK_THAT(total_area(q), Catch::Matchers::WithinRel(h * h, 1e-12));
    for (const auto& t : q.triangles) CHECK(t.area() > 0.0);
  }
  CHECK(cut_count > 3000);
}

TEST_CASE("interface chord endpoints lie on the sign change of the interpolant") {
  Xoshiro256 rng(321);
  const double h = 1.0;
  for (int trial = 0; trial < 300; ++trial) {
    std::array<double, 4> c;
    for (auto& v : c) v = rng.next_symmetric();
    if (classify(c, h) != Phase::Cut) continue;
    const CutQuadrature q = tessellate(c, h);
    for (const auto& seg : q.segments) {
      CHECK(std::abs(bilinear_value(c, h, seg.a[0], seg.a[1])) < 1e-10 * h);
      CHECK(std::abs(bilinear_value(c, h, seg.b[0], seg.b[1])) < 1e-10 * h);
    }
  }
}

TEST_CASE("interface length matches the chord of the corner-interpolated contour") {
  const double h = 1.0;
  // one positive corner with asymmetric crossings: t = 0.2 on the bottom
  // edge and t = 0.4 on the left edge
  const double v0 = 1.0;
  const double v1 = v0 - v0 / 0.2;   // crossing at t = 0.2
  const double v3 = v0 - v0 / 0.4;   // crossing at t = 0.4 from corner 0
  const CutQuadrature q = tessellate({v0, v1, -1.0, v3}, h);
  REQUIRE(q.segments.size() == 1);
  CHECK_THAT(interface_length(q), Catch::Matchers::WithinRel(std::hypot(0.2, 0.4), 1e-10));
  CHECK_THAT(q.solid_area(), Catch::Matchers::WithinRel(0.5 * 0.2 * 0.4, 1e-10));
}

TEST_CASE("sub-areas respond continuously to corner perturbations") {
  Xoshiro256 rng(71);
  const double h = 1.0;
  int tested = 0;
  while (tested < 100) {
    std::array<double, 4> c;
    for (auto& v : c) v = rng.next_symmetric();
    if (classify(c, h) != Phase::Cut) continue;
    // stay away from topology changes
    bool tiny = false;
    for (double v : c) tiny |= std::abs(v) < 0.05;
    if (tiny) continue;
    ++tested;
    const double eps = 1e-6;
    for (int j = 0; j < 4; ++j) {
      auto cp = c, cm = c;
      cp[j] += eps;
      cm[j] -= eps;
      if (classify(cp, h) != Phase::Cut || classify(cm, h) != Phase::Cut) continue;
      const double da = tessellate(cp, h).solid_area() - tessellate(cm, h).solid_area();
      CHECK(std::abs(da) < 100.0 * eps);  // O(eps) response
    }
  }
}
