#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "infspec/domain_io.hpp"
#include "infspec/geometry.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace infspec;
using testing::kind_of;

namespace {

Polygon poly(std::vector<Point> v) { return validate_polygon(v); }

Polygon lshape3() { return poly({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 2}, {0, 2}}); }

// Brute force: distance to densely sampled boundary points (independent of the projection code).
double sampled_boundary_distance(const std::vector<Point>& verts, const Point& x, int per_edge) {
  double best = 1e300;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Point a = verts[i], b = verts[(i + 1) % verts.size()];
    for (int k = 0; k <= per_edge; ++k) best = std::min(best, (x - (a + (b - a) * (double(k) / per_edge))).norm());
  }
  return best;
}

bool segment_clear(const Polygon& P, const Point& a, const Point& b) {
  for (int k = 1; k < 400; ++k)
    if (!contains(P, a + (b - a) * (k / 400.0), 1e-12)) return false;
  return true;
}

}  // namespace

TEST_CASE("validate_polygon") {
  SUBCASE("unit square") {
    const Polygon P = poly({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    CHECK(P.size() == 4);
    CHECK(P.area() == doctest::Approx(1.0));
    CHECK_FALSE(P.was_reversed());
  }
  SUBCASE("clockwise input is reversed") {
    const Polygon P = poly({{0, 1}, {1, 1}, {1, 0}, {0, 0}});
    CHECK(P.was_reversed());
    CHECK(P.area() == doctest::Approx(1.0));
  }
  SUBCASE("bowtie") { CHECK(kind_of([] { poly({{0, 0}, {1, 1}, {1, 0}, {0, 1}}); }) == ErrorKind::SelfIntersection); }
  SUBCASE("L-shape area") { CHECK(make_lshape().area() == doctest::Approx(3.0)); }
  SUBCASE("degenerate inputs") {
    CHECK(kind_of([] { poly({{0, 0}, {1, 0}, {2, 0}}); }) == ErrorKind::ZeroArea);
    CHECK(kind_of([] { poly({{0, 0}, {1, 0}, {1, 0}, {0, 1}}); }) == ErrorKind::DuplicateVertex);
    CHECK(kind_of([] { poly({{0, 0}, {1, 0}}); }) == ErrorKind::TooFewVertices);
  }
}

TEST_CASE("distance_to_boundary") {
  const Polygon sq = make_unit_square();
  CHECK(distance_to_boundary(sq, Point(0.5, 0.5)) == doctest::Approx(0.5));

  BoundaryPartition left;
  for (std::size_t e = 0; e < 4; ++e) left.arcs.push_back({e, 0.0, 1.0, e == 3 ? BoundaryLabel::Gamma1 : BoundaryLabel::Gamma2});
  validate_partition(sq, left);
  DistanceQuery q{DistanceTarget::Gamma1, &left};
  CHECK(distance_to_boundary(sq, Point(0.25, 0.5), q).distance == doctest::Approx(0.25));

  const Polygon L = make_lshape();
  const double oracle = sampled_boundary_distance(L.vertices(), Point(0.5, 0.5), 20000);
  CHECK(distance_to_boundary(L, Point(0.5, 0.5)) == doctest::Approx(oracle).epsilon(1e-7));
  CHECK(oracle == doctest::Approx(0.5).epsilon(1e-7));

  SUBCASE("empty target") {
    const BoundaryPartition robin = BoundaryPartition::all(sq, BoundaryLabel::Gamma2);
    DistanceQuery strict{DistanceTarget::Gamma1, &robin, false};
    CHECK(kind_of([&] { distance_to_boundary(sq, Point(0.5, 0.5), strict); }) == ErrorKind::EmptyTarget);
    DistanceQuery lenient{DistanceTarget::Gamma1, &robin, true};
    CHECK(std::isinf(distance_to_boundary(sq, Point(0.5, 0.5), lenient).distance));
  }
}

TEST_CASE("inradius") {
  const auto sq = inradius(make_unit_square());
  CHECK(sq.r == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sq.incenter.x() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sq.incenter.y() == doctest::Approx(0.5).epsilon(1e-6));

  const auto rect = inradius(make_rectangle(2, 1));
  CHECK(rect.r == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rect.incenter.y() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rect.incenter.x() >= 0.5 - 1e-6);
  CHECK(rect.incenter.x() <= 1.5 + 1e-6);

  // L-shape: fine grid of interior points with sampled boundary distance, then local refinement.
  const Polygon L = make_lshape();
  Point best(0, 0);
  double bd = -1;
  for (int i = 1; i < 200; ++i)
    for (int j = 1; j < 200; ++j) {
      const Point x(2.0 * i / 200, 2.0 * j / 200);
      if (!contains(L, x)) continue;
      const double d = sampled_boundary_distance(L.vertices(), x, 400);
      if (d > bd) bd = d, best = x;
    }
  for (double step = 0.01; step > 1e-9; step *= 0.5)
    for (bool moved = true; moved;) {
      moved = false;
      for (const Point dir : {Point(1, 0), Point(-1, 0), Point(0, 1), Point(0, -1), Point(1, 1), Point(-1, -1), Point(1, -1), Point(-1, 1)}) {
        const Point x = best + step * dir;
        if (!contains(L, x)) continue;
        // exact segment distances for the refinement stage
        double d = 1e300;
        for (std::size_t e = 0; e < L.size(); ++e) d = std::min(d, point_segment_distance(x, L.vertex(e), L.vertex(e + 1)));
        if (d > bd + 1e-15) bd = d, best = x, moved = true;
      }
    }
  const auto lr = inradius(L);
  CHECK(lr.r == doctest::Approx(bd).epsilon(1e-8));
  CHECK(lr.r == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("euclidean_diameter") {
  const auto sq = euclidean_diameter(make_unit_square());
  CHECK(sq.diameter == doctest::Approx(std::sqrt(2.0)));
  CHECK(std::abs(sq.pair.first.x() - sq.pair.second.x()) == doctest::Approx(1.0));

  const auto st = euclidean_diameter(make_stadium(1, 6, 64));
  CHECK(st.diameter == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(std::abs(st.pair.first.y()) < 1e-12);
  CHECK(std::abs(st.pair.first.x()) == doctest::Approx(3.0));

  const Polygon L = lshape3();
  double oracle = 0;
  for (const Point& a : L.vertices())
    for (const Point& b : L.vertices()) oracle = std::max(oracle, (a - b).norm());
  CHECK(euclidean_diameter(L).diameter == doctest::Approx(oracle));
  CHECK(oracle == doctest::Approx(std::sqrt(13.0)));
}

TEST_CASE("geodesic_diameter") {
  CHECK(geodesic_diameter(make_unit_square()).diameter == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(geodesic_diameter(make_stadium(1, 6, 64)).diameter == doctest::Approx(6.0).epsilon(1e-9));

  // Visibility-graph oracle over vertices and dense boundary samples, Floyd-Warshall shortest paths.
  const Polygon L = lshape3();
  std::vector<Point> pts = sample_boundary(L, 0.05);
  const std::size_t n = pts.size();
  std::vector<double> dist(n * n, 1e300);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i * n + i] = 0;
    for (std::size_t j = i + 1; j < n; ++j)
      if (segment_clear(L, pts[i], pts[j])) dist[i * n + j] = dist[j * n + i] = (pts[i] - pts[j]).norm();
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = std::min(dist[i * n + j], dist[i * n + k] + dist[k * n + j]);
  double oracle = 0;
  for (double d : dist) oracle = std::max(oracle, d);
  const auto dg = geodesic_diameter(L);
  CHECK(oracle == doctest::Approx(std::sqrt(5.0) + std::sqrt(2.0)).epsilon(1e-9));
  CHECK(dg.diameter == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("sample_boundary") {
  const Polygon sq = make_unit_square();
  const auto pts = sample_boundary(sq, 0.5);
  CHECK(pts.size() >= 8);
  for (const Point c : {Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)}) {
    bool found = false;
    for (const Point& p : pts) found |= (p - c).norm() < 1e-14;
    CHECK(found);
  }

  BoundaryPartition bottom;
  for (std::size_t e = 0; e < 4; ++e) bottom.arcs.push_back({e, 0.0, 1.0, e == 0 ? BoundaryLabel::Gamma2 : BoundaryLabel::Gamma1});
  const auto b = sample_boundary(sq, 0.25, &bottom, BoundaryLabel::Gamma2);
  CHECK(b.size() == 5);
  for (const Point& p : b) CHECK(std::abs(p.y()) < 1e-15);

  const Polygon st = make_stadium(1, 6, 64);
  const auto s = sample_boundary(st, 0.03);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK((s[i] - s[(i + 1) % s.size()]).norm() <= 0.03 + 1e-12);
}

TEST_CASE("property: distance is 1-Lipschitz") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 2);
  const Polygon L = make_lshape();
  int checked = 0;
  while (checked < 2000) {
    const Point a(u(rng), u(rng)), b(u(rng), u(rng));
    if (!contains(L, a) || !contains(L, b)) continue;
    CHECK(std::abs(distance_to_boundary(L, a) - distance_to_boundary(L, b)) <= (a - b).norm() + 1e-14);
    ++checked;
  }
}

TEST_CASE("property: no probe point beats the inradius") {
  for (const Polygon& P : {make_unit_square(), make_lshape(), make_rectangle(2, 1), make_stadium(1, 6, 64)}) {
    const auto in = inradius(P);
    const double tol = 1e-9 * euclidean_diameter(P).diameter;
    CHECK(distance_to_boundary(P, in.incenter) == doctest::Approx(in.r).epsilon(1e-12));
    for (const Point& x : closure_grid(P, euclidean_diameter(P).diameter / 300)) CHECK(distance_to_boundary(P, x) <= in.r + tol);
  }
}

TEST_CASE("property: rigid-motion invariance") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0, 2 * M_PI), sh(-5, 5);
  for (const Polygon& P : {make_unit_square(), make_lshape(), lshape3(), make_stadium(1, 6, 32)}) {
    const double r = inradius(P).r, de = euclidean_diameter(P).diameter, dg = geodesic_diameter(P).diameter;
    for (int k = 0; k < 3; ++k) {
      const Polygon Q = rigid_motion(P, ang(rng), Point(sh(rng), sh(rng)));
      CHECK(inradius(Q).r == doctest::Approx(r).epsilon(1e-9));
      CHECK(euclidean_diameter(Q).diameter == doctest::Approx(de).epsilon(1e-9));
      CHECK(geodesic_diameter(Q).diameter == doctest::Approx(dg).epsilon(1e-9));
    }
  }
}

TEST_CASE("property: convex domains have D_g = D_e, diameter endpoints are hull vertices") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point> cloud(12);
    for (auto& p : cloud) p = Point(u(rng), u(rng));
    const Polygon P = validate_polygon(convex_hull(cloud));
    const auto de = euclidean_diameter(P);
    CHECK(geodesic_diameter(P).diameter == doctest::Approx(de.diameter).epsilon(1e-9));
    for (const Point& e : {de.pair.first, de.pair.second}) {
      bool vertex = false;
      for (const Point& v : P.vertices()) vertex |= (v - e).norm() < 1e-12;
      CHECK(vertex);
    }
  }
}
