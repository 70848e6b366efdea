#pragma once

// Independent reference computations used by the test suites and the acceptance runner.
// They deliberately avoid the library's optimizers: everything here is grids, sampling
// and bisection.

#include "infspec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using infspec::Point;
using infspec::Polygon;

// Boundary samples with gaps <= spacing, built directly from the vertex list.
inline std::vector<Point> boundary_points(const Polygon& P, double spacing) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const Point a = P.vertex(i), b = P.vertex(i + 1);
    const int k = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
    for (int j = 0; j < k; ++j) out.push_back(a + (b - a) * (double(j) / k));
  }
  return out;
}

// Distance from x to the nearest boundary sample.
inline double sampled_distance(const std::vector<Point>& samples, const Point& x) {
  double best = 1e300;
  for (const Point& y : samples) best = std::min(best, (x - y).squaredNorm());
  return std::sqrt(best);
}

// Largest pairwise distance of a point set via its convex hull (monotone chain + brute force on the hull).
inline double set_diameter(std::vector<Point> pts, std::pair<Point, Point>* pair = nullptr) {
  if (pts.size() < 2) return 0.0;
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Point> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k > 1 ? k - 1 : k);
  double best = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = i + 1; j < h.size(); ++j)
      if ((h[i] - h[j]).norm() > best) {
        best = (h[i] - h[j]).norm();
        if (pair) *pair = {h[i], h[j]};
      }
  return best;
}

struct FeasibilityResult {
  double s = 0.0;
  Point x1 = Point::Zero(), x2 = Point::Zero();
};

// Literal two-cone feasibility: t is admissible when two candidate points at distance >= 2t
// carry cones of radius t whose sampled boundary sup is <= 1/(beta t). inv_beta = 0 gives r2.
// Candidates: an n x n grid over the bounding box, then `zoom_levels` local grids around the
// current optimizers, each 4x finer.
inline FeasibilityResult literal_s(const Polygon& P, double inv_beta, int n, int zoom_levels = 6) {
  const auto box = P.bounding_box();
  const double span = box.sizes().maxCoeff();
  const std::vector<Point> samples = boundary_points(P, span / 4000.0);

  struct Cand {
    Point x;
    double d;
  };
  std::vector<Cand> cands;
  auto add = [&](const Point& x) {
    if (infspec::contains(P, x, 1e-12)) cands.push_back({x, sampled_distance(samples, x)});
  };
  const Point spacing = box.sizes() / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) add(box.min() + Point(i * spacing.x(), j * spacing.y()));
  double zoom = spacing.maxCoeff();  // isotropic local grids

  FeasibilityResult best;
  auto solve = [&] {
    auto feasible = [&](double t, std::pair<Point, Point>* pair) {
      std::vector<Point> ok;
      for (const Cand& c : cands) {
        // sup over boundary samples of the cone (t - |x - y|)_+ / t, compared with 1/(beta t)
        const double trace = std::max(0.0, t - c.d) / t;
        if (trace * t <= inv_beta + 1e-15) ok.push_back(c.x);
      }
      return set_diameter(ok, pair) >= 2 * t;
    };
    double lo = 0.0, hi = span;
    std::pair<Point, Point> pr;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(mid, &pr)) {
        lo = mid;
        best = {mid, pr.first, pr.second};
      } else {
        hi = mid;
      }
    }
  };
  solve();
  for (int level = 0; level < zoom_levels; ++level) {
    const double fine = zoom / 4.0;
    for (const Point c : {best.x1, best.x2})
      for (int i = -20; i <= 20; ++i)
        for (int j = -20; j <= 20; ++j) add(c + Point(i * fine, j * fine));
    zoom = fine;
    solve();
  }
  return best;
}

}  // namespace oracle
