#include "infspec/geometry.hpp"

#include "infspec/error.hpp"
#include "infspec/nelder_mead.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace infspec {

namespace {

const char* kModule = "geometry";

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }
double orient(const Point& a, const Point& b, const Point& c) { return cross(b - a, c - a); }

bool lex_less(const Point& a, const Point& b) {
  return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
}

bool on_segment(const Point& p, const Point& a, const Point& b, double tol) {
  return point_segment_distance(p, a, b) <= tol;
}

// Closed segments [a,b] and [c,d] share at least one point (within tol).
bool segments_touch(const Point& a, const Point& b, const Point& c, const Point& d, double tol) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0)))
    return true;
  return on_segment(c, a, b, tol) || on_segment(d, a, b, tol) || on_segment(a, c, d, tol) ||
         on_segment(b, c, d, tol);
}

double signed_area(const std::vector<Point>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

Point point_on_edge(const Polygon& poly, std::size_t e, double t) {
  const auto [a, b] = poly.edge(e);
  return a + t * (b - a);
}

struct SubSegment {
  Point a, b;
};

std::vector<SubSegment> target_segments(const Polygon& poly, const DistanceQuery& q) {
  std::vector<SubSegment> out;
  if (q.target == DistanceTarget::FullBoundary) {
    for (std::size_t i = 0; i < poly.size(); ++i) out.push_back({poly.vertex(i), poly.vertex(i + 1)});
    return out;
  }
  if (!q.partition) throw Error(ErrorKind::InvalidPartition, kModule, "partition required for Gamma targets");
  const BoundaryLabel want =
      q.target == DistanceTarget::Gamma1 ? BoundaryLabel::Gamma1 : BoundaryLabel::Gamma2;
  for (const auto& arc : q.partition->arcs) {
    if (arc.label != want) continue;
    out.push_back({point_on_edge(poly, arc.edge_index, arc.t_start),
                   point_on_edge(poly, arc.edge_index, arc.t_end)});
  }
  return out;
}

}  // namespace

double Polygon::perimeter() const {
  double p = 0.0;
  for (std::size_t i = 0; i < size(); ++i) p += edge_length(i);
  return p;
}

double Polygon::min_edge_length() const {
  double m = kInf;
  for (std::size_t i = 0; i < size(); ++i) m = std::min(m, edge_length(i));
  return m;
}

Eigen::AlignedBox2d Polygon::bounding_box() const {
  Eigen::AlignedBox2d box;
  for (const auto& v : vertices_) box.extend(v);
  return box;
}

BoundaryPartition BoundaryPartition::all(const Polygon& domain, BoundaryLabel label) {
  BoundaryPartition p;
  for (std::size_t i = 0; i < domain.size(); ++i) p.arcs.push_back({i, 0.0, 1.0, label});
  return p;
}

bool BoundaryPartition::has(BoundaryLabel label) const {
  return std::any_of(arcs.begin(), arcs.end(),
                     [&](const BoundaryArc& a) { return a.label == label && a.t_end > a.t_start; });
}

Polygon validate_polygon(const std::vector<Point>& raw) {
  const std::size_t n = raw.size();
  if (n < 3) throw Error(ErrorKind::TooFewVertices, kModule, "polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    if (!raw[i].allFinite()) {
      throw Error(ErrorKind::BadParameters, kModule, "non-finite vertex " + std::to_string(i));
    }
  }
  double scale = 0.0;
  for (const auto& v : raw) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  scale = std::max(scale, 1e-300);
  const double tol = 1e-12 * scale;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    if ((raw[i] - raw[j]).norm() <= tol) {
      throw Error(ErrorKind::DuplicateVertex, kModule,
                  "vertices " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    }
  }
  // All vertices on one line: report the area, not the fold-back it implies.
  double spread = 0.0;
  for (std::size_t i = 1; i < n; ++i) spread = std::max(spread, (raw[i] - raw[0]).norm());
  bool collinear = true;
  for (std::size_t i = 1; i < n && collinear; ++i)
    collinear = std::abs(cross(raw[i] - raw[0], raw[(i + 1) % n] - raw[0])) <= tol * spread;
  if (collinear) throw Error(ErrorKind::ZeroArea, kModule, "all vertices are collinear");

  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = raw[i];
    const Point& b = raw[(i + 1) % n];
    for (std::size_t k = i + 1; k < n; ++k) {
      const Point& c = raw[k];
      const Point& d = raw[(k + 1) % n];
      const bool adjacent = (k == i + 1) || (i == 0 && k == n - 1);
      bool bad = false;
      if (adjacent) {
        // Shared vertex is expected; a fold-back (overlap) is not.
        const Point& shared = (k == i + 1) ? b : a;
        const Point& other_i = (k == i + 1) ? a : b;
        const Point& other_k = (k == i + 1) ? d : c;
        const Point u = other_i - shared, w = other_k - shared;
        bad = std::abs(cross(u, w)) <= tol * (u.norm() + w.norm()) && u.dot(w) > 0.0;
      } else {
        bad = segments_touch(a, b, c, d, tol);
      }
      if (bad) {
        std::ostringstream os;
        os << "edges " << i << " and " << k << " intersect";
        throw Error(ErrorKind::SelfIntersection, kModule, os.str());
      }
    }
  }
  const double area = signed_area(raw);
  if (std::abs(area) <= 1e-14 * scale * scale) {
    throw Error(ErrorKind::ZeroArea, kModule, "polygon area is zero");
  }
  Polygon poly;
  poly.vertices_ = raw;
  if (area < 0) {
    std::reverse(poly.vertices_.begin(), poly.vertices_.end());
    poly.reversed_ = true;
  }
  poly.area_ = std::abs(area);
  poly.convex_ = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (orient(poly.vertex(i), poly.vertex(i + 1), poly.vertex(i + 2)) < -tol * scale) {
      poly.convex_ = false;
      break;
    }
  }
  return poly;
}

void validate_partition(const Polygon& domain, const BoundaryPartition& partition) {
  std::vector<std::vector<std::pair<double, double>>> per_edge(domain.size());
  for (std::size_t k = 0; k < partition.arcs.size(); ++k) {
    const auto& arc = partition.arcs[k];
    if (arc.edge_index >= domain.size()) {
      throw Error(ErrorKind::InvalidPartition, kModule,
                  "arc " + std::to_string(k) + " references edge " + std::to_string(arc.edge_index));
    }
    if (!(arc.t_start >= 0.0 && arc.t_start < arc.t_end && arc.t_end <= 1.0)) {
      throw Error(ErrorKind::InvalidPartition, kModule,
                  "arc " + std::to_string(k) + " needs 0 <= t_start < t_end <= 1");
    }
    per_edge[arc.edge_index].emplace_back(arc.t_start, arc.t_end);
  }
  for (std::size_t e = 0; e < per_edge.size(); ++e) {
    auto& iv = per_edge[e];
    std::sort(iv.begin(), iv.end());
    double cursor = 0.0;
    for (const auto& [a, b] : iv) {
      if (std::abs(a - cursor) > 1e-12) {
        throw Error(ErrorKind::InvalidPartition, kModule,
                    "edge " + std::to_string(e) + " is not covered exactly once near t=" +
                        std::to_string(cursor));
      }
      cursor = b;
    }
    if (std::abs(cursor - 1.0) > 1e-12) {
      throw Error(ErrorKind::InvalidPartition, kModule,
                  "edge " + std::to_string(e) + " is not fully covered");
    }
  }
}

double point_segment_distance(const Point& x, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (x - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (x - (a + t * ab)).norm();
}

namespace {

Point closest_on_segment(const Point& x, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (x - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return a + t * ab;
}

bool strictly_inside(const Polygon& poly, const Point& x) {
  // Crossing number; boundary points handled by the caller.
  bool in = false;
  const auto& v = poly.vertices();
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y() > x.y()) != (v[j].y() > x.y())) {
      const double xi = v[j].x() + (x.y() - v[j].y()) * (v[i].x() - v[j].x()) / (v[i].y() - v[j].y());
      if (x.x() < xi) in = !in;
    }
  }
  return in;
}

}  // namespace

bool contains(const Polygon& domain, const Point& x, double tol) {
  if (strictly_inside(domain, x)) return true;
  return distance_to_boundary(domain, x) <= tol;
}

Point project_to_closure(const Polygon& domain, const Point& x) {
  if (strictly_inside(domain, x)) return x;
  return distance_to_boundary(domain, x, DistanceQuery{}).nearest;
}

double distance_to_boundary(const Polygon& domain, const Point& x) {
  double d2 = kInf;
  const auto& v = domain.vertices();
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[i + 1 == n ? 0 : i + 1];
    const Point ab = b - a;
    const Point ax = x - a;
    double t = ax.dot(ab) / ab.squaredNorm();
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    d2 = std::min(d2, (ax - t * ab).squaredNorm());
  }
  return std::sqrt(d2);
}

ClosurePoint project_with_distance(const Polygon& domain, const Point& x) {
  double d2 = kInf;
  Point nearest = x;
  bool in = false;
  const auto& v = domain.vertices();
  const std::size_t n = v.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = v[j];
    const Point& b = v[i];
    if ((b.y() > x.y()) != (a.y() > x.y())) {
      const double xi = a.x() + (x.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (x.x() < xi) in = !in;
    }
    const Point ab = b - a;
    const Point ax = x - a;
    double t = ax.dot(ab) / ab.squaredNorm();
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const double e2 = (ax - t * ab).squaredNorm();
    if (e2 < d2) {
      d2 = e2;
      nearest = a + t * ab;
    }
  }
  if (in) return {x, std::sqrt(d2)};
  return {nearest, 0.0};
}

DistanceResult distance_to_boundary(const Polygon& domain, const Point& x, const DistanceQuery& query) {
  const auto segs = target_segments(domain, query);
  DistanceResult r;
  r.outside = !contains(domain, x, 0.0);
  if (segs.empty()) {
    if (!query.empty_is_infinite) throw Error(ErrorKind::EmptyTarget, kModule, "target boundary set is empty");
    r.distance = kInf;
    r.nearest = x;
    return r;
  }
  r.distance = kInf;
  for (const auto& s : segs) {
    const Point c = closest_on_segment(x, s.a, s.b);
    const double d = (x - c).norm();
    if (d < r.distance) {
      r.distance = d;
      r.nearest = c;
    }
  }
  return r;
}

DistanceJet distance_jet(const Polygon& domain, const Point& x, double guard) {
  // Features: vertex i -> i, edge interior i -> n + i.
  const std::size_t n = domain.size();
  struct Hit {
    double d;
    std::size_t feature;
    Point nearest;
  };
  std::vector<Hit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = domain.edge(i);
    const Point ab = b - a;
    const double t = (x - a).dot(ab) / ab.squaredNorm();
    if (t <= 0.0) {
      hits.push_back({(x - a).norm(), i, a});
    } else if (t >= 1.0) {
      hits.push_back({(x - b).norm(), (i + 1) % n, b});
    } else {
      const Point c = a + t * ab;
      hits.push_back({(x - c).norm(), n + i, c});
    }
  }
  const auto best = std::min_element(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.d < b.d; });
  DistanceJet jet;
  jet.distance = best->d;
  jet.smooth = best->d > guard;
  for (const auto& h : hits) {
    if (h.feature != best->feature && h.d <= best->d + guard) jet.smooth = false;
  }
  if (best->d <= 0.0) return jet;
  const Point g = (x - best->nearest) / best->d;
  jet.grad = g;
  // Nearest point is a vertex: radial field, Hessian (I - g g^T) / rho.
  if (best->feature < n) jet.hess = (Eigen::Matrix2d::Identity() - g * g.transpose()) / best->d;
  return jet;
}

namespace {

double max_pairwise(const std::vector<Point>& pts, std::pair<Point, Point>& pair) {
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).norm();
      Point a = pts[i], b = pts[j];
      if (lex_less(b, a)) std::swap(a, b);
      if (d > best * (1.0 + 1e-12)) {
        best = d;
        pair = {a, b};
      } else if (d >= best * (1.0 - 1e-12)) {
        if (lex_less(a, pair.first) || (a == pair.first && lex_less(b, pair.second))) pair = {a, b};
        best = std::max(best, d);
      }
    }
  }
  return best;
}

}  // namespace

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), lex_less);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

DiameterResult euclidean_diameter(const Polygon& domain) {
  DiameterResult r;
  r.diameter = max_pairwise(convex_hull(domain.vertices()), r.pair);
  return r;
}

std::vector<Point> closure_grid(const Polygon& domain, double spacing) {
  const auto box = domain.bounding_box();
  const Point size = box.sizes();
  const int nx = std::max(1, static_cast<int>(std::ceil(size.x() / spacing)));
  const int ny = std::max(1, static_cast<int>(std::ceil(size.y() / spacing)));
  const double tol = 1e-12 * std::max(size.x(), size.y());
  std::vector<Point> out;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const Point p(box.min().x() + size.x() * i / nx, box.min().y() + size.y() * j / ny);
      if (contains(domain, p, tol)) out.push_back(p);
    }
  }
  return out;
}

InradiusResult inradius(const Polygon& domain) {
  const double De = euclidean_diameter(domain).diameter;
  const auto box = domain.bounding_box();
  // min-edge/8 seeding, capped so fine polygonalizations stay tractable.
  const double res = std::max(domain.min_edge_length() / 8.0, std::sqrt(box.volume() / 40000.0));
  const auto grid = closure_grid(domain, res);

  std::vector<std::pair<double, Point>> scored;
  scored.reserve(grid.size());
  for (const auto& p : grid) scored.emplace_back(distance_to_boundary(domain, p), p);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && lex_less(a.second, b.second));
  });
  std::vector<Point> seeds;
  for (const auto& [d, p] : scored) {
    if (seeds.size() >= 8) break;
    if (d < 0.5 * scored.front().first) break;
    bool far = std::all_of(seeds.begin(), seeds.end(), [&](const Point& s) { return (s - p).norm() > 4 * res; });
    if (far) seeds.push_back(p);
  }

  const double tol_geom = 1e-9 * De;
  NelderMeadOptions opts;
  opts.tol_x = tol_geom;
  opts.tol_f = 1e-3 * tol_geom;
  opts.max_evals = 6000;
  auto objective = [&](const Eigen::VectorXd& v) { return -project_with_distance(domain, Point(v[0], v[1])).distance; };
  std::vector<std::pair<double, Point>> optima;
  for (const auto& s : seeds) {
    const auto res_nm = nelder_mead(objective, Eigen::VectorXd(s), res, opts);
    const Point q = project_to_closure(domain, Point(res_nm.x[0], res_nm.x[1]));
    optima.emplace_back(distance_to_boundary(domain, q), q);
  }
  double r = 0.0;
  for (const auto& o : optima) r = std::max(r, o.first);
  InradiusResult out{r, Point::Zero()};
  bool first = true;
  for (const auto& [d, p] : optima) {
    if (d < r - 10 * tol_geom) continue;
    if (first || lex_less(p, out.incenter)) out = {d, p};
    first = false;
  }
  return out;
}

bool segment_inside(const Polygon& domain, const Point& a, const Point& b, double tol) {
  const double scale = std::max(1.0, domain.bounding_box().sizes().maxCoeff());
  const double eps = tol * scale;
  if (!contains(domain, a, eps) || !contains(domain, b, eps)) return false;
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return true;
  std::vector<double> ts{0.0, 1.0};
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto [c, d] = domain.edge(i);
    const double o1 = orient(a, b, c), o2 = orient(a, b, d);
    const double o3 = orient(c, d, a), o4 = orient(c, d, b);
    const double s1 = eps * (b - a).norm(), s2 = eps * (d - c).norm();
    if (((o1 > s1 && o2 < -s1) || (o1 < -s1 && o2 > s1)) &&
        ((o3 > s2 && o4 < -s2) || (o3 < -s2 && o4 > s2)))
      return false;
    if (point_segment_distance(c, a, b) <= eps) ts.push_back(std::clamp((c - a).dot(ab) / len2, 0.0, 1.0));
  }
  std::sort(ts.begin(), ts.end());
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    if (ts[k + 1] - ts[k] <= 1e-15) continue;
    const Point mid = a + 0.5 * (ts[k] + ts[k + 1]) * ab;
    if (!contains(domain, mid, eps)) return false;
  }
  return true;
}

namespace {

struct ReflexGraph {
  std::vector<Point> nodes;
  Eigen::MatrixXd dist;  // all-pairs shortest paths among reflex vertices
};

ReflexGraph build_reflex_graph(const Polygon& domain) {
  ReflexGraph g;
  const double scale = domain.bounding_box().sizes().maxCoeff();
  for (std::size_t i = 0; i < domain.size(); ++i) {
    if (orient(domain.vertex(i + domain.size() - 1), domain.vertex(i), domain.vertex(i + 1)) < -1e-14 * scale * scale)
      g.nodes.push_back(domain.vertex(i));
  }
  const std::size_t m = g.nodes.size();
  g.dist = Eigen::MatrixXd::Constant(m, m, kInf);
  for (std::size_t i = 0; i < m; ++i) {
    g.dist(i, i) = 0.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      if (segment_inside(domain, g.nodes[i], g.nodes[j])) g.dist(i, j) = g.dist(j, i) = (g.nodes[i] - g.nodes[j]).norm();
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) g.dist(i, j) = std::min(g.dist(i, j), g.dist(i, k) + g.dist(k, j));
  return g;
}

// Distance from p to every reflex node through the graph (inf when unreachable).
Eigen::VectorXd reach(const Polygon& domain, const ReflexGraph& g, const Point& p, std::vector<char>& visible) {
  const std::size_t m = g.nodes.size();
  visible.assign(m, 0);
  Eigen::VectorXd direct = Eigen::VectorXd::Constant(m, kInf);
  for (std::size_t i = 0; i < m; ++i) {
    if (segment_inside(domain, p, g.nodes[i])) {
      visible[i] = 1;
      direct[i] = (p - g.nodes[i]).norm();
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(m, kInf);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i)
      if (visible[i]) out[j] = std::min(out[j], direct[i] + g.dist(i, j));
  return out;
}

}  // namespace

double geodesic_distance(const Polygon& domain, const Point& a, const Point& b) {
  if (segment_inside(domain, a, b)) return (a - b).norm();
  const auto g = build_reflex_graph(domain);
  std::vector<char> va, vb;
  const Eigen::VectorXd ra = reach(domain, g, a, va);
  reach(domain, g, b, vb);
  double best = kInf;
  for (std::size_t j = 0; j < g.nodes.size(); ++j)
    if (vb[j]) best = std::min(best, ra[j] + (g.nodes[j] - b).norm());
  return best;
}

DiameterResult geodesic_diameter(const Polygon& domain) {
  if (domain.is_convex()) return euclidean_diameter(domain);
  const double De = euclidean_diameter(domain).diameter;
  const double spacing = De / 512.0;
  std::vector<Point> cand = sample_boundary(domain, spacing);
  const auto g = build_reflex_graph(domain);
  const std::size_t m = g.nodes.size();

  std::vector<Eigen::VectorXd> reach_of(cand.size());
  std::vector<std::vector<char>> vis_of(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) reach_of[i] = reach(domain, g, cand[i], vis_of[i]);

  DiameterResult r;
  r.diameter = -1.0;
  r.sampling_error = spacing;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t k = i + 1; k < cand.size(); ++k) {
      double d = (cand[i] - cand[k]).norm();
      if (!segment_inside(domain, cand[i], cand[k])) {
        d = kInf;
        for (std::size_t j = 0; j < m; ++j)
          if (vis_of[k][j]) d = std::min(d, reach_of[i][j] + (g.nodes[j] - cand[k]).norm());
      }
      if (d > r.diameter) {
        r.diameter = d;
        Point a = cand[i], b = cand[k];
        if (lex_less(b, a)) std::swap(a, b);
        r.pair = {a, b};
      }
    }
  }
  return r;
}

std::vector<Point> sample_boundary(const Polygon& domain, double spacing, const BoundaryPartition* partition,
                                   std::optional<BoundaryLabel> restrict_to) {
  if (!(spacing > 0.0)) throw Error(ErrorKind::BadParameters, kModule, "spacing must be positive");
  std::vector<Point> out;
  auto push = [&](const Point& p) {
    if (out.empty() || (out.back() - p).norm() > 1e-14 * (1.0 + p.norm())) out.push_back(p);
  };
  auto sample_piece = [&](const Point& a, const Point& b, bool include_end) {
    const int m = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing - 1e-12)));
    for (int k = 0; k < m; ++k) push(a + (b - a) * (static_cast<double>(k) / m));
    if (include_end) push(b);
  };
  if (restrict_to) {
    if (!partition) throw Error(ErrorKind::EmptyTarget, kModule, "restriction requires a partition");
    std::vector<BoundaryArc> arcs;
    for (const auto& a : partition->arcs)
      if (a.label == *restrict_to && a.t_end > a.t_start) arcs.push_back(a);
    if (arcs.empty()) throw Error(ErrorKind::EmptyTarget, kModule, "no boundary arcs carry the requested label");
    std::sort(arcs.begin(), arcs.end(), [](const BoundaryArc& a, const BoundaryArc& b) {
      return a.edge_index < b.edge_index || (a.edge_index == b.edge_index && a.t_start < b.t_start);
    });
    for (const auto& arc : arcs)
      sample_piece(point_on_edge(domain, arc.edge_index, arc.t_start),
                   point_on_edge(domain, arc.edge_index, arc.t_end), true);
    if (out.size() > 1 && (out.front() - out.back()).norm() <= 1e-14 * (1.0 + out.front().norm())) out.pop_back();
    return out;
  }
  for (std::size_t e = 0; e < domain.size(); ++e) {
    std::vector<double> breaks{0.0, 1.0};
    if (partition) {
      for (const auto& a : partition->arcs) {
        if (a.edge_index != e) continue;
        breaks.push_back(a.t_start);
        breaks.push_back(a.t_end);
      }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
      sample_piece(point_on_edge(domain, e, breaks[k]), point_on_edge(domain, e, breaks[k + 1]), false);
  }
  return out;
}

Polygon rigid_motion(const Polygon& domain, double angle, const Point& shift) {
  const Eigen::Rotation2Dd rot(angle);
  std::vector<Point> v;
  v.reserve(domain.size());
  for (const auto& p : domain.vertices()) v.push_back(rot * p + shift);
  return validate_polygon(v);
}

}  // namespace infspec
