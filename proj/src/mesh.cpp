#include "infspec/mesh.hpp"

#include "infspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace infspec {

namespace {

const char* kModule = "plap_fem";

double orient(const Point& a, const Point& b, const Point& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// > 0 when d is inside the circumcircle of the counterclockwise triangle abc.
double incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Point circumcenter(const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a, ac = c - a;
  const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  return a + Point(ac.y() * ab2 - ab.y() * ac2, ab.x() * ac2 - ac.x() * ab2) / d;
}

double min_angle(const Point& a, const Point& b, const Point& c) {
  const double la = (b - c).norm(), lb = (a - c).norm(), lc = (a - b).norm();
  auto ang = [](double opp, double s1, double s2) {
    return std::acos(std::clamp((s1 * s1 + s2 * s2 - opp * opp) / (2 * s1 * s2), -1.0, 1.0));
  };
  return std::min({ang(la, lb, lc), ang(lb, la, lc), ang(lc, la, lb)});
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Incremental Bowyer-Watson triangulation inside a large super triangle (vertices 0,1,2).
class Delaunay {
 public:
  struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nb;  // nb[i] lies across the edge opposite v[i]
    bool alive = true;
  };

  explicit Delaunay(const Eigen::AlignedBox2d& box) {
    const Point c = box.center();
    const double s = 20.0 * std::max(1.0, box.sizes().maxCoeff());
    pts_ = {c + Point(-s, -s), c + Point(s, -s), c + Point(0, s)};
    tris_.push_back({{0, 1, 2}, {-1, -1, -1}, true});
    eps_ = 1e-13 * box.sizes().maxCoeff();
  }

  const std::vector<Point>& points() const { return pts_; }
  const std::vector<Tri>& tris() const { return tris_; }

  /// Returns the vertex index and the first index of the triangles created by this insertion.
  std::pair<int, std::size_t> insert(const Point& p) {
    const int t0 = locate(p);
    for (int k = 0; k < 3; ++k) {
      const int v = tris_[t0].v[k];
      if ((pts_[v] - p).norm() <= eps_) return {v, tris_.size()};
    }
    const int pi = static_cast<int>(pts_.size());
    pts_.push_back(p);

    std::vector<int> cavity{t0};
    std::unordered_set<int> in_cavity{t0};
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const Tri& t = tris_[cavity[k]];
      for (int i = 0; i < 3; ++i) {
        const int n = t.nb[i];
        if (n < 0 || in_cavity.count(n)) continue;
        const Tri& tn = tris_[n];
        if (incircle(pts_[tn.v[0]], pts_[tn.v[1]], pts_[tn.v[2]], p) > 0) {
          in_cavity.insert(n);
          cavity.push_back(n);
        }
      }
    }
    struct Rim {
      int a, b, outer;
    };
    std::vector<Rim> rim;
    for (int c : cavity) {
      const Tri& t = tris_[c];
      for (int i = 0; i < 3; ++i)
        if (t.nb[i] < 0 || !in_cavity.count(t.nb[i])) rim.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3], t.nb[i]});
    }
    for (int c : cavity) tris_[c].alive = false;

    const std::size_t first = tris_.size();
    std::unordered_map<int, int> by_start, by_end;
    for (const auto& e : rim) {
      const int id = static_cast<int>(tris_.size());
      tris_.push_back({{e.a, e.b, pi}, {-1, -1, e.outer}, true});
      if (e.outer >= 0) {
        Tri& o = tris_[e.outer];
        for (int i = 0; i < 3; ++i)
          if (o.nb[i] >= 0 && in_cavity.count(o.nb[i])) {
            const int oa = o.v[(i + 1) % 3], ob = o.v[(i + 2) % 3];
            if (oa == e.b && ob == e.a) o.nb[i] = id;
          }
      }
      by_start[e.a] = id;
      by_end[e.b] = id;
    }
    for (std::size_t id = first; id < tris_.size(); ++id) {
      Tri& t = tris_[id];
      t.nb[0] = by_start.at(t.v[1]);  // edge b->p, shared with the triangle starting at b
      t.nb[1] = by_end.at(t.v[0]);    // edge p->a, shared with the triangle ending at a
    }
    last_ = static_cast<int>(first);
    return {pi, first};
  }

 private:
  int locate(const Point& p) {
    int t = last_;
    if (!tris_[t].alive) {
      t = static_cast<int>(tris_.size()) - 1;
      while (!tris_[t].alive) --t;
    }
    unsigned rot = 0;
    for (std::size_t steps = 0; steps < 4 * tris_.size() + 16; ++steps) {
      const Tri& tr = tris_[t];
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = static_cast<int>((k + rot) % 3);
        const Point& a = pts_[tr.v[(i + 1) % 3]];
        const Point& b = pts_[tr.v[(i + 2) % 3]];
        if (orient(a, b, p) < 0 && tr.nb[i] >= 0) {
          t = tr.nb[i];
          moved = true;
          break;
        }
      }
      ++rot;
      if (!moved) return t;
    }
    throw Error(ErrorKind::MeshFailure, kModule, "point location did not terminate");
  }

  std::vector<Point> pts_;
  std::vector<Tri> tris_;
  int last_ = 0;
  double eps_ = 0.0;
};

struct Segment {
  int a, b;
  std::size_t edge;
};

bool encroaches(const Point& p, const Point& a, const Point& b) {
  const Point m = 0.5 * (a + b);
  return (p - m).squaredNorm() < 0.25 * (b - a).squaredNorm() * (1 - 1e-12);
}

bool proper_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

double Mesh::area() const {
  double s = 0;
  for (const auto& t : triangles) s += 0.5 * orient(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
  return s;
}

double Mesh::min_angle_deg() const {
  double m = 180.0;
  for (const auto& t : triangles) m = std::min(m, min_angle(nodes[t[0]], nodes[t[1]], nodes[t[2]]) * 180.0 / std::numbers::pi);
  return m;
}

double Mesh::max_edge_length() const {
  double m = 0;
  for (const auto& t : triangles)
    for (int i = 0; i < 3; ++i) m = std::max(m, (nodes[t[i]] - nodes[t[(i + 1) % 3]]).norm());
  return m;
}

Mesh triangulate(const Polygon& domain, double h) {
  if (!(h > 0)) throw Error(ErrorKind::MeshFailure, kModule, "h must be positive");
  if (h >= domain.min_edge_length())
    throw Error(ErrorKind::MeshFailure, kModule,
                "h = " + std::to_string(h) + " is not below the shortest polygon edge " +
                    std::to_string(domain.min_edge_length()));

  const auto box = domain.bounding_box();
  Delaunay dt(box);
  std::vector<Segment> segs;

  // Boundary nodes: each polygon edge split into equal pieces no longer than h.
  const std::size_t n = domain.size();
  std::vector<int> corner(n);
  for (std::size_t e = 0; e < n; ++e) corner[e] = dt.insert(domain.vertex(e)).first;
  for (std::size_t e = 0; e < n; ++e) {
    const auto [a, b] = domain.edge(e);
    const int m = std::max(1, static_cast<int>(std::ceil(domain.edge_length(e) / h - 1e-9)));
    int prev = corner[e];
    for (int k = 1; k < m; ++k) {
      const int id = dt.insert(a + (b - a) * (static_cast<double>(k) / m)).first;
      segs.push_back({prev, id, e});
      prev = id;
    }
    segs.push_back({prev, corner[(e + 1) % n], e});
  }

  // Interior: hexagonal lattice centred on the bounding box, kept away from the boundary.
  const Point c = box.center();
  const double dy = h * std::sqrt(3.0) / 2.0;
  const int ky = static_cast<int>(std::ceil(0.5 * box.sizes().y() / dy)) + 1;
  const int kx = static_cast<int>(std::ceil(0.5 * box.sizes().x() / h)) + 1;
  for (int j = -ky; j <= ky; ++j) {
    const double shift = (std::abs(j) % 2) * 0.5 * h;
    for (int i = -kx - 1; i <= kx; ++i) {
      const Point p(c.x() + i * h + shift, c.y() + j * dy);
      if (!contains(domain, p)) continue;
      if (distance_to_boundary(domain, p) < 0.6 * h) continue;
      dt.insert(p);
    }
  }

  const double scale = box.sizes().maxCoeff();
  const double min_ang = 20.0 * std::numbers::pi / 180.0;
  const std::size_t node_cap = 50 * dt.points().size() + 10000;

  auto split = [&](std::size_t k) {
    const Segment s = segs[k];
    const int m = dt.insert(0.5 * (dt.points()[s.a] + dt.points()[s.b])).first;
    segs[k] = {s.a, m, s.edge};
    segs.push_back({m, s.b, s.edge});
  };
  auto inside = [&](const Delaunay::Tri& t) {
    if (t.v[0] < 3 || t.v[1] < 3 || t.v[2] < 3) return false;
    const auto& P = dt.points();
    return contains(domain, (P[t.v[0]] + P[t.v[1]] + P[t.v[2]]) / 3.0);
  };

  for (int pass = 0; pass < 64; ++pass) {
    // Conformity: every segment must be an edge with an empty diametral circle.
    bool changed = true;
    while (changed) {
      changed = false;
      std::unordered_map<std::uint64_t, std::vector<int>> apex;
      const auto& T = dt.tris();
      for (const auto& t : T) {
        if (!t.alive) continue;
        for (int i = 0; i < 3; ++i) apex[edge_key(t.v[(i + 1) % 3], t.v[(i + 2) % 3])].push_back(t.v[i]);
      }
      const std::size_t count = segs.size();
      for (std::size_t k = 0; k < count; ++k) {
        const auto it = apex.find(edge_key(segs[k].a, segs[k].b));
        bool bad = it == apex.end();
        if (!bad) {
          for (int v : it->second)
            if (encroaches(dt.points()[v], dt.points()[segs[k].a], dt.points()[segs[k].b])) bad = true;
        }
        if (bad) {
          split(k);
          changed = true;
        }
      }
      if (dt.points().size() > node_cap) throw Error(ErrorKind::MeshFailure, kModule, "segment recovery ran away");
    }

    // Quality: circumcentre insertion for skinny or oversized triangles.
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < dt.tris().size(); ++i) queue.push_back(i);
    bool inserted = false;
    while (!queue.empty()) {
      const std::size_t ti = queue.front();
      queue.pop_front();
      const Delaunay::Tri t = dt.tris()[ti];
      if (!t.alive || !inside(t)) continue;
      const auto& P = dt.points();
      const Point a = P[t.v[0]], b = P[t.v[1]], cc = P[t.v[2]];
      const double longest = std::max({(a - b).norm(), (b - cc).norm(), (cc - a).norm()});
      if (min_angle(a, b, cc) >= min_ang && longest <= 1.5 * h) continue;
      const Point z = circumcenter(a, b, cc);
      std::vector<std::size_t> enc;
      for (std::size_t k = 0; k < segs.size(); ++k)
        if (encroaches(z, P[segs[k].a], P[segs[k].b])) enc.push_back(k);
      if (enc.empty() && !contains(domain, z)) {
        const Point g = (a + b + cc) / 3.0;
        double best = kInf;
        for (std::size_t k = 0; k < segs.size(); ++k) {
          if (!proper_cross(g, z, P[segs[k].a], P[segs[k].b])) continue;
          const double d = point_segment_distance(g, P[segs[k].a], P[segs[k].b]);
          if (d < best) {
            best = d;
            enc = {k};
          }
        }
        if (enc.empty()) continue;
      }
      const std::size_t before = dt.tris().size();
      if (!enc.empty()) {
        for (std::size_t k : enc) split(k);
        queue.push_back(ti);
      } else {
        dt.insert(z);
      }
      for (std::size_t i = before; i < dt.tris().size(); ++i) queue.push_back(i);
      inserted = true;
      if (dt.points().size() > node_cap) throw Error(ErrorKind::MeshFailure, kModule, "quality refinement ran away");
    }
    if (!inserted) break;
  }

  // Collect interior triangles and compact the node numbering.
  Mesh mesh;
  mesh.h = h;
  std::vector<int> remap(dt.points().size(), -1);
  auto node = [&](int v) {
    if (remap[v] < 0) {
      remap[v] = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(dt.points()[v]);
    }
    return remap[v];
  };
  for (const auto& t : dt.tris()) {
    if (!t.alive || !inside(t)) continue;
    mesh.triangles.push_back({node(t.v[0]), node(t.v[1]), node(t.v[2])});
  }
  for (const auto& s : segs) {
    if (remap[s.a] < 0 || remap[s.b] < 0) throw Error(ErrorKind::MeshFailure, kModule, "boundary segment lost");
    mesh.boundary_edges.push_back({{remap[s.a], remap[s.b]}, s.edge});
  }
  std::sort(mesh.boundary_edges.begin(), mesh.boundary_edges.end(), [&](const BoundaryEdge& x, const BoundaryEdge& y) {
    if (x.polygon_edge != y.polygon_edge) return x.polygon_edge < y.polygon_edge;
    const Point o = domain.vertex(x.polygon_edge);
    return (mesh.nodes[x.nodes[0]] - o).norm() < (mesh.nodes[y.nodes[0]] - o).norm();
  });

  if (std::abs(mesh.area() - domain.area()) > 1e-9 * scale * scale)
    throw Error(ErrorKind::MeshFailure, kModule, "triangulated area does not match the polygon");
  if (mesh.min_angle_deg() < 20.0 - 1e-9 || mesh.max_edge_length() > 1.5 * h * (1 + 1e-12))
    throw Error(ErrorKind::MeshFailure, kModule, "quality targets not reached");
  return mesh;
}

Mesh criss_cross_rectangle(double a, double b, int nx, int ny) {
  if (!(a > 0) || !(b > 0) || nx < 1 || ny < 1) throw Error(ErrorKind::BadParameters, kModule, "bad rectangle mesh parameters");
  Mesh m;
  m.h = std::max(a / nx, b / ny);
  auto corner = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.nodes.emplace_back(a * i / nx, b * j / ny);
  const int base = static_cast<int>(m.nodes.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) m.nodes.emplace_back(a * (i + 0.5) / nx, b * (j + 0.5) / ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int c = base + j * nx + i;
      const int v00 = corner(i, j), v10 = corner(i + 1, j), v11 = corner(i + 1, j + 1), v01 = corner(i, j + 1);
      m.triangles.push_back({v00, v10, c});
      m.triangles.push_back({v10, v11, c});
      m.triangles.push_back({v11, v01, c});
      m.triangles.push_back({v01, v00, c});
    }
  for (int i = 0; i < nx; ++i) m.boundary_edges.push_back({{corner(i, 0), corner(i + 1, 0)}, 0});
  for (int j = 0; j < ny; ++j) m.boundary_edges.push_back({{corner(nx, j), corner(nx, j + 1)}, 1});
  for (int i = nx; i > 0; --i) m.boundary_edges.push_back({{corner(i, ny), corner(i - 1, ny)}, 2});
  for (int j = ny; j > 0; --j) m.boundary_edges.push_back({{corner(0, j), corner(0, j - 1)}, 3});
  return m;
}

std::string mesh_to_text(const Mesh& mesh) {
  std::ostringstream os;
  os.precision(17);
  os << "# infspec mesh v1 h=" << mesh.h << "\n";
  os << "nodes " << mesh.nodes.size() << "\n";
  for (const auto& p : mesh.nodes) os << p.x() << " " << p.y() << "\n";
  os << "triangles " << mesh.triangles.size() << "\n";
  for (const auto& t : mesh.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
  os << "boundary_edges " << mesh.boundary_edges.size() << "\n";
  for (const auto& e : mesh.boundary_edges) os << e.nodes[0] << " " << e.nodes[1] << " " << e.polygon_edge << "\n";
  return os.str();
}

}  // namespace infspec
