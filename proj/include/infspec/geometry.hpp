#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace infspec {

using Point = Eigen::Vector2d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Simple, closed, counterclockwise polygon. Construct through validate_polygon().
class Polygon {
 public:
  Polygon() = default;

  std::size_t size() const { return vertices_.size(); }
  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
  /// Edge i runs from vertex(i) to vertex(i + 1).
  std::pair<Point, Point> edge(std::size_t i) const { return {vertex(i), vertex(i + 1)}; }
  double edge_length(std::size_t i) const { return (vertex(i + 1) - vertex(i)).norm(); }

  double area() const { return area_; }
  double perimeter() const;
  double min_edge_length() const;
  bool is_convex() const { return convex_; }
  /// True when validate_polygon() reversed the input to make it counterclockwise.
  bool was_reversed() const { return reversed_; }
  Eigen::AlignedBox2d bounding_box() const;

 private:
  friend Polygon validate_polygon(const std::vector<Point>&);
  std::vector<Point> vertices_;
  double area_ = 0.0;
  bool convex_ = false;
  bool reversed_ = false;
};

enum class BoundaryLabel { Gamma1, Gamma2 };

/// Sub-arc [t_start, t_end] of polygon edge `edge_index`.
struct BoundaryArc {
  std::size_t edge_index = 0;
  double t_start = 0.0;
  double t_end = 1.0;
  BoundaryLabel label = BoundaryLabel::Gamma2;
};

/// Dirichlet (Gamma1) / Robin (Gamma2) labeling of the boundary.
struct BoundaryPartition {
  std::vector<BoundaryArc> arcs;

  /// Every edge labeled Robin.
  static BoundaryPartition all(const Polygon& domain, BoundaryLabel label);
  bool has(BoundaryLabel label) const;
};

enum class DistanceTarget { FullBoundary, Gamma1, Gamma2 };

struct DistanceQuery {
  DistanceTarget target = DistanceTarget::FullBoundary;
  const BoundaryPartition* partition = nullptr;
  /// d(x, empty set) = +inf; when false an empty target raises EmptyTarget.
  bool empty_is_infinite = true;
};

struct DistanceResult {
  double distance = 0.0;
  Point nearest = Point::Zero();
  bool outside = false;
};

/// Distance together with its derivatives where the distance field is smooth.
struct DistanceJet {
  double distance = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
  bool smooth = false;
};

struct InradiusResult {
  double r = 0.0;
  Point incenter = Point::Zero();
};

struct DiameterResult {
  double diameter = 0.0;
  std::pair<Point, Point> pair{Point::Zero(), Point::Zero()};
  /// Sampling spacing used for candidate endpoints (0 when the value is exact).
  double sampling_error = 0.0;
};

Polygon validate_polygon(const std::vector<Point>& raw_vertices);

/// Throws InvalidPartition unless arcs cover each edge's [0,1] exactly once.
void validate_partition(const Polygon& domain, const BoundaryPartition& partition);

double point_segment_distance(const Point& x, const Point& a, const Point& b);

/// Closed-polygon membership with absolute tolerance `tol` around the boundary.
bool contains(const Polygon& domain, const Point& x, double tol = 0.0);

/// x itself when it lies in the closure, otherwise its nearest boundary point.
Point project_to_closure(const Polygon& domain, const Point& x);

double distance_to_boundary(const Polygon& domain, const Point& x);

struct ClosurePoint {
  Point point = Point::Zero();  ///< projection of the query onto the closure
  double distance = 0.0;        ///< d(point, boundary)
};
/// project_to_closure() and distance_to_boundary() in a single edge sweep.
ClosurePoint project_with_distance(const Polygon& domain, const Point& x);
DistanceResult distance_to_boundary(const Polygon& domain, const Point& x,
                                    const DistanceQuery& query);
DistanceJet distance_jet(const Polygon& domain, const Point& x, double guard = 0.0);

InradiusResult inradius(const Polygon& domain);
DiameterResult euclidean_diameter(const Polygon& domain);
DiameterResult geodesic_diameter(const Polygon& domain);

/// Shortest-path length inside the closed polygon.
double geodesic_distance(const Polygon& domain, const Point& a, const Point& b);

/// True when the closed segment [a, b] stays inside the closed polygon.
bool segment_inside(const Polygon& domain, const Point& a, const Point& b, double tol = 1e-12);

std::vector<Point> convex_hull(std::vector<Point> points);

/// Boundary points with arc-length gaps <= spacing, walking the boundary counterclockwise.
/// Includes every vertex and partition breakpoint of the sampled set.
std::vector<Point> sample_boundary(const Polygon& domain, double spacing,
                                   const BoundaryPartition* partition = nullptr,
                                   std::optional<BoundaryLabel> restrict_to = std::nullopt);

/// Interior + boundary points of the closure on a regular grid with the given spacing.
std::vector<Point> closure_grid(const Polygon& domain, double spacing);

Polygon rigid_motion(const Polygon& domain, double angle, const Point& shift);

}  // namespace infspec
