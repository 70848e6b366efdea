#pragma once

#include "infspec/geometry.hpp"

#include <array>
#include <string>
#include <vector>

namespace infspec {

struct BoundaryEdge {
  std::array<int, 2> nodes{0, 0};
  std::size_t polygon_edge = 0;
};

/// Conforming triangulation of a polygon; triangles are counterclockwise.
struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  double h = 0.0;

  double area() const;
  double min_angle_deg() const;
  double max_edge_length() const;
};

/// Delaunay refinement: max edge <= 1.5 h, min angle >= 20 degrees.
/// Throws MeshFailure when h is not below the shortest polygon edge or refinement runs away.
Mesh triangulate(const Polygon& domain, double h);

/// nx-by-ny cells on [0,a]x[0,b], each cell split into four by its centre.
Mesh criss_cross_rectangle(double a, double b, int nx, int ny);

/// Plain-text dump: header line, then "nodes N", "triangles T", "boundary_edges E" sections.
std::string mesh_to_text(const Mesh& mesh);

}  // namespace infspec
