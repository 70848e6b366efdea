#pragma once

#include "infspec/geometry.hpp"

#include <map>
#include <optional>
#include <string>

namespace infspec {

/// A validated polygon plus its optional boundary labeling and free-form metadata.
struct DomainFile {
  Polygon polygon;
  std::optional<BoundaryPartition> partition;
  std::map<std::string, double> metadata;
  std::string name;
};

Polygon make_unit_square();
Polygon make_rectangle(double a, double b);
/// Convex hull of two discs of radius r whose far ends are D apart; each cap gets
/// arc_n + 1 vertices, so (+-D/2, 0) are vertices when arc_n is even.
Polygon make_stadium(double r, double D, int arc_n);
/// (0,0),(2,0),(2,1),(1,1),(1,2),(0,2)
Polygon make_lshape();

/// Sagitta of one cap chord: r (1 - cos(pi / arc_n)).
double stadium_polygonalization_error(double r, int arc_n);

struct BuiltinParams {
  double a = 2.0, b = 1.0;         // rectangle sides
  double r = 1.0, D = 6.0;         // stadium
  int arc_n = 64;
};

/// name in {unit_square, rectangle, stadium, lshape}. Throws BadParameters.
DomainFile make_builtin_domain(const std::string& name, const BuiltinParams& params = {});

std::string to_json(const DomainFile& file);
/// Parses and validates. Partitions given against a clockwise vertex list are remapped
/// onto the reversed (counterclockwise) polygon. Throws DomainFileError.
DomainFile parse_domain_json(const std::string& text);
DomainFile read_domain_file(const std::string& path);
void write_domain_file(const std::string& path, const DomainFile& file);

}  // namespace infspec
