#include "infspec/domain_io.hpp"

#include "infspec/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace infspec {

namespace {

const char* kModule = "cli";

}  // namespace

Polygon make_unit_square() { return make_rectangle(1.0, 1.0); }

Polygon make_rectangle(double a, double b) {
  if (!(a > 0) || !(b > 0)) throw Error(ErrorKind::BadParameters, kModule, "rectangle sides must be positive");
  return validate_polygon({{0, 0}, {a, 0}, {a, b}, {0, b}});
}

Polygon make_stadium(double r, double D, int arc_n) {
  if (!(r > 0) || !(D > 2 * r)) throw Error(ErrorKind::BadParameters, kModule, "stadium needs r > 0 and D > 2r");
  if (arc_n < 16) throw Error(ErrorKind::BadParameters, kModule, "stadium needs arc_n >= 16");
  const double c = D / 2 - r;
  const double pi = std::numbers::pi;
  std::vector<Point> v;
  for (int k = 0; k <= arc_n; ++k) {
    const double th = -pi / 2 + pi * k / arc_n;
    v.emplace_back(c + r * std::cos(th), r * std::sin(th));
  }
  for (int k = 0; k <= arc_n; ++k) {
    const double th = pi / 2 + pi * k / arc_n;
    v.emplace_back(-c + r * std::cos(th), r * std::sin(th));
  }
  // Snap the axis-aligned extremes so the caps meet the flat sides exactly.
  for (auto& p : v) {
    if (std::abs(p.y()) > r * (1 - 1e-15)) p.y() = std::copysign(r, p.y());
    if (std::abs(p.y()) < 1e-15 * r) p.y() = 0.0;
  }
  return validate_polygon(v);
}

Polygon make_lshape() { return validate_polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}); }

double stadium_polygonalization_error(double r, int arc_n) { return r * (1 - std::cos(std::numbers::pi / arc_n)); }

DomainFile make_builtin_domain(const std::string& name, const BuiltinParams& p) {
  DomainFile f;
  f.name = name;
  if (name == "unit_square") {
    f.polygon = make_unit_square();
  } else if (name == "rectangle") {
    f.polygon = make_rectangle(p.a, p.b);
    f.metadata = {{"a", p.a}, {"b", p.b}};
  } else if (name == "stadium") {
    f.polygon = make_stadium(p.r, p.D, p.arc_n);
    f.metadata = {{"r", p.r},
                  {"D", p.D},
                  {"arc_n", p.arc_n},
                  {"polygonalization_error", stadium_polygonalization_error(p.r, p.arc_n)}};
  } else if (name == "lshape") {
    f.polygon = make_lshape();
  } else {
    throw Error(ErrorKind::BadParameters, kModule, "unknown builtin domain '" + name + "'");
  }
  return f;
}

std::string to_json(const DomainFile& file) {
  nlohmann::ordered_json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : file.polygon.vertices()) j["vertices"].push_back({v.x(), v.y()});
  if (file.partition) {
    j["boundary_partition"] = nlohmann::json::array();
    for (const auto& a : file.partition->arcs)
      j["boundary_partition"].push_back({{"edge", a.edge_index},
                                         {"t0", a.t_start},
                                         {"t1", a.t_end},
                                         {"label", a.label == BoundaryLabel::Gamma1 ? "gamma1" : "gamma2"}});
  }
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  if (!file.name.empty()) meta["name"] = file.name;
  for (const auto& [k, v] : file.metadata) meta[k] = v;
  j["metadata"] = meta;
  return j.dump(2) + "\n";
}

DomainFile parse_domain_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DomainFileError, kModule, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("vertices") || !j["vertices"].is_array())
    throw Error(ErrorKind::DomainFileError, kModule, "domain file needs a 'vertices' array");
  std::vector<Point> raw;
  try {
    for (const auto& v : j["vertices"]) raw.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DomainFileError, kModule, std::string("bad vertex entry: ") + e.what());
  }
  DomainFile f;
  f.polygon = validate_polygon(raw);
  const std::size_t n = raw.size();
  if (j.contains("boundary_partition")) {
    BoundaryPartition part;
    try {
      for (const auto& a : j["boundary_partition"]) {
        BoundaryArc arc;
        arc.edge_index = a.at("edge").get<std::size_t>();
        arc.t_start = a.at("t0").get<double>();
        arc.t_end = a.at("t1").get<double>();
        const std::string label = a.at("label").get<std::string>();
        if (label == "gamma1") arc.label = BoundaryLabel::Gamma1;
        else if (label == "gamma2") arc.label = BoundaryLabel::Gamma2;
        else throw Error(ErrorKind::DomainFileError, kModule, "unknown boundary label '" + label + "'");
        if (f.polygon.was_reversed() && arc.edge_index < n) {
          arc.edge_index = (2 * n - 2 - arc.edge_index) % n;
          const double t0 = arc.t_start;
          arc.t_start = 1.0 - arc.t_end;
          arc.t_end = 1.0 - t0;
        }
        part.arcs.push_back(arc);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::DomainFileError, kModule, std::string("bad boundary_partition entry: ") + e.what());
    }
    validate_partition(f.polygon, part);
    f.partition = part;
  }
  if (j.contains("metadata") && j["metadata"].is_object()) {
    for (const auto& [k, v] : j["metadata"].items()) {
      if (v.is_number()) f.metadata[k] = v.get<double>();
      else if (k == "name" && v.is_string()) f.name = v.get<std::string>();
    }
  }
  return f;
}

DomainFile read_domain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::DomainFileError, kModule, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_domain_json(ss.str());
}

void write_domain_file(const std::string& path, const DomainFile& file) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DomainFileError, kModule, "cannot write '" + path + "'");
  out << to_json(file);
}

}  // namespace infspec
