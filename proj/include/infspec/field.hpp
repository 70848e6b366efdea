#pragma once

#include "infspec/geometry.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>

namespace infspec {

/// Value, gradient and Hessian of a scalar field at one point. `smooth` is false when
/// the point lies within the evaluation guard of a kink (apex, rim, max/min switch,
/// medial axis), where the derivatives are one-sided only.
struct FieldSample {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
  bool smooth = true;
};

struct Cone {
  Point apex = Point::Zero();
  double t = 1.0;
};

namespace detail {
struct FieldNode;
}

/// Immutable analytic scalar field on the plane, composable with +, -, scalar *,
/// pointwise max/min. Derivatives are propagated exactly through the expression.
class Field {
 public:
  Field();  // the zero field

  FieldSample eval(const Point& x, double guard = 0.0) const;
  double operator()(const Point& x) const { return eval(x).value; }

  static Field constant(double c);
  static Field cone(const Cone& c);
  /// (offset + d(x, boundary)) * scale, with d the unsigned distance to the polygon boundary.
  static Field boundary_distance(std::shared_ptr<const Polygon> domain, double offset, double scale);
  /// Arbitrary callable; derivatives by central differences with step `h_fd`.
  static Field sampled(std::function<double(const Point&)> f, double h_fd);

  friend Field operator+(const Field& a, const Field& b);
  friend Field operator*(double s, const Field& a);
  friend Field max(const Field& a, const Field& b);
  friend Field min(const Field& a, const Field& b);

 private:
  explicit Field(std::shared_ptr<const detail::FieldNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::FieldNode> node_;
};

inline Field operator*(const Field& a, double s) { return s * a; }
inline Field operator-(const Field& a) { return -1.0 * a; }
inline Field operator-(const Field& a, const Field& b) { return a + (-1.0 * b); }

}  // namespace infspec
