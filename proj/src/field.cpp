#include "infspec/field.hpp"

#include <algorithm>
#include <cmath>

namespace infspec {

namespace detail {

struct FieldNode {
  virtual ~FieldNode() = default;
  virtual FieldSample eval(const Point& x, double guard) const = 0;
};

namespace {

struct ConstantNode final : FieldNode {
  double c;
  explicit ConstantNode(double c_) : c(c_) {}
  FieldSample eval(const Point&, double) const override { return {c, {0, 0}, Eigen::Matrix2d::Zero(), true}; }
};

struct ConeNode final : FieldNode {
  Cone cone;
  explicit ConeNode(const Cone& c) : cone(c) {}
  FieldSample eval(const Point& x, double guard) const override {
    FieldSample s;
    const Point r = x - cone.apex;
    const double rho = r.norm();
    s.smooth = rho > guard && std::abs(rho - cone.t) > guard;
    if (rho >= cone.t) return s;
    s.value = (cone.t - rho) / cone.t;
    if (rho > 0.0) {
      const Eigen::Vector2d g = r / rho;
      s.grad = -g / cone.t;
      s.hess = -(Eigen::Matrix2d::Identity() - g * g.transpose()) / (cone.t * rho);
    }
    return s;
  }
};

struct DistanceNode final : FieldNode {
  std::shared_ptr<const Polygon> domain;
  double offset, scale;
  DistanceNode(std::shared_ptr<const Polygon> d, double o, double s) : domain(std::move(d)), offset(o), scale(s) {}
  FieldSample eval(const Point& x, double guard) const override {
    const DistanceJet jet = distance_jet(*domain, x, guard);
    return {(offset + jet.distance) * scale, scale * jet.grad, scale * jet.hess, jet.smooth};
  }
};

struct SampledNode final : FieldNode {
  std::function<double(const Point&)> f;
  double h;
  SampledNode(std::function<double(const Point&)> f_, double h_) : f(std::move(f_)), h(h_) {}
  FieldSample eval(const Point& x, double) const override {
    FieldSample s;
    const Point ex(h, 0), ey(0, h);
    s.value = f(x);
    const double fxp = f(x + ex), fxm = f(x - ex), fyp = f(x + ey), fym = f(x - ey);
    s.grad = {(fxp - fxm) / (2 * h), (fyp - fym) / (2 * h)};
    const double fxy = (f(x + ex + ey) - f(x + ex - ey) - f(x - ex + ey) + f(x - ex - ey)) / (4 * h * h);
    s.hess << (fxp - 2 * s.value + fxm) / (h * h), fxy, fxy, (fyp - 2 * s.value + fym) / (h * h);
    return s;
  }
};

struct SumNode final : FieldNode {
  std::shared_ptr<const FieldNode> a, b;
  SumNode(std::shared_ptr<const FieldNode> a_, std::shared_ptr<const FieldNode> b_) : a(std::move(a_)), b(std::move(b_)) {}
  FieldSample eval(const Point& x, double guard) const override {
    const FieldSample sa = a->eval(x, guard), sb = b->eval(x, guard);
    return {sa.value + sb.value, sa.grad + sb.grad, sa.hess + sb.hess, sa.smooth && sb.smooth};
  }
};

struct ScaleNode final : FieldNode {
  double s;
  std::shared_ptr<const FieldNode> a;
  ScaleNode(double s_, std::shared_ptr<const FieldNode> a_) : s(s_), a(std::move(a_)) {}
  FieldSample eval(const Point& x, double guard) const override {
    const FieldSample sa = a->eval(x, guard);
    return {s * sa.value, s * sa.grad, s * sa.hess, sa.smooth};
  }
};

struct MaxMinNode final : FieldNode {
  bool is_max;
  std::shared_ptr<const FieldNode> a, b;
  MaxMinNode(bool m, std::shared_ptr<const FieldNode> a_, std::shared_ptr<const FieldNode> b_)
      : is_max(m), a(std::move(a_)), b(std::move(b_)) {}
  FieldSample eval(const Point& x, double guard) const override {
    const FieldSample sa = a->eval(x, guard), sb = b->eval(x, guard);
    const bool pick_a = is_max ? sa.value >= sb.value : sa.value <= sb.value;
    FieldSample out = pick_a ? sa : sb;
    // Switching surface: within guard (in distance units) of the other branch.
    const double slope = std::max(1e-300, (sa.grad - sb.grad).norm());
    if (std::abs(sa.value - sb.value) <= guard * slope) out.smooth = false;
    return out;
  }
};

}  // namespace
}  // namespace detail

Field::Field() : node_(std::make_shared<detail::ConstantNode>(0.0)) {}

FieldSample Field::eval(const Point& x, double guard) const { return node_->eval(x, guard); }

Field Field::constant(double c) { return Field(std::make_shared<detail::ConstantNode>(c)); }

Field Field::cone(const Cone& c) { return Field(std::make_shared<detail::ConeNode>(c)); }

Field Field::boundary_distance(std::shared_ptr<const Polygon> domain, double offset, double scale) {
  return Field(std::make_shared<detail::DistanceNode>(std::move(domain), offset, scale));
}

Field Field::sampled(std::function<double(const Point&)> f, double h_fd) {
  return Field(std::make_shared<detail::SampledNode>(std::move(f), h_fd));
}

Field operator+(const Field& a, const Field& b) { return Field(std::make_shared<detail::SumNode>(a.node_, b.node_)); }

Field operator*(double s, const Field& a) { return Field(std::make_shared<detail::ScaleNode>(s, a.node_)); }

Field max(const Field& a, const Field& b) { return Field(std::make_shared<detail::MaxMinNode>(true, a.node_, b.node_)); }

Field min(const Field& a, const Field& b) { return Field(std::make_shared<detail::MaxMinNode>(false, a.node_, b.node_)); }

}  // namespace infspec
