#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "infspec/domain_io.hpp"
#include "infspec/mesh.hpp"
#include "infspec/plap_fem.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace infspec;
using testing::kind_of;

namespace {

// Robin rod -phi'' = mu phi on [0,1], phi' = beta phi at 0, phi' = -beta phi at 1.
// Even modes solve k tan(k/2) = beta, odd modes k cot(k/2) = -beta; mu = k^2.
double rod_root(double beta, bool even) {
  // Both written to increase across the bracket.
  auto f = [&](double k) { return even ? k * std::tan(k / 2) - beta : -(k / std::tan(k / 2) + beta); };
  double lo = even ? 1e-12 : std::numbers::pi + 1e-12;
  double hi = even ? std::numbers::pi - 1e-12 : 2 * std::numbers::pi - 1e-12;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  const double k = 0.5 * (lo + hi);
  return k * k;
}

struct RodPair {
  double l1, l2;
};

RodPair square_oracle(double beta) {
  const double m0 = rod_root(beta, true), m1 = rod_root(beta, false);
  return {2 * m0, m0 + m1};
}

const Mesh& square_mesh() {
  static const Mesh m = triangulate(make_unit_square(), 0.05);
  return m;
}

double max_abs(const DiscreteField& u) { return u.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("quotient of simple fields") {
  const Mesh& m = square_mesh();
  const DiscreteField one = DiscreteField::Ones(m.nodes.size());
  CHECK(rayleigh_quotient_p(m, one, 4, 1).value == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(rayleigh_quotient_p(m, one, 4, 1).parts.grad_term == doctest::Approx(0.0));

  DiscreteField x(m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) x[i] = m.nodes[i].x();
  const QuotientValue q = rayleigh_quotient_p(m, x, 2, 1e-6);
  CHECK(q.parts.mass_term == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(q.parts.grad_term == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(q.value == doctest::Approx(3.0).epsilon(1e-10));

  // Boundary term of x^2 on the square at p=2, beta=1: 0 + 1 + 1/3 + 1/3.
  CHECK(rayleigh_quotient_p(m, x, 2, 1).parts.boundary_term == doctest::Approx(5.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("quotient errors") {
  const Mesh& m = square_mesh();
  const DiscreteField zero = DiscreteField::Zero(m.nodes.size());
  CHECK(kind_of([&] { rayleigh_quotient_p(m, zero, 4, 1); }) == ErrorKind::ZeroField);
  const DiscreteField one = DiscreteField::Ones(m.nodes.size());
  CHECK(kind_of([&] { rayleigh_quotient_p(m, one, 1.5, 1); }) == ErrorKind::BadParameters);
  CHECK(kind_of([&] { rayleigh_quotient_p(m, one, 4, 0); }) == ErrorKind::BadParameters);
  RobinQuotient rq(m, 4, 1);
  CHECK(kind_of([&] { rq.balance_factor(one); }) == ErrorKind::DegenerateSign);
}

TEST_CASE("property: p-homogeneity") {
  const Mesh& m = square_mesh();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1), C(0.1, 10);
  for (double p : {2.0, 3.0, 8.0, 33.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      DiscreteField u(m.nodes.size());
      for (auto& v : u) v = U(rng);
      const double c = (trial % 2 ? -1 : 1) * C(rng);
      const DiscreteField cu = c * u;
      CHECK(rayleigh_quotient_p(m, cu, p, 1.3).value ==
            doctest::Approx(rayleigh_quotient_p(m, u, p, 1.3).value).epsilon(1e-11));
    }
  }
}

TEST_CASE("property: gradients against central differences") {
  const Mesh& m = square_mesh();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  for (double p : {2.0, 4.0, 8.0}) {
    RobinQuotient rq(m, p, 1.5);
    for (int trial = 0; trial < 3; ++trial) {
      DiscreteField u(m.nodes.size()), d(m.nodes.size());
      for (auto& v : u) v = U(rng);
      for (auto& v : d) v = U(rng);
      double num, mass, plus, minus;
      Eigen::VectorXd gnum, gmass, gplus, gminus;
      rq.terms(u, num, mass, &gnum, &gmass);
      rq.signed_masses(u, plus, minus, &gplus, &gminus);
      const double eps = 1e-6;
      double n1, n2, m1, m2, p1, p2, q1, q2;
      const DiscreteField up = u + eps * d, um = u - eps * d;
      rq.terms(up, n1, m1, nullptr, nullptr);
      rq.terms(um, n2, m2, nullptr, nullptr);
      rq.signed_masses(up, p1, q1, nullptr, nullptr);
      rq.signed_masses(um, p2, q2, nullptr, nullptr);
      CAPTURE(p);
      CHECK(gnum.dot(d) == doctest::Approx((n1 - n2) / (2 * eps)).epsilon(1e-5));
      CHECK(gmass.dot(d) == doctest::Approx((m1 - m2) / (2 * eps)).epsilon(1e-5));
      CHECK(gplus.dot(d) == doctest::Approx((p1 - p2) / (2 * eps)).epsilon(1e-5));
      CHECK(gminus.dot(d) == doctest::Approx((q1 - q2) / (2 * eps)).epsilon(1e-5));
    }
  }
}

TEST_CASE("balance factor equalizes signed masses") {
  const Mesh& m = square_mesh();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-0.2, 1.0);
  DiscreteField u(m.nodes.size());
  for (auto& v : u) v = U(rng);
  for (double p : {2.0, 6.0, 40.0}) {
    RobinQuotient rq(m, p, 1);
    const double a = rq.balance_factor(u);
    DiscreteField v = u;
    for (auto& x : v)
      if (x > 0) x *= a;
    double plus, minus;
    rq.signed_masses(v, plus, minus, nullptr, nullptr);
    CAPTURE(p);
    CHECK(plus == doctest::Approx(minus).epsilon(1e-9));
  }
}

TEST_CASE("p=2 reference against Robin rods") {
  const Mesh fine = triangulate(make_unit_square(), 0.02);
  const RodPair o = square_oracle(1.0);
  const auto r = solve_p2_reference(fine, 1.0);
  CHECK(r[0].lambda == doctest::Approx(o.l1).epsilon(5e-4));
  CHECK(r[1].lambda == doctest::Approx(o.l2).epsilon(5e-4));
  CHECK(r[0].lambda_root == doctest::Approx(std::sqrt(r[0].lambda)));

  const auto n = solve_p2_reference(fine, 1e-6);
  CHECK(n[1].lambda == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(1e-2));
  CHECK(n[0].lambda < 1e-9);
}

TEST_CASE("p=2 reference converges at second order") {
  const RodPair o = square_oracle(1.0);
  std::vector<double> e1, e2;
  for (int n : {8, 16, 32}) {
    const auto r = solve_p2_reference(criss_cross_rectangle(1, 1, n, n), 1.0);
    e1.push_back(std::abs(r[0].lambda - o.l1));
    e2.push_back(std::abs(r[1].lambda - o.l2));
  }
  for (int i = 0; i < 2; ++i) {
    CHECK(e1[i] / e1[i + 1] > 3.0);
    CHECK(e2[i] / e2[i + 1] > 3.0);
  }
}

TEST_CASE("minimizers at p=2 reproduce the linear solver") {
  const Mesh& m = square_mesh();
  const auto ref = solve_p2_reference(m, 2.0);
  const EigenResult f = minimize_first(m, 2, 2);
  const EigenResult s = minimize_second(m, 2, 2);
  CHECK(f.lambda == doctest::Approx(ref[0].lambda).epsilon(1e-8));
  CHECK(s.lambda == doctest::Approx(ref[1].lambda).epsilon(1e-8));
  CHECK(f.label == EigenLabel::First);
  CHECK(s.label == EigenLabel::Second);
}

TEST_CASE("property: lower bound, descent and sign of the first eigenfunction") {
  const Mesh& m = square_mesh();
  const Polygon sq = make_unit_square();
  for (double beta : {0.5, 1.0, 2.0}) {
    const FirstProfile prof = first_eigenfunction_profile(sq, beta);
    const DiscreteField w = RobinQuotient::interpolate(m, prof.field);
    std::optional<EigenResult> prev;
    for (double p : {4.0, 8.0, 16.0}) {
      SolverOptions o;
      if (prev) {
        o.warm_start = prev->field;
        o.warm_start_p = prev->p;
      }
      const EigenResult r = minimize_first(m, p, beta, o);
      CAPTURE(beta);
      CAPTURE(p);
      CHECK(r.lambda_root >= dlg_lower_bound(1.0, p, beta) - solver_tolerance(p));
      CHECK(r.lambda <= rayleigh_quotient_p(m, w, p, beta).value);
      CHECK(r.field.minCoeff() >= -1e-12 * max_abs(r.field));
      CHECK_FALSE(r.sign_changing);
      for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] * (1 + 1e-12));
      prev = r;
    }
  }
}

TEST_CASE("first eigenvalue roots decrease towards the limit") {
  const Mesh& m = square_mesh();
  std::vector<double> roots;
  std::optional<EigenResult> prev;
  for (double p : {4.0, 8.0, 16.0, 32.0}) {
    SolverOptions o;
    if (prev) {
      o.warm_start = prev->field;
      o.warm_start_p = prev->p;
    }
    prev = minimize_first(m, p, 2.0, o);
    roots.push_back(prev->lambda_root);
  }
  for (std::size_t i = 1; i < roots.size(); ++i) CHECK(roots[i] < roots[i - 1]);
  CHECK(roots.back() > lambda1_infty(make_unit_square(), 2.0));
}

TEST_CASE("property: ordering, sign structure and the cone bound") {
  const Mesh& m = square_mesh();
  const Polygon sq = make_unit_square();
  const SOmegaResult sres = s_omega(sq, 2.0);
  SolverOptions o;
  o.cone_pair = std::make_pair(Cone{sres.x1, sres.s}, Cone{sres.x2, sres.s});
  const EigenResult f = minimize_first(m, 8, 2.0);
  o.first_field = f.field;
  const EigenResult s = minimize_second(m, 8, 2.0, o);
  CHECK(f.lambda <= s.lambda * (1 + solver_tolerance(8)));
  CHECK(s.sign_changing);
  CHECK(s.positive_sup > 0.5 * max_abs(s.field));
  CHECK(s.negative_sup > 0.5 * max_abs(s.field));
  CHECK(std::isfinite(s.projection_on_first));
  for (std::size_t i = 1; i < s.history.size(); ++i) CHECK(s.history[i] <= s.history[i - 1] * (1 + 1e-12));
  CHECK(cone_span_upper_bound(m, sq, 2.0, 8, sres) >= s.lambda);
}

TEST_CASE("cone bound: disjoint supports and the large-p trend") {
  const Mesh fine = triangulate(make_unit_square(), 0.02);
  const Polygon sq = make_unit_square();
  const SOmegaResult sres = s_omega(sq, 2.0);
  const Field c1 = Field::cone({sres.x1, sres.s}), c2 = Field::cone({sres.x2, sres.s});
  const double plus = rayleigh_quotient_p(fine, RobinQuotient::interpolate(fine, c1 + c2), 8, 2.0).value;
  const double minus = rayleigh_quotient_p(fine, RobinQuotient::interpolate(fine, c1 - c2), 8, 2.0).value;
  CHECK(plus == doctest::Approx(minus).epsilon(1e-3));

  double last = 1e300;
  for (double p : {4.0, 8.0, 16.0, 32.0, 64.0}) {
    const double gap = std::abs(std::pow(cone_span_upper_bound(fine, sq, 2.0, p, sres), 1 / p) - 1 / sres.s);
    CAPTURE(p);
    CHECK(gap < last);
    last = gap;
  }
}

TEST_CASE("DLG lower bound") {
  // Independent evaluation in long double of 0.75 sqrt(pi) / (sqrt(pi) + 1)^(3/4).
  const long double sp = std::sqrt(std::numbers::pi_v<long double>);
  const long double expect = 0.75L * sp / std::pow(sp + 1.0L, 0.75L);
  CHECK(dlg_lower_bound(1.0, 4, 1.0) == doctest::Approx(static_cast<double>(expect)).epsilon(1e-14));
  CHECK(dlg_lower_bound(1.0, 4, 1.0) == doctest::Approx(0.6186).epsilon(2e-4));
  CHECK(dlg_lower_bound(2.0, 3, 0.7, 3) > 0);
  CHECK(kind_of([] { dlg_lower_bound(1.0, 1.0, 1.0); }) == ErrorKind::BadParameters);

  // Along the ladder on a disc of radius 1 the bound stays below lambda_1,inf = beta / (1 + beta r).
  const double beta = 1.5;
  for (double p : {4.0, 16.0, 64.0, 128.0})
    CHECK(dlg_lower_bound(std::numbers::pi, p, beta) <= beta / (1 + beta));
}

TEST_CASE("property: mesh refinement of the second eigenvalue") {
  std::vector<double> lam;
  for (int n : {8, 16, 32}) lam.push_back(minimize_second(criss_cross_rectangle(1, 1, n, n), 4, 2.0).lambda);
  const double d1 = std::abs(lam[0] - lam[1]), d2 = std::abs(lam[1] - lam[2]);
  CHECK(d2 < d1);
  CHECK(std::log2(d1 / d2) >= 1.0);
}

TEST_CASE("convergence study on a coarse square") {
  const StudyTable t = convergence_study(make_unit_square(), 2.0, {2, 4, 8}, 0.05);
  REQUIRE(t.rows.size() == 3);
  for (const auto& r : t.rows) {
    CHECK(r.error.empty());
    CHECK(r.target2 == doctest::Approx((2 + std::sqrt(2.0)) / 2));
    CHECK(r.target1 == doctest::Approx(1.0));
    CHECK(r.lambda1 <= r.lambda2 * (1 + 1e-6));
    CHECK(r.dlg <= r.lambda1_root);
    CHECK(r.sign_changing);
  }
  CHECK(t.rows[1].gap2 < t.rows[0].gap2);
  CHECK(t.rows[2].gap2 < t.rows[1].gap2);
}

TEST_CASE("solver failures are reported per row") {
  SolverOptions o;
  o.max_sweeps = 1;
  o.sweep_iterations = 1;
  o.tol = 1e-300;
  const StudyTable t = convergence_study(make_unit_square(), 2.0, {4, 8}, 0.1, o);
  REQUIRE(t.rows.size() == 2);
  for (const auto& r : t.rows) CHECK_FALSE(r.error.empty());

  try {
    minimize_first(square_mesh(), 4, 2.0, o);
    FAIL("expected NonConvergence");
  } catch (const SolverNonConvergence& e) {
    CHECK(e.kind() == ErrorKind::NonConvergence);
    CHECK(e.best.lambda > 0);
    CHECK(e.best.field.size() == static_cast<Eigen::Index>(square_mesh().nodes.size()));
  }
}
