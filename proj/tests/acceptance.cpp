// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include "infspec/domain_io.hpp"
#include "infspec/geometry.hpp"
#include "infspec/infty_spectrum.hpp"
#include "infspec/mesh.hpp"
#include "infspec/plap_fem.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace infspec;

namespace {

const double kSqrt2 = std::sqrt(2.0);

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

BoundaryPartition label_edges(const Polygon& P, const std::vector<std::size_t>& gamma1) {
  BoundaryPartition part;
  for (std::size_t e = 0; e < P.size(); ++e) {
    const bool d = std::find(gamma1.begin(), gamma1.end(), e) != gamma1.end();
    part.arcs.push_back({e, 0.0, 1.0, d ? BoundaryLabel::Gamma1 : BoundaryLabel::Gamma2});
  }
  return part;
}

// Robin rod on [0,1]; even modes k tan(k/2) = beta, odd modes k cot(k/2) = -beta.
double rod_root(double beta, bool even) {
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

struct NamedDomain {
  std::string name;
  Polygon polygon;
  bool convex;
};

std::vector<NamedDomain> sandwich_domains() {
  return {{"square", make_unit_square(), true},
          {"rect2x1", make_rectangle(2, 1), true},
          {"lshape", make_lshape(), false},
          {"stadium", make_stadium(1, 6, 64), true}};
}

// ---------------------------------------------------------------------------

Verdict square_closed_form() {
  Verdict v;
  double worst = 0, slowest = 0;
  const Polygon sq = make_unit_square();
  for (double beta : {1.5, 2.0, 3.0, 5.0, 10.0, 0.5, 1.0, 1.4}) {
    const double c = kSqrt2 / 2;
    const double expect = beta >= 1.5 ? (1 + c) * beta / (1 + c * beta * kSqrt2 / 2) : kSqrt2;
    const auto t0 = std::chrono::steady_clock::now();
    const double got = lambda2_infty(sq, beta);
    slowest = std::max(slowest, seconds_since(t0));
    const double rel = std::abs(got - expect) / expect;
    worst = std::max(worst, rel);
    v.require(rel <= 1e-6, "beta=" + fmt(beta) + " rel=" + fmt(rel));
  }
  v.require(slowest <= 10, "slowest " + fmt(slowest) + " s");
  v.detail << "max rel err " << fmt(worst, 3) << ", slowest beta " << fmt(slowest, 3) << " s";
  return v;
}

Verdict stadium_closed_form() {
  Verdict v;
  const Polygon st = make_stadium(1, 6, 256);
  double worst = 0;
  const double betas[] = {2.0, 0.5, 0.25}, expect[] = {2.0 / 3, 0.4, 1.0 / 3};
  for (int i = 0; i < 3; ++i) {
    const double err = std::abs(lambda2_infty(st, betas[i]) - expect[i]);
    worst = std::max(worst, err);
    v.require(err <= 5e-4, "beta=" + fmt(betas[i]) + " err=" + fmt(err));
  }
  v.detail << "max abs err " << fmt(worst, 3);
  return v;
}

Verdict stadium_continuity() {
  Verdict v;
  const Polygon st = make_stadium(1, 6, 256);
  const int n = 50;
  const double step = (3.0 - 0.1) / (n - 1);
  std::vector<double> b(n), lam(n);
  for (int i = 0; i < n; ++i) {
    b[i] = 0.1 + i * step;
    lam[i] = lambda2_infty(st, b[i]);
  }
  // Jump across each interval against the secant slopes of its neighbours.
  double worst_ratio = 0;
  for (int i = 0; i + 1 < n; ++i) {
    const double jump = std::abs(lam[i + 1] - lam[i]);
    double local = 0;
    if (i > 0) local = std::max(local, std::abs(lam[i] - lam[i - 1]) / step);
    if (i + 2 < n) local = std::max(local, std::abs(lam[i + 2] - lam[i + 1]) / step);
    const double allowed = 3 * local * step + 1e-6;
    worst_ratio = std::max(worst_ratio, jump / allowed);
    v.require(jump <= allowed, "jump at beta=" + fmt(b[i]));
  }
  // Branch points: flat at 1/3 below beta = 1/3, then the secant slope changes across beta = 1
  // (0.125 on the left, 0.25 on the right for r = 1, D = 6).
  double max_dev = 0;
  for (int i = 0; i < n; ++i) {
    max_dev = std::max(max_dev, std::abs(lam[i] - closed_form_stadium(1, 6, b[i]).value));
    if (b[i] < 1.0 / 3) v.require(std::abs(lam[i] - 1.0 / 3) <= 5e-4, "not locked at beta=" + fmt(b[i]));
    if (b[i] > 0.4) v.require(lam[i] > 1.0 / 3 + 1e-3, "still locked at beta=" + fmt(b[i]));
  }
  v.require(max_dev <= 5e-4, "closed form deviation " + fmt(max_dev));
  int k = 0;
  while (b[k + 1] < 1.0) ++k;  // b[k] < 1 <= b[k+1]
  const double left = (lam[k] - lam[k - 2]) / (b[k] - b[k - 2]);
  const double right = (lam[k + 3] - lam[k + 1]) / (b[k + 3] - b[k + 1]);
  v.require(right / left > 1.5, "no slope change at beta=1");
  v.detail << "max jump/allowed " << fmt(worst_ratio, 3) << ", slopes around 1: " << fmt(left, 3) << " -> "
           << fmt(right, 3) << ", max closed-form dev " << fmt(max_dev, 3);
  return v;
}

Verdict sandwich_and_limits() {
  Verdict v;
  const std::vector<double> grid = {0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1, 1.5, 2, 3, 5, 10, 100};
  for (const auto& d : sandwich_domains()) {
    const double De = euclidean_diameter(d.polygon).diameter;
    const double inv_r2 = 1.0 / r2(d.polygon).r2;
    for (double beta : grid) {
      const double l = lambda2_infty(d.polygon, beta);
      v.require(l >= 2 / De - 1e-12 && l <= inv_r2 + 1e-6, d.name + " sandwich at beta=" + fmt(beta));
    }
    const double far = std::abs(lambda2_infty(d.polygon, 1e6) - inv_r2);
    v.require(far <= 1e-4, d.name + " beta=1e6 gap " + fmt(far));
    if (d.convex)
      for (double f : {0.25, 0.5, 1.0}) {
        const double l = lambda2_infty(d.polygon, f * 2 / De);
        v.require(std::abs(l - 2 / De) <= 1e-6, d.name + " lock at beta=" + fmt(f * 2 / De));
      }
    v.detail << d.name << " 1/r2=" << fmt(inv_r2) << " gap(1e6)=" << fmt(far, 2) << "; ";
  }
  return v;
}

Verdict literal_oracle() {
  Verdict v;
  struct Case {
    std::string name;
    Polygon P;
    double beta;
  };
  const std::vector<Case> cases = {{"square", make_unit_square(), 2.0},
                                   {"square", make_unit_square(), 0.8},
                                   {"lshape", make_lshape(), 2.0},
                                   {"stadium", make_stadium(1, 6, 64), 2.0},
                                   {"stadium", make_stadium(1, 6, 64), 0.5}};
  for (const auto& c : cases) {
    const double s = s_omega(c.P, c.beta).s;
    const double lit = oracle::literal_s(c.P, 1.0 / c.beta, 200).s;
    const double rel = std::abs(s - lit) / s;
    v.require(rel <= 1e-3, c.name + " beta=" + fmt(c.beta) + " rel=" + fmt(rel));
    v.detail << c.name << "(" << fmt(c.beta) << ") " << fmt(rel, 2) << "; ";
  }
  return v;
}

Verdict path_characterization() {
  Verdict v;
  for (const auto& [name, P] : std::vector<std::pair<std::string, Polygon>>{{"square", make_unit_square()},
                                                                             {"stadium", make_stadium(1, 6, 64)}}) {
    const double beta = 2.0;
    const double l2 = lambda2_infty(P, beta);
    const PathFunction path = build_minmax_path(P, beta, 12);
    const Field u1 = first_eigenfunction_profile(P, beta).field;
    const auto box = P.bounding_box();
    double end_err = 0;
    for (int i = 0; i <= 40; ++i)
      for (int j = 0; j <= 40; ++j) {
        const Point x = box.min() + Point(box.sizes().x() * i / 40.0, box.sizes().y() * j / 40.0);
        if (!contains(P, x)) continue;
        end_err = std::max(end_err, std::abs(path.segments.front().at(0.0)(x) - u1(x)));
        end_err = std::max(end_err, std::abs(path.segments.back().at(1.0)(x) + u1(x)));
        end_err = std::max(end_err, std::abs(path.start(x) - u1(x)));
        end_err = std::max(end_err, std::abs(path.end(x) + u1(x)));
      }
    const PathSup sup = path_functional_sup(P, path, beta, euclidean_diameter(P).diameter / 100);
    v.require(sup.estimate <= l2 + 1e-3, name + " sup " + fmt(sup.estimate) + " > " + fmt(l2));
    v.require(end_err == 0.0, name + " endpoint mismatch " + fmt(end_err));
    v.detail << name << ": sup " << fmt(sup.estimate, 8) << " vs lambda2 " << fmt(l2, 8) << "; ";
  }
  return v;
}

Verdict mixed_reductions() {
  Verdict v;
  for (const auto& d : sandwich_domains())
    for (double beta : {0.5, 2.0}) {
      const double rob = mixed_lambda_infty(d.polygon, BoundaryPartition::all(d.polygon, BoundaryLabel::Gamma2), beta).lambda;
      const double dir = mixed_lambda_infty(d.polygon, BoundaryPartition::all(d.polygon, BoundaryLabel::Gamma1), beta).lambda;
      const double l1 = lambda1_infty(d.polygon, beta);
      const double inv_r = 1.0 / inradius(d.polygon).r;
      v.require(std::abs(rob - l1) <= 1e-8 * l1, d.name + " Robin reduction");
      v.require(std::abs(dir - inv_r) <= 1e-8 * inv_r, d.name + " Dirichlet reduction");
    }
  const Polygon sq = make_unit_square();
  const double left = mixed_lambda_infty(sq, label_edges(sq, {3}), 1.0).lambda;
  v.require(std::abs(left - 1.0) <= 1e-3, "left-edge Dirichlet " + fmt(left));
  v.detail << "left-edge Dirichlet square: " << fmt(left, 10);
  return v;
}

Verdict p2_calibration() {
  Verdict v;
  const Mesh m = triangulate(make_unit_square(), 0.02);
  const double m0 = rod_root(1.0, true), m1 = rod_root(1.0, false);
  const auto r = solve_p2_reference(m, 1.0);
  const double e1 = std::abs(r[0].lambda - 2 * m0) / (2 * m0), e2 = std::abs(r[1].lambda - (m0 + m1)) / (m0 + m1);
  v.require(e1 <= 5e-3 && e2 <= 5e-3, "Robin beta=1");
  const auto n = solve_p2_reference(m, 1e-6);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double en = std::abs(n[1].lambda - pi2) / pi2;
  v.require(en <= 1e-2, "Neumann limit");
  v.detail << "lambda1 " << fmt(r[0].lambda, 8) << " (rel " << fmt(e1, 2) << "), lambda2 " << fmt(r[1].lambda, 8)
           << " (rel " << fmt(e2, 2) << "), Neumann lambda2 " << fmt(n[1].lambda, 6) << " (rel " << fmt(en, 2) << ")";
  return v;
}

struct Study {
  std::string name;
  StudyTable table;
  double seconds = 0;
  double target = 0;
  double D = 0;
  double beta = 0;
};

const std::vector<Study>& studies() {
  static const std::vector<Study> all = [] {
    std::vector<Study> out;
    const std::vector<double> ladder = {2, 4, 8, 16, 32, 64};
    {
      const auto t0 = std::chrono::steady_clock::now();
      StudyTable t = convergence_study(make_unit_square(), 2.0, ladder, 0.02);
      out.push_back({"square h=0.02", std::move(t), seconds_since(t0), (2 + kSqrt2) / 2, kSqrt2, 2.0});
    }
    {
      // The stadium uses h = 0.03: at h = 0.02 the six-rung ladder exceeds ten minutes on one core.
      const Polygon st = make_stadium(1, 6, 64);
      const auto t0 = std::chrono::steady_clock::now();
      StudyTable t = convergence_study(st, 2.0, ladder, 0.03);
      out.push_back({"stadium h=0.03", std::move(t), seconds_since(t0), 2.0 / 3, euclidean_diameter(st).diameter, 2.0});
    }
    return out;
  }();
  return all;
}

Verdict convergence_trend() {
  Verdict v;
  for (const auto& s : studies()) {
    const auto& rows = s.table.rows;
    v.detail << s.name << " gaps:";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      v.require(rows[i].error.empty(), s.name + " p=" + fmt(rows[i].p) + ": " + rows[i].error);
      v.require(std::abs(rows[i].target2 - s.target) <= 1e-9 * s.target, s.name + " target");
      if (i) v.require(rows[i].gap2 < rows[i - 1].gap2, s.name + " gap not decreasing at p=" + fmt(rows[i].p));
      v.detail << " " << fmt(rows[i].gap2, 4);
    }
    v.require(!rows.empty() && rows.back().gap2 <= 0.10, s.name + " final gap " + fmt(rows.back().gap2));
    v.require(s.seconds <= 600, s.name + " took " + fmt(s.seconds) + " s");
    v.detail << " (" << fmt(s.seconds, 3) << " s); ";
  }
  return v;
}

Verdict bound_bracketing() {
  Verdict v;
  int rows_checked = 0;
  for (const auto& s : studies())
    for (const auto& r : s.table.rows) {
      if (!r.error.empty()) continue;
      ++rows_checked;
      const std::string tag = s.name + " p=" + fmt(r.p);
      v.require(r.dlg <= r.lambda1_root, tag + " DLG");
      v.require(r.lambda2 <= r.cone_bound * (1 + 1e-6), tag + " cone bound");
      if (s.beta > 2 / s.D) v.require(r.sign_changing, tag + " sign change");
    }
  // Additional Robin parameters on a coarser square mesh.
  const Mesh m = triangulate(make_unit_square(), 0.04);
  const Polygon sq = make_unit_square();
  for (double beta : {0.5, 1.0, 3.0}) {
    const SOmegaResult sres = s_omega(sq, beta);
    for (double p : {4.0, 16.0}) {
      SolverOptions o;
      o.cone_pair = std::make_pair(Cone{sres.x1, sres.s}, Cone{sres.x2, sres.s});
      const EigenResult f = minimize_first(m, p, beta);
      const EigenResult g = minimize_second(m, p, beta, o);
      const std::string tag = "square beta=" + fmt(beta) + " p=" + fmt(p);
      v.require(dlg_lower_bound(1.0, p, beta) <= f.lambda_root, tag + " DLG");
      v.require(g.lambda <= cone_span_upper_bound(m, sq, beta, p, sres) * (1 + 1e-6), tag + " cone bound");
      if (beta > 2 / kSqrt2) v.require(g.sign_changing, tag + " sign change");
      ++rows_checked;
    }
  }
  v.detail << rows_checked << " solved (p, beta) pairs";
  return v;
}

Verdict invariant_suites() {
  Verdict v;
  for (const char* bin : {TEST_GEOMETRY_BIN, TEST_INFTY_BIN, TEST_PLAP_BIN, TEST_CLI_BIN}) {
    const std::string cmd = std::string("\"") + bin + "\" --test-case=\"property:*\" --minimal > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    const std::string name = std::string(bin).substr(std::string(bin).find_last_of('/') + 1);
    v.require(rc == 0, name);
    v.detail << name << (rc == 0 ? " ok; " : " FAILED; ");
  }
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "square closed form", square_closed_form},
      {2, "stadium closed form", stadium_closed_form},
      {3, "continuity in beta", stadium_continuity},
      {4, "sandwich and limits", sandwich_and_limits},
      {5, "literal feasibility oracle", literal_oracle},
      {6, "min-max path", path_characterization},
      {7, "mixed reductions", mixed_reductions},
      {8, "p=2 calibration", p2_calibration},
      {9, "convergence trend", convergence_trend},
      {10, "bound bracketing", bound_bracketing},
      {11, "invariant suites", invariant_suites},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
      Verdict v = c.run();
      pass = v.pass;
      detail = v.detail.str();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    failed += !pass;
    std::printf("CRITERION %2d %s  %s  (%.1f s)  %s\n", c.id, pass ? "PASS" : "FAIL", c.name, seconds_since(t0),
                detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
