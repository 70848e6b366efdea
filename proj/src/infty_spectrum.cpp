#include "infspec/infty_spectrum.hpp"

#include "infspec/error.hpp"
#include "infspec/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace infspec {

namespace {

const char* kModule = "infty_spectrum";

bool lex_less(const Point& a, const Point& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); }

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::BadParameters, kModule, "beta must be positive and finite");
}

double scale_of(const Polygon& domain) { return std::max(1.0, domain.bounding_box().sizes().maxCoeff()); }

// Two-point objective with both points projected onto the closure.
struct PairEval {
  double value;
  Point x1, x2;
  double d1, d2;
};

PairEval pair_objective(const Polygon& domain, double b, const Point& p1, const Point& p2) {
  const ClosurePoint c1 = project_with_distance(domain, p1);
  const ClosurePoint c2 = project_with_distance(domain, p2);
  const double v = std::min({0.5 * (c1.point - c2.point).norm(), c1.distance + b, c2.distance + b});
  return {v, c1.point, c2.point, c1.distance, c2.distance};
}

// Convex polygon clipped by the half-plane n.x <= h.
std::vector<Point> clip(const std::vector<Point>& poly, const Eigen::Vector2d& n, double h) {
  std::vector<Point> out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % m];
    const double fa = n.dot(a) - h, fb = n.dot(b) - h;
    if (fa <= 0) out.push_back(a);
    if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) out.push_back(a + (b - a) * (fa / (fa - fb)));
  }
  return out;
}

// {x in domain : d(x) >= c} for a convex domain.
std::vector<Point> inner_parallel(const Polygon& domain, double c) {
  std::vector<Point> poly = domain.vertices();
  if (c <= 0) return poly;
  for (std::size_t i = 0; i < domain.size() && !poly.empty(); ++i) {
    const auto [a, b] = domain.edge(i);
    const Eigen::Vector2d e = (b - a).normalized();
    const Eigen::Vector2d n(e.y(), -e.x());
    poly = clip(poly, n, n.dot(a) - c);
  }
  return poly;
}

double convex_diameter(const std::vector<Point>& pts, std::pair<Point, Point>* pair) {
  double best = pts.empty() ? -kInf : 0.0;
  if (pair && !pts.empty()) *pair = {pts[0], pts[0]};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).norm();
      if (d > best) {
        best = d;
        if (pair) *pair = {pts[i], pts[j]};
      }
    }
  }
  return best;
}

// Exact maximizer for convex domains: s = sup{t : diam{d >= t - b} >= 2t}, by bisection on t.
PairEval convex_level_set_pair(const Polygon& domain, double b, double r, double De) {
  auto excess = [&](double t, std::pair<Point, Point>* pair) {
    return convex_diameter(inner_parallel(domain, t - b), pair) - 2 * t;
  };
  std::pair<Point, Point> pair;
  double hi = std::min(b + r, 0.5 * De);
  double lo = 0.0;
  if (excess(hi, &pair) < 0) {
    excess(lo, &pair);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * De; ++it) {
      const double mid = 0.5 * (lo + hi);
      std::pair<Point, Point> pm;
      if (excess(mid, &pm) >= 0) {
        lo = mid;
        pair = pm;
      } else {
        hi = mid;
      }
    }
  }
  return pair_objective(domain, b, pair.first, pair.second);
}

struct PairSearchResult {
  PairEval best;
  bool converged = false;
};

PairSearchResult maximize_pair(const Polygon& domain, double b, const SearchOptions& opts, double tol_opt) {
  const DiameterResult diam = euclidean_diameter(domain);
  const double De = diam.diameter;
  const double h = De / 64.0;

  std::vector<Point> pts = closure_grid(domain, h);
  for (const auto& p : sample_boundary(domain, h)) pts.push_back(p);

  // Farthest-point thinning from a seeded start.
  std::mt19937_64 rng(opts.seed);
  const std::size_t cap = static_cast<std::size_t>(std::max(2, opts.max_seed_points));
  std::vector<Point> seeds;
  double thin_spacing = h;
  if (pts.size() <= cap) {
    seeds = pts;
  } else {
    std::vector<double> gap(pts.size(), kInf);
    std::size_t next = std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng);
    while (seeds.size() < cap) {
      seeds.push_back(pts[next]);
      std::size_t far = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        gap[i] = std::min(gap[i], (pts[i] - pts[next]).norm());
        if (gap[i] > gap[far]) far = i;
      }
      thin_spacing = gap[far];
      next = far;
    }
  }
  std::vector<double> dist(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) dist[i] = distance_to_boundary(domain, seeds[i]);

  struct Scored {
    double f;
    std::size_t i, j;
  };
  std::vector<Scored> scored;
  scored.reserve(seeds.size() * (seeds.size() - 1) / 2);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      scored.push_back({std::min({0.5 * (seeds[i] - seeds[j]).norm(), dist[i] + b, dist[j] + b}), i, j});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.f > b.f || (a.f == b.f && (a.i < b.i || (a.i == b.i && a.j < b.j)));
  });

  std::vector<std::pair<Point, Point>> starts{diam.pair};
  const double sep = 2.0 * thin_spacing;
  for (const auto& sc : scored) {
    if (static_cast<int>(starts.size()) > opts.refine_pairs) break;
    const Point& a = seeds[sc.i];
    const Point& c = seeds[sc.j];
    const bool distinct = std::all_of(starts.begin(), starts.end(), [&](const auto& st) {
      const bool same = (st.first - a).norm() < sep && (st.second - c).norm() < sep;
      const bool swapped = (st.first - c).norm() < sep && (st.second - a).norm() < sep;
      return !same && !swapped;
    });
    if (distinct) starts.emplace_back(a, c);
  }

  NelderMeadOptions nm;
  nm.tol_x = 1e-2 * tol_opt;
  nm.tol_f = 1e-4 * tol_opt;
  nm.max_evals = opts.max_evals;
  auto objective = [&](const Eigen::VectorXd& v) {
    return -pair_objective(domain, b, Point(v[0], v[1]), Point(v[2], v[3])).value;
  };

  PairSearchResult out;
  out.best = pair_objective(domain, b, starts.front().first, starts.front().second);
  for (const auto& st : starts) {
    Eigen::VectorXd x0(4);
    x0 << st.first, st.second;
    const NelderMeadResult res = nelder_mead(objective, x0, 0.5 * thin_spacing, nm);
    const PairEval pe = pair_objective(domain, b, Point(res.x[0], res.x[1]), Point(res.x[2], res.x[3]));
    out.converged = out.converged || res.converged;
    if (pe.value > out.best.value) out.best = pe;
  }

  if (domain.is_convex()) {
    const double r = inradius(domain).r;
    const PairEval exact = convex_level_set_pair(domain, b, r, De);
    if (exact.value >= out.best.value) {
      out.best = exact;
      out.converged = true;
    }
  }
  if (lex_less(out.best.x2, out.best.x1)) {
    std::swap(out.best.x1, out.best.x2);
    std::swap(out.best.d1, out.best.d2);
  }
  return out;
}

SOmegaResult solve_pair_problem(const Polygon& domain, double b, double beta, const SearchOptions& opts) {
  const double De = euclidean_diameter(domain).diameter;
  SOmegaResult res;
  res.beta = beta;
  res.tol_opt = opts.tol_rel * De;
  const PairSearchResult ps = maximize_pair(domain, b, opts, res.tol_opt);
  res.s = ps.best.value;
  res.x1 = ps.best.x1;
  res.x2 = ps.best.x2;

  const double act = 10.0 * res.tol_opt;
  if (0.5 * (res.x1 - res.x2).norm() <= res.s + act) res.active.push_back(ActiveConstraint::PairDistance);
  if (ps.best.d1 + b <= res.s + act) res.active.push_back(ActiveConstraint::Trace1);
  if (ps.best.d2 + b <= res.s + act) res.active.push_back(ActiveConstraint::Trace2);

  // Re-verify the trace reduction on the returned pair by sampling.
  const double allowed = std::isfinite(beta) ? 1.0 / (beta * res.s) : 0.0;
  double excess = 0.0;
  for (const Point& x : {res.x1, res.x2}) {
    const ConeTrace tr = cone_boundary_sup(domain, Cone{x, res.s});
    excess = std::max(excess, tr.sampled - allowed);
  }
  const double F = std::min({0.5 * (res.x1 - res.x2).norm(), distance_to_boundary(domain, res.x1) + b,
                             distance_to_boundary(domain, res.x2) + b});
  res.objective_gap = std::max(std::abs(res.s - F), excess);

  if (!ps.converged) throw SearchStalled("no refinement run reached tol_opt", res);
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------

double cone_value(const Cone& c, const Point& x) {
  return std::max(0.0, c.t - (x - c.apex).norm()) / c.t;
}

ConeTrace cone_boundary_sup(const Polygon& domain, const Cone& c) {
  if (!(c.t > 0.0)) throw Error(ErrorKind::BadParameters, kModule, "cone radius must be positive");
  if (!contains(domain, c.apex, 1e-12 * scale_of(domain)))
    throw Error(ErrorKind::ApexOutside, kModule, "cone apex lies outside the closed domain");
  ConeTrace tr;
  tr.value = std::max(0.0, c.t - distance_to_boundary(domain, c.apex)) / c.t;
  tr.spacing = euclidean_diameter(domain).diameter / 2048.0;
  for (const auto& p : sample_boundary(domain, tr.spacing)) tr.sampled = std::max(tr.sampled, cone_value(c, p));
  const double slack = 1e-12 + tr.spacing / (2.0 * c.t);
  if (tr.sampled > tr.value + 1e-12 || tr.sampled < tr.value - slack)
    throw Error(ErrorKind::PreconditionViolation, kModule, "sampled cone trace disagrees with the distance formula");
  return tr;
}

SOmegaResult s_omega(const Polygon& domain, double beta, const SearchOptions& opts) {
  require_beta(beta);
  return solve_pair_problem(domain, 1.0 / beta, beta, opts);
}

double lambda1_infty(const Polygon& domain, double beta) {
  require_beta(beta);
  return 1.0 / (1.0 / beta + inradius(domain).r);
}

double lambda2_infty(const Polygon& domain, double beta, const SearchOptions& opts) {
  return 1.0 / s_omega(domain, beta, opts).s;
}

R2Result r2(const Polygon& domain, const SearchOptions& opts) {
  const SOmegaResult s = solve_pair_problem(domain, 0.0, kInf, opts);
  return {s.s, {s.x1, s.x2}};
}

// ---------------------------------------------------------------------------

MixedResult mixed_lambda_infty(const Polygon& domain, const BoundaryPartition& partition, double beta) {
  require_beta(beta);
  validate_partition(domain, partition);
  const double b = 1.0 / beta;
  const bool has1 = partition.has(BoundaryLabel::Gamma1);
  const bool has2 = partition.has(BoundaryLabel::Gamma2);
  if (!has1 || !has2) {
    // d(x, empty) = +inf: either A is the whole closure or A is empty.
    const InradiusResult in = inradius(domain);
    if (!has1) return {1.0 / (b + in.r), in.incenter, true, 0.0};
    return {1.0 / in.r, in.incenter, false, 0.0};
  }

  const DistanceQuery q1{DistanceTarget::Gamma1, &partition, true};
  const DistanceQuery q2{DistanceTarget::Gamma2, &partition, true};
  auto d1 = [&](const Point& x) { return distance_to_boundary(domain, x, q1).distance; };
  auto d2 = [&](const Point& x) { return distance_to_boundary(domain, x, q2).distance; };
  auto h = [&](const Point& x) { return d1(x) - b - d2(x); };

  const double De = euclidean_diameter(domain).diameter;
  const double spacing = De / 256.0;
  const double tolA = 1e-12 * De;
  std::vector<Point> grid = closure_grid(domain, spacing);
  for (const auto& p : sample_boundary(domain, spacing, &partition)) grid.push_back(p);

  struct Sample {
    Point x;
    double h, d2;
  };
  std::vector<Sample> samples;
  samples.reserve(grid.size());
  for (const auto& p : grid) {
    const double v2 = d2(p);
    samples.push_back({p, d1(p) - b - v2, v2});
  }

  NelderMeadOptions nm;
  nm.tol_x = 1e-10 * De;
  nm.tol_f = 1e-13 * De;
  nm.max_evals = 4000;
  auto top = [&](auto key, int k) {
    std::vector<Sample> s = samples;
    std::sort(s.begin(), s.end(), [&](const Sample& a, const Sample& c) { return key(a) > key(c); });
    std::vector<Point> out;
    for (const auto& e : s) {
      if (static_cast<int>(out.size()) >= k) break;
      if (std::all_of(out.begin(), out.end(), [&](const Point& q) { return (q - e.x).norm() > 2 * spacing; }))
        out.push_back(e.x);
    }
    return out;
  };

  std::vector<Point> feasible_seeds;
  for (const auto& s : samples)
    if (s.h >= -tolA) feasible_seeds.push_back(s.x);

  if (feasible_seeds.empty()) {
    // Refine max h before declaring A empty.
    auto neg_h = [&](const Eigen::VectorXd& v) { return -h(project_to_closure(domain, Point(v[0], v[1]))); };
    for (const auto& seed : top([](const Sample& s) { return s.h; }, 8)) {
      const auto r = nelder_mead(neg_h, Eigen::VectorXd(seed), spacing, nm);
      const Point q = project_to_closure(domain, Point(r.x[0], r.x[1]));
      if (h(q) >= -tolA) feasible_seeds.push_back(q);
    }
  }

  MixedResult out;
  if (feasible_seeds.empty()) {
    auto neg_d1 = [&](const Eigen::VectorXd& v) { return -d1(project_to_closure(domain, Point(v[0], v[1]))); };
    double best = -kInf;
    for (const auto& seed : top([&](const Sample& s) { return s.h + b + s.d2; }, 8)) {
      const auto r = nelder_mead(neg_d1, Eigen::VectorXd(seed), spacing, nm);
      const Point q = project_to_closure(domain, Point(r.x[0], r.x[1]));
      if (d1(q) > best) {
        best = d1(q);
        out.argmin = q;
      }
    }
    out.lambda = 1.0 / best;
    out.a_nonempty = false;
    out.error_bar = 0.0;
    return out;
  }

  // Maximize d2 over A: penalty polish, then bisect back into A toward the seed.
  std::sort(feasible_seeds.begin(), feasible_seeds.end(), [&](const Point& a, const Point& c) { return d2(a) > d2(c); });
  std::vector<Point> polish_seeds;
  for (const auto& p : feasible_seeds) {
    if (polish_seeds.size() >= 8) break;
    if (std::all_of(polish_seeds.begin(), polish_seeds.end(), [&](const Point& q) { return (q - p).norm() > 2 * spacing; }))
      polish_seeds.push_back(p);
  }
  const double penalty = 1e3;
  auto objective = [&](const Eigen::VectorXd& v) {
    const Point q = project_to_closure(domain, Point(v[0], v[1]));
    return -(d2(q) - penalty * std::max(0.0, -h(q)));
  };
  double best = -kInf;
  for (const auto& seed : polish_seeds) {
    const auto r = nelder_mead(objective, Eigen::VectorXd(seed), spacing, nm);
    Point q = project_to_closure(domain, Point(r.x[0], r.x[1]));
    if (h(q) < -tolA) {
      Point lo = seed, hi = q;
      for (int it = 0; it < 60; ++it) {
        const Point mid = 0.5 * (lo + hi);
        (h(mid) >= -tolA ? lo : hi) = mid;
      }
      q = lo;
    }
    for (const Point& c : {seed, q}) {
      if (d2(c) > best) {
        best = d2(c);
        out.argmin = c;
      }
    }
  }
  out.a_nonempty = true;
  out.lambda = 1.0 / (b + best);
  out.error_bar = out.lambda - 1.0 / (b + best + spacing * std::sqrt(0.5));
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Regime r) {
  switch (r) {
    case Regime::NeumannLocked: return "NeumannLocked";
    case Regime::Intermediate: return "Intermediate";
    case Regime::DirichletLimitApproaching: return "DirichletLimitApproaching";
  }
  return "Unknown";
}

RegimeReport regime_report(const Polygon& domain, double beta, const std::vector<double>& probe,
                           const SearchOptions& opts) {
  require_beta(beta);
  RegimeReport rep;
  rep.beta = beta;
  rep.lambda1 = lambda1_infty(domain, beta);
  rep.lambda2 = lambda2_infty(domain, beta, opts);
  rep.two_over_De = 2.0 / euclidean_diameter(domain).diameter;
  rep.two_over_Dg = 2.0 / geodesic_diameter(domain).diameter;
  rep.inv_r2 = 1.0 / r2(domain, opts).r2;
  if (std::abs(rep.lambda2 - rep.two_over_De) <= 1e-6 * rep.two_over_De)
    rep.regime = Regime::NeumannLocked;
  else if (rep.inv_r2 - rep.lambda2 <= 0.01 * rep.inv_r2)
    rep.regime = Regime::DirichletLimitApproaching;
  else
    rep.regime = Regime::Intermediate;
  for (double bp : probe) rep.continuity_probe.emplace_back(bp, lambda2_infty(domain, bp, opts));
  return rep;
}

ClosedForm closed_form_stadium(double r, double D, double beta) {
  if (!(r > 0) || !(D > 0) || !(beta > 0)) throw Error(ErrorKind::BadParameters, kModule, "stadium parameters must be positive");
  if (D <= 2 * r) throw Error(ErrorKind::InvalidStadium, kModule, "stadium needs D > 2r");
  ClosedForm cf;
  cf.ordering_flag = D <= 4 * r;
  if (!cf.ordering_flag && beta >= 2.0 / (D - 4 * r)) {
    cf.value = 1.0 / (1.0 / beta + r);
    cf.branch = 1;
  } else if (beta >= 2.0 / D) {
    cf.value = 2.0 * beta / (1.0 + beta * D / 2.0);
    cf.branch = 2;
  } else {
    cf.value = 2.0 / D;
    cf.branch = 3;
  }
  return cf;
}

ClosedForm closed_form_square(double L, double beta) {
  if (!(L > 0) || !(beta > 0)) throw Error(ErrorKind::BadParameters, kModule, "square parameters must be positive");
  const double D = L * std::sqrt(2.0);
  const double c = std::sqrt(2.0) / 2.0;
  ClosedForm cf;
  if (beta >= 2.0 / D) {
    cf.value = (1.0 + c) * beta / (1.0 + c * beta * D / 2.0);
    cf.branch = 1;
  } else {
    cf.value = 2.0 / D;
    cf.branch = 2;
  }
  return cf;
}

// ---------------------------------------------------------------------------

FirstProfile first_eigenfunction_profile(const Polygon& domain, double beta) {
  require_beta(beta);
  const double b = 1.0 / beta;
  const InradiusResult in = inradius(domain);
  FirstProfile fp;
  fp.beta = beta;
  fp.r = in.r;
  fp.incenter = in.incenter;
  fp.lambda1 = 1.0 / (b + in.r);
  fp.field = Field::boundary_distance(std::make_shared<Polygon>(domain), b, fp.lambda1);

  fp.sup_value = fp.field(in.incenter);
  const double De = euclidean_diameter(domain).diameter;
  for (const auto& p : sample_boundary(domain, De / 512.0)) fp.beta_boundary_sup = std::max(fp.beta_boundary_sup, beta * fp.field(p));

  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  const auto box = domain.bounding_box();
  std::uniform_real_distribution<double> ux(box.min().x(), box.max().x()), uy(box.min().y(), box.max().y());
  std::vector<Point> pts;
  while (pts.size() < 400) {
    const Point p(ux(rng), uy(rng));
    if (contains(domain, p)) pts.push_back(p);
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      fp.lipschitz_sampled = std::max(fp.lipschitz_sampled, std::abs(fp.field(pts[i]) - fp.field(pts[j])) / (pts[i] - pts[j]).norm());

  const double tol = 1e-9;
  if (std::abs(fp.sup_value - 1.0) > tol || fp.lipschitz_sampled > fp.lambda1 * (1 + tol) ||
      std::abs(fp.beta_boundary_sup - fp.lambda1) > tol * fp.lambda1)
    throw Error(ErrorKind::PreconditionViolation, kModule, "first profile failed its identity checks");
  return fp;
}

PathFunction build_minmax_path(const Polygon& domain, double beta, int n_steps, const SearchOptions& opts) {
  if (n_steps < 2) throw Error(ErrorKind::BadParameters, kModule, "n_steps must be at least 2");
  const SOmegaResult s = s_omega(domain, beta, opts);
  const FirstProfile fp = first_eigenfunction_profile(domain, beta);
  const Field u1 = fp.field;
  const Field C1 = Field::cone({s.x1, s.s});
  const Field C2 = Field::cone({s.x2, s.s});

  PathFunction path;
  path.segments = {
      {"gamma1", [=](double t) { return max(u1, t * C1); }},
      {"gamma2", [=](double t) { return max((1 - t) * u1, C1); }},
      {"gamma3", [=](double t) { return C1 - t * C2; }},
      {"gamma4", [=](double t) { return (1 - t) * C1 - C2; }},
      {"gamma5", [=](double t) { return min(-C2, -t * u1); }},
      {"gamma6", [=](double t) { return min(-(1 - t) * C2, -u1); }},
  };
  for (int k = 0; k < n_steps; ++k) path.t_grid.push_back(static_cast<double>(k) / (n_steps - 1));
  path.anchors = {fp.incenter, s.x1, s.x2};
  path.start = u1;
  path.end = -u1;
  return path;
}

PathSup path_functional_sup(const Polygon& domain, const PathFunction& path, double beta, double probe_resolution,
                            double tol_path) {
  require_beta(beta);
  if (!(probe_resolution > 0)) throw Error(ErrorKind::BadParameters, kModule, "probe resolution must be positive");

  // Probe lattice with local neighbour pairs (offsets up to 3 cells).
  const auto box = domain.bounding_box();
  const int nx = std::max(1, static_cast<int>(std::ceil(box.sizes().x() / probe_resolution)));
  const int ny = std::max(1, static_cast<int>(std::ceil(box.sizes().y() / probe_resolution)));
  const double tol = 1e-12 * scale_of(domain);
  std::vector<int> id((nx + 1) * (ny + 1), -1);
  std::vector<Point> probe;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const Point p(box.min().x() + box.sizes().x() * i / nx, box.min().y() + box.sizes().y() * j / ny);
      if (contains(domain, p, tol)) {
        id[j * (nx + 1) + i] = static_cast<int>(probe.size());
        probe.push_back(p);
      }
    }
  std::vector<std::pair<int, int>> pairs;
  const int reach = 3;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int a = id[j * (nx + 1) + i];
      if (a < 0) continue;
      for (int dj = 0; dj <= reach; ++dj)
        for (int di = -reach; di <= reach; ++di) {
          if (dj == 0 && di <= 0) continue;
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || ii > nx || jj > ny) continue;
          const int c = id[jj * (nx + 1) + ii];
          if (c < 0) continue;
          if (!domain.is_convex() && !segment_inside(domain, probe[a], probe[c])) continue;
          pairs.emplace_back(a, c);
        }
    }
  const double b_spacing = probe_resolution / 4.0;
  const std::vector<Point> bdry = sample_boundary(domain, b_spacing);

  PathSup out;
  double worst_gap = 0.0;
  std::vector<double> val(probe.size());
  for (const auto& seg : path.segments) {
    for (double t : path.t_grid) {
      const Field u = seg.at(t);
      double sup_abs = 0.0, grad_max = 0.0, lip = 0.0, bsup = 0.0;
      for (std::size_t k = 0; k < probe.size(); ++k) {
        const FieldSample fs = u.eval(probe[k]);
        val[k] = fs.value;
        sup_abs = std::max(sup_abs, std::abs(fs.value));
        grad_max = std::max(grad_max, fs.grad.norm());
      }
      for (const auto& a : path.anchors) sup_abs = std::max(sup_abs, std::abs(u(a)));
      for (const auto& p : bdry) {
        const double v = std::abs(u(p));
        bsup = std::max(bsup, v);
        sup_abs = std::max(sup_abs, v);
      }
      if (sup_abs > 1.0 + tol_path || sup_abs < 1.0 - tol_path)
        throw Error(ErrorKind::PreconditionViolation, kModule,
                    "path function " + seg.name + " leaves the unit sup-norm sphere (sup = " + std::to_string(sup_abs) + ")");
      for (const auto& [a, c] : pairs) lip = std::max(lip, std::abs(val[a] - val[c]) / (probe[a] - probe[c]).norm());
      const double est = std::max(lip, beta * bsup);
      const double ana = std::max(grad_max, beta * bsup);
      if (out.worst_segment.empty() || est > out.estimate) {
        out.estimate = est;
        out.worst_segment = seg.name;
        out.worst_t = t;
      }
      out.analytic_bound = std::max(out.analytic_bound, ana);
      out.sampled_lipschitz = std::max(out.sampled_lipschitz, lip);
      out.boundary_sup = std::max(out.boundary_sup, beta * bsup);
      worst_gap = std::max(worst_gap, std::abs(ana - est) + beta * grad_max * b_spacing / 2.0);
    }
  }
  out.error_bar = worst_gap;
  return out;
}

// ---------------------------------------------------------------------------

double infinity_laplacian(const Eigen::Vector2d& grad, const Eigen::Matrix2d& hess) { return grad.dot(hess * grad); }

OperatorValue eval_F_operator(double u, const Eigen::Vector2d& grad, const Eigen::Matrix2d& hess, double lambda) {
  const double lap = -infinity_laplacian(grad, hess);
  const double g = grad.norm();
  if (u > 0) return {std::min(g - lambda * std::abs(u), lap), SignBranch::Positive};
  if (u < 0) return {std::max(lambda * std::abs(u) - g, lap), SignBranch::Negative};
  return {lap, SignBranch::Zero};
}

OperatorValue eval_G_operator(double u, const Eigen::Vector2d& grad, const Eigen::Vector2d& normal, double beta) {
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw Error(ErrorKind::NonUnitNormal, kModule, "normal must have unit length");
  const double dn = grad.dot(normal);
  const double g = grad.norm();
  if (u > 0) return {-std::min(g - beta * u, -dn), SignBranch::Positive};
  if (u < 0) return {-std::max(beta * std::abs(u) - g, -dn), SignBranch::Negative};
  return {dn, SignBranch::Zero};
}

namespace {

int branch_index(SignBranch b) { return b == SignBranch::Positive ? 0 : (b == SignBranch::Zero ? 1 : 2); }

void record(BranchStats& s, double v) {
  ++s.count;
  s.max_positive = std::max(s.max_positive, v);
  s.max_negative = std::min(s.max_negative, v);
}

}  // namespace

ViscosityReport viscosity_spot_check(const Polygon& domain, const Field& candidate, double lambda, double beta,
                                     int interior_samples, int boundary_samples, const SpotCheckOptions& opts) {
  ViscosityReport rep;
  std::mt19937_64 rng(opts.seed);
  const auto box = domain.bounding_box();
  std::uniform_real_distribution<double> ux(box.min().x(), box.max().x()), uy(box.min().y(), box.max().y());

  long attempts = 0;
  const long max_attempts = 1000L * std::max(1, interior_samples);
  while (rep.interior_evaluated + rep.interior_skipped < interior_samples && attempts++ < max_attempts) {
    const Point x(ux(rng), uy(rng));
    if (!contains(domain, x) || distance_to_boundary(domain, x) < opts.guard) continue;
    const FieldSample fs = candidate.eval(x, opts.guard);
    if (!fs.smooth) {
      ++rep.interior_skipped;
      continue;
    }
    ++rep.interior_evaluated;
    const OperatorValue F = eval_F_operator(fs.value, fs.grad, fs.hess, lambda);
    record(rep.interior[branch_index(F.branch)], F.value);
    if (std::abs(F.value) > opts.tol)
      rep.violations.push_back({x, fs.value, fs.grad, fs.hess, F.value, false, 0.0, F.branch});
  }

  std::vector<double> cum;
  double total = 0.0;
  for (std::size_t e = 0; e < domain.size(); ++e) cum.push_back(total += domain.edge_length(e));
  std::uniform_real_distribution<double> us(0.0, total);
  for (int k = 0; k < boundary_samples; ++k) {
    const double arc = us(rng);
    const std::size_t e = std::min<std::size_t>(std::lower_bound(cum.begin(), cum.end(), arc) - cum.begin(), domain.size() - 1);
    const auto [a, b] = domain.edge(e);
    const double len = domain.edge_length(e);
    const double along = arc - (cum[e] - len);
    if (along < 2 * opts.guard || along > len - 2 * opts.guard) continue;
    const Point x = a + (b - a) * (along / len);
    const Eigen::Vector2d tangent = (b - a) / len;
    const Eigen::Vector2d normal(tangent.y(), -tangent.x());
    const Point y = x - opts.guard * normal;
    const FieldSample inner = candidate.eval(y, 0.5 * opts.guard);
    if (!inner.smooth) continue;
    const double u = candidate(x);
    const OperatorValue F = eval_F_operator(u, inner.grad, inner.hess, lambda);
    const OperatorValue G = eval_G_operator(u, inner.grad, normal, beta);
    ++rep.boundary_evaluated;
    record(rep.boundary[branch_index(G.branch)], G.value);
    const double lo = std::min(F.value, G.value), hi = std::max(F.value, G.value);
    if (lo > opts.tol || hi < -opts.tol)
      rep.violations.push_back({x, u, inner.grad, inner.hess, F.value, true, G.value, G.branch});
  }
  rep.consistent = rep.violations.empty();
  return rep;
}

}  // namespace infspec
