#include "infspec/plap_fem.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numbers>
#include <random>

namespace infspec {

namespace {

const char* kModule = "plap_fem";

// 7-point degree-5 rule on the reference triangle (barycentric points, weights sum to 1).
struct TriRule {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> w;
  TriRule() {
    const double r = std::sqrt(15.0);
    const double a1 = (9 - 2 * r) / 21, b1 = (6 + r) / 21, w1 = (155 + r) / 1200;
    const double a2 = (9 + 2 * r) / 21, b2 = (6 - r) / 21, w2 = (155 - r) / 1200;
    bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, {a1, b1, b1}, {b1, a1, b1}, {b1, b1, a1}, {a2, b2, b2}, {b2, a2, b2}, {b2, b2, a2}}};
    w = {9.0 / 40, w1, w1, w1, w2, w2, w2};
  }
};
const TriRule kTri;

// 4-point Gauss-Legendre on [0,1].
struct LineRule {
  std::array<double, 4> t, w;
  LineRule() {
    const double x1 = std::sqrt(3.0 / 7 - 2.0 / 7 * std::sqrt(6.0 / 5));
    const double x2 = std::sqrt(3.0 / 7 + 2.0 / 7 * std::sqrt(6.0 / 5));
    const double w1 = (18 + std::sqrt(30.0)) / 36, w2 = (18 - std::sqrt(30.0)) / 36;
    t = {0.5 - 0.5 * x2, 0.5 - 0.5 * x1, 0.5 + 0.5 * x1, 0.5 + 0.5 * x2};
    w = {0.5 * w2, 0.5 * w1, 0.5 * w1, 0.5 * w2};
  }
};
const LineRule kLine;

// x^p for x >= 0; integer exponents (the whole doubling ladder) avoid std::pow.
inline double ppow(double x, double p) {
  if (p == std::floor(p) && p >= 0 && p <= 1024) {
    unsigned n = static_cast<unsigned>(p);
    double r = 1.0;
    while (n) {
      if (n & 1u) r *= x;
      x *= x;
      n >>= 1;
    }
    return r;
  }
  return std::pow(x, p);
}
inline double pabs(double x, double p) { return ppow(std::abs(x), p); }
// d/dx |x|^p / p = |x|^(p-2) x
inline double psign(double x, double p) { return x == 0.0 ? 0.0 : std::copysign(ppow(std::abs(x), p - 1), x); }

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

SpMat assemble_mass(const Mesh& m) {
  std::vector<Trip> tr;
  for (const auto& t : m.triangles) {
    const Point& a = m.nodes[t[0]];
    const Point& b = m.nodes[t[1]];
    const Point& c = m.nodes[t[2]];
    const double A = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) tr.emplace_back(t[i], t[j], A / 12.0 * (i == j ? 2.0 : 1.0));
  }
  SpMat M(m.nodes.size(), m.nodes.size());
  M.setFromTriplets(tr.begin(), tr.end());
  return M;
}

SpMat assemble_robin_stiffness(const Mesh& m, double beta) {
  std::vector<Trip> tr;
  for (const auto& t : m.triangles) {
    const Point& a = m.nodes[t[0]];
    const Point& b = m.nodes[t[1]];
    const Point& c = m.nodes[t[2]];
    const double A2 = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    Eigen::Matrix<double, 3, 2> G;
    G << b.y() - c.y(), c.x() - b.x(), c.y() - a.y(), a.x() - c.x(), a.y() - b.y(), b.x() - a.x();
    G /= A2;
    const Eigen::Matrix3d K = 0.5 * std::abs(A2) * G * G.transpose();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) tr.emplace_back(t[i], t[j], K(i, j));
  }
  for (const auto& e : m.boundary_edges) {
    const double L = (m.nodes[e.nodes[0]] - m.nodes[e.nodes[1]]).norm();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) tr.emplace_back(e.nodes[i], e.nodes[j], beta * beta * L / 6.0 * (i == j ? 2.0 : 1.0));
  }
  SpMat K(m.nodes.size(), m.nodes.size());
  K.setFromTriplets(tr.begin(), tr.end());
  return K;
}

}  // namespace

// ---------------------------------------------------------------------------

RobinQuotient::RobinQuotient(const Mesh& mesh, double p, double beta)
    : mesh_(&mesh), p_(p), beta_(beta), beta_p_(std::pow(beta, p)) {
  if (!(p >= 2.0)) throw Error(ErrorKind::BadParameters, kModule, "p must be at least 2");
  if (!(beta > 0.0)) throw Error(ErrorKind::BadParameters, kModule, "beta must be positive");
  area_.reserve(mesh.triangles.size());
  dphi_.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const Point& a = mesh.nodes[t[0]];
    const Point& b = mesh.nodes[t[1]];
    const Point& c = mesh.nodes[t[2]];
    const double A2 = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (!(A2 > 0)) throw Error(ErrorKind::MeshFailure, kModule, "triangle with non-positive area");
    Eigen::Matrix<double, 3, 2> G;
    G << b.y() - c.y(), c.x() - b.x(), c.y() - a.y(), a.x() - c.x(), a.y() - b.y(), b.x() - a.x();
    dphi_.push_back(G / A2);
    area_.push_back(0.5 * A2);
  }
  for (const auto& e : mesh.boundary_edges) edge_len_.push_back((mesh.nodes[e.nodes[0]] - mesh.nodes[e.nodes[1]]).norm());
}

void RobinQuotient::terms(const DiscreteField& u, double& num, double& mass, Eigen::VectorXd* gnum,
                          Eigen::VectorXd* gmass) const {
  const Mesh& m = *mesh_;
  if (u.size() != static_cast<Eigen::Index>(m.nodes.size()))
    throw Error(ErrorKind::BadParameters, kModule, "field length does not match the mesh");
  num = 0.0;
  mass = 0.0;
  if (gnum) gnum->setZero(u.size());
  if (gmass) gmass->setZero(u.size());
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    const Eigen::Vector3d ue(u[t[0]], u[t[1]], u[t[2]]);
    const Eigen::Vector2d g = dphi_[k].transpose() * ue;
    const double gn = g.norm();
    const double e = ppow(gn, p_ - 2);
    num += area_[k] * e * gn * gn;
    if (gnum) {
      const double c = area_[k] * p_ * e;
      const Eigen::Vector3d d = c * (dphi_[k] * g);
      for (int i = 0; i < 3; ++i) (*gnum)[t[i]] += d[i];
    }
    for (int q = 0; q < 7; ++q) {
      const auto& l = kTri.bary[q];
      const double uq = l[0] * ue[0] + l[1] * ue[1] + l[2] * ue[2];
      const double e = psign(uq, p_);
      mass += area_[k] * kTri.w[q] * e * uq;
      if (gmass) {
        const double c = area_[k] * kTri.w[q] * p_ * e;
        for (int i = 0; i < 3; ++i) (*gmass)[t[i]] += c * l[i];
      }
    }
  }
  for (std::size_t k = 0; k < m.boundary_edges.size(); ++k) {
    const auto& e = m.boundary_edges[k];
    const double ua = u[e.nodes[0]], ub = u[e.nodes[1]];
    for (int q = 0; q < 4; ++q) {
      const double t = kLine.t[q];
      const double uq = (1 - t) * ua + t * ub;
      num += beta_p_ * edge_len_[k] * kLine.w[q] * pabs(uq, p_);
      if (gnum) {
        const double c = beta_p_ * edge_len_[k] * kLine.w[q] * p_ * psign(uq, p_);
        (*gnum)[e.nodes[0]] += c * (1 - t);
        (*gnum)[e.nodes[1]] += c * t;
      }
    }
  }
}

QuotientValue RobinQuotient::evaluate(const DiscreteField& u) const {
  const Mesh& m = *mesh_;
  QuotientValue out;
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    const Eigen::Vector3d ue(u[t[0]], u[t[1]], u[t[2]]);
    out.parts.grad_term += area_[k] * ppow((dphi_[k].transpose() * ue).norm(), p_);
    for (int q = 0; q < 7; ++q) {
      const auto& l = kTri.bary[q];
      out.parts.mass_term += area_[k] * kTri.w[q] * pabs(l[0] * ue[0] + l[1] * ue[1] + l[2] * ue[2], p_);
    }
  }
  for (std::size_t k = 0; k < m.boundary_edges.size(); ++k) {
    const auto& e = m.boundary_edges[k];
    for (int q = 0; q < 4; ++q) {
      const double t = kLine.t[q];
      out.parts.boundary_term += beta_p_ * edge_len_[k] * kLine.w[q] * pabs((1 - t) * u[e.nodes[0]] + t * u[e.nodes[1]], p_);
    }
  }
  if (!(out.parts.mass_term > 0.0)) throw Error(ErrorKind::ZeroField, kModule, "field vanishes identically");
  out.value = (out.parts.grad_term + out.parts.boundary_term) / out.parts.mass_term;
  return out;
}

void RobinQuotient::signed_masses(const DiscreteField& u, double& plus, double& minus, Eigen::VectorXd* gplus,
                                  Eigen::VectorXd* gminus) const {
  const Mesh& m = *mesh_;
  plus = minus = 0.0;
  if (gplus) gplus->setZero(u.size());
  if (gminus) gminus->setZero(u.size());
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    for (int q = 0; q < 7; ++q) {
      const auto& l = kTri.bary[q];
      const double uq = l[0] * u[t[0]] + l[1] * u[t[1]] + l[2] * u[t[2]];
      const double w = area_[k] * kTri.w[q];
      if (uq > 0) {
        const double e = ppow(uq, p_ - 1);
        plus += w * e * uq;
        if (gplus)
          for (int i = 0; i < 3; ++i) (*gplus)[t[i]] += w * p_ * e * l[i];
      } else if (uq < 0) {
        const double e = ppow(-uq, p_ - 1);
        minus -= w * e * uq;
        if (gminus)
          for (int i = 0; i < 3; ++i) (*gminus)[t[i]] -= w * p_ * e * l[i];
      }
    }
  }
}

double RobinQuotient::balance_factor(const DiscreteField& u) const {
  const Mesh& m = *mesh_;
  // Quadrature values of the positive and non-positive nodal parts.
  std::vector<double> pos, neg, w;
  pos.reserve(7 * m.triangles.size());
  neg.reserve(7 * m.triangles.size());
  w.reserve(7 * m.triangles.size());
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    for (int q = 0; q < 7; ++q) {
      const auto& l = kTri.bary[q];
      double a = 0, b = 0;
      for (int i = 0; i < 3; ++i) (u[t[i]] > 0 ? a : b) += l[i] * u[t[i]];
      pos.push_back(a);
      neg.push_back(b);
      w.push_back(area_[k] * kTri.w[q]);
    }
  }
  // phi(s) = log m+(e^s) - log m-(e^s) is increasing in s.
  auto phi = [&](double s, double* dphi) {
    const double a = std::exp(s);
    double mp = 0, mm = 0, dmp = 0, dmm = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const double v = a * pos[i] + neg[i];
      if (v > 0) {
        const double e = w[i] * ppow(v, p_ - 1);
        mp += e * v;
        dmp += p_ * e * pos[i];
      } else if (v < 0) {
        const double e = w[i] * ppow(-v, p_ - 1);
        mm -= e * v;
        dmm -= p_ * e * pos[i];
      }
    }
    if (!(mp > 0) || !(mm > 0)) return std::numeric_limits<double>::quiet_NaN();
    if (dphi) *dphi = a * (dmp / mp - dmm / mm);
    return std::log(mp) - std::log(mm);
  };
  const double f0 = phi(0.0, nullptr);
  if (std::isnan(f0)) throw Error(ErrorKind::DegenerateSign, kModule, "field does not change sign");
  double s = -f0 / p_;
  double lo = -kInf, hi = kInf;
  for (int it = 0; it < 100; ++it) {
    double d = 0;
    const double f = phi(s, &d);
    if (std::isnan(f)) throw Error(ErrorKind::DegenerateSign, kModule, "field lost its sign change while balancing");
    if (std::abs(f) < 1e-14) break;
    (f > 0 ? hi : lo) = s;
    double next = s - f / d;
    if (!(d > 0) || !(next > lo && next < hi)) {
      if (std::isfinite(lo) && std::isfinite(hi)) next = 0.5 * (lo + hi);
      else next = f > 0 ? s - 1.0 : s + 1.0;
    }
    if (std::abs(next - s) < 1e-16) break;
    s = next;
  }
  return std::exp(s);
}

SpMat RobinQuotient::preconditioner(const DiscreteField& u) const {
  const Mesh& m = *mesh_;
  double num, mass;
  terms(u, num, mass, nullptr, nullptr);
  const double q = p_ - 2.0;
  std::vector<double> wk(m.triangles.size()), wm(m.triangles.size()), we(m.boundary_edges.size());
  double mk = 0, mmx = 0, me = 0;
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    const Eigen::Vector3d ue(u[t[0]], u[t[1]], u[t[2]]);
    wk[k] = ppow((dphi_[k].transpose() * ue).norm(), q);
    wm[k] = (pabs(ue[0], q) + pabs(ue[1], q) + pabs(ue[2], q)) / 3.0;
    mk = std::max(mk, wk[k]);
    mmx = std::max(mmx, wm[k]);
  }
  for (std::size_t k = 0; k < m.boundary_edges.size(); ++k) {
    const auto& e = m.boundary_edges[k];
    we[k] = 0.5 * (pabs(u[e.nodes[0]], q) + pabs(u[e.nodes[1]], q));
    me = std::max(me, we[k]);
  }
  const double floor_rel = 1e-10;
  const double cN = p_ * (p_ - 1) / num, cM = p_ * (p_ - 1) / mass;
  std::vector<Trip> tr;
  tr.reserve(18 * m.triangles.size() + 4 * m.boundary_edges.size());
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    const Eigen::Matrix3d K = cN * area_[k] * std::max(wk[k], floor_rel * mk) * dphi_[k] * dphi_[k].transpose();
    const double cm = cM * area_[k] * std::max(wm[k], floor_rel * mmx) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) tr.emplace_back(t[i], t[j], K(i, j) + cm * (i == j ? 2.0 : 1.0));
  }
  for (std::size_t k = 0; k < m.boundary_edges.size(); ++k) {
    const auto& e = m.boundary_edges[k];
    const double c = cN * beta_p_ * edge_len_[k] * std::max(we[k], floor_rel * me) / 6.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) tr.emplace_back(e.nodes[i], e.nodes[j], c * (i == j ? 2.0 : 1.0));
  }
  SpMat P(m.nodes.size(), m.nodes.size());
  P.setFromTriplets(tr.begin(), tr.end());
  return P;
}

DiscreteField RobinQuotient::interpolate(const Mesh& mesh, const Field& f) {
  DiscreteField u(mesh.nodes.size());
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) u[i] = f(mesh.nodes[i]);
  return u;
}

QuotientValue rayleigh_quotient_p(const Mesh& mesh, const DiscreteField& u, double p, double beta) {
  return RobinQuotient(mesh, p, beta).evaluate(u);
}

// ---------------------------------------------------------------------------

std::vector<EigenResult> solve_p2_reference(const Mesh& mesh, double beta, int k) {
  if (k < 1 || k > 2) throw Error(ErrorKind::BadParameters, kModule, "k must be 1 or 2");
  if (!(beta > 0)) throw Error(ErrorKind::BadParameters, kModule, "beta must be positive");
  const SpMat A = assemble_robin_stiffness(mesh, beta);
  const SpMat M = assemble_mass(mesh);
  const Eigen::Index n = A.rows();
  const int block = static_cast<int>(std::min<Eigen::Index>(n, 8));
  const double area = mesh.area();
  const double sigma = 1.0 / area;

  Eigen::SimplicialLDLT<SpMat> solver;
  solver.compute(SpMat(A + sigma * M));
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, kModule, "factorization of A + sigma M failed");

  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(n, block);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = nd(rng);

  Eigen::VectorXd theta(block);
  Eigen::MatrixXd V;
  std::vector<double> res(k, kInf);
  int it = 0;
  for (; it < 2000; ++it) {
    const Eigen::MatrixXd Y = solver.solve(M * X);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, kModule, "shift-invert solve failed");
    const Eigen::MatrixXd Ar = Y.transpose() * (A * Y);
    const Eigen::MatrixXd Mr = Y.transpose() * (M * Y);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Ar + Ar.transpose()), 0.5 * (Mr + Mr.transpose()));
    if (es.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, kModule, "Rayleigh-Ritz step failed");
    X = Y * es.eigenvectors();
    theta = es.eigenvalues();
    bool done = true;
    for (int j = 0; j < k; ++j) {
      const Eigen::VectorXd x = X.col(j);
      const Eigen::VectorXd Mx = M * x;
      res[j] = (A * x - theta[j] * Mx).norm() / ((theta[j] + sigma) * Mx.norm());
      if (res[j] > 1e-11) done = false;
    }
    if (done) break;
  }
  if (it >= 2000) throw Error(ErrorKind::NonConvergence, kModule, "p=2 subspace iteration did not converge");

  std::vector<EigenResult> out;
  for (int j = 0; j < k; ++j) {
    EigenResult r;
    r.p = 2.0;
    r.beta = beta;
    r.lambda = theta[j];
    r.lambda_root = std::sqrt(std::max(0.0, theta[j]));
    Eigen::VectorXd x = X.col(j);
    x /= std::sqrt(x.dot(M * x));
    const Eigen::Index imax = [&] {
      Eigen::Index i;
      x.cwiseAbs().maxCoeff(&i);
      return i;
    }();
    if ((j == 0 && x.sum() < 0) || (j > 0 && x[imax] < 0)) x = -x;
    r.field = x;
    r.iterations = it + 1;
    r.residual = res[j];
    r.label = j == 0 ? EigenLabel::First : EigenLabel::Second;
    r.h = mesh.h;
    r.positive_sup = x.maxCoeff() > 0 ? x.maxCoeff() : 0.0;
    r.negative_sup = x.minCoeff() < 0 ? -x.minCoeff() : 0.0;
    r.sign_changing = std::min(r.positive_sup, r.negative_sup) > 0.5 * std::max(r.positive_sup, r.negative_sup);
    r.start = "p2_reference";
    out.push_back(std::move(r));
  }
  return out;
}

double solver_tolerance(double p) {
  const double steps = std::log2(std::max(p, 2.0) / 2.0) / 6.0;  // 0 at p=2, 1 at p=128
  return 1e-9 * std::pow(1e3, std::min(steps, 1.0));
}

// ---------------------------------------------------------------------------

namespace {

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct SweepResult {
  Eigen::VectorXd x;
  double f;
  int iterations;
  bool stalled;
};

// L-BFGS on f with initial inverse Hessian P^{-1}; f is log of the quotient.
SweepResult lbfgs_sweep(const Objective& f, Eigen::VectorXd x, const Eigen::SimplicialLDLT<SpMat>& P, int max_it,
                        int memory, std::vector<double>& history) {
  Eigen::VectorXd g;
  double fx = f(x, &g);
  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  int it = 0;
  bool stalled = false;
  for (; it < max_it; ++it) {
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    Eigen::VectorXd r = P.solve(q);
    if (!S.empty()) {
      const Eigen::VectorXd Py = P.solve(Y.back());
      r *= S.back().dot(Y.back()) / Y.back().dot(Py);
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double b = rho[i] * Y[i].dot(r);
      r += S[i] * (alpha[i] - b);
    }
    Eigen::VectorXd d = -r;
    double slope = g.dot(d);
    if (!(slope < 0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -P.solve(g);
      slope = g.dot(d);
      if (!(slope < 0)) {
        stalled = true;
        break;
      }
    }
    double step = 1.0;
    Eigen::VectorXd xn, gn;
    double fn = fx;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = x + step * d;
      fn = f(xn, &gn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok || !(fn < fx)) {
      stalled = true;
      break;
    }
    const Eigen::VectorXd s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    x = xn;
    g = gn;
    fx = fn;
    history.push_back(std::exp(fx));
  }
  return {x, fx, it, stalled};
}

enum class Mode { First, Second };

struct StageResult {
  Eigen::VectorXd u;  // balanced in Second mode
  double q;
  int iterations;
  double residual;
  std::vector<double> history;
};

double log_quotient(const RobinQuotient& Q, const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
  double N, Mv;
  Eigen::VectorXd gN, gM;
  Q.terms(u, N, Mv, grad ? &gN : nullptr, grad ? &gM : nullptr);
  if (!(Mv > 0) || !(N > 0)) return kInf;
  if (grad) *grad = gN / N - gM / Mv;
  return std::log(N) - std::log(Mv);
}

// v = R(u): positive nodal values scaled by the balancing factor.
Eigen::VectorXd rebalance(const RobinQuotient& Q, const Eigen::VectorXd& u, double* factor = nullptr) {
  const double a = Q.balance_factor(u);
  if (factor) *factor = a;
  Eigen::VectorXd v = u;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] > 0) v[i] *= a;
  return v;
}

double balanced_log_quotient(const RobinQuotient& Q, const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
  double a;
  Eigen::VectorXd v;
  try {
    v = rebalance(Q, u, &a);
  } catch (const Error&) {
    return kInf;
  }
  Eigen::VectorXd gv;
  const double J = log_quotient(Q, v, grad ? &gv : nullptr);
  if (!grad) return J;
  double mp, mm;
  Eigen::VectorXd gp, gm;
  Q.signed_masses(v, mp, mm, &gp, &gm);
  // f = log m+ - log m- vanishes along R; implicit differentiation in the scale factor.
  const Eigen::VectorXd gf = gp / mp - gm / mm;
  Eigen::VectorXd Pu = Eigen::VectorXd::Zero(u.size());
  Eigen::VectorXd D = Eigen::VectorXd::Ones(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] > 0) {
      Pu[i] = u[i];
      D[i] = a;
    }
  const double kappa = gv.dot(Pu) / gf.dot(Pu);
  *grad = D.cwiseProduct(gv - kappa * gf);
  return J;
}

StageResult run_stage(const RobinQuotient& Q, Eigen::VectorXd u, Mode mode, double tol, const SolverOptions& opts) {
  const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    return mode == Mode::First ? log_quotient(Q, x, g) : balanced_log_quotient(Q, x, g);
  };
  StageResult st;
  st.iterations = 0;
  st.residual = kInf;
  Eigen::SimplicialLDLT<SpMat> solver;
  bool analyzed = false;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    if (mode == Mode::Second) u = rebalance(Q, u);
    u /= u.cwiseAbs().maxCoeff();
    if (mode == Mode::First && u.sum() < 0) u = -u;
    const double f0 = f(u, nullptr);
    const SpMat P = Q.preconditioner(u);
    if (!analyzed) {
      solver.analyzePattern(P);
      analyzed = true;
    }
    solver.factorize(P);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, kModule, "preconditioner factorization failed");
    if (st.history.empty()) st.history.push_back(std::exp(f0));
    const SweepResult sr = lbfgs_sweep(f, u, solver, opts.sweep_iterations, opts.memory, st.history);
    st.iterations += sr.iterations;
    u = sr.x;
    st.residual = -std::expm1(sr.f - f0);
    if (st.residual < tol || sr.iterations == 0) {
      st.residual = std::max(st.residual, 0.0);
      if (mode == Mode::Second) u = rebalance(Q, u);
      u /= u.cwiseAbs().maxCoeff();
      if (mode == Mode::First && u.sum() < 0) u = -u;
      st.u = u;
      st.q = Q.evaluate(u).value;
      return st;
    }
  }
  EigenResult best;
  best.p = Q.p();
  best.beta = Q.beta();
  if (mode == Mode::Second) u = rebalance(Q, u);
  best.field = u / u.cwiseAbs().maxCoeff();
  best.lambda = Q.evaluate(best.field).value;
  best.lambda_root = std::pow(best.lambda, 1.0 / Q.p());
  best.iterations = st.iterations;
  best.residual = st.residual;
  best.history = st.history;
  throw SolverNonConvergence("no sweep reached the relative decrease tolerance", best);
}

// Doubling ladder from p0 (exclusive) up to p (inclusive).
std::vector<double> ladder(double p0, double p) {
  std::vector<double> out;
  double q = p0;
  while (q * 2 < p * (1 - 1e-12)) {
    q *= 2;
    out.push_back(q);
  }
  if (out.empty() || out.back() != p) out.push_back(p);
  return out;
}

EigenResult finish(const Mesh& mesh, const StageResult& st, double p, double beta, EigenLabel label,
                   const SolverOptions& opts, const std::string& start) {
  EigenResult r;
  r.p = p;
  r.beta = beta;
  r.lambda = st.q;
  r.lambda_root = std::pow(st.q, 1.0 / p);
  r.field = st.u;
  r.iterations = st.iterations;
  r.residual = st.residual;
  r.label = label;
  r.h = mesh.h;
  r.history = st.history;
  r.positive_sup = std::max(0.0, st.u.maxCoeff());
  r.negative_sup = std::max(0.0, -st.u.minCoeff());
  r.sign_changing = std::min(r.positive_sup, r.negative_sup) > 0.5 * std::max(r.positive_sup, r.negative_sup);
  if (opts.first_field && opts.first_field->size() == st.u.size()) {
    const SpMat M = assemble_mass(mesh);
    const Eigen::VectorXd& w = *opts.first_field;
    r.projection_on_first = std::abs(st.u.dot(M * w)) / std::sqrt(st.u.dot(M * st.u) * w.dot(M * w));
  }
  r.start = start;
  return r;
}

StageResult run_ladder(const Mesh& mesh, double beta, Eigen::VectorXd u, double p_from, double p, Mode mode,
                       const SolverOptions& opts, bool include_start) {
  StageResult st;
  std::vector<double> stages = ladder(p_from, p);
  if (include_start) stages.insert(stages.begin(), p_from);
  int total = 0;
  for (double q : stages) {
    const RobinQuotient Q(mesh, q, beta);
    const double tol = opts.tol ? *opts.tol : solver_tolerance(q);
    try {
      st = run_stage(Q, u, mode, tol, opts);
    } catch (SolverNonConvergence& e) {
      e.best.iterations += total;
      throw;
    }
    total += st.iterations;
    u = st.u;
  }
  st.iterations = total;
  return st;
}

}  // namespace

EigenResult minimize_first(const Mesh& mesh, double p, double beta, const SolverOptions& opts) {
  if (!(p >= 2)) throw Error(ErrorKind::BadParameters, kModule, "p must be at least 2");
  Eigen::VectorXd u0;
  double p0 = 2.0;
  if (opts.warm_start && opts.warm_start->size() == static_cast<Eigen::Index>(mesh.nodes.size()) && opts.warm_start_p <= p) {
    u0 = *opts.warm_start;
    p0 = opts.warm_start_p;
  } else {
    u0 = solve_p2_reference(mesh, beta, 1)[0].field;
  }
  const StageResult st = run_ladder(mesh, beta, u0, p0, p, Mode::First, opts, true);
  return finish(mesh, st, p, beta, EigenLabel::First, opts, opts.warm_start ? "warm_start" : "p2_reference");
}

EigenResult minimize_second(const Mesh& mesh, double p, double beta, const SolverOptions& opts) {
  if (!(p >= 2)) throw Error(ErrorKind::BadParameters, kModule, "p must be at least 2");
  struct Start {
    std::string name;
    Eigen::VectorXd u;
    double p0;
  };
  std::vector<Start> starts;
  if (opts.warm_start && opts.warm_start->size() == static_cast<Eigen::Index>(mesh.nodes.size()) && opts.warm_start_p <= p)
    starts.push_back({"warm_start", *opts.warm_start, opts.warm_start_p});
  else
    starts.push_back({"p2_reference", solve_p2_reference(mesh, beta, 2)[1].field, 2.0});
  if (opts.cone_pair) {
    const Field cones = Field::cone(opts.cone_pair->first) - Field::cone(opts.cone_pair->second);
    starts.push_back({"cone_pair", RobinQuotient::interpolate(mesh, cones), p});
  }

  std::optional<EigenResult> best;
  std::optional<SolverNonConvergence> failure;
  for (const auto& s : starts) {
    try {
      const StageResult st = run_ladder(mesh, beta, s.u, s.p0, p, Mode::Second, opts, true);
      EigenResult r = finish(mesh, st, p, beta, EigenLabel::Second, opts, s.name);
      if (!best || r.lambda < best->lambda) best = std::move(r);
    } catch (const SolverNonConvergence& e) {
      if (!failure || e.best.lambda < failure->best.lambda) failure.emplace(e);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateSign) throw;
    }
  }
  if (best) return *best;
  if (failure) throw *failure;
  throw Error(ErrorKind::DegenerateSign, kModule, "every start lost its sign change");
}

// ---------------------------------------------------------------------------

double cone_span_upper_bound(const Mesh& mesh, const Polygon& domain, double beta, double p, const SOmegaResult& sres) {
  for (const Point& x : {sres.x1, sres.x2})
    if (!contains(domain, x, 1e-9)) throw Error(ErrorKind::ApexOutside, kModule, "cone apex outside the domain");
  const RobinQuotient Q(mesh, p, beta);
  const Eigen::VectorXd c1 = RobinQuotient::interpolate(mesh, Field::cone({sres.x1, sres.s}));
  const Eigen::VectorXd c2 = RobinQuotient::interpolate(mesh, Field::cone({sres.x2, sres.s}));
  double best = 0.0;
  for (const auto& [a1, a2] : {std::pair{1.0, 1.0}, {1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}})
    best = std::max(best, Q.evaluate(a1 * c1 + a2 * c2).value);
  return best;
}

double dlg_lower_bound(double volume, double p, double beta, int n) {
  if (!(p > 1) || !(volume > 0) || !(beta > 0) || n < 1) throw Error(ErrorKind::BadParameters, kModule, "bad DLG parameters");
  const double omega = std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
  const double on = std::pow(omega, 1.0 / n);
  const double inner = on * std::pow(beta, -p / (p - 1)) + std::pow(volume, 1.0 / n);
  return ((p - 1) / p) * on / (std::pow(volume, 1.0 / (n * p)) * std::pow(inner, (p - 1) / p));
}

StudyTable convergence_study(const Polygon& domain, double beta, const std::vector<double>& p_list, double h,
                             const SolverOptions& opts) {
  const Mesh mesh = triangulate(domain, h);
  return convergence_study(domain, mesh, beta, p_list, opts);
}

StudyTable convergence_study(const Polygon& domain, const Mesh& mesh, double beta, const std::vector<double>& p_list,
                             const SolverOptions& opts) {
  if (!std::is_sorted(p_list.begin(), p_list.end())) throw Error(ErrorKind::BadParameters, kModule, "p_list must be ascending");
  StudyTable table;
  table.nodes = mesh.nodes.size();
  table.sres = s_omega(domain, beta);
  const double target1 = lambda1_infty(domain, beta);
  const double target2 = 1.0 / table.sres.s;

  std::optional<EigenResult> prev1, prev2;
  for (double p : p_list) {
    StudyRow row;
    row.p = p;
    row.h = mesh.h;
    row.beta = beta;
    row.target1 = target1;
    row.target2 = target2;
    row.dlg = dlg_lower_bound(domain.area(), p, beta);
    try {
      SolverOptions o1 = opts;
      if (prev1) {
        o1.warm_start = prev1->field;
        o1.warm_start_p = prev1->p;
      }
      const EigenResult r1 = minimize_first(mesh, p, beta, o1);
      SolverOptions o2 = opts;
      if (prev2) {
        o2.warm_start = prev2->field;
        o2.warm_start_p = prev2->p;
      }
      o2.cone_pair = std::pair{Cone{table.sres.x1, table.sres.s}, Cone{table.sres.x2, table.sres.s}};
      o2.first_field = r1.field;
      const EigenResult r2 = minimize_second(mesh, p, beta, o2);
      row.lambda1 = r1.lambda;
      row.lambda1_root = r1.lambda_root;
      row.lambda2 = r2.lambda;
      row.lambda2_root = r2.lambda_root;
      row.gap1 = std::abs(r1.lambda_root - target1) / target1;
      row.gap2 = std::abs(r2.lambda_root - target2) / target2;
      row.cone_bound = cone_span_upper_bound(mesh, domain, beta, p, table.sres);
      row.sign_changing = r2.sign_changing;
      row.iterations1 = r1.iterations;
      row.iterations2 = r2.iterations;
      row.residual1 = r1.residual;
      row.residual2 = r2.residual;
      prev1 = r1;
      prev2 = r2;
    } catch (const Error& e) {
      row.error = e.what();
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace infspec
