#pragma once

#include "infspec/error.hpp"
#include "infspec/infty_spectrum.hpp"
#include "infspec/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace infspec {

/// Nodal values of a P1 field on a Mesh.
using DiscreteField = Eigen::VectorXd;

struct QuotientParts {
  double grad_term = 0.0;      ///< integral of |grad u|^p
  double boundary_term = 0.0;  ///< beta^p times the boundary integral of |u|^p
  double mass_term = 0.0;      ///< integral of |u|^p
};

struct QuotientValue {
  double value = 0.0;
  QuotientParts parts;
};

/// Robin p-Rayleigh quotient on a fixed mesh, with gradients for the minimizers.
/// Mass integrals use a 7-point degree-5 rule per triangle, boundary integrals a
/// 4-point Gauss-Legendre rule per edge.
class RobinQuotient {
 public:
  RobinQuotient(const Mesh& mesh, double p, double beta);

  double p() const { return p_; }
  double beta() const { return beta_; }
  const Mesh& mesh() const { return *mesh_; }

  QuotientValue evaluate(const DiscreteField& u) const;
  /// Numerator (grad_term + boundary_term) and mass, with optional gradients.
  void terms(const DiscreteField& u, double& num, double& mass, Eigen::VectorXd* gnum, Eigen::VectorXd* gmass) const;
  /// Integrals of (u)_+^p and (u)_-^p with optional gradients.
  void signed_masses(const DiscreteField& u, double& plus, double& minus, Eigen::VectorXd* gplus,
                     Eigen::VectorXd* gminus) const;
  /// a > 0 such that scaling the positive nodal values by a balances the two signed masses.
  /// Throws DegenerateSign when u has only one sign.
  double balance_factor(const DiscreteField& u) const;
  /// SPD approximation of the Hessian of log N - log M, used as L-BFGS preconditioner.
  Eigen::SparseMatrix<double> preconditioner(const DiscreteField& u) const;

  /// Nodal interpolant of an analytic field.
  static DiscreteField interpolate(const Mesh& mesh, const Field& f);

 private:
  const Mesh* mesh_;
  double p_, beta_, beta_p_;
  std::vector<double> area_;
  std::vector<Eigen::Matrix<double, 3, 2>> dphi_;  // rows: gradients of the hat functions
  std::vector<double> edge_len_;
};

QuotientValue rayleigh_quotient_p(const Mesh& mesh, const DiscreteField& u, double p, double beta);

enum class EigenLabel { First, Second };

struct EigenResult {
  double p = 2.0;
  double beta = 0.0;
  double lambda = 0.0;
  double lambda_root = 0.0;  ///< lambda^(1/p)
  DiscreteField field;
  int iterations = 0;
  double residual = 0.0;  ///< relative quotient decrease over the last sweep (p=2 reference: eigen-residual)
  EigenLabel label = EigenLabel::First;
  double h = 0.0;
  std::vector<double> history;  ///< quotient after each accepted iteration
  // Sign diagnostics.
  double positive_sup = 0.0;
  double negative_sup = 0.0;
  bool sign_changing = false;
  /// |<u, u1>_M| / (|u|_M |u1|_M) against the supplied first eigenfunction, or NaN.
  double projection_on_first = std::numeric_limits<double>::quiet_NaN();
  std::string start;  ///< which start produced the result
};

class SolverNonConvergence : public Error {
 public:
  SolverNonConvergence(const std::string& msg, EigenResult best_so_far)
      : Error(ErrorKind::NonConvergence, "plap_fem", msg), best(std::move(best_so_far)) {}
  EigenResult best;
};

/// Two lowest eigenpairs of (K + beta^2 B) u = lambda M u by block shift-invert iteration.
std::vector<EigenResult> solve_p2_reference(const Mesh& mesh, double beta, int k = 2);

/// tol_solver(p): 1e-9 at p = 2, geometric to 1e-6 at p = 128.
double solver_tolerance(double p);

struct SolverOptions {
  std::optional<double> tol;            ///< overrides solver_tolerance(p)
  int sweep_iterations = 40;            ///< L-BFGS iterations per sweep (fixed preconditioner)
  int max_sweeps = 400;
  int memory = 10;
  std::optional<DiscreteField> warm_start;
  double warm_start_p = 2.0;            ///< p at which warm_start was computed
  std::optional<std::pair<Cone, Cone>> cone_pair;  ///< extra start for minimize_second
  std::optional<DiscreteField> first_field;        ///< for the projection diagnostic
};

EigenResult minimize_first(const Mesh& mesh, double p, double beta, const SolverOptions& opts = {});
EigenResult minimize_second(const Mesh& mesh, double p, double beta, const SolverOptions& opts = {});

/// max of the quotient over a1 C1 + a2 C2 for (a1, a2) in {(1,1), (1,-1), (1,0), (0,1)}.
double cone_span_upper_bound(const Mesh& mesh, const Polygon& domain, double beta, double p, const SOmegaResult& sres);

double dlg_lower_bound(double volume, double p, double beta, int n = 2);

struct StudyRow {
  double p = 0.0;
  double h = 0.0;
  double beta = 0.0;
  double lambda1 = 0.0, lambda1_root = 0.0;
  double lambda2 = 0.0, lambda2_root = 0.0;
  double target1 = 0.0, target2 = 0.0;
  double gap1 = 0.0, gap2 = 0.0;  ///< |root - target| / target
  double dlg = 0.0;
  double cone_bound = 0.0;
  bool sign_changing = false;
  int iterations1 = 0, iterations2 = 0;
  double residual1 = 0.0, residual2 = 0.0;
  std::string error;  ///< non-empty when the row's solve failed
};

struct StudyTable {
  std::vector<StudyRow> rows;
  SOmegaResult sres;
  std::size_t nodes = 0;
};

StudyTable convergence_study(const Polygon& domain, double beta, const std::vector<double>& p_list, double h,
                             const SolverOptions& opts = {});
/// Same, on a caller-supplied mesh of `domain`.
StudyTable convergence_study(const Polygon& domain, const Mesh& mesh, double beta, const std::vector<double>& p_list,
                             const SolverOptions& opts = {});

}  // namespace infspec
