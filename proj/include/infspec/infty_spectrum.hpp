#pragma once

#include "infspec/error.hpp"
#include "infspec/field.hpp"
#include "infspec/geometry.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace infspec {

// ---------------------------------------------------------------------------
// Cones and the two-point objective
// ---------------------------------------------------------------------------

/// (t - |x - apex|)_+ / t
double cone_value(const Cone& c, const Point& x);

struct ConeTrace {
  double value = 0.0;    ///< (t - d(apex, boundary))_+ / t
  double sampled = 0.0;  ///< max of the cone over dense boundary samples
  double spacing = 0.0;  ///< boundary sample spacing used for `sampled`
};

/// sup of the cone over the boundary. Throws ApexOutside when the apex is not in the closure.
/// The closed form is cross-checked against dense boundary samples; a disagreement beyond
/// the sampling bound raises PreconditionViolation.
ConeTrace cone_boundary_sup(const Polygon& domain, const Cone& c);

struct SearchOptions {
  std::uint64_t seed = 0x5eed5eedULL;
  double tol_rel = 1e-7;      ///< tol_opt = tol_rel * D_e
  int max_seed_points = 141;  ///< farthest-point thinning cap (141 points -> <= 1e4 pairs)
  int refine_pairs = 8;
  int max_evals = 40000;
};

enum class ActiveConstraint { PairDistance, Trace1, Trace2 };

struct SOmegaResult {
  double s = 0.0;
  Point x1 = Point::Zero();
  Point x2 = Point::Zero();
  double beta = 0.0;  ///< +inf for the Dirichlet (r2) instance
  std::vector<ActiveConstraint> active;
  /// max of |s - F(x1, x2)| and the sampled trace excess over 1/(beta s)
  double objective_gap = 0.0;
  double tol_opt = 0.0;
};

/// Raised when no refinement run reaches tol_opt; `best` holds the best pair found.
class SearchStalled : public Error {
 public:
  SearchStalled(const std::string& msg, SOmegaResult best_so_far)
      : Error(ErrorKind::OptimizationStalled, "infty_spectrum", msg), best(std::move(best_so_far)) {}
  SOmegaResult best;
};

/// max over closure pairs of min(|x1-x2|/2, d(x1)+1/beta, d(x2)+1/beta).
SOmegaResult s_omega(const Polygon& domain, double beta, const SearchOptions& opts = {});
double lambda1_infty(const Polygon& domain, double beta);
double lambda2_infty(const Polygon& domain, double beta, const SearchOptions& opts = {});

struct R2Result {
  double r2 = 0.0;
  std::pair<Point, Point> pair{Point::Zero(), Point::Zero()};
};
R2Result r2(const Polygon& domain, const SearchOptions& opts = {});

// ---------------------------------------------------------------------------
// Mixed Dirichlet/Robin first eigenvalue
// ---------------------------------------------------------------------------

struct MixedResult {
  double lambda = 0.0;
  Point argmin = Point::Zero();
  bool a_nonempty = false;
  double error_bar = 0.0;
};

MixedResult mixed_lambda_infty(const Polygon& domain, const BoundaryPartition& partition, double beta);

// ---------------------------------------------------------------------------
// Regimes and closed forms
// ---------------------------------------------------------------------------

enum class Regime { NeumannLocked, Intermediate, DirichletLimitApproaching };
std::string to_string(Regime r);

struct RegimeReport {
  double beta = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double two_over_Dg = 0.0;
  double two_over_De = 0.0;
  double inv_r2 = 0.0;
  Regime regime = Regime::Intermediate;
  std::vector<std::pair<double, double>> continuity_probe;
};

RegimeReport regime_report(const Polygon& domain, double beta, const std::vector<double>& probe,
                           const SearchOptions& opts = {});

struct ClosedForm {
  double value = 0.0;
  int branch = 0;             ///< 1-based branch index in the piecewise formula
  bool ordering_flag = false; ///< stadium with D <= 4r: first branch suppressed
};

ClosedForm closed_form_stadium(double r, double D, double beta);
ClosedForm closed_form_square(double L, double beta);

// ---------------------------------------------------------------------------
// First eigenfunction profile and the min-max path
// ---------------------------------------------------------------------------

struct FirstProfile {
  Field field;        ///< (1/beta + d(x)) / (1/beta + r)
  double beta = 0.0;
  double lambda1 = 0.0;
  double r = 0.0;
  Point incenter = Point::Zero();
  // Identities checked on construction.
  double sup_value = 0.0;
  double lipschitz_sampled = 0.0;
  double beta_boundary_sup = 0.0;
};

FirstProfile first_eigenfunction_profile(const Polygon& domain, double beta);

struct PathSegment {
  std::string name;
  std::function<Field(double)> at;
};

struct PathFunction {
  std::vector<PathSegment> segments;
  std::vector<double> t_grid;   ///< parameter samples in [0,1], shared by all segments
  std::vector<Point> anchors;   ///< points where the sampled functions reach |u| = 1
  Field start, end;
};

PathFunction build_minmax_path(const Polygon& domain, double beta, int n_steps, const SearchOptions& opts = {});

struct PathSup {
  double estimate = 0.0;          ///< sup over samples of max{sampled Lipschitz, beta*boundary sup}
  double analytic_bound = 0.0;    ///< same with the analytic gradient maximum
  double error_bar = 0.0;
  double sampled_lipschitz = 0.0;
  double boundary_sup = 0.0;
  std::string worst_segment;
  double worst_t = 0.0;
};

PathSup path_functional_sup(const Polygon& domain, const PathFunction& path, double beta,
                            double probe_resolution, double tol_path = 1e-3);

// ---------------------------------------------------------------------------
// Viscosity operators
// ---------------------------------------------------------------------------

enum class SignBranch { Positive, Zero, Negative };

struct OperatorValue {
  double value = 0.0;
  SignBranch branch = SignBranch::Zero;
};

double infinity_laplacian(const Eigen::Vector2d& grad, const Eigen::Matrix2d& hess);
OperatorValue eval_F_operator(double u, const Eigen::Vector2d& grad, const Eigen::Matrix2d& hess, double lambda);
OperatorValue eval_G_operator(double u, const Eigen::Vector2d& grad, const Eigen::Vector2d& normal, double beta);

struct OperatorSample {
  Point point = Point::Zero();
  double u = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
  double F_value = 0.0;
  bool on_boundary = false;
  double G_value = 0.0;
  SignBranch branch = SignBranch::Zero;
};

struct BranchStats {
  int count = 0;
  double max_positive = 0.0;
  double max_negative = 0.0;  ///< most negative value (<= 0)
};

struct SpotCheckOptions {
  double guard = 1e-4;  ///< distance kept from kinks and from the boundary
  double tol = 1e-8;
  std::uint64_t seed = 0x5eed5eedULL;
};

struct ViscosityReport {
  int interior_evaluated = 0;
  int interior_skipped = 0;
  int boundary_evaluated = 0;
  BranchStats interior[3];
  BranchStats boundary[3];
  std::vector<OperatorSample> violations;
  bool consistent = true;
};

ViscosityReport viscosity_spot_check(const Polygon& domain, const Field& candidate, double lambda, double beta,
                                     int interior_samples, int boundary_samples, const SpotCheckOptions& opts = {});

}  // namespace infspec
