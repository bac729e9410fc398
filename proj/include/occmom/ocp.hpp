#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occmom/poly.hpp"

namespace occmom {

enum class SupportRelation { kNonNegative, kZero };

/// Support constraint stored as `lhs >= 0` or `lhs == 0`.
struct SupportConstraint {
  Polynomial lhs;
  SupportRelation relation = SupportRelation::kNonNegative;

  /// p <= q  ->  q - p >= 0
  static SupportConstraint less_equal(const Polynomial& p, const Polynomial& q);
  /// p >= q  ->  p - q >= 0
  static SupportConstraint greater_equal(const Polynomial& p, const Polynomial& q);
  /// p == q  ->  p - q == 0
  static SupportConstraint equal(const Polynomial& p, const Polynomial& q);

  bool is_equality() const { return relation == SupportRelation::kZero; }
};

enum class MomentRelation { kLessEqual, kEqual, kGreaterEqual };

/// Constraint on the integral of a polynomial along the trajectory.
struct MomentConstraint {
  Polynomial integrand;
  MomentRelation relation = MomentRelation::kLessEqual;
  double bound = 0.0;
};

/// Finite mixture of point masses over a subset of the state variables.
struct DiracFactor {
  std::vector<std::size_t> variables;  // VarSet indices
  Eigen::MatrixXd points;              // variables.size() x k
  Eigen::VectorXd weights;             // k, positive, summing to 1
};

/// Uniform probability measure on an axis-aligned box.
struct UniformFactor {
  std::vector<std::size_t> variables;
  Eigen::MatrixXd box;  // variables.size() x 2, columns (lower, upper)
};

/// Variables left to the relaxation, with their support constraints.
struct FreeFactor {
  std::vector<std::size_t> variables;
  std::vector<SupportConstraint> constraints;
};

struct BoundarySpec {
  std::optional<DiracFactor> dirac;
  std::optional<UniformFactor> uniform;
  FreeFactor free;

  /// True when every state is pinned by a Dirac or uniform factor.
  bool fully_known() const { return free.variables.empty(); }
  /// Single-point Dirac covering all states; returns that point.
  std::optional<Eigen::VectorXd> single_point(std::size_t num_states) const;
};

class Horizon {
 public:
  static Horizon free() { return Horizon(); }
  static Horizon fixed(double T);

  bool is_free() const { return !length_; }
  double length() const { return length_.value(); }

 private:
  std::optional<double> length_;
};

enum class TestTime { kDefault, kTimeDependent, kTimeIndependent };

struct OcpProblem {
  VarSetPtr vars;
  std::vector<Polynomial> dynamics;
  Horizon horizon = Horizon::free();
  Polynomial scost;
  Polynomial fcost;
  BoundarySpec initial;
  BoundarySpec final;
  std::vector<SupportConstraint> tconstraints;
  std::vector<MomentConstraint> sconstraints;
  TestTime testtime = TestTime::kDefault;
  /// Upper bound on the final time for free-horizon problems whose data
  /// depends on time.
  std::optional<double> tmax;
  /// Cumulative factors z_original = scaling .* z_internal, VarSet order.
  Eigen::VectorXd scaling;
};

/// Validate a draft problem and complete it: fills each free factor's
/// variable list, zero-initializes unset costs, checks every invariant.
/// Throws std::invalid_argument on any violation.
OcpProblem build_problem(OcpProblem draft);

/// Rewrite the problem in variables z = original / factors.
OcpProblem apply_scaling(const OcpProblem& p, const Eigen::VectorXd& factors);

/// Whether test functions depend on time.
bool time_dependence(const OcpProblem& p);

/// Whether any of the trajectory data (dynamics, running cost, trajectory
/// and integral constraints) mentions the time variable.
bool data_depends_on_time(const OcpProblem& p);

/// Max total degree over the dynamics components.
int dynamics_degree(const OcpProblem& p);

/// Bounds lo <= z <= hi on single variables implied by linear support
/// constraints of the form a*z + b >= 0. Unbounded sides are +-infinity.
struct VariableBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};
VariableBox box_bounds(const std::vector<SupportConstraint>& constraints, std::size_t nvars);

}  // namespace occmom
