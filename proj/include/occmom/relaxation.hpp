#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "occmom/moments.hpp"
#include "occmom/ocp.hpp"
#include "occmom/poly.hpp"

namespace occmom {

/// How the relaxation degree is specified: by the moment truncation degree
/// or by the degree of the test functions.
struct DegreeMode {
  enum class Kind { kMoment, kTestFunction };
  Kind kind = Kind::kTestFunction;
  int degree = 0;

  static DegreeMode moment(int d) { return {Kind::kMoment, d}; }
  static DegreeMode test_function(int d) { return {Kind::kTestFunction, d}; }
};

struct DegreePlan {
  DegreeMode mode;
  int tf_degree = 0;
  bool time_dependent_tests = false;
  bool time_in_trajectory = false;
  int trajectory_degree = 0;  // even
  int initial_degree = 0;     // even
  int final_degree = 0;       // even

  int trajectory_order() const { return trajectory_degree / 2; }
  int initial_order() const { return initial_degree / 2; }
  int final_order() const { return final_degree / 2; }
};

DegreePlan resolve_degrees(const OcpProblem& p, DegreeMode mode);

using SparseTerms = std::vector<std::pair<std::size_t, double>>;

/// Affine functional terms . y + constant.
struct LinearForm {
  SparseTerms terms;
  double constant = 0.0;

  void add(std::size_t var, double coef) { terms.emplace_back(var, coef); }
  LinearForm& operator+=(const LinearForm& o);
  LinearForm& operator*=(double s);
  /// Merge duplicate indices and drop exact zeros; keeps ascending order.
  void compress();
  double value(const Eigen::VectorXd& y) const;
};

struct RowTag {
  enum class Kind { kLiouville, kMassInitial, kMassFinal, kMassTrajectory, kIntegral, kSupportEquality };
  Kind kind = Kind::kLiouville;
  Monomial test;       // kLiouville
  std::size_t index = 0;  // kIntegral: sconstraint position
};

/// Linear equality terms . y = rhs.
struct EqualityRow {
  SparseTerms terms;
  double rhs = 0.0;
  RowTag tag;
};

/// Linear inequality form(y) >= 0 from an integral constraint.
struct InequalityRow {
  LinearForm form;
  std::size_t index = 0;   // sconstraint position
  double sign = 1.0;       // +1: integral >= bound, -1: integral <= bound
};

/// Problem data after time normalization, in the variables used by the
/// moment problem. Time (when present) runs over [0, 1] and equals
/// original_time / time_scale.
struct InternalModel {
  VarSetPtr vars;
  std::vector<Polynomial> dynamics;
  Polynomial running_cost;      // includes the trace objective when costs vanish
  Polynomial final_cost;
  std::vector<SupportConstraint> trajectory_constraints;
  std::vector<Polynomial> integral_integrands;
  double time_scale = 1.0;
  bool time_in_trajectory = false;
  bool test_time = false;
  bool fixed_horizon = false;
  bool final_time_free = false;  // final measure carries time (free horizon, time-dependent data)
  double horizon = 0.0;          // internal horizon (1 when time is normalized)
  bool trace_objective = false;
};

struct MomentProblem {
  InternalModel model;
  DegreePlan plan;
  std::vector<MeasureSpec> measures;  // trajectory, initial, final
  std::size_t num_unknowns = 0;
  std::vector<Monomial> test_monomials;
  std::vector<EqualityRow> equalities;
  std::vector<InequalityRow> inequalities;
  LinearForm objective;

  const MeasureSpec& measure(MeasureId id) const;
  /// Linear form for the integral of p against a measure.
  LinearForm integrate(const Polynomial& p, MeasureId id) const;
};

MomentProblem build_moment_problem(const OcpProblem& p, const DegreePlan& plan);

/// Entry coef * y[var] (var < 0: constant) at (row, col), row <= col.
struct PsdEntry {
  int var = -1;
  int row = 0;
  int col = 0;
  double coef = 0.0;
};

/// Affine symmetric matrix map y -> C0 + sum_i y_i C_i required PSD.
struct PsdBlock {
  int size = 0;
  std::vector<PsdEntry> entries;  // upper triangle
  MeasureId measure = MeasureId::kTrajectory;
  bool localizing = false;
  std::string label;

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;
};

/// minimize c.y + offset  s.t.  A y = b,  blocks(y) PSD,  nonneg(y) >= 0.
struct ConicProgram {
  std::size_t num_vars = 0;
  Eigen::VectorXd c;
  double offset = 0.0;
  std::vector<EqualityRow> equalities;
  std::vector<PsdBlock> blocks;
  std::vector<LinearForm> nonneg;
  std::vector<MeasureSpec> measures;
  /// Equality rows copied from the moment problem come first, in order.
  std::size_t num_problem_equalities = 0;
};

ConicProgram assemble_conic(const MomentProblem& mp);

/// Sparse text dump for cross-checking with external solvers:
///   "obj <var> <coef>", "offset <value>", "eq <row> <var> <coef>",
///   "rhs <row> <value>", "psd <block> <row> <col> <var> <coef>" (var -1 is
///   the constant part), "nonneg <row> <var> <coef>" (var -1 constant).
void dump_conic(const ConicProgram& cp, std::ostream& os);

}  // namespace occmom
