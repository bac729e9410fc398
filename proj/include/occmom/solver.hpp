#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occmom/moments.hpp"
#include "occmom/relaxation.hpp"

namespace occmom {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure, kIterationLimit };
const char* to_string(SolveStatus s);

struct SolverOptions {
  double gap_tolerance = 1e-8;
  double feasibility_tolerance = 1e-8;
  int max_iterations = 200;
  /// A stalled run whose best iterate meets this looser tolerance on every
  /// residual is reported optimal to reduced accuracy.
  double reduced_tolerance = 1e-6;
  /// Static regularization added to the Schur complement diagonals.
  double regularization = 1e-9;
  bool verbose = false;
};

struct Residuals {
  double primal = 0.0;  // max(|Ay - b|, |S - F(y)|) relative to 1 + data norm
  double dual = 0.0;    // |c - A'lambda - F*(X)| relative to 1 + |c|
  double gap = 0.0;     // |pobj - dobj| / (1 + |pobj| + |dobj|)
};

/// Solution of a ConicProgram.
///
/// Sign conventions: the Lagrangian is
///   c.y - eq_duals.(A y - b) - sum_k <psd_duals[k], F_k(y)> - nonneg_duals.g(y)
/// so at optimality c = A' eq_duals + F*(psd_duals) + g*(nonneg_duals).
struct ConicSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd y;
  double objective_value = 0.0;  // primal, includes offset
  double dual_objective = 0.0;   // includes offset
  Eigen::VectorXd eq_duals;      // one per equality row, same order
  std::vector<Eigen::MatrixXd> psd_duals;
  Eigen::VectorXd nonneg_duals;
  Residuals residuals;
  int iterations = 0;
  std::string message;

  /// Primal value when optimal; otherwise the dual value, which is what the
  /// extracted subsolution certifies.
  double lower_bound() const { return status == SolveStatus::kOptimal ? objective_value : dual_objective; }
};

/// Pluggable conic backend; the embedded interior-point method is the default.
class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual ConicSolution solve(const ConicProgram& cp, const SolverOptions& opts) const = 0;
};

/// Primal-dual path-following interior-point method with Nesterov-Todd
/// scaling and Mehrotra predictor-corrector steps on dense blocks.
class InteriorPointBackend final : public ConicBackend {
 public:
  ConicSolution solve(const ConicProgram& cp, const SolverOptions& opts) const override;
};

ConicSolution solve_conic(const ConicProgram& cp, const SolverOptions& opts = {});

/// Moments and moment matrix of one measure, in the variables of the
/// program the solution belongs to.
struct MeasureMoments {
  MeasureId id = MeasureId::kTrajectory;
  bool known = false;
  MomentBasis basis;            // all monomials over the measure variables up to its degree
  std::vector<double> moments;  // aligned with basis
  Eigen::MatrixXd matrix;       // order degree/2
};

/// Throws std::logic_error unless the solution is optimal; with
/// require_optimal = false the best iterate of a failed solve is used.
std::vector<MeasureMoments> extract_moment_matrices(const ConicSolution& sol, const ConicProgram& cp,
                                                    bool require_optimal = true);

}  // namespace occmom
