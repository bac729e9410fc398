#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "occmom/ocp.hpp"
#include "occmom/poly.hpp"
#include "occmom/relaxation.hpp"
#include "occmom/solver.hpp"

namespace occmom {

struct VerifyOptions {
  /// Quasi-random samples per set; ignored when grid > 0.
  int samples = 10000;
  /// Points per axis of a regular grid over the sampling box.
  int grid = 0;
  std::uint64_t seed = 1;
  /// Half-width used for directions the constraints leave unbounded;
  /// 0 picks twice the largest magnitude found in the problem data.
  double radius = 0.0;
  /// Negative: defaults 1e-4 * (1 + |v|_inf) and 1e-5 * (1 + |bound|).
  double eps = -1.0;
  double eps_bound = -1.0;
};

struct VerificationReport {
  double min_hjb_residual = 0.0;        // min of dv/dt + grad v . f + h over sampled C_T
  double max_terminal_violation = 0.0;  // max of v(T, x) - H(x) over sampled C_F
  double bound_error = 0.0;             // |certified - lower_bound|
  double certified_bound = 0.0;         // integral of v(0, .) against mu_I (or its min)
  double lower_bound = 0.0;
  double eps = 0.0;
  double eps_bound = 0.0;
  int hjb_points = 0;
  int terminal_points = 0;
  int initial_points = 0;
  std::uint64_t seed = 0;
  bool hjb_ok = false;
  bool terminal_ok = false;
  bool bound_ok = false;

  bool passed() const { return hjb_ok && terminal_ok && bound_ok; }
};

/// Polynomial HJB subsolution in the original variables and time.
struct ValueFunction {
  Polynomial v;  // over (t?, states, inputs); never depends on inputs
  /// Running cost the subsolution certifies: the problem cost (or the trace
  /// objective when both costs vanish) plus multiplier-weighted integrands.
  Polynomial hjb_cost;
  /// One per integral constraint: weight of its integrand inside hjb_cost.
  std::vector<double> integral_multipliers;
  int tf_degree = 0;
  double lower_bound = 0.0;
  VerificationReport verification;
};

class SubsolutionError : public std::runtime_error {
 public:
  SubsolutionError(const std::string& what, ValueFunction vf) : std::runtime_error(what), vf_(std::move(vf)) {}
  const ValueFunction& value_function() const { return vf_; }

 private:
  ValueFunction vf_;
};

/// Assemble v from the duals of the Liouville and mass rows, express it in
/// the original variables and verify it against the unscaled problem.
/// `p` is the problem the moment problem was built from (possibly scaled).
/// Throws SubsolutionError when the contract fails; std::logic_error on a
/// non-optimal solution unless require_optimal is false.
ValueFunction extract_subsolution(const OcpProblem& p, const MomentProblem& mp, const ConicSolution& sol,
                                  const VerifyOptions& opts = {}, bool require_optimal = true);

/// Problem in the variables it was stated in, undoing apply_scaling.
OcpProblem unscaled(const OcpProblem& p);

/// Sample the subsolution contract on the original problem.
VerificationReport verify_subsolution(const OcpProblem& original, const ValueFunction& vf, const VerifyOptions& opts);

/// Pointwise minimizer u = -R^-1 B' grad v / 2 of grad v . f + h for
/// dynamics a + B u and cost q + u'Ru with constant R > 0. Polynomials are
/// over the variables of vf.v. Throws std::invalid_argument otherwise.
std::vector<Polynomial> synthesize_controller(const ValueFunction& vf, const OcpProblem& original);

/// Largest coefficient of d/du [grad v . f + h] after substituting u.
double controller_stationarity(const ValueFunction& vf, const OcpProblem& original,
                               const std::vector<Polynomial>& u);

/// Replace variable `var` of p by the polynomial q (same variable set).
Polynomial compose(const Polynomial& p, std::size_t var, const Polynomial& q);

}  // namespace occmom
