#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occmom/moments.hpp"
#include "occmom/ocp.hpp"
#include "occmom/poly.hpp"

namespace occmom {

/// Input as a function of time and state.
using ControlLaw = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)>;

/// Law evaluating polynomials over (t?, states, inputs); inputs must not appear.
ControlLaw polynomial_law(const std::vector<Polynomial>& u);

struct SimOptions {
  /// Early stop radius around a Dirac target at the origin; 0 disables.
  double stop_radius = 1e-3;
};

struct Trajectory {
  VarSetPtr vars;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<double> cost;  // accumulated running cost at each node
  double running_cost = 0.0;
  std::vector<double> violations;  // per trajectory constraint
  bool blew_up = false;
  std::string message;

  std::size_t size() const { return times.size(); }
  double end_time() const { return times.empty() ? 0.0 : times.back(); }
};

/// Classical RK4 on the problem dynamics with inputs clamped to the box
/// bounds implied by the trajectory constraints.
Trajectory simulate(const OcpProblem& p, const ControlLaw& law, const Eigen::VectorXd& x0, double t_max, double dt,
                    const SimOptions& opts = {});
Trajectory simulate(const OcpProblem& p, const std::vector<Polynomial>& u, const Eigen::VectorXd& x0, double t_max,
                    double dt, const SimOptions& opts = {});

/// Trapezoidal time integrals of the basis monomials along the trajectory.
/// Basis indices follow traj.vars; a basis with one extra leading variable
/// is read as (t, vars...) when traj.vars has no time.
std::vector<double> empirical_moments(const Trajectory& traj, const MomentBasis& basis);

/// Header `t,x1..xn,u1..um,cost`, values with %.12g. Throws on I/O errors.
void export_csv(const Trajectory& traj, const std::string& path);

}  // namespace occmom
