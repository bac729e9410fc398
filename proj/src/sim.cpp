#include "occmom/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace occmom {

namespace {

double coef_inf(const Polynomial& p) {
  double m = 0.0;
  for (const auto& [mono, c] : p.terms()) m = std::max(m, std::abs(c));
  return m;
}

/// Point in VarSet order from time, state and input.
Eigen::VectorXd assemble(const VarSet& V, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(V.size()));
  if (V.has_time()) z(static_cast<Eigen::Index>(V.time_index())) = t;
  for (std::size_t i = 0; i < V.num_states(); ++i)
    z(static_cast<Eigen::Index>(V.state_index(i))) = x(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < V.num_inputs(); ++j)
    z(static_cast<Eigen::Index>(V.input_index(j))) = u(static_cast<Eigen::Index>(j));
  return z;
}

}  // namespace

ControlLaw polynomial_law(const std::vector<Polynomial>& u) {
  for (const auto& uj : u) {
    for (std::size_t j = 0; j < uj.varset().num_inputs(); ++j)
      if (uj.depends_on(uj.varset().input_index(j))) throw std::invalid_argument("control law depends on the inputs");
  }
  return [u](double t, const Eigen::VectorXd& x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(u.size()));
    for (std::size_t j = 0; j < u.size(); ++j) {
      const VarSet& V = u[j].varset();
      const Eigen::VectorXd z = assemble(V, t, x, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(V.num_inputs())));
      out(static_cast<Eigen::Index>(j)) = evaluate(u[j], z);
    }
    return out;
  };
}

Trajectory simulate(const OcpProblem& p, const ControlLaw& law, const Eigen::VectorXd& x0, double t_max, double dt,
                    const SimOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(t_max >= dt)) throw std::invalid_argument("t_max must be at least one time step");
  const VarSet& V = *p.vars;
  const auto n = static_cast<Eigen::Index>(V.num_states());
  const auto m = static_cast<Eigen::Index>(V.num_inputs());
  if (x0.size() != n) throw std::invalid_argument("initial state has the wrong dimension");

  const VariableBox box = box_bounds(p.tconstraints, V.size());
  Eigen::VectorXd ulo(m), uhi(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    ulo(j) = box.lower(static_cast<Eigen::Index>(V.input_index(static_cast<std::size_t>(j))));
    uhi(j) = box.upper(static_cast<Eigen::Index>(V.input_index(static_cast<std::size_t>(j))));
  }
  auto input = [&](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd u = law(t, x);
    if (u.size() != m) throw std::invalid_argument("control law returned the wrong number of inputs");
    return u.cwiseMax(ulo).cwiseMin(uhi);
  };
  auto rhs = [&](double t, const Eigen::VectorXd& x) {
    const Eigen::VectorXd z = assemble(V, t, x, input(t, x));
    Eigen::VectorXd dx(n);
    for (Eigen::Index i = 0; i < n; ++i) dx(i) = evaluate(p.dynamics[static_cast<std::size_t>(i)], z);
    return dx;
  };

  const auto target = p.final.single_point(V.num_states());
  const bool stop_at_origin = opts.stop_radius > 0.0 && target && target->isZero(0.0);

  Trajectory tr;
  tr.vars = p.vars;
  tr.violations.assign(p.tconstraints.size(), 0.0);
  std::vector<double> gscale;
  for (const auto& c : p.tconstraints) gscale.push_back(1.0 + coef_inf(c.lhs));

  auto record = [&](double t, const Eigen::VectorXd& x) {
    const Eigen::VectorXd u = input(t, x);
    const Eigen::VectorXd z = assemble(V, t, x, u);
    const double h = evaluate(p.scost, z);
    if (!tr.times.empty()) {
      const Eigen::VectorXd zp = assemble(V, tr.times.back(), tr.states.back(), tr.inputs.back());
      tr.running_cost += 0.5 * (evaluate(p.scost, zp) + h) * (t - tr.times.back());
    }
    for (std::size_t k = 0; k < p.tconstraints.size(); ++k) {
      const auto& c = p.tconstraints[k];
      const double g = evaluate(c.lhs, z);
      const double viol = c.is_equality() ? std::abs(g) : std::max(0.0, -g);
      tr.violations[k] = std::max(tr.violations[k], viol / gscale[k]);
    }
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.inputs.push_back(u);
    tr.cost.push_back(tr.running_cost);
  };

  const auto steps = static_cast<long>(std::llround(t_max / dt));
  Eigen::VectorXd x = x0;
  record(0.0, x);
  for (long k = 0; k < steps; ++k) {
    if (stop_at_origin && x.norm() <= opts.stop_radius) break;
    const double t = static_cast<double>(k) * dt;
    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + dt / 2, x + dt / 2 * k1);
    const Eigen::VectorXd k3 = rhs(t + dt / 2, x + dt / 2 * k2);
    const Eigen::VectorXd k4 = rhs(t + dt, x + dt * k3);
    x += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!x.allFinite()) {
      tr.blew_up = true;
      tr.message = "state became non-finite at t = " + std::to_string(t + dt);
      break;
    }
    record(static_cast<double>(k + 1) * dt, x);
  }
  return tr;
}

Trajectory simulate(const OcpProblem& p, const std::vector<Polynomial>& u, const Eigen::VectorXd& x0, double t_max,
                    double dt, const SimOptions& opts) {
  return simulate(p, polynomial_law(u), x0, t_max, dt, opts);
}

std::vector<double> empirical_moments(const Trajectory& traj, const MomentBasis& basis) {
  const VarSet& V = *traj.vars;
  const bool add_time = !V.has_time() && basis.nvars() == V.size() + 1;
  if (!add_time && basis.nvars() != V.size()) throw std::invalid_argument("basis does not match the trajectory variables");
  std::vector<double> y(basis.size(), 0.0);
  Eigen::VectorXd prev;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    Eigen::VectorXd z = assemble(V, traj.times[k], traj.states[k], traj.inputs[k]);
    if (add_time) {
      Eigen::VectorXd zt(z.size() + 1);
      zt << traj.times[k], z;
      z = zt;
    }
    if (k > 0) {
      const double h = traj.times[k] - traj.times[k - 1];
      for (std::size_t i = 0; i < basis.size(); ++i) y[i] += 0.5 * h * (evaluate(basis[i], prev) + evaluate(basis[i], z));
    }
    prev = z;
  }
  return y;
}

void export_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::size_t n = traj.vars ? traj.vars->num_states() : (traj.states.empty() ? 0 : traj.states[0].size());
  const std::size_t m = traj.vars ? traj.vars->num_inputs() : (traj.inputs.empty() ? 0 : traj.inputs[0].size());
  os << "t";
  for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
  for (std::size_t j = 1; j <= m; ++j) os << ",u" << j;
  os << ",cost\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    put(traj.times[k]);
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) {
      os << ',';
      put(traj.states[k](i));
    }
    for (Eigen::Index j = 0; j < traj.inputs[k].size(); ++j) {
      os << ',';
      put(traj.inputs[k](j));
    }
    os << ',';
    put(traj.cost[k]);
    os << '\n';
  }
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace occmom
