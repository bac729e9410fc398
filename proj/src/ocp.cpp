#include "occmom/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace occmom {

SupportConstraint SupportConstraint::less_equal(const Polynomial& p, const Polynomial& q) {
  return {q - p, SupportRelation::kNonNegative};
}

SupportConstraint SupportConstraint::greater_equal(const Polynomial& p, const Polynomial& q) {
  return {p - q, SupportRelation::kNonNegative};
}

SupportConstraint SupportConstraint::equal(const Polynomial& p, const Polynomial& q) {
  return {p - q, SupportRelation::kZero};
}

std::optional<Eigen::VectorXd> BoundarySpec::single_point(std::size_t num_states) const {
  if (!dirac || uniform || !free.variables.empty() || dirac->points.cols() != 1) return std::nullopt;
  if (dirac->variables.size() != num_states) return std::nullopt;
  return dirac->points.col(0);
}

Horizon Horizon::fixed(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("fixed horizon must be a positive finite length");
  Horizon h;
  h.length_ = T;
  return h;
}

namespace {

void require_vars(const Polynomial& p, const VarSetPtr& vars, const char* what) {
  if (!p.vars()) throw std::invalid_argument(std::string(what) + " has no variable set");
  if (!(*p.vars() == *vars)) throw std::invalid_argument(std::string(what) + " uses a different variable set");
}

bool uses_only(const Polynomial& p, const std::set<std::size_t>& allowed) {
  for (std::size_t i = 0; i < p.varset().size(); ++i) {
    if (!allowed.count(i) && p.depends_on(i)) return false;
  }
  return true;
}

void validate_boundary(BoundarySpec& b, const VarSetPtr& vars, const char* which) {
  const VarSet& vs = *vars;
  std::set<std::size_t> states;
  for (std::size_t i = 0; i < vs.num_states(); ++i) states.insert(vs.state_index(i));

  std::set<std::size_t> assigned;
  auto claim = [&](std::size_t v, const char* factor) {
    if (!states.count(v))
      throw std::invalid_argument(std::string(which) + " " + factor + " factor references non-state variable '" +
                                  vs.name(v) + "'");
    if (!assigned.insert(v).second)
      throw std::invalid_argument(std::string(which) + " condition assigns state '" + vs.name(v) +
                                  "' to more than one factor");
  };

  if (b.dirac) {
    auto& d = *b.dirac;
    if (d.variables.empty()) throw std::invalid_argument(std::string(which) + " Dirac factor has no variables");
    for (auto v : d.variables) claim(v, "Dirac");
    if (static_cast<std::size_t>(d.points.rows()) != d.variables.size() || d.points.cols() < 1)
      throw std::invalid_argument(std::string(which) + " Dirac points have wrong dimensions");
    if (d.weights.size() == 0) {
      if (d.points.cols() != 1)
        throw std::invalid_argument(std::string(which) + " Dirac mixture needs explicit weights");
      d.weights = Eigen::VectorXd::Ones(1);
    }
    if (d.weights.size() != d.points.cols())
      throw std::invalid_argument(std::string(which) + " Dirac weight count does not match point count");
    if ((d.weights.array() <= 0.0).any())
      throw std::invalid_argument(std::string(which) + " Dirac weights must be positive");
    if (std::abs(d.weights.sum() - 1.0) > 1e-12)
      throw std::invalid_argument(std::string(which) + " Dirac weights must sum to 1");
    if (!d.points.allFinite()) throw std::invalid_argument(std::string(which) + " Dirac points must be finite");
  }
  if (b.uniform) {
    auto& u = *b.uniform;
    if (u.variables.empty()) throw std::invalid_argument(std::string(which) + " uniform factor has no variables");
    for (auto v : u.variables) claim(v, "uniform");
    if (static_cast<std::size_t>(u.box.rows()) != u.variables.size() || u.box.cols() != 2)
      throw std::invalid_argument(std::string(which) + " uniform box has wrong dimensions");
    for (Eigen::Index i = 0; i < u.box.rows(); ++i) {
      if (!(u.box(i, 0) < u.box(i, 1)) || !std::isfinite(u.box(i, 0)) || !std::isfinite(u.box(i, 1)))
        throw std::invalid_argument(std::string(which) + " uniform interval must satisfy a < b");
    }
  }

  b.free.variables.clear();
  for (auto s : states) {
    if (!assigned.count(s)) b.free.variables.push_back(s);
  }
  const std::set<std::size_t> free_set(b.free.variables.begin(), b.free.variables.end());
  for (auto& c : b.free.constraints) {
    require_vars(c.lhs, vars, which);
    if (!uses_only(c.lhs, free_set))
      throw std::invalid_argument(std::string(which) +
                                  " constraint involves a variable that is not free (assigned, input or time)");
  }
}

}  // namespace

OcpProblem build_problem(OcpProblem p) {
  if (!p.vars) throw std::invalid_argument("problem has no variables");
  const VarSet& vs = *p.vars;
  if (vs.num_states() == 0) throw std::invalid_argument("problem needs at least one state");
  if (p.dynamics.size() != vs.num_states())
    throw std::invalid_argument("dynamics has " + std::to_string(p.dynamics.size()) + " components, expected " +
                                std::to_string(vs.num_states()));
  for (const auto& f : p.dynamics) require_vars(f, p.vars, "dynamics");

  if (!p.scost.vars()) p.scost = Polynomial(p.vars);
  if (!p.fcost.vars()) p.fcost = Polynomial(p.vars);
  require_vars(p.scost, p.vars, "running cost");
  require_vars(p.fcost, p.vars, "final cost");
  std::set<std::size_t> states;
  for (std::size_t i = 0; i < vs.num_states(); ++i) states.insert(vs.state_index(i));
  if (!uses_only(p.fcost, states)) throw std::invalid_argument("final cost may only depend on state variables");

  validate_boundary(p.initial, p.vars, "initial");
  validate_boundary(p.final, p.vars, "final");

  for (const auto& c : p.tconstraints) require_vars(c.lhs, p.vars, "trajectory constraint");
  for (const auto& c : p.sconstraints) {
    require_vars(c.integrand, p.vars, "integral constraint");
    if (!std::isfinite(c.bound)) throw std::invalid_argument("integral constraint bound must be finite");
  }

  if (p.tmax && !(*p.tmax > 0.0)) throw std::invalid_argument("tmax must be positive");
  if (p.scaling.size() == 0) p.scaling = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(vs.size()));
  if (static_cast<std::size_t>(p.scaling.size()) != vs.size() || (p.scaling.array() <= 0.0).any())
    throw std::invalid_argument("scaling factors must be positive, one per variable");
  return p;
}

OcpProblem apply_scaling(const OcpProblem& p, const Eigen::VectorXd& factors) {
  const VarSet& vs = *p.vars;
  if (static_cast<std::size_t>(factors.size()) != vs.size())
    throw std::invalid_argument("expected one scaling factor per variable");
  if ((factors.array() <= 0.0).any() || !factors.allFinite())
    throw std::invalid_argument("scaling factors must be positive");

  const double time_factor = vs.has_time() ? factors(static_cast<Eigen::Index>(vs.time_index())) : 1.0;
  OcpProblem q = p;

  for (std::size_t i = 0; i < vs.num_states(); ++i) {
    const double s = factors(static_cast<Eigen::Index>(vs.state_index(i)));
    q.dynamics[i] = scale_variables(p.dynamics[i], factors) * (time_factor / s);
  }
  q.scost = scale_variables(p.scost, factors) * time_factor;
  q.fcost = scale_variables(p.fcost, factors);
  for (auto& c : q.tconstraints) c.lhs = scale_variables(c.lhs, factors);
  for (auto& c : q.sconstraints) c.integrand = scale_variables(c.integrand, factors) * time_factor;

  auto scale_boundary = [&](BoundarySpec& b) {
    if (b.dirac) {
      for (std::size_t r = 0; r < b.dirac->variables.size(); ++r)
        b.dirac->points.row(static_cast<Eigen::Index>(r)) /= factors(static_cast<Eigen::Index>(b.dirac->variables[r]));
    }
    if (b.uniform) {
      for (std::size_t r = 0; r < b.uniform->variables.size(); ++r)
        b.uniform->box.row(static_cast<Eigen::Index>(r)) /=
            factors(static_cast<Eigen::Index>(b.uniform->variables[r]));
    }
    for (auto& c : b.free.constraints) c.lhs = scale_variables(c.lhs, factors);
  };
  scale_boundary(q.initial);
  scale_boundary(q.final);

  if (!p.horizon.is_free()) q.horizon = Horizon::fixed(p.horizon.length() / time_factor);
  if (p.tmax) q.tmax = *p.tmax / time_factor;

  const Eigen::VectorXd previous =
      p.scaling.size() ? p.scaling : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(vs.size()));
  q.scaling = previous.cwiseProduct(factors);
  return q;
}

bool data_depends_on_time(const OcpProblem& p) {
  const VarSet& vs = *p.vars;
  if (!vs.has_time()) return false;
  const auto t = vs.time_index();
  auto uses = [t](const Polynomial& q) { return q.vars() && q.depends_on(t); };
  if (std::any_of(p.dynamics.begin(), p.dynamics.end(), uses)) return true;
  if (uses(p.scost)) return true;
  for (const auto& c : p.tconstraints) {
    if (uses(c.lhs)) return true;
  }
  for (const auto& c : p.sconstraints) {
    if (uses(c.integrand)) return true;
  }
  return false;
}

bool time_dependence(const OcpProblem& p) {
  switch (p.testtime) {
    case TestTime::kTimeDependent:
      return true;
    case TestTime::kTimeIndependent:
      return false;
    case TestTime::kDefault:
      break;
  }
  return data_depends_on_time(p) || !p.horizon.is_free();
}

int dynamics_degree(const OcpProblem& p) {
  int d = 0;
  for (const auto& f : p.dynamics) d = std::max(d, f.degree());
  return d;
}

VariableBox box_bounds(const std::vector<SupportConstraint>& constraints, std::size_t nvars) {
  const double inf = std::numeric_limits<double>::infinity();
  VariableBox box{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nvars), -inf),
                  Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nvars), inf)};
  for (const auto& c : constraints) {
    if (c.lhs.degree() != 1) continue;
    // a*z + b with a single variable z.
    std::optional<std::size_t> var;
    double a = 0.0;
    bool single = true;
    for (const auto& [m, coef] : c.lhs.terms()) {
      if (m.degree() == 0) continue;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0) continue;
        if (var && *var != i) single = false;
        var = i;
        a = coef;
      }
    }
    if (!single || !var) continue;
    const double b = c.lhs.constant_term();
    const double bound = -b / a;
    const auto v = static_cast<Eigen::Index>(*var);
    if (c.is_equality()) {
      box.lower(v) = std::max(box.lower(v), bound);
      box.upper(v) = std::min(box.upper(v), bound);
    } else if (a > 0) {
      box.lower(v) = std::max(box.lower(v), bound);
    } else {
      box.upper(v) = std::min(box.upper(v), bound);
    }
  }
  return box;
}

}  // namespace occmom
