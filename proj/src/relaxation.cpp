#include "occmom/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

namespace occmom {

namespace {

int round_up_even(int d) { return d % 2 == 0 ? d : d + 1; }

int half_ceil(int d) { return (d + 1) / 2; }

int constraint_degree_need(const SupportConstraint& c) {
  const int d = std::max(c.lhs.degree(), 0);
  return c.is_equality() ? d : 2 * half_ceil(d);
}

}  // namespace

// ---------------------------------------------------------------------------
// Degree plan

DegreePlan resolve_degrees(const OcpProblem& p, DegreeMode mode) {
  if (mode.degree < 1) throw std::invalid_argument("relaxation degree must be at least 1");
  DegreePlan plan;
  plan.mode = mode;
  plan.time_dependent_tests = time_dependence(p);
  plan.time_in_trajectory = plan.time_dependent_tests || data_depends_on_time(p);

  const int df = std::max(dynamics_degree(p), 0);
  plan.tf_degree =
      mode.kind == DegreeMode::Kind::kTestFunction ? mode.degree : std::max(1, mode.degree + 1 - df);
  const int tf = plan.tf_degree;

  int need = tf - 1 + df;
  if (plan.time_dependent_tests) need = std::max(need, tf);
  need = std::max(need, p.scost.degree());
  for (const auto& c : p.sconstraints) need = std::max(need, c.integrand.degree());
  for (const auto& c : p.tconstraints) need = std::max(need, constraint_degree_need(c));
  if (plan.time_in_trajectory) need = std::max(need, 2);  // t(1 - t) >= 0
  need = std::max(need, 2);

  if (mode.kind == DegreeMode::Kind::kMoment) {
    const int target = round_up_even(std::max(mode.degree, 2));
    if (need > target)
      throw std::invalid_argument("moment degree " + std::to_string(mode.degree) +
                                  " is too small for the dynamics, costs or constraints (need " +
                                  std::to_string(need) + ")");
    plan.trajectory_degree = target;
  } else {
    plan.trajectory_degree = round_up_even(need);
  }

  auto boundary_degree = [&](const BoundarySpec& b, bool carries_time) {
    int d = std::max({tf, p.fcost.degree(), 2});
    for (const auto& c : b.free.constraints) d = std::max(d, constraint_degree_need(c));
    if (carries_time) d = std::max(d, 2);
    return round_up_even(d);
  };
  const bool final_time = plan.time_in_trajectory && p.horizon.is_free();
  plan.initial_degree = boundary_degree(p.initial, false);
  plan.final_degree = boundary_degree(p.final, final_time);
  return plan;
}

// ---------------------------------------------------------------------------
// Linear forms

LinearForm& LinearForm::operator+=(const LinearForm& o) {
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  constant += o.constant;
  return *this;
}

LinearForm& LinearForm::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return *this;
}

void LinearForm::compress() {
  std::map<std::size_t, double> merged;
  for (const auto& [v, c] : terms) merged[v] += c;
  terms.clear();
  for (const auto& [v, c] : merged) {
    if (c != 0.0) terms.emplace_back(v, c);
  }
}

double LinearForm::value(const Eigen::VectorXd& y) const {
  double acc = constant;
  for (const auto& [v, c] : terms) acc += c * y(static_cast<Eigen::Index>(v));
  return acc;
}

// ---------------------------------------------------------------------------
// Moment problem

const MeasureSpec& MomentProblem::measure(MeasureId id) const {
  for (const auto& m : measures) {
    if (m.id == id) return m;
  }
  throw std::logic_error("measure not present");
}

LinearForm MomentProblem::integrate(const Polynomial& p, MeasureId id) const {
  const MeasureSpec& mu = measure(id);
  LinearForm form;
  std::vector<bool> in_measure(model.vars->size(), false);
  for (auto v : mu.vars) in_measure[v] = true;
  std::vector<bool> unknown(model.vars->size(), false);
  for (auto v : mu.unknown_vars) unknown[v] = true;

  for (const auto& [m, c] : p.terms()) {
    Monomial free_part(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      if (!in_measure[i])
        throw std::invalid_argument(std::string("polynomial uses variable '") + model.vars->name(i) +
                                    "' which is not a variable of the " + to_string(id) + " measure");
      if (unknown[i]) free_part[i] = m[i];
    }
    const double known = mu.id == MeasureId::kTrajectory ? 1.0 : known_moment(mu.known_factors, m);
    if (mu.known()) {
      form.constant += c * known;
      continue;
    }
    auto idx = mu.unknown_basis.find(free_part);
    if (!idx) throw std::logic_error("monomial degree exceeds the truncation of the " + std::string(to_string(id)) + " measure");
    form.add(mu.offset + *idx, c * known);
  }
  form.compress();
  return form;
}

namespace {

Polynomial normalize_time(const Polynomial& p, const VarSetPtr& vars, double scale, double multiplier) {
  Eigen::VectorXd f = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(vars->size()));
  f(static_cast<Eigen::Index>(vars->time_index())) = scale;
  return scale_variables(p, f) * multiplier;
}

}  // namespace

MomentProblem build_moment_problem(const OcpProblem& p, const DegreePlan& plan) {
  MomentProblem mp;
  mp.plan = plan;
  InternalModel& model = mp.model;

  // Variables: add time when the trajectory needs it.
  VarSetPtr vars = plan.time_in_trajectory ? std::make_shared<const VarSet>(p.vars->with_time()) : p.vars;
  model.vars = vars;
  const VarSet& vs = *vars;
  model.time_in_trajectory = plan.time_in_trajectory;
  model.test_time = plan.time_dependent_tests;
  model.fixed_horizon = !p.horizon.is_free();

  for (const auto& f : p.dynamics) model.dynamics.push_back(f.rebase(vars));
  model.running_cost = p.scost.rebase(vars);
  model.final_cost = p.fcost.rebase(vars);
  for (const auto& c : p.tconstraints) model.trajectory_constraints.push_back({c.lhs.rebase(vars), c.relation});
  for (const auto& c : p.sconstraints) model.integral_integrands.push_back(c.integrand.rebase(vars));

  auto rebase_boundary = [&](const BoundarySpec& b) {
    BoundarySpec r;
    // Indices shift by one when time was inserted in front.
    const std::size_t shift = (vars != p.vars && !p.vars->has_time()) ? 1 : 0;
    auto shifted = [shift](std::vector<std::size_t> v) {
      for (auto& i : v) i += shift;
      return v;
    };
    if (b.dirac) {
      r.dirac = *b.dirac;
      r.dirac->variables = shifted(b.dirac->variables);
    }
    if (b.uniform) {
      r.uniform = *b.uniform;
      r.uniform->variables = shifted(b.uniform->variables);
    }
    r.free.variables = shifted(b.free.variables);
    for (const auto& c : b.free.constraints) r.free.constraints.push_back({c.lhs.rebase(vars), c.relation});
    return r;
  };
  const BoundarySpec initial = rebase_boundary(p.initial);
  const BoundarySpec final = rebase_boundary(p.final);

  // Time normalization to [0, 1].
  std::optional<SupportConstraint> time_support;
  if (plan.time_in_trajectory) {
    double scale = 0.0;
    if (model.fixed_horizon) {
      scale = p.horizon.length();
    } else {
      if (!p.tmax)
        throw std::invalid_argument(
            "free horizon with time-dependent data or test functions requires an explicit tmax");
      scale = *p.tmax;
      model.final_time_free = true;
    }
    model.time_scale = scale;
    for (auto& f : model.dynamics) f = normalize_time(f, vars, scale, scale);
    model.running_cost = normalize_time(model.running_cost, vars, scale, scale);
    for (auto& c : model.trajectory_constraints) c.lhs = normalize_time(c.lhs, vars, scale, 1.0);
    for (auto& g : model.integral_integrands) g = normalize_time(g, vars, scale, scale);
    const Polynomial t = Polynomial::variable(vars, vs.time_index());
    time_support = SupportConstraint{t * (Polynomial(vars, 1.0) - t), SupportRelation::kNonNegative};
    model.horizon = 1.0;
  } else if (model.fixed_horizon) {
    model.horizon = p.horizon.length();
  }

  // Measures.
  MeasureSpec traj;
  traj.id = MeasureId::kTrajectory;
  if (plan.time_in_trajectory) traj.vars.push_back(vs.time_index());
  for (std::size_t i = 0; i < vs.num_states(); ++i) traj.vars.push_back(vs.state_index(i));
  for (std::size_t j = 0; j < vs.num_inputs(); ++j) traj.vars.push_back(vs.input_index(j));
  traj.unknown_vars = traj.vars;
  traj.constraints = model.trajectory_constraints;
  if (time_support) traj.constraints.push_back(*time_support);
  traj.degree = plan.trajectory_degree;

  auto boundary_measure = [&](MeasureId id, const BoundarySpec& b, int degree, bool with_time) {
    MeasureSpec m;
    m.id = id;
    for (std::size_t i = 0; i < vs.num_states(); ++i) m.vars.push_back(vs.state_index(i));
    m.known_factors.dirac = b.dirac;
    m.known_factors.uniform = b.uniform;
    m.unknown_vars = b.free.variables;
    m.constraints = b.free.constraints;
    if (with_time) {
      m.vars.insert(m.vars.begin(), vs.time_index());
      m.unknown_vars.insert(m.unknown_vars.begin(), vs.time_index());
      m.constraints.push_back(*time_support);
    }
    m.degree = degree;
    return m;
  };

  mp.measures.push_back(std::move(traj));
  mp.measures.push_back(boundary_measure(MeasureId::kInitial, initial, plan.initial_degree, false));
  mp.measures.push_back(boundary_measure(MeasureId::kFinal, final, plan.final_degree, model.final_time_free));

  std::size_t offset = 0;
  for (auto& m : mp.measures) {
    if (m.known()) continue;
    m.unknown_basis = basis(vs.size(), m.unknown_vars, m.degree);
    m.offset = offset;
    offset += m.unknown_basis.size();
  }
  mp.num_unknowns = offset;

  // Liouville rows: <L w, mu> - <w(final), mu_F> + <w(0), mu_I> = 0.
  std::vector<std::size_t> test_vars;
  if (plan.time_dependent_tests) test_vars.push_back(vs.time_index());
  for (std::size_t i = 0; i < vs.num_states(); ++i) test_vars.push_back(vs.state_index(i));
  mp.test_monomials = monomials_up_to(vs.size(), test_vars, plan.tf_degree);

  for (const auto& w_mono : mp.test_monomials) {
    const Polynomial w = Polynomial::monomial(vars, w_mono);
    const Polynomial lw = lie_derivative(w, model.dynamics, plan.time_dependent_tests);
    Polynomial w_final = w;
    Polynomial w_initial = w;
    if (plan.time_dependent_tests) {
      w_initial = substitute(w, vs.time_index(), 0.0);
      if (!model.final_time_free) w_final = substitute(w, vs.time_index(), 1.0);
    }
    LinearForm row = mp.integrate(lw, MeasureId::kTrajectory);
    LinearForm fin = mp.integrate(w_final, MeasureId::kFinal);
    fin *= -1.0;
    row += fin;
    row += mp.integrate(w_initial, MeasureId::kInitial);
    row.compress();
    EqualityRow eq{row.terms, -row.constant, {RowTag::Kind::kLiouville, w_mono, 0}};
    mp.equalities.push_back(std::move(eq));
  }

  // Mass rows.
  const Polynomial one(vars, 1.0);
  auto mass_row = [&](MeasureId id, double mass, RowTag::Kind kind) {
    LinearForm f = mp.integrate(one, id);
    mp.equalities.push_back({f.terms, mass - f.constant, {kind, Monomial(), 0}});
  };
  if (!mp.measure(MeasureId::kInitial).known()) mass_row(MeasureId::kInitial, 1.0, RowTag::Kind::kMassInitial);
  if (!mp.measure(MeasureId::kFinal).known()) mass_row(MeasureId::kFinal, 1.0, RowTag::Kind::kMassFinal);
  if (model.fixed_horizon) mass_row(MeasureId::kTrajectory, model.horizon, RowTag::Kind::kMassTrajectory);

  // Integral constraints.
  for (std::size_t j = 0; j < p.sconstraints.size(); ++j) {
    const auto& sc = p.sconstraints[j];
    LinearForm f = mp.integrate(model.integral_integrands[j], MeasureId::kTrajectory);
    if (sc.relation == MomentRelation::kEqual) {
      mp.equalities.push_back({f.terms, sc.bound - f.constant, {RowTag::Kind::kIntegral, Monomial(), j}});
    } else {
      const double sign = sc.relation == MomentRelation::kGreaterEqual ? 1.0 : -1.0;
      f.constant -= sc.bound;
      f *= sign;
      mp.inequalities.push_back({f, j, sign});
    }
  }

  // Objective.
  if (model.running_cost.is_zero() && model.final_cost.is_zero()) {
    model.trace_objective = true;
    const auto& tb = mp.measure(MeasureId::kTrajectory);
    Polynomial trace(vars);
    for (const auto& m : monomials_up_to(vs.size(), tb.unknown_vars, plan.trajectory_order()))
      trace.add_term(m * m, 1.0);
    model.running_cost = trace;
  }
  mp.objective = mp.integrate(model.running_cost, MeasureId::kTrajectory);
  mp.objective += mp.integrate(model.final_cost, MeasureId::kFinal);
  mp.objective.compress();
  return mp;
}

// ---------------------------------------------------------------------------
// Conic program

Eigen::MatrixXd PsdBlock::evaluate(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(size, size);
  for (const auto& e : entries) {
    const double v = e.coef * (e.var < 0 ? 1.0 : y(e.var));
    M(e.row, e.col) += v;
    if (e.row != e.col) M(e.col, e.row) += v;
  }
  return M;
}

namespace {

void add_localizing(PsdBlock& block, const MeasureSpec& mu, const Polynomial& g, int order) {
  const auto sub = monomials_up_to(mu.unknown_basis.nvars(), mu.unknown_vars, order);
  block.size = static_cast<int>(sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i) {
    for (std::size_t j = i; j < sub.size(); ++j) {
      const Monomial bij = sub[i] * sub[j];
      std::map<std::size_t, double> acc;
      for (const auto& [m, c] : g.terms()) acc[mu.offset + mu.unknown_basis.index(m * bij)] += c;
      for (const auto& [v, c] : acc) {
        if (c != 0.0) block.entries.push_back({static_cast<int>(v), static_cast<int>(i), static_cast<int>(j), c});
      }
    }
  }
}

}  // namespace

ConicProgram assemble_conic(const MomentProblem& mp) {
  ConicProgram cp;
  cp.num_vars = mp.num_unknowns;
  cp.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mp.num_unknowns));
  for (const auto& [v, c] : mp.objective.terms) cp.c(static_cast<Eigen::Index>(v)) += c;
  cp.offset = mp.objective.constant;
  cp.equalities = mp.equalities;
  cp.num_problem_equalities = mp.equalities.size();
  cp.nonneg.reserve(mp.inequalities.size());
  for (const auto& r : mp.inequalities) cp.nonneg.push_back(r.form);
  cp.measures = mp.measures;

  for (const auto& mu : mp.measures) {
    if (mu.known()) continue;
    const int r = mu.degree / 2;

    PsdBlock moment_block;
    moment_block.measure = mu.id;
    moment_block.label = std::string(to_string(mu.id)) + " moment matrix";
    const auto sub = monomials_up_to(mu.unknown_basis.nvars(), mu.unknown_vars, r);
    moment_block.size = static_cast<int>(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
      for (std::size_t j = i; j < sub.size(); ++j) {
        const auto idx = mu.offset + mu.unknown_basis.index(sub[i] * sub[j]);
        moment_block.entries.push_back({static_cast<int>(idx), static_cast<int>(i), static_cast<int>(j), 1.0});
      }
    }
    cp.blocks.push_back(std::move(moment_block));

    for (std::size_t k = 0; k < mu.constraints.size(); ++k) {
      const auto& con = mu.constraints[k];
      const int dg = std::max(con.lhs.degree(), 0);
      if (con.is_equality()) {
        if (dg > mu.degree)
          throw std::invalid_argument(std::string("support equality degree exceeds the truncation of the ") +
                                      to_string(mu.id) + " measure");
        for (const auto& m : monomials_up_to(mu.unknown_basis.nvars(), mu.unknown_vars, mu.degree - dg)) {
          std::map<std::size_t, double> acc;
          for (const auto& [gm, c] : con.lhs.terms()) acc[mu.offset + mu.unknown_basis.index(gm * m)] += c;
          EqualityRow row;
          for (const auto& [v, c] : acc) {
            if (c != 0.0) row.terms.emplace_back(v, c);
          }
          row.tag = {RowTag::Kind::kSupportEquality, m, k};
          cp.equalities.push_back(std::move(row));
        }
        continue;
      }
      const int order = r - half_ceil(dg);
      if (order < 0)
        throw std::invalid_argument(std::string("localizing order negative for a constraint on the ") +
                                    to_string(mu.id) + " measure; increase the relaxation degree");
      PsdBlock loc;
      loc.measure = mu.id;
      loc.localizing = true;
      loc.label = std::string(to_string(mu.id)) + " localizing " + std::to_string(k);
      add_localizing(loc, mu, con.lhs, order);
      cp.blocks.push_back(std::move(loc));
    }
  }
  return cp;
}

void dump_conic(const ConicProgram& cp, std::ostream& os) {
  char buf[128];
  os << "vars " << cp.num_vars << "\n";
  for (Eigen::Index i = 0; i < cp.c.size(); ++i) {
    if (cp.c(i) == 0.0) continue;
    std::snprintf(buf, sizeof(buf), "obj %ld %.17g\n", static_cast<long>(i), cp.c(i));
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "offset %.17g\n", cp.offset);
  os << buf;
  for (std::size_t r = 0; r < cp.equalities.size(); ++r) {
    for (const auto& [v, c] : cp.equalities[r].terms) {
      std::snprintf(buf, sizeof(buf), "eq %zu %zu %.17g\n", r, v, c);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "rhs %zu %.17g\n", r, cp.equalities[r].rhs);
    os << buf;
  }
  for (std::size_t b = 0; b < cp.blocks.size(); ++b) {
    for (const auto& e : cp.blocks[b].entries) {
      std::snprintf(buf, sizeof(buf), "psd %zu %d %d %d %.17g\n", b, e.row, e.col, e.var, e.coef);
      os << buf;
    }
  }
  for (std::size_t r = 0; r < cp.nonneg.size(); ++r) {
    for (const auto& [v, c] : cp.nonneg[r].terms) {
      std::snprintf(buf, sizeof(buf), "nonneg %zu %zu %.17g\n", r, v, c);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "nonneg %zu -1 %.17g\n", r, cp.nonneg[r].constant);
    os << buf;
  }
}

}  // namespace occmom
