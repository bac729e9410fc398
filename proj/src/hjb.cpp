#include "occmom/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iterator>
#include <optional>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "occmom/moments.hpp"

namespace occmom {

namespace {

double coef_inf(const Polynomial& p) {
  double m = 0.0;
  for (const auto& [mono, c] : p.terms()) m = std::max(m, std::abs(c));
  return m;
}

std::vector<std::size_t> remap(const std::vector<std::size_t>& idx, const VarSet& from, const VarSet& to) {
  std::vector<std::size_t> out;
  for (auto i : idx) out.push_back(to.index_of(from.name(i)));
  return out;
}

BoundarySpec rebase(const BoundarySpec& b, const VarSetPtr& from, const VarSetPtr& to) {
  BoundarySpec r;
  if (b.dirac) {
    r.dirac = *b.dirac;
    r.dirac->variables = remap(b.dirac->variables, *from, *to);
  }
  if (b.uniform) {
    r.uniform = *b.uniform;
    r.uniform->variables = remap(b.uniform->variables, *from, *to);
  }
  r.free.variables = remap(b.free.variables, *from, *to);
  for (const auto& c : b.free.constraints) r.free.constraints.push_back({c.lhs.rebase(to), c.relation});
  return r;
}

std::vector<SupportConstraint> rebase(const std::vector<SupportConstraint>& cs, const VarSetPtr& to) {
  std::vector<SupportConstraint> out;
  for (const auto& c : cs) out.push_back({c.lhs.rebase(to), c.relation});
  return out;
}

bool satisfied(const std::vector<SupportConstraint>& cs, const Eigen::VectorXd& z) {
  for (const auto& c : cs) {
    const double g = evaluate(c.lhs, z);
    const double tol = 1e-9 * (1.0 + coef_inf(c.lhs));
    if (c.is_equality() ? std::abs(g) > tol : g < -tol) return false;
  }
  return true;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0;
  double r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
    i /= static_cast<std::uint64_t>(base);
  }
  return r;
}

struct Axis {
  std::size_t var;
  double lo;
  double hi;
};

/// Points of a set given by sampled axes, fixed coordinates, Dirac points
/// cycled through, and constraints used for rejection.
struct SampleSet {
  std::size_t nvars = 0;
  std::vector<Axis> axes;
  std::vector<std::pair<std::size_t, double>> fixed;
  std::optional<DiracFactor> dirac;
  std::vector<SupportConstraint> constraints;

  Eigen::VectorXd base(std::uint64_t k) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nvars));
    for (const auto& [v, x] : fixed) z(static_cast<Eigen::Index>(v)) = x;
    if (dirac) {
      const auto col = static_cast<Eigen::Index>(k % static_cast<std::uint64_t>(dirac->points.cols()));
      for (std::size_t r = 0; r < dirac->variables.size(); ++r)
        z(static_cast<Eigen::Index>(dirac->variables[r])) = dirac->points(static_cast<Eigen::Index>(r), col);
    }
    return z;
  }

  std::uint64_t num_dirac() const { return dirac ? static_cast<std::uint64_t>(dirac->points.cols()) : 1; }

  template <typename Visit>
  int generate(const VerifyOptions& opts, Visit visit) const {
    int accepted = 0;
    const std::uint64_t nd = num_dirac();
    if (axes.empty()) {
      for (std::uint64_t k = 0; k < nd; ++k) {
        const Eigen::VectorXd z = base(k);
        if (satisfied(constraints, z)) {
          visit(z);
          ++accepted;
        }
      }
      return accepted;
    }
    if (opts.grid > 0) {
      const std::uint64_t K = static_cast<std::uint64_t>(opts.grid);
      std::uint64_t total = nd;
      for (std::size_t a = 0; a < axes.size(); ++a) total *= K;
      for (std::uint64_t i = 0; i < total; ++i) {
        Eigen::VectorXd z = base(i % nd);
        std::uint64_t rest = i / nd;
        for (const auto& ax : axes) {
          const std::uint64_t j = rest % K;
          rest /= K;
          const double s = K == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(K - 1);
          z(static_cast<Eigen::Index>(ax.var)) = ax.lo + s * (ax.hi - ax.lo);
        }
        if (satisfied(constraints, z)) {
          visit(z);
          ++accepted;
        }
      }
      return accepted;
    }
    if (axes.size() > std::size(kPrimes)) throw std::invalid_argument("too many sampled variables");
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> shift(axes.size());
    for (auto& s : shift) s = unit(rng);
    const std::uint64_t cap = 100 * static_cast<std::uint64_t>(std::max(opts.samples, 1));
    for (std::uint64_t i = 0; i < cap && accepted < opts.samples; ++i) {
      Eigen::VectorXd z = base(i % nd);
      for (std::size_t a = 0; a < axes.size(); ++a) {
        double s = radical_inverse(i + 1, kPrimes[a]) + shift[a];
        s -= std::floor(s);
        z(static_cast<Eigen::Index>(axes[a].var)) = axes[a].lo + s * (axes[a].hi - axes[a].lo);
      }
      if (satisfied(constraints, z)) {
        visit(z);
        ++accepted;
      }
    }
    return accepted;
  }
};

double data_radius(const OcpProblem& p) {
  double r = 1.0;
  auto from_box = [&](const std::vector<SupportConstraint>& cs) {
    const auto box = box_bounds(cs, p.vars->size());
    for (Eigen::Index i = 0; i < box.lower.size(); ++i) {
      if (std::isfinite(box.lower(i))) r = std::max(r, std::abs(box.lower(i)));
      if (std::isfinite(box.upper(i))) r = std::max(r, std::abs(box.upper(i)));
    }
  };
  auto from_boundary = [&](const BoundarySpec& b) {
    if (b.dirac) r = std::max(r, b.dirac->points.cwiseAbs().maxCoeff());
    if (b.uniform) r = std::max(r, b.uniform->box.cwiseAbs().maxCoeff());
    from_box(b.free.constraints);
  };
  from_box(p.tconstraints);
  from_boundary(p.initial);
  from_boundary(p.final);
  return 2.0 * r;
}

void add_free_axes(SampleSet& s, const std::vector<std::size_t>& vars, const std::vector<SupportConstraint>& cs,
                   double radius) {
  const auto box = box_bounds(cs, s.nvars);
  for (auto v : vars) {
    const auto i = static_cast<Eigen::Index>(v);
    const double lo = std::isfinite(box.lower(i)) ? box.lower(i) : -radius;
    const double hi = std::isfinite(box.upper(i)) ? box.upper(i) : radius;
    s.axes.push_back({v, lo, std::max(lo, hi)});
  }
}

SampleSet boundary_set(const BoundarySpec& b, std::size_t nvars, double radius) {
  SampleSet s;
  s.nvars = nvars;
  s.dirac = b.dirac;
  if (b.uniform) {
    for (std::size_t r = 0; r < b.uniform->variables.size(); ++r)
      s.axes.push_back({b.uniform->variables[r], b.uniform->box(static_cast<Eigen::Index>(r), 0),
                        b.uniform->box(static_cast<Eigen::Index>(r), 1)});
  }
  add_free_axes(s, b.free.variables, b.free.constraints, radius);
  s.constraints = b.free.constraints;
  return s;
}

/// For unconstrained inputs entering the residual at most quadratically,
/// replaces the sampled inputs by the exact minimizer; -inf when the residual
/// is unbounded below in the inputs. Empty when not applicable.
struct InputMinimizer {
  std::vector<std::size_t> inputs;
  std::vector<Polynomial> grad;
  std::vector<std::vector<Polynomial>> hess;

  static std::optional<InputMinimizer> make(const Polynomial& residual, const std::vector<SupportConstraint>& cs) {
    const VarSet& V = *residual.vars();
    if (V.num_inputs() == 0) return std::nullopt;
    InputMinimizer im;
    for (std::size_t j = 0; j < V.num_inputs(); ++j) im.inputs.push_back(V.input_index(j));
    for (const auto& c : cs)
      for (auto u : im.inputs)
        if (c.lhs.depends_on(u)) return std::nullopt;
    for (const auto& [m, c] : residual.terms()) {
      int d = 0;
      for (auto u : im.inputs) d += m[u];
      if (d > 2) return std::nullopt;
    }
    for (auto u : im.inputs) {
      im.grad.push_back(differentiate(residual, u));
      std::vector<Polynomial> row;
      for (auto w : im.inputs) row.push_back(differentiate(im.grad.back(), w));
      im.hess.push_back(std::move(row));
    }
    return im;
  }

  double value(const Polynomial& residual, Eigen::VectorXd z) const {
    const auto k = static_cast<Eigen::Index>(inputs.size());
    Eigen::VectorXd g(k);
    Eigen::MatrixXd H(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      g(i) = evaluate(grad[static_cast<std::size_t>(i)], z);
      for (Eigen::Index j = 0; j < k; ++j)
        H(i, j) = evaluate(hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], z);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    const double tiny = 1e-12 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::VectorXd step = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double lam = es.eigenvalues()(i);
      const double gi = es.eigenvectors().col(i).dot(g);
      if (lam < -tiny || (lam <= tiny && std::abs(gi) > tiny)) return -std::numeric_limits<double>::infinity();
      if (lam > tiny) step -= es.eigenvectors().col(i) * (gi / lam);
    }
    for (Eigen::Index i = 0; i < k; ++i) z(static_cast<Eigen::Index>(inputs[static_cast<std::size_t>(i)])) += step(i);
    return evaluate(residual, z);
  }
};

std::optional<double> horizon_end(const OcpProblem& p) {
  if (!p.horizon.is_free()) return p.horizon.length();
  return p.tmax;
}

}  // namespace

Polynomial compose(const Polynomial& p, std::size_t var, const Polynomial& q) {
  Polynomial out(p.vars(), 0.0);
  std::vector<Polynomial> powers{Polynomial(p.vars(), 1.0)};
  for (const auto& [m, c] : p.terms()) {
    while (static_cast<int>(powers.size()) <= m[var]) powers.push_back(powers.back() * q);
    Monomial rest = m;
    rest[var] = 0;
    out += Polynomial::monomial(p.vars(), rest, c) * powers[static_cast<std::size_t>(m[var])];
  }
  return out;
}

OcpProblem unscaled(const OcpProblem& p) {
  if (p.scaling.size() == 0 || (p.scaling.array() == 1.0).all()) return p;
  OcpProblem q = apply_scaling(p, p.scaling.cwiseInverse());
  q.scaling = Eigen::VectorXd::Ones(p.scaling.size());
  return q;
}

VerificationReport verify_subsolution(const OcpProblem& original, const ValueFunction& vf,
                                      const VerifyOptions& opts) {
  const VarSetPtr V = vf.v.vars();
  const VarSetPtr P = original.vars;
  const bool timed = V->has_time();
  const std::size_t nv = V->size();
  const double radius = opts.radius > 0.0 ? opts.radius : data_radius(original);

  VerificationReport rep;
  rep.seed = opts.seed;
  rep.lower_bound = vf.lower_bound;
  rep.eps = opts.eps >= 0.0 ? opts.eps : 1e-4 * (1.0 + coef_inf(vf.v));
  rep.eps_bound = opts.eps_bound >= 0.0 ? opts.eps_bound : 1e-5 * (1.0 + std::abs(vf.lower_bound));

  std::vector<Polynomial> f;
  for (const auto& fi : original.dynamics) f.push_back(fi.rebase(V));
  const Polynomial residual = lie_derivative(vf.v, f, timed) + vf.hjb_cost.rebase(V);
  const auto end = horizon_end(original);
  if (timed && !end) throw std::invalid_argument("time-dependent value function needs a horizon or tmax");

  // (i) trajectory set
  {
    SampleSet s;
    s.nvars = nv;
    if (timed) s.axes.push_back({V->time_index(), 0.0, *end});
    s.constraints = rebase(original.tconstraints, V);
    std::vector<std::size_t> vars;
    for (std::size_t i = 0; i < V->num_states(); ++i) vars.push_back(V->state_index(i));
    for (std::size_t j = 0; j < V->num_inputs(); ++j) vars.push_back(V->input_index(j));
    add_free_axes(s, vars, s.constraints, radius);
    const auto minimizer = InputMinimizer::make(residual, s.constraints);
    double mn = std::numeric_limits<double>::infinity();
    rep.hjb_points = s.generate(opts, [&](const Eigen::VectorXd& z) {
      mn = std::min(mn, evaluate(residual, z));
      if (minimizer) mn = std::min(mn, minimizer->value(residual, z));
    });
    rep.min_hjb_residual = mn;
    rep.hjb_ok = rep.hjb_points > 0 && mn >= -rep.eps;
  }

  // (ii) terminal set
  {
    SampleSet s = boundary_set(rebase(original.final, P, V), nv, radius);
    if (timed) {
      if (original.horizon.is_free())
        s.axes.insert(s.axes.begin(), Axis{V->time_index(), 0.0, *end});
      else
        s.fixed.emplace_back(V->time_index(), *end);
    }
    const Polynomial gap = vf.v - original.fcost.rebase(V);
    double mx = -std::numeric_limits<double>::infinity();
    rep.terminal_points = s.generate(opts, [&](const Eigen::VectorXd& z) { mx = std::max(mx, evaluate(gap, z)); });
    rep.max_terminal_violation = mx;
    rep.terminal_ok = rep.terminal_points > 0 && mx <= rep.eps;
  }

  // (iii) initial measure
  {
    const Polynomial v0 = timed ? substitute(vf.v, V->time_index(), 0.0) : vf.v;
    double adjust = 0.0;
    for (std::size_t j = 0; j < vf.integral_multipliers.size() && j < original.sconstraints.size(); ++j)
      adjust -= vf.integral_multipliers[j] * original.sconstraints[j].bound;
    const BoundarySpec init = rebase(original.initial, P, V);
    if (init.fully_known()) {
      double acc = 0.0;
      for (const auto& [m, c] : v0.terms()) acc += c * known_moment(init, m);
      rep.certified_bound = acc + adjust;
      rep.initial_points = 1;
    } else {
      const SampleSet s = boundary_set(init, nv, radius);
      double mn = std::numeric_limits<double>::infinity();
      rep.initial_points = s.generate(opts, [&](const Eigen::VectorXd& z) { mn = std::min(mn, evaluate(v0, z)); });
      rep.certified_bound = mn + adjust;
    }
    rep.bound_error = std::abs(rep.certified_bound - vf.lower_bound);
    rep.bound_ok = rep.initial_points > 0 && rep.bound_error <= rep.eps_bound;
  }
  return rep;
}

ValueFunction extract_subsolution(const OcpProblem& p, const MomentProblem& mp, const ConicSolution& sol,
                                  const VerifyOptions& opts, bool require_optimal) {
  if (require_optimal && sol.status != SolveStatus::kOptimal)
    throw std::logic_error("subsolution requested from a non-optimal solution");
  if (static_cast<std::size_t>(sol.eq_duals.size()) < mp.equalities.size() ||
      static_cast<std::size_t>(sol.nonneg_duals.size()) < mp.inequalities.size())
    throw std::invalid_argument("solution duals do not match the moment problem");
  const InternalModel& model = mp.model;

  VarSetPtr V = model.vars;
  if (!V->has_time() && model.fixed_horizon) V = std::make_shared<const VarSet>(V->with_time());

  ValueFunction vf;
  vf.tf_degree = mp.plan.tf_degree;
  vf.lower_bound = sol.lower_bound();
  vf.integral_multipliers.assign(p.sconstraints.size(), 0.0);

  Polynomial v(V, 0.0);
  double lambda_final = 0.0;
  double lambda_mass = 0.0;
  for (std::size_t r = 0; r < mp.equalities.size(); ++r) {
    const double lam = sol.eq_duals(static_cast<Eigen::Index>(r));
    const RowTag& tag = mp.equalities[r].tag;
    switch (tag.kind) {
      case RowTag::Kind::kLiouville:
        v -= Polynomial::monomial(model.vars, tag.test, lam).rebase(V);
        break;
      case RowTag::Kind::kMassFinal:
        lambda_final = lam;
        break;
      case RowTag::Kind::kMassTrajectory:
        lambda_mass = lam;
        break;
      case RowTag::Kind::kIntegral:
        vf.integral_multipliers[tag.index] = -lam;
        break;
      case RowTag::Kind::kMassInitial:
      case RowTag::Kind::kSupportEquality:
        break;
    }
  }
  for (std::size_t k = 0; k < mp.inequalities.size(); ++k) {
    const auto& row = mp.inequalities[k];
    vf.integral_multipliers[row.index] = -sol.nonneg_duals(static_cast<Eigen::Index>(k)) * row.sign;
  }
  v += Polynomial(V, lambda_final);
  if (model.fixed_horizon) {
    const Polynomial t = Polynomial::variable(V, V->time_index());
    v += (Polynomial(V, model.horizon) - t) * lambda_mass;
  }

  Polynomial h = model.running_cost.rebase(V);
  for (std::size_t j = 0; j < model.integral_integrands.size(); ++j)
    h += model.integral_integrands[j].rebase(V) * vf.integral_multipliers[j];

  // Internal z = original / factor; time also divided by the normalization.
  const VarSet& P = *p.vars;
  Eigen::VectorXd inv = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(V->size()));
  double time_factor = model.time_scale;
  for (std::size_t i = 0; i < V->size(); ++i) {
    const auto pi = P.find(V->name(i));
    const double s = pi && p.scaling.size() ? p.scaling(static_cast<Eigen::Index>(*pi)) : 1.0;
    if (V->is_time(i)) {
      time_factor = model.time_scale * s;
      inv(static_cast<Eigen::Index>(i)) = 1.0 / time_factor;
    } else {
      inv(static_cast<Eigen::Index>(i)) = 1.0 / s;
    }
  }
  vf.v = scale_variables(v, inv);
  vf.hjb_cost = scale_variables(h, inv) * (1.0 / time_factor);

  vf.verification = verify_subsolution(unscaled(p), vf, opts);
  if (!vf.verification.passed()) {
    const auto& r = vf.verification;
    throw SubsolutionError("subsolution contract violated: min HJB residual " + std::to_string(r.min_hjb_residual) +
                               ", terminal violation " + std::to_string(r.max_terminal_violation) +
                               ", bound error " + std::to_string(r.bound_error),
                           vf);
  }
  return vf;
}

namespace {

int input_degree(const Monomial& m, const VarSet& V) {
  int d = 0;
  for (std::size_t j = 0; j < V.num_inputs(); ++j) d += m[V.input_index(j)];
  return d;
}

struct AffineStructure {
  std::vector<std::vector<Polynomial>> B;  // n x m
  Eigen::MatrixXd R;
};

AffineStructure input_affine(const OcpProblem& original, const VarSetPtr& V) {
  const std::size_t n = V->num_states();
  const std::size_t m = V->num_inputs();
  if (m == 0) throw std::invalid_argument("problem has no inputs");
  AffineStructure s;
  s.B.assign(n, std::vector<Polynomial>(m, Polynomial(V, 0.0)));
  for (std::size_t i = 0; i < n; ++i) {
    const Polynomial fi = original.dynamics[i].rebase(V);
    for (const auto& [mono, c] : fi.terms()) {
      if (input_degree(mono, *V) > 1) throw std::invalid_argument("dynamics are not affine in the inputs");
    }
    for (std::size_t j = 0; j < m; ++j) s.B[i][j] = differentiate(fi, V->input_index(j));
  }
  s.R = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  const Polynomial h = original.scost.rebase(V);
  for (const auto& [mono, c] : h.terms()) {
    const int d = input_degree(mono, *V);
    if (d == 0) continue;
    if (d != 2 || mono.degree() != 2)
      throw std::invalid_argument("running cost is not of the form q(t, x) + u'Ru with constant R");
    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < m; ++j)
      for (int k = 0; k < mono[V->input_index(j)]; ++k) idx.push_back(static_cast<Eigen::Index>(j));
    if (idx[0] == idx[1]) {
      s.R(idx[0], idx[0]) += c;
    } else {
      s.R(idx[0], idx[1]) += c / 2;
      s.R(idx[1], idx[0]) += c / 2;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s.R);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("input weight R is not positive definite");
  return s;
}

}  // namespace

std::vector<Polynomial> synthesize_controller(const ValueFunction& vf, const OcpProblem& original) {
  const VarSetPtr V = vf.v.vars();
  const AffineStructure s = input_affine(original, V);
  const std::size_t n = V->num_states();
  const std::size_t m = V->num_inputs();
  std::vector<Polynomial> btg(m, Polynomial(V, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const Polynomial g = differentiate(vf.v, V->state_index(i));
    for (std::size_t j = 0; j < m; ++j) btg[j] += s.B[i][j] * g;
  }
  const Eigen::MatrixXd Rinv = s.R.llt().solve(Eigen::MatrixXd::Identity(s.R.rows(), s.R.cols()));
  std::vector<Polynomial> u(m, Polynomial(V, 0.0));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k)
      u[j] += btg[k] * (-0.5 * Rinv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
  return u;
}

double controller_stationarity(const ValueFunction& vf, const OcpProblem& original,
                               const std::vector<Polynomial>& u) {
  const VarSetPtr V = vf.v.vars();
  if (u.size() != V->num_inputs()) throw std::invalid_argument("controller size does not match the inputs");
  Polynomial q = original.scost.rebase(V);
  for (std::size_t i = 0; i < V->num_states(); ++i)
    q += differentiate(vf.v, V->state_index(i)) * original.dynamics[i].rebase(V);
  double worst = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    Polynomial d = differentiate(q, V->input_index(j));
    for (std::size_t k = 0; k < u.size(); ++k) d = compose(d, V->input_index(k), u[k].rebase(V));
    worst = std::max(worst, coef_inf(d));
  }
  return worst;
}

}  // namespace occmom
