// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "occmom/pipeline.hpp"
#include "occmom/sim.hpp"
#include "support/oracles.hpp"

using namespace occmom;
using namespace occmom::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string path(const char* name) { return std::string(OCCMOM_PROBLEMS) + "/" + name; }

// Reports reused across criteria.
struct Golden {
  SolveReport di14;
  std::vector<double> di_bounds;
  SolveReport exact;
  SolveReport nonlinear;
  SolveReport lq;
  SolveReport fixed;
};

Golden& golden() {
  static Golden g = [] {
    Golden out;
    const ProblemFile di = parse_problem_file(path("min_time_double_integrator.pocp"));
    for (int d = 4; d <= 14; d += 2) {
      SolveReport r = solve_problem(di, DegreeMode::moment(d));
      out.di_bounds.push_back(r.lower_bound);
      if (d == 14) out.di14 = std::move(r);
    }
    out.exact = solve_problem(parse_problem_file(path("exact_hjb.pocp")), DegreeMode::test_function(2));
    out.nonlinear = solve_problem(parse_problem_file(path("nonlinear_uniform.pocp")), DegreeMode::test_function(8));
    out.lq = solve_problem(parse_problem_file(path("scalar_lq.pocp")), DegreeMode::test_function(4));
    out.fixed = solve_problem(parse_problem_file(path("fixed_horizon_scaled.pocp")), DegreeMode::test_function(2));
    return out;
  }();
  return g;
}

Outcome min_time_bound() {
  const Golden& g = golden();
  const double b = g.di14.lower_bound;
  bool monotone = true, below = true;
  std::string seq;
  for (std::size_t k = 0; k < g.di_bounds.size(); ++k) {
    if (k > 0 && g.di_bounds[k] < g.di_bounds[k - 1] - 1e-6) monotone = false;
    if (g.di_bounds[k] > 3.5 + 1e-4) below = false;
    seq += fmt("%s%.6f", k ? " " : "", g.di_bounds[k]);
  }
  const bool in_range = b >= 3.47 && b <= 3.5001 && std::abs(b - 3.4988) <= 0.01;
  return {in_range && monotone && below, fmt("mom 14 bound %.6f (status %s); mom 4..14: %s", b, to_string(g.di14.status),
                                             seq.c_str())};
}

Outcome exact_hjb() {
  const SolveReport& r = golden().exact;
  if (!r.value_function) return {false, "no value function"};
  const Polynomial& v = r.value_function->v;
  const Monomial x2sq = Monomial(std::vector<int>{0, 2, 0});
  double other = 0.0;
  for (const auto& [m, c] : v.terms())
    if (m != x2sq) other = std::max(other, std::abs(c));
  const double a = v.coeff(x2sq);
  const bool ok = std::abs(a - 1.0) <= 1e-3 && other <= 1e-3 && std::abs(r.lower_bound - 1.0) <= 1e-3;
  return {ok, fmt("x2^2 coefficient %.8f, largest other %.2e, bound %.9f", a, other, r.lower_bound)};
}

Outcome controller_synthesis() {
  const SolveReport& r = golden().nonlinear;
  if (!r.value_function || r.controller.size() != 1) return {false, "no controller: " + r.controller_error};
  const Polynomial& v = r.value_function->v;
  const Polynomial expected = -50.0 * differentiate(v, "x2");
  const Polynomial diff = r.controller[0] - expected;
  double worst = 0.0;
  for (const auto& [m, c] : diff.terms()) worst = std::max(worst, std::abs(c));
  const bool identity = worst <= 1e-12 * (1.0 + r.controller[0].num_terms());

  const OcpProblem p = parse_problem_file(path("nonlinear_uniform.pocp")).problem;
  int reached = 0, total = 0, below_value = 0, below_bound = 0;
  double worst_gap = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const Eigen::Vector2d x0(-1.0 + 0.5 * i, -1.0 + 0.5 * j);
      const Trajectory tr = simulate(p, r.controller, x0, 20.0, 1e-3);
      ++total;
      double closest = std::numeric_limits<double>::infinity();
      for (const auto& x : tr.states) closest = std::min(closest, x.norm());
      if (!tr.blew_up && closest <= 0.1) ++reached;
      const double v0 = evaluate(v, Eigen::Vector3d(x0(0), x0(1), 0.0));
      worst_gap = std::min(worst_gap, tr.running_cost - v0);
      if (tr.running_cost < v0 - 1e-3 * (1.0 + std::abs(v0))) ++below_value;
      if (tr.running_cost < r.lower_bound - 1e-3 * (1.0 + std::abs(r.lower_bound))) ++below_bound;
    }
  }
  const bool ok = identity && reached >= 0.9 * total && below_value == 0;
  return {ok, fmt("u = -50 dv/dx2 to %.1e; %d/%d grid points reach |x| <= 0.1; %d costs below v(0,x0) "
                  "(worst cost - v %.2e); %d below the averaged bound %.6f",
                  worst, reached, total, below_value, worst_gap, below_bound, r.lower_bound)};
}

Outcome analytic_lq() {
  const SolveReport& r = golden().lq;
  if (r.controller.size() != 1) return {false, "no controller: " + r.controller_error};
  double worst = 0.0;
  for (int k = 0; k <= 200; ++k) {
    const double x = -1.0 + 0.01 * k;
    worst = std::max(worst, std::abs(evaluate(r.controller[0], Eigen::Vector2d(x, 0.0)) + x));
  }
  const bool ok = std::abs(r.lower_bound - 1.0) <= 1e-4 && worst <= 1e-3;
  return {ok, fmt("bound %.9f, max |u(x) + x| on [-1, 1] %.2e", r.lower_bound, worst)};
}

// Mixture oracle: weighted sums of std::pow, independent of the library path.
double mixture_oracle(const DiracFactor& f, const Monomial& m) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.points.cols(); ++j) {
    double term = f.weights(j);
    for (std::size_t i = 0; i < f.variables.size(); ++i) term *= std::pow(f.points(static_cast<Eigen::Index>(i), j), m[i]);
    acc += term;
  }
  return acc;
}

Outcome moment_oracles() {
  Rng rng(2024);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.integer(1, 3));
    std::vector<std::size_t> vars(n);
    for (std::size_t i = 0; i < n; ++i) vars[i] = i;
    const MomentBasis b = basis(n, vars, 12);
    UniformFactor u;
    u.variables = vars;
    u.box = random_box(rng, n);
    const auto yu = known_moments(u, b);
    const DiracFactor d = random_mixture(rng, vars, rng.integer(1, 5));
    const auto yd = known_moments(d, b);
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double q = box_average_quadrature(u.box, b[k].exponents, 16);
      worst = std::max(worst, std::abs(yu[k] - q) / (1.0 + std::abs(q)));
      const double o = mixture_oracle(d, b[k]);
      worst = std::max(worst, std::abs(yd[k] - o) / (1.0 + std::abs(o)));
      checked += 2;
    }
  }
  return {worst <= 1e-10, fmt("%d moments, worst relative error %.2e", checked, worst)};
}

Outcome liouville_rows() {
  const OcpProblem p = parse_problem_file(path("min_time_double_integrator.pocp")).problem;
  const MomentProblem mp = build_moment_problem(p, resolve_degrees(p, DegreeMode::moment(8)));
  const Trajectory tr = simulate(
      p, [](double t, const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, bang_bang_input(t)); },
      Eigen::Vector2d(1, 1), 3.5, 1e-4, SimOptions{0.0});
  const MeasureSpec& mu = mp.measure(MeasureId::kTrajectory);
  const auto ys = empirical_moments(tr, mu.unknown_basis);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mp.num_unknowns));
  for (std::size_t k = 0; k < ys.size(); ++k) y(static_cast<Eigen::Index>(mu.offset + k)) = ys[k];
  double worst = 0.0;
  for (const auto& row : mp.equalities) {
    double acc = -row.rhs;
    for (const auto& [v, c] : row.terms) acc += c * y(static_cast<Eigen::Index>(v));
    worst = std::max(worst, std::abs(acc));
  }
  return {worst <= 1e-3, fmt("%zu rows, worst residual %.2e", mp.equalities.size(), worst)};
}

Outcome structural() {
  const Golden& g = golden();
  std::vector<const SolveReport*> all = {&g.di14, &g.exact, &g.nonlinear, &g.lq, &g.fixed};
  // Reported matrices are in original units (u^8 moments reach 1e18), so
  // definiteness is measured relative to the largest eigenvalue.
  double min_eig = std::numeric_limits<double>::infinity();
  bool hankel = true;
  for (const SolveReport* r : all) {
    for (const auto& m : r->measures) {
      if (m.matrix.size() == 0) continue;
      const Eigen::VectorXd ev =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.matrix, Eigen::EigenvaluesOnly).eigenvalues();
      min_eig = std::min(min_eig, ev(0) / std::max(1.0, ev(ev.size() - 1)));
      const auto n = m.matrix.rows();
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          if (m.matrix(i, j) != m.moments[m.basis.index(m.basis[static_cast<std::size_t>(i)] *
                                                          m.basis[static_cast<std::size_t>(j)])])
            hankel = false;
    }
  }

  std::string contract;
  bool contract_ok = true;
  for (const auto& [name, r] : {std::pair{"double integrator", &g.di14}, std::pair{"nonlinear", &g.nonlinear},
                                std::pair{"exact hjb", &g.exact}}) {
    const bool ok = r->value_function && r->value_function->verification.passed();
    contract_ok = contract_ok && ok;
    contract += fmt("%s%s %s", contract.empty() ? "" : ", ", name, ok ? "ok" : "FAIL");
  }

  Rng rng(7);
  const auto scaling_change = [&](const char* file, DegreeMode mode) {
    ProblemFile pf = parse_problem_file(path(file));
    const double base = solve_problem(pf, mode).lower_bound;
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd f = pf.scale ? *pf.scale : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(pf.problem.vars->size()));
      for (Eigen::Index i = 0; i < f.size(); ++i)
        if (!pf.problem.vars->is_time(static_cast<std::size_t>(i))) f(i) *= rng.uniform(0.5, 2.0);
      ProblemFile scaled = pf;
      scaled.scale = f;
      worst = std::max(worst, std::abs(solve_problem(scaled, mode).lower_bound - base) / (1.0 + std::abs(base)));
    }
    return worst;
  };
  const double worst_scale = std::max({scaling_change("scalar_lq.pocp", DegreeMode::test_function(4)),
                                       scaling_change("exact_hjb.pocp", DegreeMode::test_function(2)),
                                       scaling_change("fixed_horizon_scaled.pocp", DegreeMode::test_function(2))});
  // Not part of the verdict: the relaxation has unbounded input support and
  // the stopping point drifts with conditioning.
  const double nonlinear_scale = scaling_change("nonlinear_uniform.pocp", DegreeMode::test_function(8));

  const bool ok = min_eig >= -1e-6 && hankel && contract_ok && worst_scale <= 1e-5;
  return {ok, fmt("relative min eigenvalue %.2e, hankel %s, contract: %s, scaling change %.2e "
                  "(nonlinear problem, informational: %.2e)",
                  min_eig, hankel ? "exact" : "BROKEN", contract.c_str(), worst_scale, nonlinear_scale)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"min-time double integrator bound", min_time_bound},
      {"exact HJB recovery", exact_hjb},
      {"controller synthesis and closed loop", controller_synthesis},
      {"scalar LQ oracle", analytic_lq},
      {"moment oracles", moment_oracles},
      {"Liouville rows on bang-bang moments", liouville_rows},
      {"structural invariants", structural},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
