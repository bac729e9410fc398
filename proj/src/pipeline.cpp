#include "occmom/pipeline.hpp"

#include <chrono>
#include <cmath>

namespace occmom {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Internal moments to original variables: each variable z_i carries its
/// factor, and the trajectory measure one more power of the time factor.
void unscale_moments(std::vector<MeasureMoments>& ms, const OcpProblem& p, const InternalModel& model) {
  const VarSet& V = *model.vars;
  Eigen::VectorXd f = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(V.size()));
  double time_factor = model.time_scale;
  for (std::size_t i = 0; i < V.size(); ++i) {
    const auto pi = p.vars->find(V.name(i));
    const double s = pi && p.scaling.size() ? p.scaling(static_cast<Eigen::Index>(*pi)) : 1.0;
    if (V.is_time(i)) {
      time_factor = model.time_scale * s;
      f(static_cast<Eigen::Index>(i)) = time_factor;
    } else {
      f(static_cast<Eigen::Index>(i)) = s;
    }
  }
  for (auto& m : ms) {
    const double mass = m.id == MeasureId::kTrajectory ? time_factor : 1.0;
    for (std::size_t k = 0; k < m.moments.size(); ++k) {
      double c = mass;
      for (std::size_t i = 0; i < m.basis.nvars(); ++i) c *= std::pow(f(static_cast<Eigen::Index>(i)), m.basis[k][i]);
      m.moments[k] *= c;
    }
    m.matrix = moment_matrix(m.basis, m.moments, m.basis.degree() / 2);
  }
}

}  // namespace

int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return 0;
    case SolveStatus::kInfeasible:
    case SolveStatus::kUnbounded:
      return 2;
    case SolveStatus::kNumericalFailure:
    case SolveStatus::kIterationLimit:
      return 3;
  }
  return 3;
}

SolveReport solve_problem(const ProblemFile& pf, DegreeMode mode, const PipelineOptions& opts) {
  SolveReport r;
  r.degree_mode = mode;
  r.seed = pf.seed;
  r.problem = pf.text;

  auto t0 = std::chrono::steady_clock::now();
  const OcpProblem p = pf.solver_problem();
  const DegreePlan plan = resolve_degrees(p, mode);
  const MomentProblem mp = build_moment_problem(p, plan);
  const ConicProgram cp = assemble_conic(mp);
  r.tf_degree = plan.tf_degree;
  r.timings["build"] = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const ConicSolution sol = solve_conic(cp, opts.solver);
  r.timings["solve"] = seconds_since(t0);
  r.status = sol.status;
  r.message = sol.message;
  r.lower_bound = sol.lower_bound();
  r.dual_objective = sol.dual_objective;
  r.residuals = sol.residuals;
  r.iterations = sol.iterations;
  if (sol.status == SolveStatus::kInfeasible || sol.status == SolveStatus::kUnbounded) return r;

  t0 = std::chrono::steady_clock::now();
  r.measures = extract_moment_matrices(sol, cp, false);
  unscale_moments(r.measures, p, mp.model);

  VerifyOptions vo = opts.verify;
  vo.seed = pf.seed;
  ValueFunction vf;
  try {
    vf = extract_subsolution(p, mp, sol, vo, false);
  } catch (const SubsolutionError& e) {
    vf = e.value_function();
  }
  r.value_function = vf;
  try {
    r.controller = synthesize_controller(vf, pf.problem);
  } catch (const std::invalid_argument& e) {
    r.controller_error = e.what();
  }
  r.timings["hjb"] = seconds_since(t0);
  return r;
}

}  // namespace occmom
