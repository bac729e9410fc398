#pragma once

#include "occmom/hjb.hpp"
#include "occmom/problem_file.hpp"
#include "occmom/relaxation.hpp"
#include "occmom/report.hpp"
#include "occmom/solver.hpp"

namespace occmom {

struct PipelineOptions {
  SolverOptions solver;
  VerifyOptions verify;  // seed is taken from the problem file
};

/// Degrees, moment problem, conic solve, moment matrices, subsolution and
/// controller. Moments, value function and controller are reported in the
/// original variables and time.
SolveReport solve_problem(const ProblemFile& pf, DegreeMode mode, const PipelineOptions& opts = {});

/// 0 optimal, 2 infeasible or unbounded, 3 numerical failure or iteration limit.
int exit_code(SolveStatus s);

}  // namespace occmom
