// Command-line driver: solve, simulate, verify.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "occmom/pipeline.hpp"
#include "occmom/sim.hpp"

using namespace occmom;

namespace {

constexpr int kUsage = 64;
constexpr int kDataError = 65;
constexpr int kIoError = 74;

struct SolveArgs {
  std::string file;
  int mom = -1;
  int tf = -1;
  std::string out;
  int samples = 10000;
  int max_iterations = 200;
  bool verbose = false;
};

struct SimulateArgs {
  std::string file;
  std::string report;
  std::string x0;
  double tmax = 20.0;
  double dt = 1e-3;
  double stop_radius = 1e-3;
  std::string csv;
};

struct VerifyArgs {
  std::string report;
  int grid = 11;
  int samples = 0;
};

void print_verification(const VerificationReport& v) {
  std::printf("hjb residual min %.6g over %d points (tolerance %.3g): %s\n", v.min_hjb_residual, v.hjb_points, v.eps,
              v.hjb_ok ? "ok" : "FAIL");
  std::printf("terminal violation max %.6g over %d points (tolerance %.3g): %s\n", v.max_terminal_violation,
              v.terminal_points, v.eps, v.terminal_ok ? "ok" : "FAIL");
  std::printf("bound match: certified %.10g vs lower bound %.10g, error %.3g (tolerance %.3g): %s\n",
              v.certified_bound, v.lower_bound, v.bound_error, v.eps_bound, v.bound_ok ? "ok" : "FAIL");
}

int cmd_solve(const SolveArgs& a) {
  if ((a.mom < 0) == (a.tf < 0)) {
    std::fprintf(stderr, "solve: exactly one of --mom-degree or --tf-degree is required\n");
    return kUsage;
  }
  ProblemFile pf;
  try {
    pf = parse_problem_file(a.file);
  } catch (const ProblemFileError& e) {
    std::fprintf(stderr, "%s: %s\n", a.file.c_str(), e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  PipelineOptions opts;
  opts.solver.verbose = a.verbose;
  opts.solver.max_iterations = a.max_iterations;
  opts.verify.samples = a.samples;
  const DegreeMode mode = a.mom >= 0 ? DegreeMode::moment(a.mom) : DegreeMode::test_function(a.tf);
  SolveReport r;
  try {
    r = solve_problem(pf, mode, opts);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "solve: %s\n", e.what());
    return kDataError;
  }
  try {
    if (a.out.empty())
      std::cout << to_json(r);
    else
      write_report(r, a.out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  std::fprintf(stderr, "status %s, lower bound %.10g, tf degree %d\n", to_string(r.status), r.lower_bound,
               r.tf_degree);
  if (r.value_function && !r.value_function->verification.passed())
    std::fprintf(stderr, "warning: value function fails its sampled checks\n");
  return exit_code(r.status);
}

int cmd_simulate(const SimulateArgs& a) {
  ProblemFile pf;
  SolveReport r;
  try {
    pf = parse_problem_file(a.file);
    r = read_report(a.report);
  } catch (const ProblemFileError& e) {
    std::fprintf(stderr, "%s: %s\n", a.file.c_str(), e.what());
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "%s: %s\n", a.report.c_str(), e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  if (r.controller.empty()) {
    std::fprintf(stderr, "report has no controller%s%s\n", r.controller_error.empty() ? "" : ": ",
                 r.controller_error.c_str());
    return kDataError;
  }
  const OcpProblem& p = pf.problem;
  std::vector<double> vals;
  {
    std::stringstream ss(a.x0);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(item, &used));
        if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        std::fprintf(stderr, "simulate: bad --x0 entry '%s'\n", item.c_str());
        return kUsage;
      }
    }
  }
  if (vals.size() != p.vars->num_states()) {
    std::fprintf(stderr, "simulate: --x0 has %zu entries, the problem has %zu states\n", vals.size(),
                 p.vars->num_states());
    return kUsage;
  }
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  Trajectory tr;
  try {
    tr = simulate(p, r.controller, x0, a.tmax, a.dt, SimOptions{a.stop_radius});
    if (!a.csv.empty()) export_csv(tr, a.csv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "simulate: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  const Eigen::VectorXd xe = tr.states.back();
  Eigen::VectorXd zf = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.vars->size()));
  for (std::size_t i = 0; i < p.vars->num_states(); ++i)
    zf(static_cast<Eigen::Index>(p.vars->state_index(i))) = xe(static_cast<Eigen::Index>(i));
  const double total = tr.running_cost + evaluate(p.fcost, zf);
  std::printf("end time %.6g, final state norm %.6g, nodes %zu\n", tr.end_time(), xe.norm(), tr.size());
  std::printf("achieved cost %.10g (running %.10g)\n", total, tr.running_cost);
  std::printf("reported lower bound %.10g\n", r.lower_bound);
  if (r.value_function) {
    const auto& v = r.value_function->v;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.varset().size()));
    for (std::size_t i = 0; i < v.varset().num_states(); ++i)
      z(static_cast<Eigen::Index>(v.varset().state_index(i))) = x0(static_cast<Eigen::Index>(i));
    const double v0 = evaluate(v, z);
    std::printf("value function at x0 %.10g: achieved cost is %s it\n", v0, total >= v0 - 1e-3 * (1 + std::abs(v0)) ? "above" : "BELOW");
  }
  if (tr.blew_up) {
    std::fprintf(stderr, "simulate: %s\n", tr.message.c_str());
    return 3;
  }
  return 0;
}

int cmd_verify(const VerifyArgs& a) {
  SolveReport r;
  ProblemFile pf;
  try {
    r = read_report(a.report);
    pf = parse_problem_text(r.problem);
  } catch (const ProblemFileError& e) {
    std::fprintf(stderr, "embedded problem: %s\n", e.what());
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "%s: %s\n", a.report.c_str(), e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  if (!r.value_function) {
    std::fprintf(stderr, "report has no value function\n");
    return kDataError;
  }
  VerifyOptions vo;
  vo.seed = r.seed;
  if (a.samples > 0) {
    vo.samples = a.samples;
  } else {
    vo.grid = std::max(a.grid, 1);
  }
  VerificationReport v;
  try {
    v = verify_subsolution(pf.problem, *r.value_function, vo);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "verify: %s\n", e.what());
    return kDataError;
  }
  print_verification(v);
  return v.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment relaxations of polynomial optimal control problems"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve a relaxation and write a JSON report");
  solve->add_option("file", sa.file, "Problem file")->required();
  auto* mom = solve->add_option("--mom-degree", sa.mom, "Moment truncation degree");
  auto* tf = solve->add_option("--tf-degree", sa.tf, "Test function degree");
  mom->excludes(tf);
  solve->add_option("--out", sa.out, "Report path (default: stdout)");
  solve->add_option("--samples", sa.samples, "Verification samples per set");
  solve->add_option("--max-iterations", sa.max_iterations, "Interior-point iteration cap");
  solve->add_flag("--verbose", sa.verbose, "Print solver iterations to stderr");

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Simulate the closed loop with the report's controller");
  sim->add_option("file", ma.file, "Problem file")->required();
  sim->add_option("--report", ma.report, "Report from solve")->required();
  sim->add_option("--x0", ma.x0, "Initial state, comma separated")->required();
  sim->add_option("--tmax", ma.tmax, "Final time");
  sim->add_option("--dt", ma.dt, "Time step");
  sim->add_option("--stop-radius", ma.stop_radius, "Stop radius around an origin target (0 disables)");
  sim->add_option("--csv", ma.csv, "Trajectory CSV path");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Re-check the value function of a report on a grid");
  ver->add_option("--report", va.report, "Report from solve")->required();
  ver->add_option("--grid", va.grid, "Grid points per axis");
  ver->add_option("--samples", va.samples, "Use quasi-random samples instead of a grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }
  if (*solve) return cmd_solve(sa);
  if (*sim) return cmd_simulate(ma);
  return cmd_verify(va);
}
