#include <gtest/gtest.h>

#include "occmom/hjb.hpp"
#include "occmom/problem_file.hpp"
#include "support/oracles.hpp"

using namespace occmom;
using namespace occmom::testing;

namespace {

const char* kExactHjb = R"(
[variables]
states = x1, x2
inputs = u
[dynamics]
x1' = -x1^3 + x1*u
x2' = u
[cost]
integrand = x2^2 + u^2
[initial]
dirac x1 = 1
dirac x2 = 1
[final]
dirac x1 = 0
dirac x2 = 0
[trajectory]
x1 >= -1.1
x1 <= 1.1
x2 >= -1.1
x2 <= 1.1
)";

const char* kScalarLq = R"(
[variables]
states = x
inputs = u
[dynamics]
x' = u
[cost]
integrand = x^2 + u^2
[initial]
dirac x = 1
[final]
dirac x = 0
)";

struct Solved {
  ProblemFile pf;
  MomentProblem mp;
  ConicSolution sol;
};

Solved solve(const std::string& text, DegreeMode mode) {
  Solved s;
  s.pf = parse_problem_text(text);
  const OcpProblem p = s.pf.solver_problem();
  s.mp = build_moment_problem(p, resolve_degrees(p, mode));
  s.sol = solve_conic(assemble_conic(s.mp));
  return s;
}

ValueFunction value_function(const Solved& s) {
  return extract_subsolution(s.pf.solver_problem(), s.mp, s.sol);
}

double max_abs_coefficient_except(const Polynomial& p, const Monomial& skip) {
  double m = 0.0;
  for (const auto& [mono, c] : p.terms())
    if (mono != skip) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

TEST(ExtractSubsolution, RecoversPolynomialValueFunction) {
  const Solved s = solve(kExactHjb, DegreeMode::test_function(2));
  ASSERT_EQ(s.sol.status, SolveStatus::kOptimal) << s.sol.message;
  const ValueFunction vf = value_function(s);
  const Monomial x2sq({0, 2, 0});
  EXPECT_NEAR(vf.v.coeff(x2sq), 1.0, 1e-3);
  EXPECT_LE(max_abs_coefficient_except(vf.v, x2sq), 1e-3);
  EXPECT_NEAR(vf.lower_bound, 1.0, 1e-3);
  EXPECT_LE(vf.v.degree(), 2);
  EXPECT_TRUE(vf.verification.passed());
  EXPECT_GE(vf.verification.min_hjb_residual, -1e-4);
}

TEST(ExtractSubsolution, StationaryProblemHasConstantValue) {
  const Solved s = solve(R"(
[variables]
states = x
inputs = u
[dynamics]
x' = 0
[initial]
dirac x = 0
[final]
dirac x = 0
)",
                         DegreeMode::test_function(2));
  ASSERT_EQ(s.sol.status, SolveStatus::kOptimal) << s.sol.message;
  const ValueFunction vf = value_function(s);
  EXPECT_LE(vf.v.degree(), 0);
  EXPECT_NEAR(vf.lower_bound, 0.0, 1e-6);
}

TEST(ExtractSubsolution, RequiresOptimalUnlessTold) {
  Solved s = solve(kScalarLq, DegreeMode::test_function(2));
  s.sol.status = SolveStatus::kIterationLimit;
  EXPECT_THROW(value_function(s), std::logic_error);
  EXPECT_NO_THROW(extract_subsolution(s.pf.solver_problem(), s.mp, s.sol, {}, false));
}

TEST(ExtractSubsolution, ScaledProblemGivesSameValueFunction) {
  const Solved a = solve(kScalarLq, DegreeMode::test_function(4));
  const Solved b = solve(std::string(kScalarLq) + "[options]\nscale x = 2\nscale u = 0.5\n", DegreeMode::test_function(4));
  const ValueFunction va = value_function(a), vb = value_function(b);
  EXPECT_NEAR(va.lower_bound, vb.lower_bound, 1e-5 * (1 + std::abs(va.lower_bound)));
  for (double x = -1.0; x <= 1.0; x += 0.25) {
    const Eigen::Vector2d z(x, 0.0);
    EXPECT_NEAR(evaluate(va.v, z), evaluate(vb.v, z), 1e-4);
  }
}

TEST(ExtractSubsolution, CertifiedBoundIsMonotoneInDegree) {
  double previous = -1.0;
  for (int tf = 2; tf <= 6; tf += 2) {
    const Solved s = solve(kExactHjb, DegreeMode::test_function(tf));
    const ValueFunction vf = extract_subsolution(s.pf.solver_problem(), s.mp, s.sol, {}, false);
    EXPECT_GE(vf.verification.certified_bound, previous - 1e-6) << "tf " << tf;
    previous = vf.verification.certified_bound;
  }
}

TEST(VerifySubsolution, CatchesPerturbedValueFunction) {
  const Solved s = solve(kExactHjb, DegreeMode::test_function(2));
  ValueFunction vf = value_function(s);
  vf.v += parse_poly("x1^4", vf.v.vars());
  VerifyOptions vo;
  vo.grid = 11;
  const VerificationReport r = verify_subsolution(s.pf.problem, vf, vo);
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.hjb_ok);
}

TEST(VerifySubsolution, TerminalViolationIsDetected) {
  const Solved s = solve(kScalarLq, DegreeMode::test_function(2));
  ValueFunction vf = value_function(s);
  vf.v += Polynomial(vf.v.vars(), 0.5);
  VerifyOptions vo;
  vo.grid = 5;
  const VerificationReport r = verify_subsolution(s.pf.problem, vf, vo);
  EXPECT_FALSE(r.terminal_ok);
  EXPECT_NEAR(r.max_terminal_violation, 0.5, 1e-6);
}

TEST(VerifySubsolution, UnboundedInputsUseTheExactMinimizer) {
  // x' = u, h = x^2 + u^2/100 has value x^2/10. For v = 0.105 x^2 the
  // minimizing input is -10.5 x, outside a grid of radius 0.5, where every
  // sampled residual is nonnegative.
  const ProblemFile pf = parse_problem_text(R"(
[variables]
states = x
inputs = u
[dynamics]
x' = u
[cost]
integrand = x^2 + 0.01*u^2
[initial]
dirac x = 1
[final]
dirac x = 0
)");
  ValueFunction vf;
  vf.v = parse_poly("0.105*x^2", pf.problem.vars);
  vf.hjb_cost = pf.problem.scost;
  vf.lower_bound = 0.105;
  VerifyOptions vo;
  vo.grid = 3;
  vo.radius = 0.5;
  const VerificationReport bad = verify_subsolution(pf.problem, vf, vo);
  EXPECT_FALSE(bad.hjb_ok);
  EXPECT_NEAR(bad.min_hjb_residual, -0.1025 * 0.25, 1e-12);
  vf.v = parse_poly("0.1*x^2", pf.problem.vars);
  vf.lower_bound = 0.1;
  const VerificationReport good = verify_subsolution(pf.problem, vf, vo);
  EXPECT_TRUE(good.passed());
  EXPECT_NEAR(good.min_hjb_residual, 0.0, 1e-12);
}

TEST(VerifySubsolution, SingleGridPointStillRuns) {
  const Solved s = solve(kScalarLq, DegreeMode::test_function(2));
  VerifyOptions vo;
  vo.grid = 1;
  const VerificationReport r = verify_subsolution(s.pf.problem, value_function(s), vo);
  EXPECT_GE(r.hjb_points, 1);
}

TEST(VerifySubsolution, SamplingIsSeeded) {
  const Solved s = solve(kExactHjb, DegreeMode::test_function(2));
  const ValueFunction vf = value_function(s);
  VerifyOptions vo;
  vo.samples = 500;
  vo.seed = 7;
  const auto a = verify_subsolution(s.pf.problem, vf, vo);
  const auto b = verify_subsolution(s.pf.problem, vf, vo);
  EXPECT_EQ(a.min_hjb_residual, b.min_hjb_residual);
  vo.seed = 8;
  EXPECT_NE(verify_subsolution(s.pf.problem, vf, vo).min_hjb_residual, a.min_hjb_residual);
}

TEST(SynthesizeController, ScalarRiccati) {
  const Solved s = solve(kScalarLq, DegreeMode::test_function(4));
  ASSERT_EQ(s.sol.status, SolveStatus::kOptimal) << s.sol.message;
  const ValueFunction vf = value_function(s);
  const auto u = synthesize_controller(vf, s.pf.problem);
  ASSERT_EQ(u.size(), 1u);
  for (double x = -1.0; x <= 1.0; x += 0.125) EXPECT_NEAR(evaluate(u[0], Eigen::Vector2d(x, 0.0)), -x, 1e-3);
  EXPECT_LE(controller_stationarity(vf, s.pf.problem, u), 1e-10);
}

TEST(SynthesizeController, ZeroValueGivesZeroInput) {
  const ProblemFile pf = parse_problem_text(kScalarLq);
  ValueFunction vf;
  vf.v = Polynomial(pf.problem.vars, 0.0);
  const auto u = synthesize_controller(vf, pf.problem);
  ASSERT_EQ(u.size(), 1u);
  EXPECT_TRUE(u[0].is_zero());
}

TEST(SynthesizeController, FirstExampleFormula) {
  const ProblemFile pf = parse_problem_text(R"(
[variables]
states = x1, x2
inputs = u
[dynamics]
x1' = x2 + x1^2 - x1^3
x2' = u
[cost]
integrand = x1^2 + x2^2 + 0.01*u^2
[initial]
uniform x1 in [-1, 1]
uniform x2 in [-1, 1]
[final]
dirac x1 = 0
dirac x2 = 0
)");
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    ValueFunction vf;
    vf.v = random_polynomial(rng, pf.problem.vars, 6, 12);
    vf.v = substitute(vf.v, 2, 0.0);
    const auto u = synthesize_controller(vf, pf.problem);
    const Polynomial expected = differentiate(vf.v, "x2") * -50.0;
    const Polynomial diff = u[0] - expected;
    for (const auto& [m, c] : diff.terms()) EXPECT_NEAR(c, 0.0, 1e-12 * (1 + std::abs(expected.coeff(m))));
    EXPECT_LE(controller_stationarity(vf, pf.problem, u), 1e-10);
  }
}

TEST(SynthesizeController, RejectsNonAffineInput) {
  const ProblemFile pf = parse_problem_text(R"(
[variables]
states = x
inputs = u
[dynamics]
x' = u^3
[cost]
integrand = x^2 + u^2
[initial]
dirac x = 1
)");
  ValueFunction vf;
  vf.v = parse_poly("x^2", pf.problem.vars);
  EXPECT_THROW(synthesize_controller(vf, pf.problem), std::invalid_argument);
}

TEST(SynthesizeController, RejectsCostWithoutPositiveQuadratic) {
  const ProblemFile pf = parse_problem_text(R"(
[variables]
states = x
inputs = u
[dynamics]
x' = u
[cost]
integrand = x^2
[initial]
dirac x = 1
)");
  ValueFunction vf;
  vf.v = parse_poly("x^2", pf.problem.vars);
  EXPECT_THROW(synthesize_controller(vf, pf.problem), std::invalid_argument);
}

TEST(Compose, SubstitutesPolynomial) {
  const auto v = make_varset({"x"}, {"u"});
  const Polynomial p = parse_poly("x*u^2 + u", v);
  const Polynomial q = parse_poly("-x", v);
  EXPECT_EQ(to_string(compose(p, 1, q) - parse_poly("x^3 - x", v)), "0");
}

TEST(Unscaled, UndoesScaling) {
  const ProblemFile pf = parse_problem_text(std::string(kScalarLq) + "[options]\nscale x = 2\n");
  const OcpProblem back = unscaled(pf.solver_problem());
  EXPECT_EQ(to_string(back.scost - pf.problem.scost), "0");
  EXPECT_TRUE(back.scaling.isOnes());
}
