#include <gtest/gtest.h>

#include "occmom/problem_file.hpp"

using namespace occmom;

namespace {

const std::string kHeader = R"([variables]
states = x1, x2
inputs = u
[dynamics]
x1' = x2
x2' = u
)";

std::size_t error_line(const std::string& text) {
  try {
    parse_problem_text(text);
  } catch (const ProblemFileError& e) {
    return e.line();
  }
  ADD_FAILURE() << "expected a ProblemFileError";
  return 0;
}

}  // namespace

TEST(ProblemFile, MinTimeDoubleIntegrator) {
  const ProblemFile pf = parse_problem_text(kHeader + R"(
[cost]
integrand = 1
horizon = free
[initial]
dirac x1 = 1
dirac x2 = 1
[final]
dirac x1 = 0
dirac x2 = 0
[trajectory]
x2 >= -1
u >= -1
u <= 1
)");
  const OcpProblem& p = pf.problem;
  EXPECT_TRUE(p.horizon.is_free());
  EXPECT_EQ(to_string(p.scost), "1");
  ASSERT_TRUE(p.initial.dirac);
  EXPECT_EQ(p.initial.dirac->points, Eigen::MatrixXd::Ones(2, 1));
  EXPECT_EQ(p.tconstraints.size(), 3u);
  EXPECT_EQ(pf.seed, 1u);
  EXPECT_FALSE(pf.scale);
}

TEST(ProblemFile, MixtureAndUniform) {
  const ProblemFile pf = parse_problem_text(kHeader + R"(
[initial]
dirac (x1, x2) = 0.8 (0, 1) + 0.2 (1, 1)
[final]
uniform x1 in [-1, 0.5]
x2 = 0
)");
  const auto& d = *pf.problem.initial.dirac;
  EXPECT_EQ(d.points.cols(), 2);
  EXPECT_DOUBLE_EQ(d.weights(0), 0.8);
  EXPECT_DOUBLE_EQ(d.points(1, 0), 1.0);
  const auto& u = *pf.problem.final.uniform;
  EXPECT_DOUBLE_EQ(u.box(0, 1), 0.5);
  ASSERT_EQ(pf.problem.final.free.constraints.size(), 1u);
  EXPECT_TRUE(pf.problem.final.free.constraints[0].is_equality());
}

TEST(ProblemFile, SeparateDiracLinesCombine) {
  const ProblemFile pf = parse_problem_text(kHeader + "[initial]\ndirac x1 = 2\ndirac x2 = -3\n");
  EXPECT_EQ(pf.problem.initial.dirac->variables, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(pf.problem.initial.dirac->points, Eigen::Vector2d(2, -3));
}

TEST(ProblemFile, IntegralConstraint) {
  const ProblemFile pf = parse_problem_text(kHeader + "[integral]\nmom(u^2) <= 1\n");
  ASSERT_EQ(pf.problem.sconstraints.size(), 1u);
  EXPECT_EQ(pf.problem.sconstraints[0].relation, MomentRelation::kLessEqual);
  EXPECT_EQ(pf.problem.sconstraints[0].bound, 1.0);
  EXPECT_EQ(to_string(pf.problem.sconstraints[0].integrand), "u^2");
}

TEST(ProblemFile, OptionsAndTime) {
  const ProblemFile pf = parse_problem_text(R"(
[variables]
states = x
inputs = u
time = t
[dynamics]
x' = u + t
[cost]
integrand = u^2
final = x^2
horizon = 2.5
[options]
testtime = true
scale x = 2
tmax = 7
seed = 42
)");
  EXPECT_DOUBLE_EQ(pf.problem.horizon.length(), 2.5);
  EXPECT_EQ(pf.problem.testtime, TestTime::kTimeDependent);
  EXPECT_EQ(pf.seed, 42u);
  ASSERT_TRUE(pf.scale);
  EXPECT_DOUBLE_EQ((*pf.scale)(pf.problem.vars->index_of("x")), 2.0);
  EXPECT_DOUBLE_EQ(*pf.problem.tmax, 7.0);
  EXPECT_DOUBLE_EQ(pf.solver_problem().scaling(pf.problem.vars->index_of("x")), 2.0);
}

TEST(ProblemFile, CommentsAndBlankLines) {
  EXPECT_NO_THROW(parse_problem_text("# leading\n\n" + kHeader + "[cost]  # trailing\nintegrand = x1^2 # c\n"));
}

TEST(ProblemFile, Errors) {
  // Uniform and Dirac on the same state.
  EXPECT_THROW(parse_problem_text(kHeader + "[initial]\nuniform x1 in [-1, 1]\ndirac x1 = 0\n"), ProblemFileError);
  EXPECT_EQ(error_line(kHeader + "[bogus]\n"), 7u);
  EXPECT_EQ(error_line(kHeader + "[cost]\nintegrand = x1 +\n"), 8u);
  EXPECT_EQ(error_line(kHeader + "[cost]\nweight = 1\n"), 8u);
  EXPECT_EQ(error_line(kHeader + "[cost]\nintegrand = z\n"), 8u);
  EXPECT_EQ(error_line("[dynamics]\nx' = 1\n"), 1u);
  EXPECT_EQ(error_line("[variables]\nstates = x1, x2\n[dynamics]\nx1' = x2\n"), 4u);
  EXPECT_EQ(error_line(kHeader + "[cost]\n[cost]\n"), 8u);
  EXPECT_EQ(error_line(kHeader + "[cost]\nhorizon = -1\n"), 8u);
  EXPECT_EQ(error_line(kHeader + "[initial]\nuniform x1 in [1, -1]\n"), 8u);
}

TEST(ProblemFile, ErrorsCarryColumns) {
  try {
    parse_problem_text(kHeader + "[cost]\nintegrand = x1 + * x2\n");
    FAIL();
  } catch (const ProblemFileError& e) {
    EXPECT_EQ(e.line(), 8u);
    EXPECT_GT(e.column(), 12u);
  }
}

TEST(ProblemFile, MissingFileIsIoError) {
  EXPECT_THROW(parse_problem_file("/nonexistent/problem.pocp"), std::runtime_error);
}
