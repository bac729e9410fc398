#include <gtest/gtest.h>

#include "occmom/ocp.hpp"
#include "support/oracles.hpp"

using namespace occmom;
using occmom::testing::Rng;

namespace {

DiracFactor dirac(std::vector<std::size_t> vars, std::vector<double> point) {
  DiracFactor d;
  d.variables = std::move(vars);
  d.points = Eigen::Map<Eigen::VectorXd>(point.data(), static_cast<Eigen::Index>(point.size()));
  d.weights = Eigen::VectorXd::Ones(1);
  return d;
}

OcpProblem double_integrator(Horizon h = Horizon::free()) {
  OcpProblem p;
  p.vars = make_varset({"x1", "x2"}, {"u"});
  const auto P = [&](const char* s) { return parse_poly(s, p.vars); };
  p.dynamics = {P("x2"), P("u")};
  p.scost = P("1");
  p.horizon = h;
  p.initial.dirac = dirac({0, 1}, {1.0, 1.0});
  p.final.dirac = dirac({0, 1}, {0.0, 0.0});
  p.tconstraints = {SupportConstraint::greater_equal(P("x2"), P("-1")),
                    SupportConstraint::greater_equal(P("u"), P("-1")),
                    SupportConstraint::greater_equal(P("1 - u"), P("0"))};
  return build_problem(p);
}

}  // namespace

TEST(BuildProblem, AcceptsDoubleIntegrator) {
  const OcpProblem p = double_integrator();
  EXPECT_TRUE(p.fcost.is_zero());
  EXPECT_TRUE(p.initial.fully_known());
  ASSERT_EQ(p.scaling.size(), 3);
  EXPECT_TRUE(p.scaling.isOnes());
}

TEST(BuildProblem, RejectsDynamicsDimensionMismatch) {
  OcpProblem p;
  p.vars = make_varset({"x1", "x2"}, {"u"});
  EXPECT_THROW(build_problem(p), std::invalid_argument);
}

TEST(BuildProblem, RejectsOverlappingBoundaryFactors) {
  OcpProblem p;
  p.vars = make_varset({"x1"}, {});
  p.dynamics = {parse_poly("-x1", p.vars)};
  p.initial.dirac = dirac({0}, {0.0});
  UniformFactor u;
  u.variables = {0};
  u.box.resize(1, 2);
  u.box << -1, 1;
  p.initial.uniform = u;
  EXPECT_THROW(build_problem(p), std::invalid_argument);
}

TEST(BuildProblem, RejectsBadWeightsAndFinalCostOnInputs) {
  OcpProblem p;
  p.vars = make_varset({"x"}, {"u"});
  p.dynamics = {parse_poly("u", p.vars)};
  DiracFactor d;
  d.variables = {0};
  d.points.resize(1, 2);
  d.points << 0, 1;
  d.weights = Eigen::Vector2d(0.5, 0.6);
  p.initial.dirac = d;
  EXPECT_THROW(build_problem(p), std::invalid_argument);
  p.initial.dirac->weights = Eigen::Vector2d(0.5, 0.5);
  EXPECT_NO_THROW(build_problem(p));
  p.fcost = parse_poly("u^2", p.vars);
  EXPECT_THROW(build_problem(p), std::invalid_argument);
}

TEST(BuildProblem, FillsFreeFactors) {
  OcpProblem p;
  p.vars = make_varset({"x1", "x2"}, {});
  p.dynamics = {parse_poly("x2", p.vars), parse_poly("-x1", p.vars)};
  p.initial.dirac = dirac({1}, {0.5});
  const OcpProblem b = build_problem(p);
  EXPECT_EQ(b.initial.free.variables, std::vector<std::size_t>{0});
  EXPECT_EQ(b.final.free.variables, (std::vector<std::size_t>{0, 1}));
}

TEST(Horizon, FixedMustBePositive) {
  EXPECT_THROW(Horizon::fixed(0.0), std::invalid_argument);
  EXPECT_THROW(Horizon::fixed(-1.0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(Horizon::fixed(3.5).length(), 3.5);
}

TEST(TimeDependence, FollowsHorizonAndOverride) {
  EXPECT_FALSE(time_dependence(double_integrator()));
  EXPECT_TRUE(time_dependence(double_integrator(Horizon::fixed(3.5))));
  OcpProblem p = double_integrator();
  p.testtime = TestTime::kTimeDependent;
  EXPECT_TRUE(time_dependence(p));
}

TEST(Scaling, IdentityLeavesProblemUnchanged) {
  const OcpProblem p = double_integrator();
  const OcpProblem s = apply_scaling(p, Eigen::Vector3d::Ones());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(to_string(s.dynamics[i]), to_string(p.dynamics[i]));
  EXPECT_EQ(s.initial.dirac->points, p.initial.dirac->points);
}

TEST(Scaling, ScalarExample) {
  OcpProblem p;
  p.vars = make_varset({"x"}, {"u"});
  p.dynamics = {parse_poly("u", p.vars)};
  p.scost = parse_poly("x^2", p.vars);
  p.initial.dirac = dirac({0}, {1.0});
  p = build_problem(p);
  const OcpProblem s = apply_scaling(p, Eigen::Vector2d(2.0, 1.0));
  EXPECT_EQ(to_string(s.dynamics[0] - parse_poly("0.5*u", p.vars)), "0");
  EXPECT_EQ(to_string(s.scost - parse_poly("4*x^2", p.vars)), "0");
  EXPECT_DOUBLE_EQ(s.initial.dirac->points(0, 0), 0.5);
}

TEST(Scaling, DiracPointIsDivided) {
  const OcpProblem s = apply_scaling(double_integrator(), Eigen::Vector3d(2.0, 2.0, 1.0));
  EXPECT_DOUBLE_EQ(s.initial.dirac->points(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.initial.dirac->points(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.scaling(0), 2.0);
}

TEST(Scaling, RejectsNonPositiveFactors) {
  EXPECT_THROW(apply_scaling(double_integrator(), Eigen::Vector3d(1.0, 0.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(apply_scaling(double_integrator(), Eigen::Vector2d(1.0, 1.0)), std::invalid_argument);
}

TEST(ScalingProperty, InverseScalingRestoresProblem) {
  Rng rng(21);
  const OcpProblem p = double_integrator();
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Vector3d s(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0));
    const OcpProblem back = apply_scaling(apply_scaling(p, s), s.cwiseInverse());
    for (std::size_t i = 0; i < p.dynamics.size(); ++i) {
      for (const auto& [m, c] : p.dynamics[i].terms()) EXPECT_NEAR(back.dynamics[i].coeff(m), c, 1e-12 * std::abs(c));
      EXPECT_EQ(back.dynamics[i].num_terms(), p.dynamics[i].num_terms());
    }
    for (std::size_t k = 0; k < p.tconstraints.size(); ++k) {
      const Polynomial d = back.tconstraints[k].lhs - p.tconstraints[k].lhs;
      for (const auto& [m, c] : d.terms()) EXPECT_NEAR(c, 0.0, 1e-12);
    }
    EXPECT_TRUE(back.initial.dirac->points.isApprox(p.initial.dirac->points, 1e-12));
    EXPECT_TRUE(back.scaling.isApprox(p.scaling, 1e-12));
  }
}

TEST(Constraints, AreNormalizedToNonNegativeOrZero) {
  const auto v = make_varset({"x"}, {});
  const Polynomial x = parse_poly("x", v), one = parse_poly("1", v);
  const auto le = SupportConstraint::less_equal(x, one);
  EXPECT_EQ(le.relation, SupportRelation::kNonNegative);
  EXPECT_NEAR(evaluate(le.lhs, Eigen::VectorXd::Constant(1, 0.25)), 0.75, 1e-15);
  const auto eq = SupportConstraint::equal(x, one);
  EXPECT_TRUE(eq.is_equality());
  // Renormalizing a stored constraint changes nothing.
  const auto again = SupportConstraint::greater_equal(le.lhs, Polynomial(v, 0.0));
  EXPECT_EQ(to_string(again.lhs), to_string(le.lhs));
}

TEST(BoxBounds, ReadsSingleVariableLinearConstraints) {
  const OcpProblem p = double_integrator();
  const VariableBox b = box_bounds(p.tconstraints, 3);
  EXPECT_EQ(b.lower(1), -1.0);
  EXPECT_TRUE(std::isinf(b.upper(1)));
  EXPECT_EQ(b.lower(2), -1.0);
  EXPECT_EQ(b.upper(2), 1.0);
  EXPECT_TRUE(std::isinf(b.lower(0)));
}

TEST(DynamicsDegree, IsMaxOverComponents) {
  OcpProblem p;
  p.vars = make_varset({"x1", "x2"}, {"u"});
  p.dynamics = {parse_poly("-x1^3 + x1*u", p.vars), parse_poly("u", p.vars)};
  EXPECT_EQ(dynamics_degree(build_problem(p)), 3);
}
