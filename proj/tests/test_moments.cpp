#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "occmom/moments.hpp"
#include "support/oracles.hpp"

using namespace occmom;
using namespace occmom::testing;

TEST(Basis, Sizes) {
  EXPECT_EQ(basis(1, {0}, 2).size(), 3u);
  EXPECT_EQ(basis(2, {0, 1}, 2).size(), 6u);
  EXPECT_EQ(basis(3, {0, 1, 2}, 7).size(), 120u);
  EXPECT_EQ(basis_size(3, 7), 120u);
  const auto b = basis(1, {0}, 2);
  EXPECT_EQ(b[2], Monomial(std::vector<int>{2}));
}

TEST(Basis, SubsetOfVariables) {
  const auto b = basis(3, {0, 2}, 2);
  EXPECT_EQ(b.size(), 6u);
  EXPECT_FALSE(b.contains(Monomial({0, 1, 0})));
  EXPECT_TRUE(b.contains(Monomial({1, 0, 1})));
}

TEST(MomentIndex, ConstantAndPowers) {
  const auto b = basis(1, {0}, 5);
  EXPECT_EQ(moment_index(b, Monomial(std::vector<int>{0})), 0u);
  EXPECT_EQ(moment_index(b, Monomial(std::vector<int>{3})), 3u);
  EXPECT_THROW(moment_index(b, Monomial(std::vector<int>{6})), std::out_of_range);
}

TEST(MomentIndex, ExhaustiveRoundTrip) {
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<std::size_t> vars(n);
    for (std::size_t i = 0; i < n; ++i) vars[i] = i;
    for (int d = 0; d <= 6; ++d) {
      const auto b = basis(n, vars, d);
      ASSERT_EQ(b.size(), basis_size(n, d));
      for (std::size_t k = 0; k < b.size(); ++k) EXPECT_EQ(moment_index(b, b[k]), k);
    }
  }
}

TEST(KnownMoments, DiracAtOnes) {
  DiracFactor d;
  d.variables = {0, 1};
  d.points = Eigen::Vector2d(1, 1);
  d.weights = Eigen::VectorXd::Ones(1);
  for (double v : known_moments(d, basis(2, {0, 1}, 6))) EXPECT_EQ(v, 1.0);
}

TEST(KnownMoments, UniformOnSymmetricInterval) {
  UniformFactor u;
  u.variables = {0};
  u.box.resize(1, 2);
  u.box << -1, 1;
  EXPECT_NEAR(moment(u, Monomial(std::vector<int>{1})), 0.0, 1e-15);
  EXPECT_NEAR(moment(u, Monomial(std::vector<int>{2})), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(moment(u, Monomial(std::vector<int>{2})), box_average_quadrature(u.box, {2}), 1e-12);
}

TEST(KnownMoments, TwoAtomMixture) {
  DiracFactor d;
  d.variables = {0, 1};
  d.points.resize(2, 2);
  d.points << 0, 1, 1, 1;
  d.weights = Eigen::Vector2d(0.8, 0.2);
  EXPECT_NEAR(moment(d, Monomial({1, 0})), 0.2, 1e-15);
  EXPECT_NEAR(moment(d, Monomial({1, 1})), 0.2, 1e-15);
  EXPECT_NEAR(moment(d, Monomial({0, 1})), 1.0, 1e-15);
}

TEST(KnownMoments, ProductOfDiracAndUniform) {
  BoundarySpec b;
  UniformFactor u;
  u.variables = {0};
  u.box.resize(1, 2);
  u.box << 0, 2;
  b.uniform = u;
  DiracFactor d;
  d.variables = {1};
  d.points = Eigen::VectorXd::Constant(1, -1.0);
  d.weights = Eigen::VectorXd::Ones(1);
  b.dirac = d;
  // E[x^2] = 4/3, y = -1.
  EXPECT_NEAR(known_moment(b, Monomial({2, 3})), -4.0 / 3.0, 1e-15);
}

TEST(MomentMatrix, DiracIsRankOneOuterProduct) {
  DiracFactor d;
  d.variables = {0, 1};
  d.points = Eigen::Vector2d(0.5, -2.0);
  d.weights = Eigen::VectorXd::Ones(1);
  const auto b = basis(2, {0, 1}, 4);
  const Eigen::MatrixXd M = moment_matrix(b, known_moments(d, b), 2);
  const auto half = basis(2, {0, 1}, 2);
  Eigen::VectorXd v(static_cast<Eigen::Index>(half.size()));
  for (std::size_t i = 0; i < half.size(); ++i) v(static_cast<Eigen::Index>(i)) = evaluate(half[i], d.points.col(0));
  EXPECT_TRUE(M.isApprox(v * v.transpose(), 1e-14));
}

TEST(MomentMatrix, ZeroMomentsGiveZeroMatrix) {
  const auto b = basis(2, {0, 1}, 4);
  EXPECT_TRUE(moment_matrix(b, std::vector<double>(b.size(), 0.0), 2).isZero(0.0));
}

// Properties.

TEST(MomentsProperty, UniformBoxMatchesQuadrature) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.integer(1, 3));
    UniformFactor u;
    for (std::size_t i = 0; i < n; ++i) u.variables.push_back(i);
    u.box = random_box(rng, n);
    std::vector<std::size_t> vars = u.variables;
    const auto b = basis(n, vars, 12);
    const auto ys = known_moments(u, b);
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double q = box_average_quadrature(u.box, b[k].exponents);
      EXPECT_NEAR(ys[k], q, 1e-10 * (1.0 + std::abs(q)));
    }
  }
}

TEST(MomentsProperty, MixtureMassAndSymmetry) {
  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    DiracFactor f = random_mixture(rng, {0, 1}, rng.integer(1, 4));
    EXPECT_NEAR(moment(f, Monomial({0, 0})), 1.0, 1e-14);
    // Symmetrize: add mirrored atoms with equal weights.
    DiracFactor s = f;
    const auto k = f.points.cols();
    s.points.conservativeResize(Eigen::NoChange, 2 * k);
    s.points.rightCols(k) = -f.points;
    s.weights.resize(2 * k);
    s.weights << 0.5 * f.weights, 0.5 * f.weights;
    for (const auto& m : monomials_up_to(2, {0, 1}, 7)) {
      if (m.degree() % 2 == 1) {
        EXPECT_NEAR(moment(s, m), 0.0, 1e-12);
      }
    }
  }
}

TEST(MomentsProperty, ProductFactorizationMatchesJointQuadrature) {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    BoundarySpec b;
    UniformFactor u;
    u.variables = {0, 1};
    u.box = random_box(rng, 2);
    b.uniform = u;
    DiracFactor d = random_mixture(rng, {2}, 3);
    b.dirac = d;
    for (const auto& m : monomials_up_to(3, {0, 1, 2}, 6)) {
      double joint = 0.0;
      for (Eigen::Index j = 0; j < d.points.cols(); ++j)
        joint += d.weights(j) * std::pow(d.points(0, j), m[2]) * box_average_quadrature(u.box, {m[0], m[1]});
      EXPECT_NEAR(known_moment(b, m), joint, 1e-10 * (1 + std::abs(joint)));
    }
  }
}

TEST(MomentsProperty, KnownMomentMatricesArePsdAndHankel) {
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    UniformFactor u;
    u.variables = {0, 1};
    u.box = random_box(rng, 2);
    const auto b = basis(2, {0, 1}, 6);
    const Eigen::MatrixXd M = moment_matrix(b, known_moments(u, b), 3);
    EXPECT_EQ(M, M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * M.norm());
    const auto half = basis(2, {0, 1}, 3);
    for (std::size_t i = 0; i < half.size(); ++i)
      for (std::size_t j = 0; j < half.size(); ++j)
        EXPECT_EQ(M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                  known_moments(u, b)[moment_index(b, half[i] * half[j])]);
  }
}
