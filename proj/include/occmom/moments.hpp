#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "occmom/ocp.hpp"
#include "occmom/poly.hpp"

namespace occmom {

/// Truncated monomial basis over a subset of the variables, graded-lex ordered.
class MomentBasis {
 public:
  MomentBasis() = default;
  MomentBasis(std::size_t nvars, std::vector<std::size_t> vars, int degree);

  const std::vector<std::size_t>& vars() const { return vars_; }
  int degree() const { return degree_; }
  std::size_t nvars() const { return nvars_; }
  std::size_t size() const { return monomials_.size(); }
  const std::vector<Monomial>& monomials() const { return monomials_; }
  const Monomial& operator[](std::size_t i) const { return monomials_[i]; }

  /// Position of m in the basis; throws std::out_of_range if absent.
  std::size_t index(const Monomial& m) const;
  std::optional<std::size_t> find(const Monomial& m) const;
  /// True when m only involves basis variables and has degree <= degree().
  bool contains(const Monomial& m) const { return find(m).has_value(); }

 private:
  std::size_t nvars_ = 0;
  std::vector<std::size_t> vars_;
  int degree_ = 0;
  std::vector<Monomial> monomials_;
  std::unordered_map<Monomial, std::size_t, MonomialHash> index_;
};

/// Complete basis of all monomials of degree <= d over `vars`.
MomentBasis basis(std::size_t nvars, std::vector<std::size_t> vars, int d);

/// Position of m in a moment vector ordered by `b`.
std::size_t moment_index(const MomentBasis& b, const Monomial& m);

/// C(n + d, d).
std::size_t basis_size(std::size_t n, int d);

double moment(const DiracFactor& f, const Monomial& m);
double moment(const UniformFactor& f, const Monomial& m);

/// Moments of the known factors of a boundary specification (product of the
/// Dirac and uniform factors); m must not involve free variables.
double known_moment(const BoundarySpec& b, const Monomial& m);

std::vector<double> known_moments(const DiracFactor& f, const MomentBasis& b);
std::vector<double> known_moments(const UniformFactor& f, const MomentBasis& b);
std::vector<double> known_moments(const BoundarySpec& spec, const MomentBasis& b);

/// Symmetric matrix M[i][j] = y[index(b_i * b_j)] for the order-r sub-basis.
Eigen::MatrixXd moment_matrix(const MomentBasis& full, const std::vector<double>& y, int order);

enum class MeasureId { kInitial, kFinal, kTrajectory };
const char* to_string(MeasureId id);

/// One measure of the moment problem. A boundary measure is the product of
/// its known factors and an unknown factor over `unknown_vars`; the
/// trajectory measure is entirely unknown.
struct MeasureSpec {
  MeasureId id = MeasureId::kTrajectory;
  std::vector<std::size_t> vars;
  BoundarySpec known_factors;  // dirac/uniform factors only; free part unused
  std::vector<std::size_t> unknown_vars;
  std::vector<SupportConstraint> constraints;
  int degree = 0;
  /// Basis over unknown_vars of the truncation degree and the offset of its
  /// moments in the concatenated unknown vector (unused when known()).
  MomentBasis unknown_basis;
  std::size_t offset = 0;

  bool known() const { return id != MeasureId::kTrajectory && unknown_vars.empty(); }
  /// Number of unknown moments contributed.
  std::size_t num_unknowns() const { return known() ? 0 : unknown_basis.size(); }
};

}  // namespace occmom
