#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace occmom {

/// Ordered variable declaration shared by every polynomial of a problem.
/// Canonical order is (time, states..., inputs...).
class VarSet {
 public:
  VarSet() = default;
  VarSet(std::vector<std::string> states, std::vector<std::string> inputs,
         std::optional<std::string> time = std::nullopt);

  std::size_t size() const { return names_.size(); }
  std::size_t num_states() const { return num_states_; }
  std::size_t num_inputs() const { return num_inputs_; }
  bool has_time() const { return has_time_; }

  /// Position of the time variable; only meaningful when has_time().
  std::size_t time_index() const { return 0; }
  std::size_t state_index(std::size_t i) const { return offset() + i; }
  std::size_t input_index(std::size_t j) const { return offset() + num_states_ + j; }

  bool is_time(std::size_t idx) const { return has_time_ && idx == 0; }
  bool is_state(std::size_t idx) const {
    return idx >= offset() && idx < offset() + num_states_;
  }
  bool is_input(std::size_t idx) const { return idx >= offset() + num_states_ && idx < size(); }

  const std::string& name(std::size_t idx) const { return names_.at(idx); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::vector<std::string> state_names() const;
  std::vector<std::string> input_names() const;
  std::optional<std::string> time_name() const;

  /// Same declaration with a time variable added (or the same set if present).
  VarSet with_time(const std::string& default_name = "t") const;

  bool operator==(const VarSet& other) const {
    return names_ == other.names_ && num_states_ == other.num_states_ && has_time_ == other.has_time_;
  }

 private:
  std::size_t offset() const { return has_time_ ? 1 : 0; }

  std::vector<std::string> names_;
  std::size_t num_states_ = 0;
  std::size_t num_inputs_ = 0;
  bool has_time_ = false;
};

using VarSetPtr = std::shared_ptr<const VarSet>;

VarSetPtr make_varset(std::vector<std::string> states, std::vector<std::string> inputs,
                      std::optional<std::string> time = std::nullopt);

/// Exponent vector indexed by VarSet order.
struct Monomial {
  std::vector<int> exponents;

  Monomial() = default;
  explicit Monomial(std::size_t nvars) : exponents(nvars, 0) {}
  explicit Monomial(std::vector<int> e) : exponents(std::move(e)) {}

  static Monomial variable(std::size_t nvars, std::size_t idx, int power = 1) {
    Monomial m(nvars);
    m.exponents[idx] = power;
    return m;
  }

  std::size_t size() const { return exponents.size(); }
  int operator[](std::size_t i) const { return exponents[i]; }
  int& operator[](std::size_t i) { return exponents[i]; }
  int degree() const;
  bool is_constant() const { return degree() == 0; }

  bool operator==(const Monomial& o) const { return exponents == o.exponents; }
  bool operator!=(const Monomial& o) const { return exponents != o.exponents; }
};

Monomial operator*(const Monomial& a, const Monomial& b);

/// Graded lexicographic order: lower total degree first, then the
/// exponent vectors compared lexicographically with the larger one first
/// (1, x1, x2, x1^2, x1*x2, x2^2, ...).
struct GradedLex {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Sparse polynomial with double coefficients in canonical form: no stored
/// coefficient has magnitude below kDropTolerance.
class Polynomial {
 public:
  using Terms = std::map<Monomial, double, GradedLex>;
  static constexpr double kDropTolerance = 1e-14;

  Polynomial() = default;
  explicit Polynomial(VarSetPtr vars) : vars_(std::move(vars)) {}
  Polynomial(VarSetPtr vars, double constant);
  Polynomial(VarSetPtr vars, Terms terms);

  static Polynomial variable(VarSetPtr vars, std::size_t idx);
  static Polynomial variable(VarSetPtr vars, std::string_view name);
  static Polynomial monomial(VarSetPtr vars, const Monomial& m, double coeff = 1.0);

  const VarSetPtr& vars() const { return vars_; }
  const VarSet& varset() const { return *vars_; }
  const Terms& terms() const { return terms_; }
  std::size_t num_terms() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; -1 for the zero polynomial.
  int degree() const;
  /// Highest power of one variable across all terms.
  int degree_in(std::size_t idx) const;
  bool depends_on(std::size_t idx) const { return degree_in(idx) > 0; }
  double coeff(const Monomial& m) const;
  double constant_term() const;

  void add_term(const Monomial& m, double c);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);

  /// Map the polynomial onto another variable set by matching names.
  Polynomial rebase(const VarSetPtr& target) const;

 private:
  void check_compatible(const Polynomial& o) const;

  VarSetPtr vars_;
  Terms terms_;
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator*(Polynomial a, double s);
Polynomial operator*(double s, Polynomial a);
Polynomial pow(const Polynomial& p, int k);

/// Parse text using the grammar
///   expr := term (('+'|'-') term)*; term := factor ('*' factor)*;
///   factor := base ('^' uint)?; base := number | ident | '(' expr ')'
/// with optional unary sign in front of a base.
Polynomial parse_poly(std::string_view text, const VarSetPtr& vars);

/// Text form accepted by parse_poly; coefficients printed with %.17g.
std::string to_string(const Polynomial& p);

Polynomial differentiate(const Polynomial& p, std::size_t var);
Polynomial differentiate(const Polynomial& p, std::string_view var);

/// Value of a monomial at a point given in VarSet order.
template <typename Derived>
double evaluate(const Monomial& m, const Eigen::MatrixBase<Derived>& point) {
  double v = 1.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (int k = 0; k < m[i]; ++k) v *= point(static_cast<Eigen::Index>(i));
  }
  return v;
}

void check_point_size(const Polynomial& p, Eigen::Index n);

template <typename Derived>
double evaluate(const Polynomial& p, const Eigen::MatrixBase<Derived>& point) {
  check_point_size(p, point.size());
  double acc = 0.0;
  for (const auto& [m, c] : p.terms()) acc += c * evaluate(m, point);
  return acc;
}

double evaluate(const Polynomial& p, const std::vector<double>& point);

/// Replace variable `var` by the constant `value`.
Polynomial substitute(const Polynomial& p, std::size_t var, double value);

/// Replace each variable z_i by factor_i * z_i.
Polynomial scale_variables(const Polynomial& p, const Eigen::VectorXd& factors);

/// L_f w = dw/dt (when include_time) + sum_i dw/dx_i * f_i.
Polynomial lie_derivative(const Polynomial& w, const std::vector<Polynomial>& f, bool include_time);

/// All monomials of total degree <= degree over the listed variables, graded-lex ordered.
std::vector<Monomial> monomials_up_to(std::size_t nvars, const std::vector<std::size_t>& over, int degree);

}  // namespace occmom
