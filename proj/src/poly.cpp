#include "occmom/poly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace occmom {

// ---------------------------------------------------------------------------
// VarSet

VarSet::VarSet(std::vector<std::string> states, std::vector<std::string> inputs,
               std::optional<std::string> time)
    : num_states_(states.size()), num_inputs_(inputs.size()), has_time_(time.has_value()) {
  if (time) names_.push_back(*time);
  for (auto& s : states) names_.push_back(std::move(s));
  for (auto& u : inputs) names_.push_back(std::move(u));

  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("variable names must be nonempty");
    if (!(std::isalpha(static_cast<unsigned char>(n[0])) || n[0] == '_'))
      throw std::invalid_argument("invalid variable name '" + n + "'");
    for (char c : n) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
        throw std::invalid_argument("invalid variable name '" + n + "'");
    }
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate variable name '" + n + "'");
  }
}

std::optional<std::size_t> VarSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t VarSet::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw std::invalid_argument("unknown variable '" + std::string(name) + "'");
  return *idx;
}

std::vector<std::string> VarSet::state_names() const {
  return {names_.begin() + static_cast<std::ptrdiff_t>(offset()),
          names_.begin() + static_cast<std::ptrdiff_t>(offset() + num_states_)};
}

std::vector<std::string> VarSet::input_names() const {
  return {names_.begin() + static_cast<std::ptrdiff_t>(offset() + num_states_), names_.end()};
}

std::optional<std::string> VarSet::time_name() const {
  if (!has_time_) return std::nullopt;
  return names_.front();
}

VarSet VarSet::with_time(const std::string& default_name) const {
  if (has_time_) return *this;
  std::string name = default_name;
  while (find(name)) name += "_";
  return VarSet(state_names(), input_names(), name);
}

VarSetPtr make_varset(std::vector<std::string> states, std::vector<std::string> inputs,
                      std::optional<std::string> time) {
  return std::make_shared<const VarSet>(std::move(states), std::move(inputs), std::move(time));
}

// ---------------------------------------------------------------------------
// Monomial

int Monomial::degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

Monomial operator*(const Monomial& a, const Monomial& b) {
  if (a.size() != b.size()) throw std::invalid_argument("monomial size mismatch");
  Monomial r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

bool GradedLex::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  return b.exponents < a.exponents;
}

std::size_t MonomialHash::operator()(const Monomial& m) const {
  std::size_t h = 1469598103934665603ull;
  for (int e : m.exponents) {
    h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Polynomial

Polynomial::Polynomial(VarSetPtr vars, double constant) : vars_(std::move(vars)) {
  add_term(Monomial(vars_->size()), constant);
}

Polynomial::Polynomial(VarSetPtr vars, Terms terms) : vars_(std::move(vars)) {
  for (const auto& [m, c] : terms) add_term(m, c);
}

Polynomial Polynomial::variable(VarSetPtr vars, std::size_t idx) {
  const auto n = vars->size();
  if (idx >= n) throw std::out_of_range("variable index out of range");
  return monomial(std::move(vars), Monomial::variable(n, idx));
}

Polynomial Polynomial::variable(VarSetPtr vars, std::string_view name) {
  const auto idx = vars->index_of(name);
  return variable(std::move(vars), idx);
}

Polynomial Polynomial::monomial(VarSetPtr vars, const Monomial& m, double coeff) {
  Polynomial p(std::move(vars));
  p.add_term(m, coeff);
  return p;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::degree_in(std::size_t idx) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m[idx]);
  return d;
}

double Polynomial::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::constant_term() const {
  if (!vars_) return 0.0;
  return coeff(Monomial(vars_->size()));
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (!vars_) throw std::logic_error("polynomial has no variable set");
  if (m.size() != vars_->size()) throw std::invalid_argument("monomial does not match variable set");
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kDropTolerance) terms_.erase(it);
}

void Polynomial::check_compatible(const Polynomial& o) const {
  if (!vars_ || !o.vars_) throw std::logic_error("polynomial has no variable set");
  if (vars_ != o.vars_ && !(*vars_ == *o.vars_))
    throw std::invalid_argument("polynomials over different variable sets");
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_compatible(o);
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_compatible(o);
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  Terms scaled;
  for (const auto& [m, c] : terms_) {
    const double v = c * s;
    if (std::abs(v) >= kDropTolerance) scaled.emplace(m, v);
  }
  terms_ = std::move(scaled);
  return *this;
}

Polynomial Polynomial::rebase(const VarSetPtr& target) const {
  std::vector<std::size_t> map(vars_->size());
  for (std::size_t i = 0; i < vars_->size(); ++i) {
    auto idx = target->find(vars_->name(i));
    if (!idx) {
      if (degree_in(i) == 0) {
        map[i] = target->size();
        continue;
      }
      throw std::invalid_argument("variable '" + vars_->name(i) + "' missing from target set");
    }
    map[i] = *idx;
  }
  Polynomial r(target);
  for (const auto& [m, c] : terms_) {
    Monomial t(target->size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] != 0) t[map[i]] += m[i];
    }
    r.add_term(t, c);
  }
  return r;
}

Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
Polynomial operator-(Polynomial a) { return a *= -1.0; }
Polynomial operator*(Polynomial a, double s) { return a *= s; }
Polynomial operator*(double s, Polynomial a) { return a *= s; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (!(*a.vars() == *b.vars())) throw std::invalid_argument("polynomials over different variable sets");
  Polynomial r(a.vars());
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) r.add_term(ma * mb, ca * cb);
  }
  return r;
}

Polynomial pow(const Polynomial& p, int k) {
  if (k < 0) throw std::invalid_argument("negative polynomial power");
  Polynomial r(p.vars(), 1.0);
  Polynomial base = p;
  while (k > 0) {
    if (k & 1) r = r * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, const VarSetPtr& vars) : text_(text), vars_(vars) {}

  Polynomial parse() {
    skip_ws();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    Polynomial p = expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return p;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial acc = term();
    for (;;) {
      if (accept('+')) {
        acc += term();
      } else if (accept('-')) {
        acc -= term();
      } else {
        return acc;
      }
    }
  }

  Polynomial term() {
    Polynomial acc = factor();
    while (accept('*')) acc = acc * factor();
    return acc;
  }

  Polynomial factor() {
    skip_ws();
    if (accept('-')) return -factor();
    if (accept('+')) return factor();
    Polynomial b = base();
    if (accept('^')) {
      skip_ws();
      const std::size_t start = pos_;
      if (pos_ < text_.size() && text_[pos_] == '-') throw ParseError("negative exponent", pos_);
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) throw ParseError("expected non-negative integer exponent", start);
      if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
        throw ParseError("non-integer exponent", start);
      const std::string digits(text_.substr(start, pos_ - start));
      if (digits.size() > 4) throw ParseError("exponent too large", start);
      b = pow(b, std::stoi(digits));
    }
    return b;
  }

  Polynomial base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial inner = expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Polynomial(vars_, number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string_view ident = text_.substr(start, pos_ - start);
      auto idx = vars_->find(ident);
      if (!idx) throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
      return Polynomial::variable(vars_, *idx);
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  double number() {
    const std::size_t start = pos_;
    bool digits = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
      digits = true;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        digits = true;
      }
    }
    if (!digits) throw ParseError("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        throw ParseError("malformed exponent in number", pos_);
      }
    }
    return std::stod(std::string(text_.substr(start, pos_ - start)));
  }

  std::string_view text_;
  const VarSetPtr& vars_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Polynomial parse_poly(std::string_view text, const VarSetPtr& vars) {
  if (!vars) throw std::invalid_argument("parse_poly requires a variable set");
  return Parser(text, vars).parse();
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  // Highest degree first reads naturally.
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [m, c] = *it;
    std::string mono;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += p.varset().name(i);
      if (m[i] > 1) mono += "^" + std::to_string(m[i]);
    }
    const bool negative = c < 0.0;
    const double mag = std::abs(c);
    std::string body;
    if (mono.empty()) {
      body = format_double(mag);
    } else if (mag == 1.0) {
      body = mono;
    } else {
      body = format_double(mag) + "*" + mono;
    }
    if (first) {
      out = negative ? "-" + body : body;
      first = false;
    } else {
      out += negative ? " - " : " + ";
      out += body;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calculus and evaluation

Polynomial differentiate(const Polynomial& p, std::size_t var) {
  if (var >= p.varset().size()) throw std::invalid_argument("differentiation variable not in variable set");
  Polynomial r(p.vars());
  for (const auto& [m, c] : p.terms()) {
    if (m[var] == 0) continue;
    Monomial d = m;
    d[var] -= 1;
    r.add_term(d, c * m[var]);
  }
  return r;
}

Polynomial differentiate(const Polynomial& p, std::string_view var) {
  return differentiate(p, p.varset().index_of(var));
}

void check_point_size(const Polynomial& p, Eigen::Index n) {
  if (static_cast<std::size_t>(n) != p.varset().size())
    throw std::invalid_argument("point dimension " + std::to_string(n) + " does not match " +
                                std::to_string(p.varset().size()) + " variables");
}

double evaluate(const Polynomial& p, const std::vector<double>& point) {
  return evaluate(p, Eigen::Map<const Eigen::VectorXd>(point.data(), static_cast<Eigen::Index>(point.size())));
}

Polynomial substitute(const Polynomial& p, std::size_t var, double value) {
  Polynomial r(p.vars());
  for (const auto& [m, c] : p.terms()) {
    Monomial reduced = m;
    reduced[var] = 0;
    r.add_term(reduced, c * std::pow(value, m[var]));
  }
  return r;
}

Polynomial scale_variables(const Polynomial& p, const Eigen::VectorXd& factors) {
  if (static_cast<std::size_t>(factors.size()) != p.varset().size())
    throw std::invalid_argument("scaling factor count does not match variable set");
  Polynomial r(p.vars());
  for (const auto& [m, c] : p.terms()) {
    double s = c;
    for (std::size_t i = 0; i < m.size(); ++i) s *= std::pow(factors(static_cast<Eigen::Index>(i)), m[i]);
    r.add_term(m, s);
  }
  return r;
}

Polynomial lie_derivative(const Polynomial& w, const std::vector<Polynomial>& f, bool include_time) {
  const VarSet& vs = w.varset();
  if (f.size() != vs.num_states())
    throw std::invalid_argument("vector field has " + std::to_string(f.size()) + " components, expected " +
                                std::to_string(vs.num_states()));
  Polynomial r(w.vars());
  if (vs.has_time()) {
    if (include_time) {
      r += differentiate(w, vs.time_index());
    } else if (w.depends_on(vs.time_index())) {
      throw std::invalid_argument("test function depends on time but time derivative is excluded");
    }
  }
  for (std::size_t i = 0; i < vs.num_states(); ++i) {
    Polynomial dw = differentiate(w, vs.state_index(i));
    if (!dw.is_zero()) r += dw * f[i];
  }
  return r;
}

std::vector<Monomial> monomials_up_to(std::size_t nvars, const std::vector<std::size_t>& over, int degree) {
  std::vector<Monomial> out;
  if (degree < 0) return out;
  const std::size_t k = over.size();
  // Enumerate exponent tuples of each total degree in lex-descending order.
  std::vector<int> e(k, 0);
  for (int d = 0; d <= degree; ++d) {
    if (k == 0) {
      if (d == 0) out.emplace_back(nvars);
      continue;
    }
    // Recursive generation via explicit stack: first coordinate takes d..0.
    std::vector<int> cur(k, 0);
    auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
      if (pos + 1 == k) {
        cur[pos] = remaining;
        Monomial m(nvars);
        for (std::size_t j = 0; j < k; ++j) m[over[j]] = cur[j];
        out.push_back(std::move(m));
        return;
      }
      for (int a = remaining; a >= 0; --a) {
        cur[pos] = a;
        self(self, pos + 1, remaining - a);
      }
    };
    rec(rec, 0, d);
  }
  return out;
}

}  // namespace occmom
