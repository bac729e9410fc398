#include "occmom/problem_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace occmom {

namespace {

struct Span {
  std::string text;
  std::size_t line = 0;
  std::size_t column = 1;  // of text[0]

  [[noreturn]] void fail(const std::string& what, std::size_t offset = 0) const {
    throw ProblemFileError(what, line, column + offset);
  }

  Span sub(std::size_t pos, std::size_t len = std::string::npos) const {
    return trimmed(Span{text.substr(pos, len), line, column + pos});
  }

  static Span trimmed(Span s) {
    std::size_t a = 0;
    while (a < s.text.size() && std::isspace(static_cast<unsigned char>(s.text[a]))) ++a;
    std::size_t b = s.text.size();
    while (b > a && std::isspace(static_cast<unsigned char>(s.text[b - 1]))) --b;
    return Span{s.text.substr(a, b - a), s.line, s.column + a};
  }

  bool starts_with(const std::string& word) const {
    if (text.compare(0, word.size(), word) != 0) return false;
    return text.size() == word.size() || !(std::isalnum(static_cast<unsigned char>(text[word.size()])) ||
                                           text[word.size()] == '_');
  }
};

/// Split at top-level commas (outside parentheses and brackets).
std::vector<Span> split(const Span& s, char sep) {
  std::vector<Span> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.text.size(); ++i) {
    const char c = s.text[i];
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == sep && depth == 0) {
      out.push_back(s.sub(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(s.sub(start));
  return out;
}

double number(const Span& s) {
  double v = 0.0;
  const char* b = s.text.data();
  const char* e = b + s.text.size();
  if (!s.text.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || s.text.empty()) s.fail("expected a number, got '" + s.text + "'");
  return v;
}

Polynomial poly(const Span& s, const VarSetPtr& vars) {
  try {
    return parse_poly(s.text, vars);
  } catch (const ParseError& e) {
    s.fail(e.what(), e.position());
  } catch (const std::exception& e) {
    s.fail(e.what());
  }
}

/// Position and length of the relation operator (<=, >=, =) at top level.
std::pair<std::size_t, std::size_t> find_relation(const Span& s) {
  for (std::size_t i = 0; i < s.text.size(); ++i) {
    const char c = s.text[i];
    if ((c == '<' || c == '>') && i + 1 < s.text.size() && s.text[i + 1] == '=') return {i, 2};
    if (c == '<' || c == '>') s.fail("strict inequalities are not supported", i);
    if (c == '=') return {i, 1};
  }
  s.fail("expected a relation '<=', '>=' or '='");
}

SupportConstraint constraint(const Span& s, const VarSetPtr& vars) {
  const auto [pos, len] = find_relation(s);
  const Polynomial lhs = poly(s.sub(0, pos), vars);
  const Polynomial rhs = poly(s.sub(pos + len), vars);
  const std::string op = s.text.substr(pos, len);
  if (op == "<=") return SupportConstraint::less_equal(lhs, rhs);
  if (op == ">=") return SupportConstraint::greater_equal(lhs, rhs);
  return SupportConstraint::equal(lhs, rhs);
}

std::vector<Span> tuple(const Span& s) {
  if (s.text.size() >= 2 && s.text.front() == '(' && s.text.back() == ')') return split(s.sub(1, s.text.size() - 2), ',');
  return {s};
}

struct BoundaryDraft {
  std::vector<DiracFactor> diracs;
  std::vector<std::pair<std::size_t, std::pair<double, double>>> uniform;
  std::set<std::size_t> claimed_dirac;
  std::set<std::size_t> claimed_uniform;
  std::vector<SupportConstraint> constraints;

  BoundarySpec build() const {
    BoundarySpec b;
    if (!diracs.empty()) {
      DiracFactor d{{}, Eigen::MatrixXd::Ones(0, 1), Eigen::VectorXd::Ones(1)};
      for (const auto& f : diracs) {
        const Eigen::Index k0 = d.points.cols();
        const Eigen::Index k1 = f.points.cols();
        const auto r0 = static_cast<Eigen::Index>(d.variables.size());
        const auto r1 = static_cast<Eigen::Index>(f.variables.size());
        Eigen::MatrixXd pts(r0 + r1, k0 * k1);
        Eigen::VectorXd w(k0 * k1);
        for (Eigen::Index a = 0; a < k0; ++a) {
          for (Eigen::Index c = 0; c < k1; ++c) {
            pts.col(a * k1 + c) << d.points.col(a), f.points.col(c);
            w(a * k1 + c) = d.weights(a) * f.weights(c);
          }
        }
        d.variables.insert(d.variables.end(), f.variables.begin(), f.variables.end());
        d.points = pts;
        d.weights = w;
      }
      b.dirac = d;
    }
    if (!uniform.empty()) {
      UniformFactor u;
      u.box.resize(static_cast<Eigen::Index>(uniform.size()), 2);
      for (std::size_t i = 0; i < uniform.size(); ++i) {
        u.variables.push_back(uniform[i].first);
        u.box(static_cast<Eigen::Index>(i), 0) = uniform[i].second.first;
        u.box(static_cast<Eigen::Index>(i), 1) = uniform[i].second.second;
      }
      b.uniform = u;
    }
    b.free.constraints = constraints;
    return b;
  }
};

std::size_t state_var(const Span& s, const VarSet& vs) {
  const auto idx = vs.find(s.text);
  if (!idx) s.fail("unknown variable '" + s.text + "'");
  if (!vs.is_state(*idx)) s.fail("'" + s.text + "' is not a state");
  return *idx;
}

void boundary_line(const Span& s, const VarSetPtr& vars, BoundaryDraft& d) {
  const VarSet& vs = *vars;
  if (s.starts_with("dirac")) {
    const Span body = s.sub(5);
    const auto eq = body.text.find('=');
    if (eq == std::string::npos) body.fail("expected 'dirac <vars> = <point>'");
    DiracFactor f;
    for (const auto& v : tuple(body.sub(0, eq))) {
      const std::size_t idx = state_var(v, vs);
      if (d.claimed_dirac.count(idx)) v.fail("state '" + v.text + "' already has a Dirac value");
      d.claimed_dirac.insert(idx);
      f.variables.push_back(idx);
    }
    // Mixture: w1 (p1) + w2 (p2) ...; a single point may omit the weight.
    const Span rhs = body.sub(eq + 1);
    std::vector<std::pair<double, std::vector<double>>> atoms;
    if (rhs.text.find('(') == std::string::npos) {
      atoms.push_back({1.0, {number(rhs)}});
    } else {
      for (const auto& term : split(rhs, '+')) {
        const auto open = term.text.find('(');
        if (open == std::string::npos || term.text.back() != ')') term.fail("expected '<weight> (<point>)'");
        const Span w = term.sub(0, open);
        std::vector<double> pt;
        for (const auto& c : tuple(term.sub(open))) pt.push_back(number(c));
        atoms.push_back({w.text.empty() ? 1.0 : number(w), pt});
      }
    }
    f.points.resize(static_cast<Eigen::Index>(f.variables.size()), static_cast<Eigen::Index>(atoms.size()));
    f.weights.resize(static_cast<Eigen::Index>(atoms.size()));
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      if (atoms[k].second.size() != f.variables.size()) rhs.fail("point dimension does not match the variables");
      for (std::size_t r = 0; r < f.variables.size(); ++r)
        f.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = atoms[k].second[r];
      f.weights(static_cast<Eigen::Index>(k)) = atoms[k].first;
    }
    d.diracs.push_back(std::move(f));
    return;
  }
  if (s.starts_with("uniform")) {
    const Span body = s.sub(7);
    const auto in = body.text.find(" in ");
    if (in == std::string::npos) body.fail("expected 'uniform <var> in [a, b]'");
    const Span var = body.sub(0, in);
    const std::size_t idx = state_var(var, vs);
    if (d.claimed_uniform.count(idx)) var.fail("state '" + var.text + "' already has a uniform interval");
    d.claimed_uniform.insert(idx);
    const Span range = body.sub(in + 4);
    if (range.text.size() < 2 || range.text.front() != '[' || range.text.back() != ']')
      range.fail("expected an interval '[a, b]'");
    const auto ends = split(range.sub(1, range.text.size() - 2), ',');
    if (ends.size() != 2) range.fail("expected an interval '[a, b]'");
    const double lo = number(ends[0]), hi = number(ends[1]);
    if (!(lo < hi)) range.fail("interval must have a < b");
    d.uniform.push_back({idx, {lo, hi}});
    return;
  }
  d.constraints.push_back(constraint(s, vars));
}

std::vector<std::string> names(const Span& s) {
  std::vector<std::string> out;
  if (s.text.empty()) return out;
  for (const auto& n : split(s, ',')) {
    if (n.text.empty()) n.fail("empty variable name");
    out.push_back(n.text);
  }
  return out;
}

}  // namespace

OcpProblem ProblemFile::solver_problem() const { return scale ? apply_scaling(problem, *scale) : problem; }

ProblemFile parse_problem_text(const std::string& text) {
  ProblemFile pf;
  pf.text = text;
  OcpProblem& p = pf.problem;

  std::vector<std::string> states, inputs;
  std::optional<std::string> time;
  VarSetPtr vars;
  std::map<std::size_t, Polynomial> dynamics;
  BoundaryDraft initial, final;
  std::map<std::string, double> scale;

  const std::set<std::string> known = {"variables", "dynamics", "cost",     "initial",
                                       "final",     "trajectory", "integral", "options"};
  std::string section;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;

  auto ensure_vars = [&](const Span& s) {
    if (vars) return;
    if (states.empty()) s.fail("[variables] with at least one state must come first");
    try {
      vars = make_varset(states, inputs, time);
    } catch (const std::exception& e) {
      s.fail(e.what());
    }
    p.vars = vars;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const Span s = Span::trimmed(Span{raw, lineno, 1});
    if (s.text.empty()) continue;

    if (s.text.front() == '[') {
      if (s.text.back() != ']') s.fail("malformed section header");
      section = s.sub(1, s.text.size() - 2).text;
      if (!known.count(section)) s.fail("unknown section [" + section + "]");
      if (!seen.insert(section).second) s.fail("section [" + section + "] appears twice");
      if (section != "variables") ensure_vars(s);
      continue;
    }
    if (section.empty()) s.fail("content before the first section");

    if (section == "variables") {
      const auto eq = s.text.find('=');
      if (eq == std::string::npos) s.fail("expected '<key> = <names>'");
      const std::string key = s.sub(0, eq).text;
      const Span value = s.sub(eq + 1);
      if (key == "states") {
        states = names(value);
      } else if (key == "inputs") {
        inputs = names(value);
      } else if (key == "time") {
        if (value.text.empty()) value.fail("empty time name");
        time = value.text;
      } else {
        s.fail("unknown key '" + key + "' in [variables]");
      }
    } else if (section == "dynamics") {
      const auto eq = s.text.find('=');
      if (eq == std::string::npos) s.fail("expected \"<state>' = <poly>\"");
      const Span lhs = s.sub(0, eq);
      if (lhs.text.empty() || lhs.text.back() != '\'') lhs.fail("expected \"<state>'\" on the left");
      const Span name = lhs.sub(0, lhs.text.size() - 1);
      const std::size_t idx = state_var(name, *vars);
      const std::size_t k = idx - vars->state_index(0);
      if (dynamics.count(k)) name.fail("second equation for state '" + name.text + "'");
      dynamics.emplace(k, poly(s.sub(eq + 1), vars));
    } else if (section == "cost") {
      const auto eq = s.text.find('=');
      if (eq == std::string::npos) s.fail("expected '<key> = <value>'");
      const std::string key = s.sub(0, eq).text;
      const Span value = s.sub(eq + 1);
      if (key == "integrand") {
        p.scost = poly(value, vars);
      } else if (key == "final") {
        p.fcost = poly(value, vars);
      } else if (key == "horizon") {
        if (value.text == "free") {
          p.horizon = Horizon::free();
        } else {
          const double T = number(value);
          if (!(T > 0.0)) value.fail("horizon must be positive or 'free'");
          p.horizon = Horizon::fixed(T);
        }
      } else {
        s.fail("unknown key '" + key + "' in [cost]");
      }
    } else if (section == "initial" || section == "final") {
      boundary_line(s, vars, section == "initial" ? initial : final);
    } else if (section == "trajectory") {
      p.tconstraints.push_back(constraint(s, vars));
    } else if (section == "integral") {
      if (!s.starts_with("mom")) s.fail("expected 'mom(<poly>) <relation> <bound>'");
      const Span body = s.sub(3);
      if (body.text.empty() || body.text.front() != '(') body.fail("expected '(' after mom");
      int depth = 0;
      std::size_t close = std::string::npos;
      for (std::size_t i = 0; i < body.text.size(); ++i) {
        if (body.text[i] == '(') ++depth;
        if (body.text[i] == ')' && --depth == 0) {
          close = i;
          break;
        }
      }
      if (close == std::string::npos) body.fail("unbalanced parentheses");
      MomentConstraint mc;
      mc.integrand = poly(body.sub(1, close - 1), vars);
      const Span rest = body.sub(close + 1);
      const auto [pos, len] = find_relation(rest);
      if (pos != 0) rest.fail("expected a relation after mom(...)");
      const std::string op = rest.text.substr(0, len);
      mc.relation = op == "<=" ? MomentRelation::kLessEqual
                    : op == ">=" ? MomentRelation::kGreaterEqual
                                 : MomentRelation::kEqual;
      mc.bound = number(rest.sub(len));
      p.sconstraints.push_back(std::move(mc));
    } else if (section == "options") {
      const auto eq = s.text.find('=');
      if (eq == std::string::npos) s.fail("expected '<key> = <value>'");
      const Span key = s.sub(0, eq);
      const Span value = s.sub(eq + 1);
      if (key.text == "testtime") {
        if (value.text == "true")
          p.testtime = TestTime::kTimeDependent;
        else if (value.text == "false")
          p.testtime = TestTime::kTimeIndependent;
        else
          value.fail("expected 'true' or 'false'");
      } else if (key.starts_with("scale")) {
        const Span var = key.sub(5);
        if (!vars->find(var.text)) var.fail("unknown variable '" + var.text + "'");
        const double f = number(value);
        if (!(f > 0.0)) value.fail("scale factor must be positive");
        scale[var.text] = f;
      } else if (key.text == "tmax") {
        p.tmax = number(value);
      } else if (key.text == "seed") {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(value.text.data(), value.text.data() + value.text.size(), seed);
        if (ec != std::errc() || ptr != value.text.data() + value.text.size()) value.fail("expected an integer seed");
        pf.seed = seed;
      } else {
        key.fail("unknown option '" + key.text + "'");
      }
    }
  }

  // Whole-file errors point at the last line.
  const Span end{"", std::max<std::size_t>(lineno, 1), 1};
  ensure_vars(end);
  for (std::size_t k = 0; k < vars->num_states(); ++k) {
    if (!dynamics.count(k)) end.fail("missing equation for state '" + vars->name(vars->state_index(k)) + "'");
    p.dynamics.push_back(dynamics.at(k));
  }
  p.initial = initial.build();
  p.final = final.build();
  try {
    p = build_problem(std::move(p));
  } catch (const std::invalid_argument& e) {
    end.fail(e.what());
  }
  if (!scale.empty()) {
    Eigen::VectorXd f = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(vars->size()));
    for (const auto& [name, v] : scale) f(static_cast<Eigen::Index>(vars->index_of(name))) = v;
    pf.scale = f;
  }
  return pf;
}

ProblemFile parse_problem_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open problem file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_problem_text(ss.str());
}

}  // namespace occmom
