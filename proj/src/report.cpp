#include "occmom/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace occmom {

using nlohmann::json;

namespace {

SolveStatus status_from(const std::string& s) {
  for (auto st : {SolveStatus::kOptimal, SolveStatus::kInfeasible, SolveStatus::kUnbounded,
                  SolveStatus::kNumericalFailure, SolveStatus::kIterationLimit}) {
    if (s == to_string(st)) return st;
  }
  throw std::invalid_argument("unknown status '" + s + "'");
}

MeasureId measure_from(const std::string& s) {
  for (auto id : {MeasureId::kInitial, MeasureId::kFinal, MeasureId::kTrajectory}) {
    if (s == to_string(id)) return id;
  }
  throw std::invalid_argument("unknown measure '" + s + "'");
}

json varset_json(const VarSet& v) {
  json j;
  j["states"] = v.state_names();
  j["inputs"] = v.input_names();
  j["time"] = v.has_time() ? json(*v.time_name()) : json(nullptr);
  return j;
}

VarSetPtr varset_from(const json& j) {
  std::optional<std::string> time;
  if (!j.at("time").is_null()) time = j.at("time").get<std::string>();
  return make_varset(j.at("states").get<std::vector<std::string>>(), j.at("inputs").get<std::vector<std::string>>(),
                     time);
}

json poly_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [m, c] : p.terms()) terms.push_back({{"exponents", m.exponents}, {"coefficient", c}});
  return {{"terms", terms}, {"text", to_string(p)}};
}

Polynomial poly_from(const json& j, const VarSetPtr& vars) {
  Polynomial p(vars, 0.0);
  for (const auto& t : j.at("terms")) {
    Monomial m(t.at("exponents").get<std::vector<int>>());
    if (m.size() != vars->size()) throw std::invalid_argument("monomial size does not match the variables");
    p.add_term(m, t.at("coefficient").get<double>());
  }
  return p;
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(M.cols()));
    for (Eigen::Index k = 0; k < M.cols(); ++k) r[static_cast<std::size_t>(k)] = M(i, k);
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  return M;
}

json verification_json(const VerificationReport& v) {
  return {{"min_hjb_residual", v.min_hjb_residual},
          {"max_terminal_violation", v.max_terminal_violation},
          {"bound_error", v.bound_error},
          {"certified_bound", v.certified_bound},
          {"lower_bound", v.lower_bound},
          {"eps", v.eps},
          {"eps_bound", v.eps_bound},
          {"hjb_points", v.hjb_points},
          {"terminal_points", v.terminal_points},
          {"initial_points", v.initial_points},
          {"seed", v.seed},
          {"hjb_ok", v.hjb_ok},
          {"terminal_ok", v.terminal_ok},
          {"bound_ok", v.bound_ok},
          {"passed", v.passed()}};
}

VerificationReport verification_from(const json& j) {
  VerificationReport v;
  v.min_hjb_residual = j.at("min_hjb_residual");
  v.max_terminal_violation = j.at("max_terminal_violation");
  v.bound_error = j.at("bound_error");
  v.certified_bound = j.at("certified_bound");
  v.lower_bound = j.at("lower_bound");
  v.eps = j.at("eps");
  v.eps_bound = j.at("eps_bound");
  v.hjb_points = j.at("hjb_points");
  v.terminal_points = j.at("terminal_points");
  v.initial_points = j.at("initial_points");
  v.seed = j.at("seed");
  v.hjb_ok = j.at("hjb_ok");
  v.terminal_ok = j.at("terminal_ok");
  v.bound_ok = j.at("bound_ok");
  return v;
}

// Non-finite doubles have no JSON literal; they are stored as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double num_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw std::invalid_argument("expected a number, got '" + s + "'");
}

}  // namespace

std::string to_json(const SolveReport& r) {
  json j;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  j["lower_bound"] = num(r.lower_bound);
  j["dual_objective"] = num(r.dual_objective);
  j["residuals"] = {{"primal", num(r.residuals.primal)}, {"dual", num(r.residuals.dual)}, {"gap", num(r.residuals.gap)}};
  j["iterations"] = r.iterations;
  j["degree"] = {{"mode", r.degree_mode.kind == DegreeMode::Kind::kMoment ? "mom" : "tf"},
                 {"value", r.degree_mode.degree},
                 {"tf_degree", r.tf_degree}};

  json measures = json::array();
  for (const auto& m : r.measures) {
    json exps = json::array();
    for (const auto& mono : m.basis.monomials()) {
      std::vector<int> e;
      for (auto v : m.basis.vars()) e.push_back(mono[v]);
      exps.push_back(e);
    }
    measures.push_back({{"measure", to_string(m.id)},
                        {"known", m.known},
                        {"basis", {{"nvars", m.basis.nvars()}, {"vars", m.basis.vars()}, {"degree", m.basis.degree()}}},
                        {"exponents", exps},
                        {"moments", m.moments},
                        {"matrix", matrix_json(m.matrix)}});
  }
  j["measures"] = measures;

  if (r.value_function) {
    const auto& vf = *r.value_function;
    json multipliers = json::array();
    for (double k : vf.integral_multipliers) multipliers.push_back(num(k));
    j["value_function"] = {{"variables", varset_json(vf.v.varset())},
                           {"v", poly_json(vf.v)},
                           {"hjb_cost", poly_json(vf.hjb_cost)},
                           {"integral_multipliers", multipliers},
                           {"tf_degree", vf.tf_degree},
                           {"lower_bound", num(vf.lower_bound)},
                           {"verification", verification_json(vf.verification)}};
  } else {
    j["value_function"] = nullptr;
  }

  json ctrl = json::array();
  for (const auto& u : r.controller) ctrl.push_back(poly_json(u));
  j["controller"] = ctrl;
  j["controller_variables"] = r.controller.empty() ? json(nullptr) : varset_json(r.controller[0].varset());
  j["controller_error"] = r.controller_error;
  j["seed"] = r.seed;
  j["timings"] = r.timings;
  j["problem"] = r.problem;
  return j.dump(2) + "\n";
}

SolveReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    SolveReport r;
    r.status = status_from(j.at("status"));
    r.message = j.at("message");
    r.lower_bound = num_from(j.at("lower_bound"));
    r.dual_objective = num_from(j.at("dual_objective"));
    r.residuals.primal = num_from(j.at("residuals").at("primal"));
    r.residuals.dual = num_from(j.at("residuals").at("dual"));
    r.residuals.gap = num_from(j.at("residuals").at("gap"));
    r.iterations = j.at("iterations");
    const auto& d = j.at("degree");
    r.degree_mode = d.at("mode") == "mom" ? DegreeMode::moment(d.at("value")) : DegreeMode::test_function(d.at("value"));
    r.tf_degree = d.at("tf_degree");
    for (const auto& m : j.at("measures")) {
      MeasureMoments mm;
      mm.id = measure_from(m.at("measure"));
      mm.known = m.at("known");
      const auto& b = m.at("basis");
      mm.basis = MomentBasis(b.at("nvars"), b.at("vars").get<std::vector<std::size_t>>(), b.at("degree"));
      mm.moments = m.at("moments").get<std::vector<double>>();
      mm.matrix = matrix_from(m.at("matrix"));
      r.measures.push_back(std::move(mm));
    }
    if (!j.at("value_function").is_null()) {
      const auto& v = j.at("value_function");
      const VarSetPtr vars = varset_from(v.at("variables"));
      ValueFunction vf;
      vf.v = poly_from(v.at("v"), vars);
      vf.hjb_cost = poly_from(v.at("hjb_cost"), vars);
      for (const auto& k : v.at("integral_multipliers")) vf.integral_multipliers.push_back(num_from(k));
      vf.tf_degree = v.at("tf_degree");
      vf.lower_bound = num_from(v.at("lower_bound"));
      vf.verification = verification_from(v.at("verification"));
      r.value_function = std::move(vf);
    }
    if (!j.at("controller_variables").is_null()) {
      const VarSetPtr vars = varset_from(j.at("controller_variables"));
      for (const auto& u : j.at("controller")) r.controller.push_back(poly_from(u, vars));
    }
    r.controller_error = j.at("controller_error");
    r.seed = j.at("seed");
    r.timings = j.at("timings").get<std::map<std::string, double>>();
    r.problem = j.at("problem");
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
}

SolveReport read_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open report '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return report_from_json(ss.str());
}

void write_report(const SolveReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << to_json(r);
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::string polynomial_to_json(const Polynomial& p) { return poly_json(p).dump(); }

Polynomial polynomial_from_json(const std::string& text, const VarSetPtr& vars) {
  return poly_from(json::parse(text), vars);
}

}  // namespace occmom
