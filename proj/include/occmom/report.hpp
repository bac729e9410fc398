#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occmom/hjb.hpp"
#include "occmom/relaxation.hpp"
#include "occmom/solver.hpp"

namespace occmom {

struct SolveReport {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::string message;
  double lower_bound = 0.0;
  double dual_objective = 0.0;
  Residuals residuals;
  int iterations = 0;
  DegreeMode degree_mode;
  int tf_degree = 0;
  std::vector<MeasureMoments> measures;
  std::optional<ValueFunction> value_function;
  std::vector<Polynomial> controller;
  std::string controller_error;
  std::uint64_t seed = 1;
  std::map<std::string, double> timings;  // seconds
  std::string problem;                    // problem file text
};

/// Single JSON document; doubles round-trip exactly.
std::string to_json(const SolveReport& r);
SolveReport report_from_json(const std::string& text);

SolveReport read_report(const std::string& path);
void write_report(const SolveReport& r, const std::string& path);

/// Polynomial as {"terms": [{"exponents": [...], "coefficient": c}], "text": "..."}.
std::string polynomial_to_json(const Polynomial& p);
Polynomial polynomial_from_json(const std::string& text, const VarSetPtr& vars);

}  // namespace occmom
