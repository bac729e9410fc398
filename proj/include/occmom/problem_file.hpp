#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "occmom/ocp.hpp"

namespace occmom {

class ProblemFileError : public std::runtime_error {
 public:
  ProblemFileError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct ProblemFile {
  OcpProblem problem;  // unscaled, validated
  std::optional<Eigen::VectorXd> scale;  // VarSet order, from `scale <var> = <factor>`
  std::uint64_t seed = 1;
  std::string text;

  /// Problem with the file's scaling applied (or the problem itself).
  OcpProblem solver_problem() const;
};

/// Parse the sectioned problem format:
///
///   [variables]  states = x1, x2 / inputs = u / time = t
///   [dynamics]   x1' = x2
///   [cost]       integrand = <poly> / final = <poly> / horizon = free | <T>
///   [initial]    dirac x1 = 1 / dirac (x1, x2) = 0.8 (0, 1) + 0.2 (1, 1)
///                uniform x1 in [-1, 1] / <poly> (>=|<=|=) <poly>
///   [final]      as [initial]
///   [trajectory] <poly> (>=|<=|=) <poly>
///   [integral]   mom(<poly>) (<=|=|>=) <real>
///   [options]    testtime = true|false / scale <var> = <real> / tmax = <real> / seed = <int>
///
/// `#` starts a comment. Throws ProblemFileError with line and column.
ProblemFile parse_problem_text(const std::string& text);
ProblemFile parse_problem_file(const std::string& path);

}  // namespace occmom
