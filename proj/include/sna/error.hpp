#pragma once

#include <stdexcept>
#include <string>

namespace sna {

// Base class for all engine errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Netlist / config syntax or validation error, carries the 1-based line.
struct ParseError : Error {
  ParseError(int line_no, const std::string& msg)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
  int line;
};

// Newton failed to converge (DC point or a transient step after all halvings).
struct ConvergenceError : Error {
  ConvergenceError(const std::string& msg, double residual)
      : Error(msg), last_residual_a(residual) {}
  double last_residual_a;
};

// Singular or rank-deficient linear system.
struct SingularError : Error {
  explicit SingularError(const std::string& msg) : Error(msg) {}
};

}  // namespace sna
