#pragma once

#include <stdexcept>
#include <string>

namespace nonlocal {

/// Failure classes. Each maps to one process exit code (see exit_code()).
enum class FailureClass {
  configuration,
  usage,
  hypothesis,
  numerical,
  diagnostic,
  io,
  resource,
};

class Error : public std::runtime_error {
 public:
  Error(FailureClass kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  FailureClass kind() const noexcept { return kind_; }

 private:
  FailureClass kind_;
};

// Bad or inconsistent user input (degenerate bounds, malformed config).
struct ConfigurationError : Error {
  explicit ConfigurationError(const std::string& w) : Error(FailureClass::configuration, w) {}
};

// Programming-level misuse: grid mismatch, empty sample, violated precondition.
struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(FailureClass::usage, w) {}
};

// A modelling hypothesis (growth bound, k_f + k_g < h_0, ...) does not hold.
struct HypothesisError : Error {
  explicit HypothesisError(const std::string& w) : Error(FailureClass::hypothesis, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(FailureClass::numerical, w) {}
};

// A simulated quantity contradicts a predicted bound.
struct DiagnosticError : Error {
  explicit DiagnosticError(const std::string& w) : Error(FailureClass::diagnostic, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(FailureClass::io, w) {}
};

struct ResourceError : Error {
  explicit ResourceError(const std::string& w) : Error(FailureClass::resource, w) {}
};

inline int exit_code(FailureClass kind) noexcept {
  switch (kind) {
    case FailureClass::configuration: return 1;
    case FailureClass::usage: return 1;
    case FailureClass::hypothesis: return 2;
    case FailureClass::numerical: return 3;
    case FailureClass::diagnostic: return 4;
    case FailureClass::io: return 5;
    case FailureClass::resource: return 6;
  }
  return 1;
}

inline const char* to_string(FailureClass kind) noexcept {
  switch (kind) {
    case FailureClass::configuration: return "configuration";
    case FailureClass::usage: return "usage";
    case FailureClass::hypothesis: return "hypothesis";
    case FailureClass::numerical: return "numerical";
    case FailureClass::diagnostic: return "diagnostic";
    case FailureClass::io: return "io";
    case FailureClass::resource: return "resource";
  }
  return "unknown";
}

}  // namespace nonlocal
