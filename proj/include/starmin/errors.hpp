#pragma once

#include <stdexcept>
#include <string>

namespace starmin {

// Bad input: parameter out of domain, malformed sequence, unusable config.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iteration failed to reach its tolerance within its budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A quantity that must hold by construction was violated at runtime
// (bookkeeping drift, estimator disagreement, failed identity).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace starmin
