#pragma once

#include <stdexcept>
#include <string>

namespace cbo {

/// Caller supplied an argument outside an operation's domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization or solve failed even after jitter escalation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An object was used before it reached the state an operation requires.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A sampler was started from (or produced) a state of zero probability or NaN density.
class InvalidStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A user evaluator failed; carries the optimizer iteration it failed at.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace cbo
