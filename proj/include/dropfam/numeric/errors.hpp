#pragma once

#include <stdexcept>
#include <string>

namespace dropfam {

// Argument outside the mathematical domain of an operation (alpha > 1, T <= 0, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Caller broke an operation's contract (shape mismatch, nondeterministic callback).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Bad input data: out-of-vocabulary token, malformed CSV cell, label out of range.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dropfam
