#pragma once

#include <stdexcept>
#include <string>

namespace prolt {

// Bad user input: malformed datasets, inconsistent configs, invalid spaces.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced during training or inference. Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke a precondition (empty inputs, stale caches, labels out of range).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace prolt
