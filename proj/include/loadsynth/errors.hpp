#pragma once

#include <stdexcept>
#include <string>

namespace loadsynth {

// Invalid user input or configuration. The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operand shapes do not conform to an operation's contract.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite values or diverging computations. The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace loadsynth
