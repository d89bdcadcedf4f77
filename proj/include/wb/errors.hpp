#pragma once

#include <stdexcept>
#include <string>

namespace wb {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: usage/argument -> 1, data/schema/domain/parse -> 2, numeric -> 3.

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures in the first stage: separation, rank deficiency,
// non-convergence.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wb
