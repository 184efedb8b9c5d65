#pragma once

#include <stdexcept>
#include <string>

namespace xglad {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between tensors or graph components.
struct DimensionError : Error {
  using Error::Error;
};

// Value outside the mathematical domain of an operation (e.g. log of a
// non-positive entry).
struct DomainError : Error {
  using Error::Error;
};

// Out-of-range node, edge, or segment index.
struct IndexError : Error {
  using Error::Error;
};

// Structurally valid input that an operation cannot meaningfully process
// (edgeless graph handed to the dual transform, zero-norm vector in strict
// cosine mode).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Misuse of an API contract (backward on a non-scalar, batch too small,
// invalid argument combinations).
struct UsageError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Unreadable, missing, or malformed data files.
struct DataError : Error {
  using Error::Error;
};

// Non-finite loss encountered during optimization.
struct DivergenceError : Error {
  using Error::Error;
};

// A metric is undefined for the given inputs (e.g. single-class AUC).
struct MetricError : Error {
  using Error::Error;
};

}  // namespace xglad
