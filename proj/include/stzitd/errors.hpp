#pragma once

#include <stdexcept>
#include <string>

namespace stzitd {

// Shape or rank disagreement between operands.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation produced or was asked to accept a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An infinite series failed to converge within its term budget.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, records, edge lists).
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stzitd
