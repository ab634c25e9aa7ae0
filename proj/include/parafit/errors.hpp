#pragma once

#include <stdexcept>
#include <string>

namespace parafit {

// Failure taxonomy. The CLI maps each class to a fixed exit code:
// data=2, config=3, solver=4, certificate=5.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CertificateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Theta(theta)-Pi numerically singular at an evaluation point.
struct DegenerateParameterization : ConfigError {
  using ConfigError::ConfigError;
};

// Model evaluated where its denominator vanishes.
struct PoleEvaluationError : DataError {
  using DataError::DataError;
};

}  // namespace parafit
