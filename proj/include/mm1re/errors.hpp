#pragma once

#include <stdexcept>
#include <string>

namespace mm1re {

// Base for every rejection of a model, parameter set or perturbation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed environment (generator rows, OU parameters, state tables).
class InvalidModel : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// |p| is not bounded on the reachable states.
class UnboundedPerturbation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// epsilon * sup|p| >= mu.
class RateBoundViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// lambda >= mu, or the worst-case perturbed rate mu0 <= lambda.
class UnstableQueue : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Structured config could not be parsed or is missing fields.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mm1re
