#pragma once

#include <stdexcept>
#include <string>

namespace mlci {

// Caller broke a precondition (dimension mismatch, empty input, bad range).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An ODE integration produced a non-finite state or left the model's domain.
class IntegrationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No goal-reaching trajectory exists under the baseline constraints.
class GoalUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OptimizationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Demonstration synthesis accepted nothing.
class EmptyDataset : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace mlci
