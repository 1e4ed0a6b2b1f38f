#pragma once
// Error types shared across the library. ConfigError marks invalid inputs or
// violated preconditions; NumericalError marks breakdowns inside otherwise
// valid computations (non-convergence, branch ambiguity, division blowup)
// and carries the name of the failing operation.

#include <stdexcept>
#include <string>
#include <utility>

namespace djs {

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string operation, const std::string& what)
      : std::runtime_error(operation + ": " + what), operation_(std::move(operation)) {}

  const std::string& operation() const noexcept { return operation_; }

 private:
  std::string operation_;
};

}  // namespace djs
