#pragma once

#include <stdexcept>
#include <string>

namespace hmer {

// Base for every error the library raises. `kind()` is a stable
// machine-readable tag used by the CLI and the service error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error("validation_error", what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error("contract_error", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error("numeric_error", what) {}
};

class InfeasibleTargetError : public Error {
 public:
  explicit InfeasibleTargetError(const std::string& what)
      : Error("infeasible_target", what) {}
};

class EmissionError : public Error {
 public:
  explicit EmissionError(const std::string& what)
      : Error("emission_error", what) {}
};

}  // namespace hmer
