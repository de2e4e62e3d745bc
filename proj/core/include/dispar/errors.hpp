#pragma once

#include <stdexcept>
#include <string>

namespace dispar {

/// Failure categories; the command line tool maps each to its own exit code.
enum class ErrorKind {
  kConfig,     ///< malformed input, schema or precondition violation
  kRegime,     ///< physics-regime refusal (dispersive bound, labeling failure)
  kNumerical,  ///< step size, non-finite values, dimension overflow
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& what) : Error(ErrorKind::kRegime, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::kNumerical, what) {}
};

}  // namespace dispar
