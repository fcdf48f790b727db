#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories double as CLI exit codes.
enum class ErrorCategory : int {
  Parameter = 2,
  Config = 3,
  Model = 4,
  Numeric = 5,
  Io = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error(ErrorCategory::Parameter, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};
struct ModelError : Error {
  explicit ModelError(const std::string& what) : Error(ErrorCategory::Model, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ParameterError(what);
}

}  // namespace sdlab
