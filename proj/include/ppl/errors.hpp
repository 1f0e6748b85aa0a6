#pragma once

#include <stdexcept>
#include <string>

namespace ppl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical domain violation (log of a non-positive number, division by
// zero, NaN parameter, ...). Carries the operation name and offending value.
struct DomainError : Error {
  DomainError(const std::string& op, double arg)
      : Error("domain error in '" + op + "' at argument " + std::to_string(arg)),
        op_name(op),
        argument(arg) {}
  std::string op_name;
  double argument;
};

struct DuplicateNameError : Error {
  explicit DuplicateNameError(const std::string& name)
      : Error("random variable name '" + name + "' constructed twice in one execution"),
        name(name) {}
  std::string name;
};

struct MissingVariableError : Error {
  explicit MissingVariableError(const std::string& name)
      : Error("no random variable named '" + name + "' in trace"), name(name) {}
  std::string name;
};

struct MissingBindingError : Error {
  explicit MissingBindingError(const std::string& name)
      : Error("no binding supplied for random variable '" + name + "'"), name(name) {}
  std::string name;
};

struct AlignmentError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct InferenceError : Error {
  using Error::Error;
};

}  // namespace ppl
