#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ppl/core.hpp"

namespace ppl {

// Name -> value bindings fed to a log-joint function. Callers may pass plain
// constants or tape-backed Scalars; constants are injected as tape leaves
// when a tape is active, so the result is differentiable either way.
using Bindings = std::map<std::string, std::vector<ad::Scalar>>;

// Log-joint density of a model program at given bindings: the sum over
// encountered random variables of log_prob at the bound values. Control flow
// may consume bound values, so the set of required names can depend on the
// bindings themselves.
class LogJointFn {
 public:
  explicit LogJointFn(Program model) : model_(std::move(model)) {}

  struct Report {
    std::vector<std::string> unused;  // supplied but never encountered
  };

  ad::Scalar operator()(const Bindings& bindings) const { return eval(bindings, nullptr); }
  ad::Scalar eval(const Bindings& bindings, Report* report) const;

 private:
  Program model_;
};

LogJointFn make_log_joint(Program model);

// Per-execution record of which do-names actually fired.
struct InterventionReport {
  std::vector<std::string> applied;
  std::vector<std::string> ignored;  // never encountered on the executed path
};

// Causal intervention: graph surgery replacing each named variable's
// construction with the fixed value. Descendants see the replacement through
// their parameters; non-descendants are untouched. Do-names absent from the
// executed path are ignored and recorded in the report.
Program intervene(Program model, std::map<std::string, std::vector<double>> do_values,
                  std::shared_ptr<InterventionReport> report = nullptr);

// Name-alignment between a model program and a variational program / data.
struct Alignment {
  enum class Kind { latent, observed };
  struct Target {
    Kind kind;
    std::string key;  // variational variable name, or data binding key
  };
  std::map<std::string, Target> mapping;  // model variable name -> target

  static Alignment of(std::initializer_list<std::pair<std::string, Target>> pairs);
};

// Produces the bindings fed to a LogJointFn: latent model names map to
// variational samples, observed names map to data arrays.
Bindings align_bindings(const std::vector<std::string>& model_names, const Alignment& alignment,
                        const Bindings& q_values, const Bindings& data);

}  // namespace ppl
