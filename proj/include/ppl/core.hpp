#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ppl/distributions.hpp"
#include "ppl/value.hpp"

namespace ppl {

// A named draw realized during one program execution.
struct RandomVariable {
  std::string name;
  Distribution dist;
  std::vector<Value> value;              // length = dist.batch_size()
  std::set<std::string> ancestors;       // names whose values fed the parameters
  bool intervened = false;
};

// What a traceable constructor hands to the tracer stack.
struct RvSpec {
  std::string name;
  Distribution dist;
  Tags param_tags;  // union of tags on all parameter values
};

enum class Backend { differentiable, plain };

// A tracer intercepts random-variable construction. It may delegate to the
// next tracer down the stack (the bottom of the stack samples).
using NextTracer = std::function<RandomVariable(const RvSpec&)>;
using Tracer = std::function<RandomVariable(const RvSpec&, const NextTracer&)>;

// Probabilistic programs are ordinary functions whose random choices go
// through the traceable constructors below.
using ProgramOutput = std::vector<Value>;
using Program = std::function<ProgramOutput()>;

// Per-thread tracer stack plus execution state. The stack is pushed/popped
// with RAII guards, so it re-balances on error exits.
class TraceContext {
 public:
  static TraceContext& current();

  Backend backend() const { return backend_; }
  void set_backend(Backend b) { backend_ = b; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  std::uint64_t seed() const { return seed_; }
  std::size_t stack_depth() const { return stack_.size(); }

  // Entry point used by every traceable constructor: duplicate-name check,
  // then dispatch to the top of the stack.
  RandomVariable construct(const RvSpec& spec);

 private:
  friend class TracerGuard;
  friend class ExecutionScope;
  RandomVariable invoke(std::size_t level, const RvSpec& spec);
  RandomVariable default_trace(const RvSpec& spec);

  std::vector<Tracer> stack_;
  std::set<std::string> seen_names_;
  Backend backend_ = Backend::differentiable;
  std::uint64_t seed_ = 0;
};

class TracerGuard {
 public:
  explicit TracerGuard(Tracer tracer);
  ~TracerGuard();
  TracerGuard(const TracerGuard&) = delete;
  TracerGuard& operator=(const TracerGuard&) = delete;
};

// Marks the dynamic extent of one program execution: clears the seen-name
// set on entry and restores the previous one on exit (nesting-safe).
class ExecutionScope {
 public:
  ExecutionScope();
  ~ExecutionScope();
  ExecutionScope(const ExecutionScope&) = delete;
  ExecutionScope& operator=(const ExecutionScope&) = delete;

 private:
  std::set<std::string> saved_;
};

// Runs `program` with `tracer` pushed for the dynamic extent of the call.
template <typename F, typename... Args>
auto trace(Tracer tracer, F&& program, Args&&... args) {
  TracerGuard guard(std::move(tracer));
  return std::invoke(std::forward<F>(program), std::forward<Args>(args)...);
}

// Runs a program as one execution with the given seed and backend.
ProgramOutput run_program(const Program& program, std::uint64_t seed,
                          Backend backend = Backend::differentiable);

// Traceable constructors (the registered random-variable ops).
RandomVariable rv_normal(const std::string& name, const Value& mean, const Value& stddev,
                         int batch = 1);
RandomVariable rv_normal(const std::string& name, const std::vector<Value>& means,
                         const Value& stddev);
RandomVariable rv_normal_elementwise(const std::string& name, const std::vector<Value>& means,
                                     const std::vector<Value>& stddevs);
RandomVariable rv_bernoulli(const std::string& name, const Value& probs, int batch = 1);
RandomVariable rv_bernoulli_logits(const std::string& name, const std::vector<Value>& logits);
RandomVariable rv_beta(const std::string& name, const Value& conc1, const Value& conc0,
                       int batch = 1);
RandomVariable rv_categorical_logits(const std::string& name, const std::vector<Value>& logits,
                                     int batch = 1);
RandomVariable rv_uniform(const std::string& name, const Value& low, const Value& high,
                          int batch = 1);

// One node of a captured execution trace.
struct TraceNode {
  std::string name;
  Distribution dist;
  std::vector<Value> value;
  std::set<std::string> ancestors;       // direct parents
  std::vector<double> param_snapshot;    // parameter values at construction
  ad::Scalar log_prob;                   // summed over the batch
};

// Ordered DAG of the random variables realized during one execution.
class ExecutionTrace {
 public:
  const std::vector<TraceNode>& nodes() const { return nodes_; }
  const ProgramOutput& output() const { return output_; }
  bool contains(const std::string& name) const;
  const TraceNode& node(const std::string& name) const;

  // Transitive closure over parent edges.
  std::set<std::string> descendants(const std::string& name) const;

  // Log-density of the named node plus all nodes it directly parameterizes
  // (its Markov-blanket energy).
  ad::Scalar factor_terms(const std::string& name) const;

 private:
  friend ExecutionTrace capture_trace(const Program&, std::uint64_t, Backend);
  std::vector<TraceNode> nodes_;
  ProgramOutput output_;
};

ExecutionTrace capture_trace(const Program& program, std::uint64_t seed,
                             Backend backend = Backend::differentiable);

}  // namespace ppl
