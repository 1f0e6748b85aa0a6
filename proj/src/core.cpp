#include "ppl/core.hpp"

#include <algorithm>

namespace ppl {

Tags make_tags(const std::string& name) {
  return std::make_shared<const std::set<std::string>>(std::set<std::string>{name});
}

Tags union_tags(const Tags& a, const Tags& b) {
  if (!a || a->empty()) return b;
  if (!b || b->empty()) return a;
  if (a == b) return a;
  if (std::includes(a->begin(), a->end(), b->begin(), b->end())) return a;
  if (std::includes(b->begin(), b->end(), a->begin(), a->end())) return b;
  auto merged = std::make_shared<std::set<std::string>>(*a);
  merged->insert(b->begin(), b->end());
  return merged;
}

TraceContext& TraceContext::current() {
  thread_local TraceContext ctx;
  return ctx;
}

RandomVariable TraceContext::construct(const RvSpec& spec) {
  if (!seen_names_.insert(spec.name).second) throw DuplicateNameError(spec.name);
  return invoke(stack_.size(), spec);
}

RandomVariable TraceContext::invoke(std::size_t level, const RvSpec& spec) {
  if (level == 0) return default_trace(spec);
  const Tracer& tracer = stack_[level - 1];
  NextTracer next = [this, level](const RvSpec& s) { return invoke(level - 1, s); };
  return tracer(spec, next);
}

RandomVariable TraceContext::default_trace(const RvSpec& spec) {
  // Per-name random stream: skipping one variable never shifts another's
  // draws, which keeps intervened and plain executions aligned per seed.
  RandomSource rng(mix_seed(seed_, hash_name(spec.name.c_str())));
  std::vector<ad::Scalar> draws;
  if (backend_ == Backend::plain) {
    ad::NoTapeGuard no_tape;
    draws = spec.dist.sample(rng);
  } else {
    draws = spec.dist.sample(rng);
  }
  RandomVariable rv{spec.name, spec.dist, {}, {}, false};
  const Tags tag = make_tags(spec.name);
  rv.value.reserve(draws.size());
  for (const auto& d : draws) rv.value.emplace_back(d, tag);
  if (spec.param_tags) rv.ancestors = *spec.param_tags;
  return rv;
}

TracerGuard::TracerGuard(Tracer tracer) {
  TraceContext::current().stack_.push_back(std::move(tracer));
}

TracerGuard::~TracerGuard() { TraceContext::current().stack_.pop_back(); }

ExecutionScope::ExecutionScope() {
  auto& ctx = TraceContext::current();
  saved_ = std::move(ctx.seen_names_);
  ctx.seen_names_.clear();
}

ExecutionScope::~ExecutionScope() { TraceContext::current().seen_names_ = std::move(saved_); }

ProgramOutput run_program(const Program& program, std::uint64_t seed, Backend backend) {
  auto& ctx = TraceContext::current();
  struct Restore {
    TraceContext& ctx;
    Backend backend;
    std::uint64_t seed;
    ~Restore() {
      ctx.set_backend(backend);
      ctx.set_seed(seed);
    }
  } restore{ctx, ctx.backend(), ctx.seed()};
  ctx.set_backend(backend);
  ctx.set_seed(seed);
  ExecutionScope scope;
  if (backend == Backend::plain) {
    ad::NoTapeGuard no_tape;
    return program();
  }
  return program();
}

namespace {

std::pair<std::vector<ad::Scalar>, Tags> unpack(const std::vector<Value>& values) {
  std::vector<ad::Scalar> scalars;
  scalars.reserve(values.size());
  Tags tags;
  for (const auto& v : values) {
    scalars.push_back(v.scalar());
    tags = union_tags(tags, v.tags());
  }
  return {std::move(scalars), std::move(tags)};
}

}  // namespace

RandomVariable rv_normal(const std::string& name, const Value& mean, const Value& stddev,
                         int batch) {
  RvSpec spec{name, Distribution::normal(mean.scalar(), stddev.scalar(), batch),
              union_tags(mean.tags(), stddev.tags())};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_normal(const std::string& name, const std::vector<Value>& means,
                         const Value& stddev) {
  auto [scalars, tags] = unpack(means);
  RvSpec spec{name, Distribution::normal(std::move(scalars), stddev.scalar()),
              union_tags(tags, stddev.tags())};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_normal_elementwise(const std::string& name, const std::vector<Value>& means,
                                     const std::vector<Value>& stddevs) {
  auto [mean_scalars, mean_tags] = unpack(means);
  auto [sd_scalars, sd_tags] = unpack(stddevs);
  RvSpec spec{name, Distribution::normal(std::move(mean_scalars), std::move(sd_scalars)),
              union_tags(mean_tags, sd_tags)};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_bernoulli(const std::string& name, const Value& probs, int batch) {
  RvSpec spec{name, Distribution::bernoulli(probs.scalar(), batch), probs.tags()};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_bernoulli_logits(const std::string& name, const std::vector<Value>& logits) {
  auto [scalars, tags] = unpack(logits);
  RvSpec spec{name, Distribution::bernoulli_logits(std::move(scalars)), std::move(tags)};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_beta(const std::string& name, const Value& conc1, const Value& conc0,
                       int batch) {
  RvSpec spec{name, Distribution::beta(conc1.scalar(), conc0.scalar(), batch),
              union_tags(conc1.tags(), conc0.tags())};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_categorical_logits(const std::string& name, const std::vector<Value>& logits,
                                     int batch) {
  auto [scalars, tags] = unpack(logits);
  RvSpec spec{name, Distribution::categorical_logits(std::move(scalars), batch), std::move(tags)};
  return TraceContext::current().construct(spec);
}

RandomVariable rv_uniform(const std::string& name, const Value& low, const Value& high,
                          int batch) {
  RvSpec spec{name, Distribution::uniform(low.scalar(), high.scalar(), batch),
              union_tags(low.tags(), high.tags())};
  return TraceContext::current().construct(spec);
}

bool ExecutionTrace::contains(const std::string& name) const {
  return std::any_of(nodes_.begin(), nodes_.end(),
                     [&](const TraceNode& n) { return n.name == name; });
}

const TraceNode& ExecutionTrace::node(const std::string& name) const {
  for (const auto& n : nodes_) {
    if (n.name == name) return n;
  }
  throw MissingVariableError(name);
}

std::set<std::string> ExecutionTrace::descendants(const std::string& name) const {
  if (!contains(name)) throw MissingVariableError(name);
  std::set<std::string> result;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& n : nodes_) {
      if (result.count(n.name)) continue;
      const bool child = n.ancestors.count(name) ||
                         std::any_of(result.begin(), result.end(),
                                     [&](const std::string& d) { return n.ancestors.count(d); });
      if (child) {
        result.insert(n.name);
        grew = true;
      }
    }
  }
  return result;
}

ad::Scalar ExecutionTrace::factor_terms(const std::string& name) const {
  ad::Scalar total = node(name).log_prob;
  for (const auto& n : nodes_) {
    if (n.name != name && n.ancestors.count(name)) total += n.log_prob;
  }
  return total;
}

ExecutionTrace capture_trace(const Program& program, std::uint64_t seed, Backend backend) {
  ExecutionTrace result;
  auto* nodes = &result.nodes_;
  Tracer capturer = [nodes](const RvSpec& spec, const NextTracer& next) {
    RandomVariable rv = next(spec);
    // Lift detached values to tape leaves so per-node densities (and any
    // downstream parameters) are differentiable with respect to them.
    // Reparameterized draws already carry nodes and are left alone.
    if (ad::Tape* tape = ad::active_tape()) {
      for (auto& v : rv.value) {
        if (!v.scalar().has_node()) v = Value(tape->variable(v.value()), v.tags());
      }
    }
    TraceNode node{rv.name, rv.dist, rv.value, rv.ancestors, rv.dist.parameter_values(),
                   ad::Scalar(0.0)};
    if (!rv.intervened) {
      ad::Scalar lp(0.0);
      for (int i = 0; i < rv.dist.batch_size(); ++i) {
        lp += rv.dist.log_prob(rv.value[i].scalar(), i);
      }
      node.log_prob = lp;
    }
    nodes->push_back(std::move(node));
    return rv;
  };
  TracerGuard guard(std::move(capturer));
  result.output_ = run_program(program, seed, backend);
  return result;
}

}  // namespace ppl
