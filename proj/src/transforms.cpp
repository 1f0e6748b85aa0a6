#include "ppl/transforms.hpp"

#include <algorithm>

namespace ppl {

ad::Scalar LogJointFn::eval(const Bindings& bindings, Report* report) const {
  ad::Scalar total(0.0);
  std::set<std::string> used;
  Tracer substituter = [&](const RvSpec& spec, const NextTracer&) {
    auto it = bindings.find(spec.name);
    if (it == bindings.end()) throw MissingBindingError(spec.name);
    const auto& bound = it->second;
    if (static_cast<int>(bound.size()) != spec.dist.batch_size()) {
      throw DataError("binding for '" + spec.name + "' has " + std::to_string(bound.size()) +
                      " elements, expected " + std::to_string(spec.dist.batch_size()));
    }
    used.insert(spec.name);
    ad::Tape* tape = ad::active_tape();
    RandomVariable rv{spec.name, spec.dist, {}, {}, false};
    if (spec.param_tags) rv.ancestors = *spec.param_tags;
    const Tags tag = make_tags(spec.name);
    rv.value.reserve(bound.size());
    for (int i = 0; i < spec.dist.batch_size(); ++i) {
      ad::Scalar s = bound[i];
      if (tape != nullptr && !s.has_node()) s = tape->variable(s.value);  // leaf injection
      total += spec.dist.log_prob(s, i);
      rv.value.emplace_back(s, tag);
    }
    return rv;
  };
  TracerGuard guard(std::move(substituter));
  ExecutionScope scope;
  model_();
  if (report != nullptr) {
    for (const auto& [name, values] : bindings) {
      if (!used.count(name)) report->unused.push_back(name);
    }
  }
  return total;
}

LogJointFn make_log_joint(Program model) { return LogJointFn(std::move(model)); }

Program intervene(Program model, std::map<std::string, std::vector<double>> do_values,
                  std::shared_ptr<InterventionReport> report) {
  return [model = std::move(model), do_values = std::move(do_values), report]() {
    if (report) {
      report->applied.clear();
      report->ignored.clear();
    }
    std::set<std::string> applied;
    Tracer intervener = [&](const RvSpec& spec, const NextTracer& next) {
      auto it = do_values.find(spec.name);
      if (it == do_values.end()) return next(spec);
      if (static_cast<int>(it->second.size()) != spec.dist.batch_size()) {
        throw DataError("do-value for '" + spec.name + "' has wrong size");
      }
      applied.insert(spec.name);
      // Replace the construction: no sampling, no delegation downward, so
      // composed transforms see the mutilated graph.
      RandomVariable rv{spec.name, spec.dist, {}, {}, true};
      const Tags tag = make_tags(spec.name);
      for (double v : it->second) rv.value.emplace_back(ad::Scalar(v), tag);
      if (spec.param_tags) rv.ancestors = *spec.param_tags;
      return rv;
    };
    TracerGuard guard(std::move(intervener));
    ProgramOutput out = model();
    if (report) {
      for (const auto& [name, values] : do_values) {
        if (applied.count(name)) {
          report->applied.push_back(name);
        } else {
          report->ignored.push_back(name);
        }
      }
    }
    return out;
  };
}

Alignment Alignment::of(std::initializer_list<std::pair<std::string, Target>> pairs) {
  Alignment a;
  for (const auto& [name, target] : pairs) a.mapping.emplace(name, target);
  return a;
}

Bindings align_bindings(const std::vector<std::string>& model_names, const Alignment& alignment,
                        const Bindings& q_values, const Bindings& data) {
  std::vector<std::string> gaps;
  Bindings out;
  std::set<std::string> consumed_keys;
  for (const auto& name : model_names) {
    auto it = alignment.mapping.find(name);
    if (it == alignment.mapping.end()) {
      gaps.push_back(name);
      continue;
    }
    consumed_keys.insert(name);
    const auto& target = it->second;
    const Bindings& source = target.kind == Alignment::Kind::latent ? q_values : data;
    auto vit = source.find(target.key);
    if (vit == source.end()) {
      throw AlignmentError("alignment target '" + target.key + "' for model variable '" + name +
                           "' has no value");
    }
    out.emplace(name, vit->second);
  }
  if (!gaps.empty()) {
    std::string msg = "alignment gaps for model variables:";
    for (const auto& g : gaps) msg += " " + g;
    throw AlignmentError(msg);
  }
  for (const auto& [key, target] : alignment.mapping) {
    if (!consumed_keys.count(key)) {
      throw AlignmentError("dangling alignment key '" + key + "' names no model variable");
    }
  }
  return out;
}

}  // namespace ppl
