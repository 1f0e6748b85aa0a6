#include "ppl/vi.hpp"

#include <algorithm>
#include <cmath>

namespace ppl::inference {

ViState make_vi_state(const std::vector<models::LatentSpec>& latents) {
  ViState state;
  for (const auto& latent : latents) {
    state.latent_names.push_back("q_" + latent.name);
    state.sizes.push_back(latent.size);
    for (int i = 0; i < latent.size; ++i) {
      state.loc.push_back(ad::Scalar(0.0));
      state.log_scale.push_back(ad::Scalar(0.0));
    }
  }
  state.preconditioner.assign(2 * state.loc.size(), ad::Scalar(1.0));
  return state;
}

Alignment mean_field_alignment(const models::ModelZooEntry& entry) {
  Alignment alignment;
  for (const auto& latent : entry.latents) {
    alignment.mapping.emplace(latent.name,
                              Alignment::Target{Alignment::Kind::latent, "q_" + latent.name});
  }
  for (const auto& name : entry.observed) {
    alignment.mapping.emplace(name, Alignment::Target{Alignment::Kind::observed, name});
  }
  return alignment;
}

Program make_variational_program(const ViState& state) {
  return [state]() {
    ProgramOutput out;
    std::size_t offset = 0;
    for (std::size_t v = 0; v < state.latent_names.size(); ++v) {
      std::vector<Value> means;
      std::vector<Value> scales;
      for (int i = 0; i < state.sizes[v]; ++i) {
        means.emplace_back(state.loc[offset + i]);
        scales.emplace_back(ad::exp(state.log_scale[offset + i]));
      }
      RandomVariable q = rv_normal_elementwise(state.latent_names[v], means, scales);
      out.insert(out.end(), q.value.begin(), q.value.end());
      offset += state.sizes[v];
    }
    return out;
  };
}

ad::Scalar elbo_loss(const DensityFn& model_log_joint, const Program& variational,
                     const Alignment& alignment, const Bindings& data, std::uint64_t seed,
                     int n_mc) {
  if (n_mc < 1) throw InferenceError("elbo_loss requires n_mc >= 1");
  std::vector<std::string> model_names;
  for (const auto& [name, target] : alignment.mapping) model_names.push_back(name);
  ad::Scalar total(0.0);
  for (int mc = 0; mc < n_mc; ++mc) {
    ExecutionTrace q_trace = capture_trace(variational, mix_seed(seed, 1000003u * mc + 17u));
    Bindings q_values;
    ad::Scalar log_q(0.0);
    for (const auto& node : q_trace.nodes()) {
      std::vector<ad::Scalar> values;
      for (const auto& v : node.value) values.push_back(v.scalar());
      q_values.emplace(node.name, std::move(values));
      log_q += node.log_prob;
    }
    const Bindings bindings = align_bindings(model_names, alignment, q_values, data);
    const ad::Scalar log_p = model_log_joint(bindings);
    total += log_q - log_p;  // negative ELBO term
  }
  return total / ad::Scalar(static_cast<double>(n_mc));
}

namespace {

constexpr double kPreconditionerFloor = 1e-6;

struct StepScalars {
  std::vector<ad::Scalar> loc, log_scale;
};

}  // namespace

ViTrainResult vi_train(const models::ModelZooEntry& model, const ViState& init,
                       const Alignment& alignment, const Bindings& data, int steps, double lr,
                       std::uint64_t seed, int n_mc) {
  if (steps < 1) throw InferenceError("vi_train requires steps >= 1");
  if (lr <= 0.0) throw InferenceError("vi_train requires lr > 0");
  const LogJointFn log_joint = make_log_joint(model.program);
  const DensityFn density = [&log_joint](const Bindings& b) { return log_joint(b); };

  // Recorded mode keeps everything on the ambient tape so the final loss is
  // differentiable with respect to the preconditioner; otherwise each step
  // runs on its own scratch tape and carries plain values forward.
  const bool recorded = ad::active_tape() != nullptr;
  ViState state = init;
  ViTrainResult result;
  const int dim = state.dim();

  for (int s = 0; s < steps; ++s) {
    const std::uint64_t step_seed = mix_seed(seed, static_cast<std::uint64_t>(s) + 1u);
    if (recorded) {
      // Initial parameters may be plain constants; gradients only flow
      // through tape nodes, so lift them once.
      ad::Tape* tape = ad::active_tape();
      for (auto& v : state.loc)
        if (!v.has_node()) v = tape->variable(v.value);
      for (auto& v : state.log_scale)
        if (!v.has_node()) v = tape->variable(v.value);
      std::vector<ad::Scalar> phi;
      phi.reserve(2 * dim);
      phi.insert(phi.end(), state.loc.begin(), state.loc.end());
      phi.insert(phi.end(), state.log_scale.begin(), state.log_scale.end());
      const ad::Scalar loss =
          elbo_loss(density, make_variational_program(state), alignment, data, step_seed, n_mc);
      if (!std::isfinite(loss.value)) {
        throw InferenceError("vi_train diverged at step " + std::to_string(s));
      }
      const std::vector<ad::Scalar> g = ad::grad(loss, phi);
      for (int i = 0; i < dim; ++i) {
        state.loc[i] = state.loc[i] - ad::Scalar(lr) * state.preconditioner[i] * g[i];
        state.log_scale[i] =
            state.log_scale[i] - ad::Scalar(lr) * state.preconditioner[dim + i] * g[dim + i];
      }
      result.loss_trace.push_back(loss.value);
    } else {
      ad::Tape tape;
      ad::TapeGuard guard(tape);
      ViState leafed = state;
      std::vector<ad::Scalar> phi;
      phi.reserve(2 * dim);
      for (int i = 0; i < dim; ++i) {
        leafed.loc[i] = tape.variable(state.loc[i].value);
        phi.push_back(leafed.loc[i]);
      }
      for (int i = 0; i < dim; ++i) {
        leafed.log_scale[i] = tape.variable(state.log_scale[i].value);
        phi.push_back(leafed.log_scale[i]);
      }
      const ad::Scalar loss =
          elbo_loss(density, make_variational_program(leafed), alignment, data, step_seed, n_mc);
      if (!std::isfinite(loss.value)) {
        throw InferenceError("vi_train diverged at step " + std::to_string(s));
      }
      std::vector<double> adjoints;
      tape.backward_values(loss.index, adjoints);
      for (int i = 0; i < dim; ++i) {
        const double g_loc = adjoints[phi[i].index];
        const double g_ls = adjoints[phi[dim + i].index];
        state.loc[i] =
            ad::Scalar(state.loc[i].value - lr * state.preconditioner[i].value * g_loc);
        state.log_scale[i] = ad::Scalar(state.log_scale[i].value -
                                        lr * state.preconditioner[dim + i].value * g_ls);
      }
      result.loss_trace.push_back(loss.value);
    }
    ++state.step;
  }

  // Final loss at the trained parameters, fresh noise at index steps.
  const std::uint64_t final_seed = mix_seed(seed, static_cast<std::uint64_t>(steps) + 1u);
  if (recorded) {
    result.final_loss_scalar =
        elbo_loss(density, make_variational_program(state), alignment, data, final_seed, n_mc);
  } else {
    ad::NoTapeGuard no_tape;
    result.final_loss_scalar =
        elbo_loss(density, make_variational_program(state), alignment, data, final_seed, n_mc);
  }
  result.final_loss = result.final_loss_scalar.value;
  result.state = std::move(state);
  return result;
}

double vi_train_final_loss(const models::ModelZooEntry& model, const ViState& init,
                           const Alignment& alignment, const Bindings& data,
                           const std::vector<double>& preconditioner, int steps, double lr,
                           std::uint64_t seed) {
  ViState start = init;
  start.preconditioner.clear();
  for (double p : preconditioner) start.preconditioner.push_back(ad::Scalar(p));
  return vi_train(model, start, alignment, data, steps, lr, seed).final_loss;
}

LearnPreconditionerResult learn_preconditioner(const models::ModelZooEntry& model,
                                               const ViState& init, const Alignment& alignment,
                                               const Bindings& data, int outer_steps,
                                               double outer_lr, int inner_steps, double inner_lr,
                                               std::uint64_t seed) {
  if (inner_steps < 1) throw InferenceError("learn_preconditioner requires inner_steps >= 1");
  LearnPreconditionerResult result;
  result.preconditioner.assign(init.preconditioner.size(), 1.0);
  for (std::size_t i = 0; i < init.preconditioner.size(); ++i) {
    result.preconditioner[i] = init.preconditioner[i].value;
  }
  for (int outer = 0; outer < outer_steps; ++outer) {
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    ViState start = init;
    start.preconditioner.clear();
    std::vector<ad::Scalar> leaves;
    for (double p : result.preconditioner) {
      leaves.push_back(tape.variable(p));
      start.preconditioner.push_back(leaves.back());
    }
    // Common random numbers: the inner seed does not move across outer steps.
    ViTrainResult inner = vi_train(model, start, alignment, data, inner_steps, inner_lr, seed);
    result.outer_loss_trace.push_back(inner.final_loss);
    const ad::Scalar loss = inner.final_loss_scalar;
    if (!loss.has_node()) {
      throw InferenceError("learn_preconditioner: final loss detached from the preconditioner");
    }
    std::vector<double> adjoints;
    tape.backward_values(loss.index, adjoints);
    result.last_outer_gradient.clear();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const double g = adjoints[leaves[i].index];
      result.last_outer_gradient.push_back(g);
      result.preconditioner[i] =
          std::max(kPreconditionerFloor, result.preconditioner[i] - outer_lr * g);
    }
  }
  return result;
}

Program mcmc_within_vi(const Program& variational, const std::vector<std::string>& q_names,
                       const Target& target, int k, double epsilon) {
  if (k < 0) throw InferenceError("mcmc_within_vi requires k >= 0");
  return [variational, q_names, target, k, epsilon]() {
    ExecutionTrace q_trace =
        capture_trace(variational, TraceContext::current().seed());
    VectorXd theta(target.dim());
    int offset = 0;
    for (const auto& name : q_names) {
      const auto& node = q_trace.node(name);
      for (const auto& v : node.value) theta[offset++] = v.value();
    }
    RandomSource rng(mix_seed(TraceContext::current().seed(), hash_name("mcmc_within_vi")));
    double logp;
    VectorXd grad(target.dim());
    if (!target.logp_grad(theta, logp, grad)) {
      throw InferenceError("mcmc_within_vi: non-finite density at the variational draw");
    }
    for (int i = 0; i < k; ++i) {
      NutsTransitionResult t =
          nuts_transition(target, theta, logp, grad, epsilon, 10, 1000.0, rng);
      theta = t.theta;
      logp = t.logp;
      grad = t.grad;
    }
    ProgramOutput out;
    out.reserve(theta.size());
    for (int i = 0; i < theta.size(); ++i) out.emplace_back(theta[i]);
    return out;
  };
}

}  // namespace ppl::inference
