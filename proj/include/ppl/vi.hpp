#pragma once

#include "ppl/hmc.hpp"

namespace ppl::inference {

// Mean-field Normal variational state. Scales are stored unconstrained and
// exponentiated on use, so they stay strictly positive after every update.
// Parameters are Scalars: constants when trained standalone, tape leaves when
// the whole training loop is being differentiated (learning-to-learn).
struct ViState {
  std::vector<std::string> latent_names;  // variational variable names
  std::vector<int> sizes;                 // per variable
  std::vector<ad::Scalar> loc;            // flattened across variables
  std::vector<ad::Scalar> log_scale;      // same layout as loc
  std::vector<ad::Scalar> preconditioner; // over (loc..., log_scale...)
  double learning_rate = 0.0;
  int step = 0;

  int dim() const { return static_cast<int>(loc.size()); }
};

// Fresh state with loc = 0, scale = 1, unit preconditioner. Variational
// variable names are "q_" + the model latent name.
ViState make_vi_state(const std::vector<models::LatentSpec>& latents);

// Alignment mapping each model latent to its variational twin and each
// observed name to the same-named data binding.
Alignment mean_field_alignment(const models::ModelZooEntry& entry);

// The variational program induced by a state: one reparameterized Normal per
// latent (location + scale * standard normal draw).
Program make_variational_program(const ViState& state);

// Negative ELBO estimate: -(1/n_mc) sum [log p(aligned bindings) - log q].
// Differentiable with respect to the variational parameters through the
// reparameterized draws.
ad::Scalar elbo_loss(const DensityFn& model_log_joint, const Program& variational,
                     const Alignment& alignment, const Bindings& data, std::uint64_t seed,
                     int n_mc = 1);

struct ViTrainResult {
  ViState state;
  double final_loss = 0.0;
  ad::Scalar final_loss_scalar;     // tape-backed when run under a tape
  std::vector<double> loss_trace;   // per-step losses
};

// Preconditioned gradient descent on the negative ELBO; fresh noise per step
// (seed + step index). Under an active tape the whole unrolled loop is
// recorded, so the final loss stays differentiable with respect to the
// preconditioner.
ViTrainResult vi_train(const models::ModelZooEntry& model, const ViState& init,
                       const Alignment& alignment, const Bindings& data, int steps, double lr,
                       std::uint64_t seed, int n_mc = 1);

struct LearnPreconditionerResult {
  std::vector<double> preconditioner;
  std::vector<double> outer_loss_trace;
  std::vector<double> last_outer_gradient;
};

// Learning-to-learn: gradient of vi_train's final loss with respect to the
// preconditioner through the unrolled inner loop, descended with plain
// gradient steps and a positivity floor. Inner noise reuses the same seed
// across outer iterations (common random numbers).
LearnPreconditionerResult learn_preconditioner(const models::ModelZooEntry& model,
                                               const ViState& init, const Alignment& alignment,
                                               const Bindings& data, int outer_steps,
                                               double outer_lr, int inner_steps, double inner_lr,
                                               std::uint64_t seed);

// Deterministic objective used by learn_preconditioner and its
// finite-difference oracle: final inner loss as a function of the
// preconditioner values, with fixed inner seeds.
double vi_train_final_loss(const models::ModelZooEntry& model, const ViState& init,
                           const Alignment& alignment, const Bindings& data,
                           const std::vector<double>& preconditioner, int steps, double lr,
                           std::uint64_t seed);

// Appendix-C style composition: draw from the variational program, then apply
// k NUTS transitions targeting the model posterior. k = 0 is the identity
// wrapper. The returned program emits the (unconstrained) chain state.
Program mcmc_within_vi(const Program& variational, const std::vector<std::string>& q_names,
                       const Target& target, int k, double epsilon);

}  // namespace ppl::inference
