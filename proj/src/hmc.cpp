#include "ppl/hmc.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace ppl::inference {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Target::Target(DensityFn density, std::vector<models::LatentSpec> layout, Bindings data)
    : density_(std::move(density)), layout_(std::move(layout)), data_(std::move(data)),
      tape_(std::make_shared<ad::Tape>()) {
  dim_ = 0;
  for (const auto& latent : layout_) {
    if (latent.support == Support::discrete) {
      throw InferenceError("latent '" + latent.name + "' is discrete; no unconstraining map");
    }
    dim_ += latent.size;
  }
}

ad::Scalar Target::eval(std::span<const ad::Scalar> position) const {
  Bindings bindings = data_;
  ad::Scalar log_jacobian(0.0);
  std::size_t offset = 0;
  for (const auto& latent : layout_) {
    std::vector<ad::Scalar> constrained;
    constrained.reserve(latent.size);
    for (int i = 0; i < latent.size; ++i) {
      const ad::Scalar u = position[offset + i];
      switch (latent.support) {
        case Support::real:
          constrained.push_back(u);
          break;
        case Support::positive:
          constrained.push_back(ad::exp(u));
          log_jacobian += u;
          break;
        case Support::unit_interval: {
          const ad::Scalar v = ad::sigmoid(u);
          constrained.push_back(v);
          log_jacobian += ad::log(v) + ad::log(ad::Scalar(1.0) - v);
          break;
        }
        case Support::discrete:
          break;  // rejected in the constructor
      }
    }
    bindings[latent.name] = std::move(constrained);
    offset += latent.size;
  }
  return density_(bindings) + log_jacobian;
}

double Target::logp(const VectorXd& position) const {
  try {
    ad::NoTapeGuard no_tape;
    std::vector<ad::Scalar> pos(position.data(), position.data() + position.size());
    const double v = eval(pos).value;
    return std::isnan(v) ? -kInf : v;
  } catch (const DomainError&) {
    return -kInf;
  }
}

bool Target::logp_grad(const VectorXd& position, double& logp_out, VectorXd& grad_out) const {
  grad_out.setZero(dim_);
  try {
    tape_->reset();
    ad::TapeGuard guard(*tape_);
    std::vector<ad::Scalar> leaves;
    leaves.reserve(dim_);
    for (int i = 0; i < dim_; ++i) leaves.push_back(tape_->variable(position[i]));
    const ad::Scalar result = eval(leaves);
    logp_out = result.value;
    if (!std::isfinite(result.value)) return false;
    if (!result.has_node()) return true;  // constant density
    std::vector<double> adjoints;
    tape_->backward_values(result.index, adjoints);
    bool finite = true;
    for (int i = 0; i < dim_; ++i) {
      grad_out[i] = adjoints[leaves[i].index];
      finite = finite && std::isfinite(grad_out[i]);
    }
    return finite;
  } catch (const DomainError&) {
    logp_out = -kInf;
    return false;
  }
}

std::map<std::string, std::vector<double>> Target::constrain(const VectorXd& position) const {
  std::map<std::string, std::vector<double>> out;
  std::size_t offset = 0;
  for (const auto& latent : layout_) {
    std::vector<double> values(latent.size);
    for (int i = 0; i < latent.size; ++i) {
      const double u = position[offset + i];
      switch (latent.support) {
        case Support::real: values[i] = u; break;
        case Support::positive: values[i] = std::exp(u); break;
        case Support::unit_interval: values[i] = 1.0 / (1.0 + std::exp(-u)); break;
        case Support::discrete: break;
      }
    }
    out[latent.name] = std::move(values);
    offset += latent.size;
  }
  return out;
}

LeapfrogResult leapfrog(const Target& target, const VectorXd& theta, const VectorXd& r,
                        double epsilon, const VectorXd* grad_at_theta) {
  LeapfrogResult result;
  VectorXd grad0;
  if (grad_at_theta != nullptr) {
    grad0 = *grad_at_theta;
  } else {
    double lp0;
    grad0.resize(theta.size());
    if (!target.logp_grad(theta, lp0, grad0)) {
      result.ok = false;
      result.theta = theta;
      result.r = r;
      result.logp = -kInf;
      return result;
    }
  }
  const VectorXd r_half = r + (0.5 * epsilon) * grad0;
  result.theta = theta + epsilon * r_half;
  result.grad.resize(theta.size());
  result.ok = target.logp_grad(result.theta, result.logp, result.grad);
  result.r = r_half + (0.5 * epsilon) * result.grad;
  return result;
}

double dual_averaging_update(DualAveragingState& state, double accept_stat, int iter,
                             double target_accept, double gamma, double t0, double kappa) {
  const double m = static_cast<double>(iter);
  const double w = 1.0 / (m + t0);
  state.h_bar = (1.0 - w) * state.h_bar + w * (target_accept - accept_stat);
  state.log_epsilon = state.mu - std::sqrt(m) / gamma * state.h_bar;
  const double eta = std::pow(m, -kappa);
  state.log_epsilon_bar = eta * state.log_epsilon + (1.0 - eta) * state.log_epsilon_bar;
  return std::exp(state.log_epsilon);
}

namespace {

bool no_u_turn(const VectorXd& theta_plus, const VectorXd& theta_minus, const VectorXd& r_minus,
               const VectorXd& r_plus) {
  const VectorXd span = theta_plus - theta_minus;
  return span.dot(r_minus) >= 0.0 && span.dot(r_plus) >= 0.0;
}

}  // namespace

BuildTreeResult build_tree(const Target& target, const VectorXd& theta, const VectorXd& r,
                           const VectorXd& grad, double log_u, int direction, int depth,
                           double epsilon, double joint0, double divergence_threshold,
                           RandomSource& rng) {
  if (depth == 0) {
    // Base case: one leapfrog step in direction v.
    LeapfrogResult step = leapfrog(target, theta, r, direction * epsilon, &grad);
    BuildTreeResult result;
    result.leapfrogs = 1;
    const VectorXd& r_new = step.r;
    const double joint = step.ok ? step.logp - 0.5 * r_new.squaredNorm() : -kInf;
    result.n_valid = (log_u <= joint) ? 1 : 0;
    result.divergent = !step.ok || (joint - log_u < -divergence_threshold);
    result.cont = !result.divergent;
    result.theta_minus = result.theta_plus = result.theta_prop = step.theta;
    result.r_minus = result.r_plus = r_new;
    result.grad_minus = result.grad_plus = result.grad_prop = step.grad;
    result.logp_prop = step.logp;
    result.alpha_sum = std::min(1.0, std::exp(joint - joint0));
    result.n_alpha = 1;
    return result;
  }
  // Recursion: build left and right subtrees of depth-1.
  BuildTreeResult inner =
      build_tree(target, theta, r, grad, log_u, direction, depth - 1, epsilon, joint0,
                 divergence_threshold, rng);
  if (inner.cont) {
    BuildTreeResult outer =
        direction == -1
            ? build_tree(target, inner.theta_minus, inner.r_minus, inner.grad_minus, log_u,
                         direction, depth - 1, epsilon, joint0, divergence_threshold, rng)
            : build_tree(target, inner.theta_plus, inner.r_plus, inner.grad_plus, log_u,
                         direction, depth - 1, epsilon, joint0, divergence_threshold, rng);
    if (direction == -1) {
      inner.theta_minus = outer.theta_minus;
      inner.r_minus = outer.r_minus;
      inner.grad_minus = outer.grad_minus;
    } else {
      inner.theta_plus = outer.theta_plus;
      inner.r_plus = outer.r_plus;
      inner.grad_plus = outer.grad_plus;
    }
    const long total = inner.n_valid + outer.n_valid;
    if (total > 0 && rng.uniform01() < static_cast<double>(outer.n_valid) / total) {
      inner.theta_prop = outer.theta_prop;
      inner.grad_prop = outer.grad_prop;
      inner.logp_prop = outer.logp_prop;
    }
    inner.n_valid = total;
    inner.alpha_sum += outer.alpha_sum;
    inner.n_alpha += outer.n_alpha;
    inner.leapfrogs += outer.leapfrogs;
    inner.divergent = inner.divergent || outer.divergent;
    inner.cont = outer.cont && !outer.divergent &&
                 no_u_turn(inner.theta_plus, inner.theta_minus, inner.r_minus, inner.r_plus);
  }
  return inner;
}

NutsTransitionResult nuts_transition(const Target& target, const VectorXd& theta, double logp,
                                     const VectorXd& grad, double epsilon, int max_tree_depth,
                                     double divergence_threshold, RandomSource& rng) {
  const int dim = static_cast<int>(theta.size());
  VectorXd r0(dim);
  for (int i = 0; i < dim; ++i) r0[i] = rng.normal();
  const double joint0 = logp - 0.5 * r0.squaredNorm();
  const double log_u = joint0 + std::log(1.0 - rng.uniform01());  // u in (0, exp(joint0)]

  NutsTransitionResult result{theta, grad, logp, 0, false, 0.0, 0};
  VectorXd theta_minus = theta, theta_plus = theta;
  VectorXd r_minus = r0, r_plus = r0;
  VectorXd grad_minus = grad, grad_plus = grad;
  long n_valid = 1;
  double alpha_sum = 0.0;
  long n_alpha = 0;
  bool cont = true;
  int depth = 0;
  while (cont && depth < max_tree_depth) {
    const int direction = rng.uniform01() < 0.5 ? -1 : 1;
    BuildTreeResult tree =
        direction == -1
            ? build_tree(target, theta_minus, r_minus, grad_minus, log_u, direction, depth,
                         epsilon, joint0, divergence_threshold, rng)
            : build_tree(target, theta_plus, r_plus, grad_plus, log_u, direction, depth, epsilon,
                         joint0, divergence_threshold, rng);
    if (direction == -1) {
      theta_minus = tree.theta_minus;
      r_minus = tree.r_minus;
      grad_minus = tree.grad_minus;
    } else {
      theta_plus = tree.theta_plus;
      r_plus = tree.r_plus;
      grad_plus = tree.grad_plus;
    }
    result.leapfrogs += static_cast<int>(tree.leapfrogs);
    result.divergent = result.divergent || tree.divergent;
    alpha_sum += tree.alpha_sum;
    n_alpha += tree.n_alpha;
    if (tree.cont && tree.n_valid > 0 &&
        rng.uniform01() < static_cast<double>(tree.n_valid) / static_cast<double>(n_valid)) {
      result.theta = tree.theta_prop;
      result.grad = tree.grad_prop;
      result.logp = tree.logp_prop;
    }
    n_valid += tree.n_valid;
    cont = tree.cont && no_u_turn(theta_plus, theta_minus, r_minus, r_plus);
    ++depth;
  }
  result.accept_stat = n_alpha > 0 ? alpha_sum / static_cast<double>(n_alpha) : 0.0;
  result.depth = depth;
  return result;
}

double find_initial_step_size(const Target& target, const VectorXd& theta, RandomSource& rng) {
  double epsilon = 1.0;
  const int dim = static_cast<int>(theta.size());
  double logp;
  VectorXd grad(dim);
  if (!target.logp_grad(theta, logp, grad)) {
    throw InferenceError("non-finite log density at the initial point");
  }
  VectorXd r(dim);
  for (int i = 0; i < dim; ++i) r[i] = rng.normal();
  const double joint0 = logp - 0.5 * r.squaredNorm();
  auto joint_after_step = [&](double eps) {
    LeapfrogResult step = leapfrog(target, theta, r, eps, &grad);
    return step.ok ? step.logp - 0.5 * step.r.squaredNorm() : -kInf;
  };
  double ratio = joint_after_step(epsilon) - joint0;
  const double a = ratio > std::log(0.5) ? 1.0 : -1.0;
  for (int i = 0; i < 100 && a * ratio > -a * std::log(2.0); ++i) {
    epsilon *= std::pow(2.0, a);
    ratio = joint_after_step(epsilon) - joint0;
  }
  return epsilon;
}

ChainStats nuts_sample(const Target& target, const VectorXd& init, const NutsConfig& cfg) {
  if (cfg.target_accept <= 0.0 || cfg.target_accept >= 1.0) {
    throw InferenceError("target_accept must lie in (0,1)");
  }
  if (cfg.max_tree_depth < 1) throw InferenceError("max_tree_depth must be >= 1");
  RandomSource rng(mix_seed(cfg.seed, hash_name("nuts")));
  double logp;
  VectorXd theta = init;
  VectorXd grad(target.dim());
  if (!target.logp_grad(theta, logp, grad)) {
    throw InferenceError("initialization error: log joint not finite at the initial point");
  }

  double epsilon = cfg.step_size;
  if (cfg.adapt_step_size && cfg.find_initial_step) {
    epsilon = find_initial_step_size(target, theta, rng);
  }
  DualAveragingState da;
  da.mu = std::log(10.0 * epsilon);
  da.log_epsilon = std::log(epsilon);
  da.log_epsilon_bar = 0.0;

  ChainStats stats;
  stats.step_size_trace.reserve(cfg.num_warmup);
  int warmup_divergences = 0;
  for (int iter = 1; iter <= cfg.num_warmup; ++iter) {
    NutsTransitionResult t = nuts_transition(target, theta, logp, grad, epsilon,
                                             cfg.max_tree_depth, cfg.divergence_threshold, rng);
    theta = t.theta;
    logp = t.logp;
    grad = t.grad;
    if (t.divergent) ++warmup_divergences;
    if (cfg.adapt_step_size) {
      epsilon = dual_averaging_update(da, t.accept_stat, iter, cfg.target_accept, cfg.gamma,
                                      cfg.t0, cfg.kappa);
    }
    stats.step_size_trace.push_back(epsilon);
  }
  if (cfg.num_warmup > 0 && warmup_divergences == cfg.num_warmup) {
    throw InferenceError("adaptation failure: every warmup iteration diverged (last epsilon " +
                         std::to_string(epsilon) + ")");
  }
  if (cfg.adapt_step_size && cfg.num_warmup > 0) {
    epsilon = std::exp(da.log_epsilon_bar);  // frozen post-warmup
  }
  stats.step_size = epsilon;

  stats.samples.reserve(cfg.num_samples);
  stats.leapfrog_counts.reserve(cfg.num_samples);
  const auto start = std::chrono::steady_clock::now();
  for (int draw = 0; draw < cfg.num_samples; ++draw) {
    NutsTransitionResult t = nuts_transition(target, theta, logp, grad, epsilon,
                                             cfg.max_tree_depth, cfg.divergence_threshold, rng);
    theta = t.theta;
    logp = t.logp;
    grad = t.grad;
    stats.samples.push_back(theta);
    stats.leapfrog_counts.push_back(t.leapfrogs);
    stats.total_leapfrogs += t.leapfrogs;
    if (t.divergent) ++stats.divergences;
  }
  const auto end = std::chrono::steady_clock::now();
  stats.sampling_seconds = std::chrono::duration<double>(end - start).count();
  if (stats.total_leapfrogs > 0) {
    stats.wall_time_per_leapfrog = stats.sampling_seconds / static_cast<double>(stats.total_leapfrogs);
  }
  return stats;
}

}  // namespace ppl::inference
