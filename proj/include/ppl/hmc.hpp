#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ppl/models.hpp"
#include "ppl/transforms.hpp"

namespace ppl::inference {

using Eigen::VectorXd;

// Any density over named bindings: a LogJointFn or a handwritten closed form.
using DensityFn = std::function<ad::Scalar(const Bindings&)>;

// A log density over a flattened unconstrained vector, with gradients.
// Constrained latents go through fixed bijections (exp for positives, the
// logistic for (0,1)) whose log-Jacobian is added to the density.
class Target {
 public:
  Target(DensityFn density, std::vector<models::LatentSpec> layout, Bindings data);

  int dim() const { return dim_; }
  double logp(const VectorXd& position) const;
  // Returns false (with logp = -inf) on domain errors or non-finite results.
  bool logp_grad(const VectorXd& position, double& logp_out, VectorXd& grad_out) const;

  // Unconstrained vector -> named constrained bindings (values only).
  std::map<std::string, std::vector<double>> constrain(const VectorXd& position) const;

 private:
  ad::Scalar eval(std::span<const ad::Scalar> position) const;

  DensityFn density_;
  std::vector<models::LatentSpec> layout_;
  Bindings data_;
  int dim_;
  std::shared_ptr<ad::Tape> tape_;  // reused across gradient evaluations
};

struct NutsConfig {
  double step_size = 1.0;          // initial epsilon; adapted during warmup
  int max_tree_depth = 10;
  double divergence_threshold = 1000.0;  // Delta_max
  double target_accept = 0.8;            // delta
  bool adapt_step_size = true;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  int num_warmup = 500;
  int num_samples = 1000;
  std::uint64_t seed = 0;
  bool find_initial_step = true;  // double/halve heuristic for epsilon_0
};

struct ChainStats {
  std::vector<VectorXd> samples;       // post-warmup draws
  std::vector<int> leapfrog_counts;    // per post-warmup draw
  int divergences = 0;
  std::vector<double> step_size_trace;  // per warmup iteration
  double step_size = 0.0;               // frozen post-warmup epsilon
  double wall_time_per_leapfrog = 0.0;  // seconds, sampling loop only
  double sampling_seconds = 0.0;
  long total_leapfrogs = 0;             // post-warmup
};

struct LeapfrogResult {
  VectorXd theta;
  VectorXd r;
  VectorXd grad;
  double logp = 0.0;
  bool ok = true;  // false: non-finite gradient, treat as divergent
};

// One leapfrog step. Passing the gradient at theta avoids re-evaluating it.
LeapfrogResult leapfrog(const Target& target, const VectorXd& theta, const VectorXd& r,
                        double epsilon, const VectorXd* grad_at_theta = nullptr);

// Standard dual-averaging step-size adaptation.
struct DualAveragingState {
  double mu = 0.0;           // log(10 * epsilon_0)
  double log_epsilon = 0.0;
  double log_epsilon_bar = 0.0;
  double h_bar = 0.0;
};

double dual_averaging_update(DualAveragingState& state, double accept_stat, int iter,
                             double target_accept, double gamma, double t0, double kappa);

// Subtree summary of the doubling recursion.
struct BuildTreeResult {
  VectorXd theta_minus, r_minus, grad_minus;
  VectorXd theta_plus, r_plus, grad_plus;
  VectorXd theta_prop, grad_prop;
  double logp_prop = 0.0;
  long n_valid = 0;
  bool cont = true;
  double alpha_sum = 0.0;
  long n_alpha = 0;
  long leapfrogs = 0;
  bool divergent = false;
};

// The doubling recursion: base case j=0 takes one leapfrog step in direction
// v; otherwise joins two depth-(j-1) subtrees and applies the no-U-turn
// criterion.
BuildTreeResult build_tree(const Target& target, const VectorXd& theta, const VectorXd& r,
                           const VectorXd& grad, double log_u, int direction, int depth,
                           double epsilon, double joint0, double divergence_threshold,
                           RandomSource& rng);

struct NutsTransitionResult {
  VectorXd theta;
  VectorXd grad;
  double logp = 0.0;
  int leapfrogs = 0;
  bool divergent = false;
  double accept_stat = 0.0;  // mean acceptance statistic over the tree
  int depth = 0;
};

// One full trajectory (slice sample, momentum draw, doubling loop).
NutsTransitionResult nuts_transition(const Target& target, const VectorXd& theta, double logp,
                                     const VectorXd& grad, double epsilon, int max_tree_depth,
                                     double divergence_threshold, RandomSource& rng);

// Step-size initialization: double/halve until the one-step acceptance
// probability crosses 1/2.
double find_initial_step_size(const Target& target, const VectorXd& theta, RandomSource& rng);

// Full sampler: warmup with dual averaging toward target_accept, epsilon
// frozen afterwards. Deterministic given cfg.seed.
ChainStats nuts_sample(const Target& target, const VectorXd& init, const NutsConfig& cfg);

}  // namespace ppl::inference
