#pragma once

#include <json.hpp>
#include <ostream>
#include <string>

#include "ppl/data.hpp"
#include "ppl/vi.hpp"

namespace ppl {

// Which log-joint implementation backs the sampler: the traced program, or
// the handwritten closed form that bypasses the tracer entirely.
enum class JointMode { traced, handwritten };

JointMode parse_joint_mode(const std::string& text);

struct BenchRun {
  inference::ChainStats stats;
  double time_per_leapfrog_ms = 0.0;
};

// Samples `trajectories` post-warmup NUTS trajectories from the model under
// the chosen log-joint implementation. Timing covers the sampling loop only.
// Throws InferenceError if more than half the kept trajectories diverge.
BenchRun bench_nuts(const models::ModelZooEntry& entry, inference::NutsConfig cfg,
                    JointMode mode, int trajectories);

// Runs both modes with identical configuration and reports per-leapfrog
// timings, their ratio, and whether the two chains are bit-identical.
nlohmann::ordered_json bench_compare(const models::ModelZooEntry& entry,
                                     inference::NutsConfig cfg, int trajectories, int n, int d);

// Small end-to-end walkthroughs printed to `out`. Names: beta_bernoulli,
// intervene, vi, l2l, mcmc_within_vi.
void run_demo(const std::string& name, std::uint64_t seed, std::ostream& out);

}  // namespace ppl
