#include "ppl/bench.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "ppl/errors.hpp"
#include "ppl/transforms.hpp"

namespace ppl {

using inference::ChainStats;
using inference::DensityFn;
using inference::NutsConfig;
using inference::Target;

JointMode parse_joint_mode(const std::string& text) {
  if (text == "traced") return JointMode::traced;
  if (text == "handwritten") return JointMode::handwritten;
  throw DataError("mode '" + text + "' must be traced or handwritten");
}

namespace {

Target make_target(const models::ModelZooEntry& entry, JointMode mode) {
  DensityFn density = mode == JointMode::traced ? DensityFn(make_log_joint(entry.program))
                                                : entry.handwritten_log_joint;
  return Target(std::move(density), entry.latents, entry.data);
}

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

BenchRun bench_nuts(const models::ModelZooEntry& entry, NutsConfig cfg, JointMode mode,
                    int trajectories) {
  if (trajectories < 1) throw DataError("trajectory count must be positive");
  cfg.num_samples = trajectories;
  Target target = make_target(entry, mode);
  BenchRun run;
  run.stats = inference::nuts_sample(target, Eigen::VectorXd::Zero(target.dim()), cfg);
  run.time_per_leapfrog_ms = run.stats.wall_time_per_leapfrog * 1e3;
  if (2 * run.stats.divergences > trajectories)
    throw InferenceError("more than half of the kept trajectories diverged; the sampler is "
                         "unstable at this step size");
  return run;
}

nlohmann::ordered_json bench_compare(const models::ModelZooEntry& entry, NutsConfig cfg,
                                     int trajectories, int n, int d) {
  BenchRun traced = bench_nuts(entry, cfg, JointMode::traced, trajectories);
  BenchRun handwritten = bench_nuts(entry, cfg, JointMode::handwritten, trajectories);

  bool identical = traced.stats.samples.size() == handwritten.stats.samples.size();
  if (identical) {
    for (std::size_t i = 0; i < traced.stats.samples.size() && identical; ++i)
      identical = traced.stats.samples[i] == handwritten.stats.samples[i];
  }

  nlohmann::ordered_json report;
  report["model"] = entry.name;
  report["n"] = n;
  report["d"] = d;
  report["num_trajectories"] = trajectories;
  report["traced"] = {
      {"time_per_leapfrog_ms", traced.time_per_leapfrog_ms},
      {"total_leapfrog_steps", traced.stats.total_leapfrogs},
      {"sampling_seconds", traced.stats.sampling_seconds},
      {"step_size", traced.stats.step_size},
      {"divergences", traced.stats.divergences},
  };
  report["handwritten"] = {
      {"time_per_leapfrog_ms", handwritten.time_per_leapfrog_ms},
      {"total_leapfrog_steps", handwritten.stats.total_leapfrogs},
      {"sampling_seconds", handwritten.stats.sampling_seconds},
      {"step_size", handwritten.stats.step_size},
      {"divergences", handwritten.stats.divergences},
  };
  report["overhead_ratio"] = handwritten.time_per_leapfrog_ms > 0.0
                                 ? traced.time_per_leapfrog_ms / handwritten.time_per_leapfrog_ms
                                 : 0.0;
  report["chains_identical"] = identical;
  report["seed"] = cfg.seed;
  report["config"] = {
      {"num_warmup", cfg.num_warmup},
      {"max_tree_depth", cfg.max_tree_depth},
      {"target_accept", cfg.target_accept},
      {"adapt_step_size", cfg.adapt_step_size},
  };
  report["timestamp"] = iso_timestamp();
  return report;
}

namespace {

void demo_beta_bernoulli(std::uint64_t seed, std::ostream& out) {
  auto entry = models::beta_bernoulli();
  auto tr = capture_trace(entry.program, seed, Backend::plain);
  const auto& p = tr.node("p");
  out << "beta_bernoulli: sampled p = " << p.value[0].scalar().value << "\n";
  double heads = 0;
  for (const auto& v : tr.node("x").value) heads += v.scalar().value;
  out << "observed draw: " << heads << " successes out of " << tr.node("x").value.size() << "\n";

  auto log_joint = make_log_joint(entry.program);
  Bindings b = entry.data;
  b["p"] = {ad::Scalar(0.9)};
  out << "log joint at p = 0.9, all-ones data: " << log_joint(b).value << "\n";
}

void demo_intervene(std::uint64_t seed, std::ostream& out) {
  Program chain = []() {
    auto z = rv_normal("z", Value(0.0), Value(1.0));
    auto x = rv_normal("x", z.value[0], Value(1.0));
    auto y = rv_normal("y", x.value[0], Value(1.0));
    return ProgramOutput{z.value[0], x.value[0], y.value[0]};
  };
  auto report = std::make_shared<InterventionReport>();
  Program mutilated = intervene(chain, {{"x", {10.0}}}, report);
  auto base = run_program(chain, seed, Backend::plain);
  auto cut = run_program(mutilated, seed, Backend::plain);
  out << "z -> x -> y chain, do(x = 10):\n";
  out << "  original: z = " << base[0].scalar().value << ", x = " << base[1].scalar().value
      << ", y = " << base[2].scalar().value << "\n";
  out << "  mutilated: z = " << cut[0].scalar().value << ", x = " << cut[1].scalar().value
      << ", y = " << cut[2].scalar().value << "\n";
  out << "  z unchanged (not a descendant), y redrawn around 10\n";
  out << "  interventions applied: " << report->applied.size() << "\n";
}

void demo_vi(std::uint64_t seed, std::ostream& out) {
  auto entry = models::conjugate_normal();
  auto state = inference::make_vi_state(entry.latents);
  auto alignment = inference::mean_field_alignment(entry);
  auto result = inference::vi_train(entry, state, alignment, entry.data, 2000, 0.01, seed,
                                    /*n_mc=*/10);
  double loc = result.state.loc[0].value;
  double scale = std::exp(result.state.log_scale[0].value);
  out << "mean-field fit of z ~ N(0,1), x ~ N(z,1) observed at x = 1:\n";
  out << "  loc = " << loc << " (true posterior mean 0.5)\n";
  out << "  scale = " << scale << " (true posterior sd " << std::sqrt(0.5) << ")\n";
  out << "  final negative ELBO = " << result.final_loss << "\n";
}

void demo_l2l(std::uint64_t seed, std::ostream& out) {
  auto entry = models::conjugate_normal();
  auto state = inference::make_vi_state(entry.latents);
  auto alignment = inference::mean_field_alignment(entry);
  auto result = inference::learn_preconditioner(entry, state, alignment, entry.data,
                                                /*outer_steps=*/30, /*outer_lr=*/0.1,
                                                /*inner_steps=*/20, /*inner_lr=*/0.05, seed);
  out << "learned per-coordinate preconditioner over a 20-step inner fit:\n  [";
  for (std::size_t i = 0; i < result.preconditioner.size(); ++i)
    out << (i ? ", " : "") << result.preconditioner[i];
  out << "]\n";
  out << "  outer loss: " << result.outer_loss_trace.front() << " -> "
      << result.outer_loss_trace.back() << "\n";
}

void demo_mcmc_within_vi(std::uint64_t seed, std::ostream& out) {
  auto entry = models::conjugate_normal();
  auto state = inference::make_vi_state(entry.latents);
  auto alignment = inference::mean_field_alignment(entry);
  auto trained = inference::vi_train(entry, state, alignment, entry.data, 500, 0.02, seed);
  inference::Target target(make_log_joint(entry.program), entry.latents, entry.data);
  Program refined = inference::mcmc_within_vi(inference::make_variational_program(trained.state),
                                              trained.state.latent_names, target, /*k=*/25,
                                              /*epsilon=*/0.5);
  double sum = 0.0;
  const int reps = 200;
  for (int i = 0; i < reps; ++i) {
    auto draw = run_program(refined, mix_seed(seed, i + 1), Backend::plain);
    sum += draw[0].scalar().value;
  }
  out << "variational draw refined by 25 fixed-step NUTS transitions:\n";
  out << "  mean over " << reps << " runs = " << sum / reps << " (posterior mean 0.5)\n";
}

}  // namespace

void run_demo(const std::string& name, std::uint64_t seed, std::ostream& out) {
  if (name == "beta_bernoulli") demo_beta_bernoulli(seed, out);
  else if (name == "intervene") demo_intervene(seed, out);
  else if (name == "vi") demo_vi(seed, out);
  else if (name == "l2l") demo_l2l(seed, out);
  else if (name == "mcmc_within_vi") demo_mcmc_within_vi(seed, out);
  else
    throw DataError("demo '" + name +
                    "' unknown; pick one of beta_bernoulli, intervene, vi, l2l, mcmc_within_vi");
}

}  // namespace ppl
