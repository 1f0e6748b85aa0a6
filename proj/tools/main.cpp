#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "ppl/bench.hpp"
#include "ppl/errors.hpp"

namespace {

struct Options {
  std::string model = "logistic";
  std::string data_path;
  std::string synthetic = "5000,54";
  std::uint64_t seed = 0;
  int trajectories = 5;
  int warmup = 20;
  int samples = 0;  // overrides trajectories when positive
  std::string mode;  // empty: run both and report the overhead ratio
  int chains = 1;
  std::string output;
  std::string demo;
  bool has_header = false;
  std::string label_rule;
  int label_column = -1;
};

std::pair<int, int> parse_synthetic(const std::string& text) {
  auto comma = text.find(',');
  if (comma == std::string::npos)
    throw ppl::DataError("--synthetic expects n,d (for example 5000,54)");
  try {
    int n = std::stoi(text.substr(0, comma));
    int d = std::stoi(text.substr(comma + 1));
    return {n, d};
  } catch (const std::exception&) {
    throw ppl::DataError("--synthetic expects two integers, got '" + text + "'");
  }
}

ppl::models::ModelZooEntry build_model(const Options& opt, int& n_out, int& d_out) {
  ppl::Dataset ds;
  if (!opt.data_path.empty()) {
    ds = ppl::load_csv(opt.data_path, opt.label_column, ppl::LabelRule::parse(opt.label_rule),
                       opt.has_header);
    for (int c : ds.constant_columns)
      std::cerr << "warning: column " << c << " is constant, standardization skipped\n";
  } else {
    auto [n, d] = parse_synthetic(opt.synthetic);
    ds = ppl::synth_data(n, d, opt.seed).dataset;
  }
  n_out = static_cast<int>(ds.features.rows());
  d_out = static_cast<int>(ds.features.cols());

  if (opt.model == "logistic")
    return ppl::models::logistic_regression(ds.features, ds.labels);
  if (opt.model == "linear") return ppl::models::linear_regression(ds.features);
  if (opt.model == "beta_bernoulli") return ppl::models::beta_bernoulli();
  if (opt.model == "conjugate_normal") return ppl::models::conjugate_normal();
  if (opt.model == "branching") return ppl::models::branching_program();
  throw ppl::DataError("model '" + opt.model +
                       "' unknown; pick one of logistic, linear, beta_bernoulli, "
                       "conjugate_normal, branching");
}

void emit(const nlohmann::ordered_json& report, const std::string& output) {
  if (output.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream out(output);
    if (!out) throw ppl::DataError("cannot write to '" + output + "'");
    out << report.dump(2) << "\n";
  }
}

int run(const Options& opt) {
  if (!opt.demo.empty()) {
    ppl::run_demo(opt.demo, opt.seed, std::cout);
    return 0;
  }

  int n = 0, d = 0;
  auto entry = build_model(opt, n, d);

  ppl::inference::NutsConfig cfg;
  cfg.num_warmup = opt.warmup;
  cfg.seed = opt.seed;
  int trajectories = opt.samples > 0 ? opt.samples : opt.trajectories;

  std::vector<nlohmann::ordered_json> chain_reports(opt.chains);
  std::vector<std::exception_ptr> failures(opt.chains);
  auto run_chain = [&](int c) {
    try {
      ppl::inference::NutsConfig chain_cfg = cfg;
      chain_cfg.seed = ppl::mix_seed(opt.seed, static_cast<std::uint64_t>(c));
      if (opt.mode.empty()) {
        chain_reports[c] = ppl::bench_compare(entry, chain_cfg, trajectories, n, d);
      } else {
        auto mode = ppl::parse_joint_mode(opt.mode);
        auto run = ppl::bench_nuts(entry, chain_cfg, mode, trajectories);
        nlohmann::ordered_json rep;
        rep["model"] = entry.name;
        rep["n"] = n;
        rep["d"] = d;
        rep["mode"] = opt.mode;
        rep["num_trajectories"] = trajectories;
        rep["total_leapfrog_steps"] = run.stats.total_leapfrogs;
        rep["time_per_leapfrog_ms"] = run.time_per_leapfrog_ms;
        rep["step_size"] = run.stats.step_size;
        rep["divergences"] = run.stats.divergences;
        rep["seed"] = chain_cfg.seed;
        chain_reports[c] = std::move(rep);
      }
    } catch (...) {
      failures[c] = std::current_exception();
    }
  };

  if (opt.chains == 1) {
    run_chain(0);
  } else {
    std::vector<std::thread> threads;
    for (int c = 0; c < opt.chains; ++c) threads.emplace_back(run_chain, c);
    for (auto& t : threads) t.join();
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  if (opt.chains == 1) {
    emit(chain_reports[0], opt.output);
  } else {
    nlohmann::ordered_json pooled;
    pooled["model"] = entry.name;
    pooled["chains"] = opt.chains;
    pooled["seed"] = opt.seed;
    pooled["per_chain"] = chain_reports;
    emit(pooled, opt.output);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NUTS benchmark and demo harness for the tracing-based modeling library"};
  Options opt;
  app.add_option("--model", opt.model,
                 "logistic (default), linear, beta_bernoulli, conjugate_normal, branching");
  app.add_option("--data", opt.data_path, "CSV file of numeric rows; omit to use --synthetic");
  app.add_option("--synthetic", opt.synthetic, "n,d for the generated dataset (default 5000,54)");
  app.add_option("--seed", opt.seed, "root random seed");
  app.add_option("--trajectories", opt.trajectories, "post-warmup trajectories to time (default 5)");
  app.add_option("--warmup", opt.warmup, "step-size adaptation iterations (default 20)");
  app.add_option("--samples", opt.samples, "overrides --trajectories when positive");
  app.add_option("--mode", opt.mode,
                 "traced or handwritten; omit to run both and report the overhead ratio");
  app.add_option("--chains", opt.chains, "independent seeded chains, run in parallel")
      ->check(CLI::PositiveNumber);
  app.add_option("--output", opt.output, "write the report here instead of standard output");
  app.add_option("--demo", opt.demo,
                 "beta_bernoulli, intervene, vi, l2l, or mcmc_within_vi walkthrough");
  app.add_flag("--has-header", opt.has_header, "first CSV row is a header");
  app.add_option("--label-rule", opt.label_rule,
                 "binarization for the label column, e.g. eq:2 (default: require 0/1)");
  app.add_option("--label-column", opt.label_column,
                 "zero-based label column; negative counts from the end (default -1)");
  CLI11_PARSE(app, argc, argv);

  try {
    return run(opt);
  } catch (const ppl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ppl::InferenceError& e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
