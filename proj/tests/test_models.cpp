#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ppl/data.hpp"
#include "ppl/hmc.hpp"
#include "ppl/models.hpp"

using namespace ppl;
using ad::Scalar;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

// Random binding points covering each fixture's support.
Bindings random_point(const models::ModelZooEntry& entry, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> real(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  Bindings b;
  auto fill = [&](const std::string& name, int size, Support support) {
    std::vector<Scalar> v;
    for (int i = 0; i < size; ++i) {
      switch (support) {
        case Support::unit_interval: v.emplace_back(unit(gen)); break;
        case Support::discrete: v.emplace_back(static_cast<double>(gen() % 2)); break;
        default: v.emplace_back(real(gen));
      }
    }
    b[name] = std::move(v);
  };
  for (const auto& l : entry.latents) fill(l.name, l.size, l.support);
  if (entry.name == "branching") {
    fill("h2", 2, Support::real);
    fill("h4", 4, Support::real);
  }
  for (const auto& name : entry.observed) {
    // linear_regression ships no fixture data; its y length is the row count.
    const int size = entry.data.count(name) ? static_cast<int>(entry.data.at(name).size()) : 20;
    const bool binary = entry.name == "beta_bernoulli" || entry.name == "logistic_regression";
    fill(name, size, binary ? Support::discrete : Support::real);
  }
  return b;
}

void check_traced_matches_handwritten(const models::ModelZooEntry& entry) {
  auto traced = make_log_joint(entry.program);
  ad::NoTapeGuard off;
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 100; ++rep) {
    Bindings at = random_point(entry, gen);
    double a = traced(at).value;
    double b = entry.handwritten_log_joint(at).value;
    REQUIRE(std::isfinite(a));
    CHECK(std::abs(a - b) < 1e-9);
  }
}

Eigen::MatrixXd random_features(int n, int d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = normal(gen);
  return x;
}

}  // namespace

TEST_CASE("traced and handwritten log joints agree at random points") {
  Eigen::MatrixXd x = random_features(20, 3, 7);
  Eigen::VectorXd y(20);
  std::mt19937_64 gen(8);
  for (int i = 0; i < 20; ++i) y[i] = static_cast<double>(gen() % 2);

  check_traced_matches_handwritten(models::beta_bernoulli());
  check_traced_matches_handwritten(models::branching_program());
  check_traced_matches_handwritten(models::linear_regression(x));
  check_traced_matches_handwritten(models::logistic_regression(x, y));
  check_traced_matches_handwritten(models::conjugate_normal());
}

TEST_CASE("beta-bernoulli draws are a binary batch of 50") {
  auto entry = models::beta_bernoulli();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto out = run_program(entry.program, seed, Backend::plain);
    REQUIRE(out.size() == 50);
    for (const auto& v : out) CHECK((v.value() == 0.0 || v.value() == 1.0));
  }
}

TEST_CASE("beta-bernoulli marginal hit rate matches the uniform prior") {
  // Integrating Bernoulli(p) over p ~ Beta(1,1) gives P(x=1) = 1/2.
  auto entry = models::beta_bernoulli();
  double hits = 0.0;
  const int n = 2000;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    hits += run_program(entry.program, seed, Backend::plain)[0].value();
  }
  CHECK(std::abs(hits / n - 0.5) < 0.03);
}

TEST_CASE("branching program takes both paths with the right frequency") {
  auto entry = models::branching_program();
  int len2 = 0, len4 = 0;
  const int n = 10000;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    auto out = run_program(entry.program, seed, Backend::plain);
    if (out.size() == 2) {
      ++len2;
    } else {
      REQUIRE(out.size() == 4);
      ++len4;
    }
  }
  CHECK(len2 + len4 == n);
  CHECK(std::abs(static_cast<double>(len2) / n - 0.5) < 0.015);
}

TEST_CASE("linear regression with a zero feature column decouples weight and data") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  auto entry = models::linear_regression(x);
  ad::NoTapeGuard off;
  Bindings b = {{"w", {Scalar(1.7)}}, {"b", {Scalar(0.2)}},
                {"y", {Scalar(0.0), Scalar(1.0), Scalar(-1.0), Scalar(0.5)}}};
  // With X = 0 the likelihood only sees the intercept.
  auto lpdf = [](double v, double m) {
    return -kHalfLog2Pi - 0.5 * (v - m) * (v - m);
  };
  double expect = lpdf(1.7, 0.0) + lpdf(0.2, 0.0) +
                  lpdf(0.0, 0.2) + lpdf(1.0, 0.2) + lpdf(-1.0, 0.2) + lpdf(0.5, 0.2);
  CHECK(entry.handwritten_log_joint(b).value == doctest::Approx(expect).epsilon(1e-12));
  CHECK(make_log_joint(entry.program)(b).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("logistic regression at zero parameters scores n coin flips") {
  const int n = 17, d = 3;
  Eigen::MatrixXd x = random_features(n, d, 11);
  Eigen::VectorXd y(n);
  std::mt19937_64 gen(12);
  for (int i = 0; i < n; ++i) y[i] = static_cast<double>(gen() % 2);
  auto entry = models::logistic_regression(x, y);
  ad::NoTapeGuard off;
  Bindings b = {{"w", std::vector<Scalar>(d, Scalar(0.0))}, {"b", {Scalar(0.0)}},
                {"y", entry.data["y"]}};
  double expect = (d + 1) * -kHalfLog2Pi + n * std::log(0.5);
  CHECK(entry.handwritten_log_joint(b).value == doctest::Approx(expect).epsilon(1e-12));
  CHECK(make_log_joint(entry.program)(b).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("logistic regression rejects non-binary labels") {
  Eigen::MatrixXd x = random_features(5, 2, 13);
  Eigen::VectorXd y(5);
  y << 0, 1, 2, 0, 1;
  CHECK_THROWS_AS((void)models::logistic_regression(x, y), DataError);
}

TEST_CASE("logistic regression rejects mismatched row counts") {
  Eigen::MatrixXd x = random_features(5, 2, 13);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS((void)models::logistic_regression(x, y), DataError);
}

TEST_CASE("standardize gives zero mean and unit variance, skipping constants") {
  Eigen::MatrixXd x(6, 3);
  x << 1, 5, -2, 2, 5, 0, 3, 5, 1, 4, 5, 3, 5, 5, -1, 6, 5, 2;
  std::vector<int> constants;
  Eigen::MatrixXd s = models::standardize(x, &constants);
  CHECK(constants == std::vector<int>{1});
  for (int j : {0, 2}) {
    CHECK(std::abs(s.col(j).mean()) < 1e-12);
    double var = (s.col(j).array() - s.col(j).mean()).square().sum() / 6.0;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(s.col(1) == x.col(1));
}

TEST_CASE("conjugate normal facts match the closed form") {
  auto entry = models::conjugate_normal();
  CHECK(entry.facts.at("posterior_mean") == 0.5);
  CHECK(entry.facts.at("posterior_var") == 0.5);
  // For every z: log p(z, x=1) - log p(z | x=1) = log p(x=1).
  ad::NoTapeGuard off;
  auto post_lpdf = [](double z) {
    const double var = 0.5;
    return -0.5 * std::log(2 * M_PI * var) - 0.5 * (z - 0.5) * (z - 0.5) / var;
  };
  for (double z : {-1.0, 0.0, 0.5, 2.0}) {
    Bindings b = {{"z", {Scalar(z)}}, {"x", {Scalar(1.0)}}};
    double joint = entry.handwritten_log_joint(b).value;
    CHECK(joint - post_lpdf(z) == doctest::Approx(entry.facts.at("log_marginal")).epsilon(1e-12));
  }
}

TEST_CASE("sampler recovers synthetic logistic regression weights") {
  auto synth = synth_data(2000, 5, 21);
  auto entry = models::logistic_regression(synth.dataset.features, synth.dataset.labels);
  inference::Target target(make_log_joint(entry.program), entry.latents, entry.data);
  inference::NutsConfig cfg;
  cfg.num_warmup = 200;
  cfg.num_samples = 300;
  cfg.seed = 5;
  auto stats = inference::nuts_sample(target, Eigen::VectorXd::Zero(target.dim()), cfg);
  REQUIRE(static_cast<int>(stats.samples.size()) == cfg.num_samples);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(target.dim());
  for (const auto& s : stats.samples) mean += s;
  mean /= static_cast<double>(stats.samples.size());
  // Layout is w (5) then b; synthetic data has zero true bias.
  for (int j = 0; j < 5; ++j) CHECK(std::abs(mean[j] - synth.true_weights[j]) < 0.15);
  CHECK(std::abs(mean[5] - 0.0) < 0.15);
  CHECK(stats.divergences == 0);
}
