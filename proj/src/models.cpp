#include "ppl/models.hpp"

#include <cmath>
#include <limits>

namespace ppl::models {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

double normal_lpdf_d(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

// Mirrors Distribution::normal's log_prob op-for-op; used where the
// handwritten path must be arithmetically identical to the traced one.
ad::Scalar normal_lpdf_s(const ad::Scalar& x, const ad::Scalar& mean, const ad::Scalar& sd) {
  const ad::Scalar z = (x - mean) / sd;
  return ad::Scalar(-kHalfLog2Pi) - ad::log(sd) - ad::Scalar(0.5) * z * z;
}

ad::Scalar bernoulli_logit_lpmf_s(double y, const ad::Scalar& logit) {
  return y == 1.0 ? -ad::softplus(-logit) : -ad::softplus(logit);
}

const std::vector<ad::Scalar>& bound(const Bindings& b, const std::string& name) {
  auto it = b.find(name);
  if (it == b.end()) throw MissingBindingError(name);
  return it->second;
}

}  // namespace

Eigen::MatrixXd standardize(const Eigen::MatrixXd& features, std::vector<int>* constant_columns) {
  Eigen::MatrixXd out = features;
  const auto n = static_cast<double>(features.rows());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double mean = features.col(j).mean();
    const double var = (features.col(j).array() - mean).square().sum() / n;
    if (var <= 0.0) {
      if (constant_columns) constant_columns->push_back(static_cast<int>(j));
      continue;
    }
    out.col(j) = (features.col(j).array() - mean) / std::sqrt(var);
  }
  return out;
}

ModelZooEntry beta_bernoulli() {
  ModelZooEntry entry;
  entry.name = "beta_bernoulli";
  entry.program = []() {
    RandomVariable p = rv_beta("p", 1.0, 1.0);
    RandomVariable x = rv_bernoulli("x", p.value[0], 50);
    return x.value;
  };
  entry.handwritten_log_joint = [](const Bindings& b) {
    const double p = bound(b, "p")[0].value;
    // Beta(1,1) log-pdf is identically zero on (0,1).
    double total = (p > 0.0 && p < 1.0) ? 0.0 : -std::numeric_limits<double>::infinity();
    for (const auto& x : bound(b, "x")) {
      total += x.value == 1.0 ? std::log(p) : std::log1p(-p);
    }
    return ad::Scalar(total);
  };
  entry.latents = {{"p", 1, Support::unit_interval}};
  entry.observed = {"x"};
  entry.data["x"] = std::vector<ad::Scalar>(50, ad::Scalar(1.0));
  return entry;
}

ModelZooEntry branching_program() {
  ModelZooEntry entry;
  entry.name = "branching";
  entry.program = []() {
    RandomVariable coin = rv_bernoulli("coin", 0.5);
    ProgramOutput out;
    if (coin.value[0].value() == 1.0) {
      RandomVariable h = rv_normal("h2", 0.0, 1.0, 2);
      for (const auto& v : h.value) out.push_back(Value(2.0) * v + Value(1.0));
    } else {
      RandomVariable h = rv_normal("h4", 0.0, 1.0, 4);
      for (const auto& v : h.value) out.push_back(Value(0.5) * v - Value(1.0));
    }
    return out;
  };
  entry.handwritten_log_joint = [](const Bindings& b) {
    const double coin = bound(b, "coin")[0].value;
    double total = std::log(0.5);
    const auto& h = coin == 1.0 ? bound(b, "h2") : bound(b, "h4");
    for (const auto& v : h) total += normal_lpdf_d(v.value, 0.0, 1.0);
    return ad::Scalar(total);
  };
  entry.latents = {{"coin", 1, Support::discrete}};
  return entry;
}

ModelZooEntry linear_regression(const Eigen::MatrixXd& features) {
  const auto d = features.cols();
  if (d < 1) throw DataError("linear_regression requires at least one feature");
  ModelZooEntry entry;
  entry.name = "linear_regression";
  entry.program = [features]() {
    RandomVariable w = rv_normal("w", 0.0, 1.0, static_cast<int>(features.cols()));
    RandomVariable b = rv_normal("b", 0.0, 1.0);
    std::vector<Value> means;
    means.reserve(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      Value m = b.value[0];
      for (Eigen::Index j = 0; j < features.cols(); ++j) {
        m += Value(features(i, j)) * w.value[j];
      }
      means.push_back(m);
    }
    RandomVariable y = rv_normal("y", means, 1.0);
    return y.value;
  };
  entry.handwritten_log_joint = [features](const Bindings& bind) {
    const auto& w = bound(bind, "w");
    const auto& b = bound(bind, "b");
    const auto& y = bound(bind, "y");
    double total = 0.0;
    for (const auto& wj : w) total += normal_lpdf_d(wj.value, 0.0, 1.0);
    total += normal_lpdf_d(b[0].value, 0.0, 1.0);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      double mean = b[0].value;
      for (Eigen::Index j = 0; j < features.cols(); ++j) mean += features(i, j) * w[j].value;
      total += normal_lpdf_d(y[i].value, mean, 1.0);
    }
    return ad::Scalar(total);
  };
  entry.latents = {{"w", static_cast<int>(d), Support::real}, {"b", 1, Support::real}};
  entry.observed = {"y"};
  return entry;
}

ModelZooEntry logistic_regression(const Eigen::MatrixXd& raw_features,
                                  const Eigen::VectorXd& labels) {
  if (raw_features.rows() != labels.size()) {
    throw DataError("logistic_regression: feature rows and label count differ");
  }
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DataError("logistic_regression: label at row " + std::to_string(i) +
                      " is not in {0,1}");
    }
  }
  const Eigen::MatrixXd features = standardize(raw_features);
  ModelZooEntry entry;
  entry.name = "logistic_regression";
  entry.program = [features]() {
    RandomVariable w = rv_normal("w", 0.0, 1.0, static_cast<int>(features.cols()));
    RandomVariable b = rv_normal("b", 0.0, 1.0);
    std::vector<Value> logits;
    logits.reserve(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      Value l = b.value[0];
      for (Eigen::Index j = 0; j < features.cols(); ++j) {
        l += Value(features(i, j)) * w.value[j];
      }
      logits.push_back(l);
    }
    RandomVariable y = rv_bernoulli_logits("y", logits);
    return y.value;
  };
  // The benchmark comparator: same arithmetic order as the traced path so
  // both modes produce bit-identical densities and gradients.
  entry.handwritten_log_joint = [features](const Bindings& bind) {
    const auto& w = bound(bind, "w");
    const auto& b = bound(bind, "b");
    const auto& y = bound(bind, "y");
    ad::Scalar total(0.0);
    for (const auto& wj : w) total += normal_lpdf_s(wj, ad::Scalar(0.0), ad::Scalar(1.0));
    total += normal_lpdf_s(b[0], ad::Scalar(0.0), ad::Scalar(1.0));
    std::vector<ad::Scalar> logits;
    logits.reserve(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      ad::Scalar l = b[0];
      for (Eigen::Index j = 0; j < features.cols(); ++j) {
        l += ad::Scalar(features(i, j)) * w[j];
      }
      logits.push_back(l);
    }
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      total += bernoulli_logit_lpmf_s(y[i].value, logits[i]);
    }
    return total;
  };
  entry.latents = {{"w", static_cast<int>(features.cols()), Support::real},
                   {"b", 1, Support::real}};
  entry.observed = {"y"};
  std::vector<ad::Scalar> yb;
  yb.reserve(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) yb.emplace_back(labels[i]);
  entry.data["y"] = std::move(yb);
  return entry;
}

ModelZooEntry conjugate_normal() {
  ModelZooEntry entry;
  entry.name = "conjugate_normal";
  entry.program = []() {
    RandomVariable z = rv_normal("z", 0.0, 1.0);
    RandomVariable x = rv_normal("x", z.value[0], 1.0);
    return x.value;
  };
  entry.handwritten_log_joint = [](const Bindings& b) {
    const double z = bound(b, "z")[0].value;
    const double x = bound(b, "x")[0].value;
    return ad::Scalar(normal_lpdf_d(z, 0.0, 1.0) + normal_lpdf_d(x, z, 1.0));
  };
  entry.latents = {{"z", 1, Support::real}};
  entry.observed = {"x"};
  entry.data["x"] = {ad::Scalar(1.0)};
  entry.facts["posterior_mean"] = 0.5;
  entry.facts["posterior_var"] = 0.5;
  entry.facts["log_marginal"] = normal_lpdf_d(1.0, 0.0, std::sqrt(2.0));
  return entry;
}

}  // namespace ppl::models
