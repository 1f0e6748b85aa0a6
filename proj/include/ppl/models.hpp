#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "ppl/transforms.hpp"

namespace ppl::models {

struct LatentSpec {
  std::string name;
  int size;
  Support support;  // picks the unconstraining bijection for inference
};

// A fixture program paired with an independently handwritten log joint and
// whatever analytic facts are known about it.
struct ModelZooEntry {
  std::string name;
  Program program;
  std::function<ad::Scalar(const Bindings&)> handwritten_log_joint;
  std::vector<LatentSpec> latents;
  std::vector<std::string> observed;
  Bindings data;  // fixture values for the observed variables
  std::map<std::string, double> facts;
};

// p ~ Beta(1,1); x ~ Bernoulli(p), batch of 50.
ModelZooEntry beta_bernoulli();

// coin ~ Bernoulli(0.5); one of two affine maps of a latent, with output
// length 2 or 4 depending on the flip.
ModelZooEntry branching_program();

// w ~ Normal(0,1)^d, b ~ Normal(0,1), y ~ Normal(Xw + b, 1) elementwise.
ModelZooEntry linear_regression(const Eigen::MatrixXd& features);

// w ~ Normal(0,1)^d, b ~ Normal(0,1), y ~ Bernoulli(logits = Xw + b).
// Features are standardized per column before modeling. The handwritten log
// joint mirrors the traced arithmetic exactly (it is the benchmark
// comparator), bypassing the tracer and provenance machinery.
ModelZooEntry logistic_regression(const Eigen::MatrixXd& features,
                                  const Eigen::VectorXd& labels);

// z ~ N(0,1); x ~ N(z,1). Analytic facts: posterior given x=1 is
// N(0.5, 0.5); log marginal at x=1 is log N(1; 0, sqrt(2)).
ModelZooEntry conjugate_normal();

// Column-wise standardization to zero mean / unit variance; constant columns
// are left as-is and reported.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& features,
                            std::vector<int>* constant_columns = nullptr);

}  // namespace ppl::models
