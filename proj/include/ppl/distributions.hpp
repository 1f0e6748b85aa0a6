#pragma once

#include <string>
#include <vector>

#include "ppl/autodiff.hpp"
#include "ppl/random.hpp"

namespace ppl {

enum class Family { normal, bernoulli, beta, categorical, uniform };

const char* family_name(Family f);

// Support of a scalar latent, used to pick the unconstraining bijection.
enum class Support { real, positive, unit_interval, discrete };

// A parameterized family exposing sample and log_prob. Parameters are
// Scalars, so log_prob is differentiable with respect to them whenever a
// tape is active. A distribution covers `batch_size` independent elements;
// each parameter is either shared (length 1) or per-element (length batch).
class Distribution {
 public:
  static Distribution normal(ad::Scalar mean, ad::Scalar stddev, int batch = 1);
  static Distribution normal(std::vector<ad::Scalar> means, ad::Scalar stddev);
  static Distribution normal(std::vector<ad::Scalar> means, std::vector<ad::Scalar> stddevs);
  static Distribution bernoulli(ad::Scalar probs, int batch = 1);
  static Distribution bernoulli_logits(std::vector<ad::Scalar> logits);
  static Distribution bernoulli_logits(ad::Scalar logit, int batch = 1);
  static Distribution beta(ad::Scalar concentration1, ad::Scalar concentration0, int batch = 1);
  static Distribution categorical_logits(std::vector<ad::Scalar> logits, int batch = 1);
  static Distribution uniform(ad::Scalar low, ad::Scalar high, int batch = 1);

  Family family() const { return family_; }
  int batch_size() const { return batch_; }
  Support support() const;

  // i.i.d. draws across the batch; deterministic given the source state.
  // Normal and Uniform draws are location-scale expressions of the noise, so
  // they stay differentiable with respect to the parameters under a tape.
  std::vector<ad::Scalar> sample(RandomSource& rng) const;

  // Per-element log-density/log-mass; out-of-support values yield -inf.
  ad::Scalar log_prob(const ad::Scalar& value, int element = 0) const;

  // Parameter values in a fixed order, for snapshot comparisons.
  std::vector<double> parameter_values() const;

 private:
  Distribution(Family family, std::vector<ad::Scalar> p0, std::vector<ad::Scalar> p1, int batch,
               bool from_logits);
  ad::Scalar p0(int element) const { return p0_.size() == 1 ? p0_[0] : p0_[element]; }
  ad::Scalar p1(int element) const { return p1_.size() == 1 ? p1_[0] : p1_[element]; }

  Family family_;
  std::vector<ad::Scalar> p0_;  // mean / prob-or-logit / conc1 / logits / low
  std::vector<ad::Scalar> p1_;  // stddev / - / conc0 / - / high
  int batch_;
  bool from_logits_ = false;
};

}  // namespace ppl
