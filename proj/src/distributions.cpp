#include "ppl/distributions.hpp"

#include <cmath>
#include <limits>

namespace ppl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

void check_param(const char* field, const ad::Scalar& s, bool ok) {
  if (std::isnan(s.value)) throw DomainError(std::string("NaN parameter ") + field, s.value);
  if (!ok) throw DomainError(field, s.value);
}

// Marsaglia-Tsang gamma draw, shape > 0, unit scale.
double sample_gamma(double shape, RandomSource& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform01();
    return sample_gamma(shape + 1.0, rng) * std::pow(1.0 - u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform01();
    if (u == 0.0) continue;
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::normal: return "Normal";
    case Family::bernoulli: return "Bernoulli";
    case Family::beta: return "Beta";
    case Family::categorical: return "Categorical";
    case Family::uniform: return "Uniform";
  }
  return "?";
}

Distribution::Distribution(Family family, std::vector<ad::Scalar> p0, std::vector<ad::Scalar> p1,
                           int batch, bool from_logits)
    : family_(family), p0_(std::move(p0)), p1_(std::move(p1)), batch_(batch),
      from_logits_(from_logits) {}

Distribution Distribution::normal(ad::Scalar mean, ad::Scalar stddev, int batch) {
  check_param("mean", mean, true);
  check_param("stddev", stddev, stddev.value > 0.0);
  return Distribution(Family::normal, {mean}, {stddev}, batch, false);
}

Distribution Distribution::normal(std::vector<ad::Scalar> means, ad::Scalar stddev) {
  for (const auto& m : means) check_param("mean", m, true);
  check_param("stddev", stddev, stddev.value > 0.0);
  const int batch = static_cast<int>(means.size());
  return Distribution(Family::normal, std::move(means), {stddev}, batch, false);
}

Distribution Distribution::normal(std::vector<ad::Scalar> means, std::vector<ad::Scalar> stddevs) {
  if (means.size() != stddevs.size()) throw DomainError("stddev", 0.0);
  for (const auto& m : means) check_param("mean", m, true);
  for (const auto& s : stddevs) check_param("stddev", s, s.value > 0.0);
  const int batch = static_cast<int>(means.size());
  return Distribution(Family::normal, std::move(means), std::move(stddevs), batch, false);
}

Distribution Distribution::bernoulli(ad::Scalar probs, int batch) {
  check_param("probs", probs, probs.value >= 0.0 && probs.value <= 1.0);
  return Distribution(Family::bernoulli, {probs}, {}, batch, false);
}

Distribution Distribution::bernoulli_logits(std::vector<ad::Scalar> logits) {
  for (const auto& l : logits) check_param("logits", l, true);
  const int batch = static_cast<int>(logits.size());
  return Distribution(Family::bernoulli, std::move(logits), {}, batch, true);
}

Distribution Distribution::bernoulli_logits(ad::Scalar logit, int batch) {
  check_param("logits", logit, true);
  return Distribution(Family::bernoulli, {logit}, {}, batch, true);
}

Distribution Distribution::beta(ad::Scalar c1, ad::Scalar c0, int batch) {
  check_param("concentration1", c1, c1.value > 0.0);
  check_param("concentration0", c0, c0.value > 0.0);
  return Distribution(Family::beta, {c1}, {c0}, batch, false);
}

Distribution Distribution::categorical_logits(std::vector<ad::Scalar> logits, int batch) {
  if (logits.empty()) throw DomainError("logits", 0.0);
  for (const auto& l : logits) check_param("logits", l, true);
  return Distribution(Family::categorical, std::move(logits), {}, batch, false);
}

Distribution Distribution::uniform(ad::Scalar low, ad::Scalar high, int batch) {
  check_param("low", low, true);
  check_param("high", high, high.value > low.value);
  return Distribution(Family::uniform, {low}, {high}, batch, false);
}

Support Distribution::support() const {
  switch (family_) {
    case Family::normal: return Support::real;
    case Family::beta: return Support::unit_interval;
    case Family::uniform: return Support::real;  // bounded, but not transformed here
    case Family::bernoulli:
    case Family::categorical: return Support::discrete;
  }
  return Support::real;
}

std::vector<ad::Scalar> Distribution::sample(RandomSource& rng) const {
  std::vector<ad::Scalar> out;
  out.reserve(batch_);
  for (int i = 0; i < batch_; ++i) {
    switch (family_) {
      case Family::normal: {
        const double z = rng.normal();
        out.push_back(p0(i) + p1(i) * ad::Scalar(z));
        break;
      }
      case Family::bernoulli: {
        const double p = from_logits_ ? 1.0 / (1.0 + std::exp(-p0(i).value)) : p0(i).value;
        out.push_back(rng.uniform01() < p ? 1.0 : 0.0);
        break;
      }
      case Family::beta: {
        const double ga = sample_gamma(p0(i).value, rng);
        const double gb = sample_gamma(p1(i).value, rng);
        out.push_back(ga / (ga + gb));
        break;
      }
      case Family::categorical: {
        // Gumbel-free inverse-CDF over the softmax of the logits.
        double max_logit = -kInf;
        for (const auto& l : p0_) max_logit = std::max(max_logit, l.value);
        double z = 0.0;
        for (const auto& l : p0_) z += std::exp(l.value - max_logit);
        const double u = rng.uniform01() * z;
        double cum = 0.0;
        int k = 0;
        for (; k < static_cast<int>(p0_.size()) - 1; ++k) {
          cum += std::exp(p0_[k].value - max_logit);
          if (u < cum) break;
        }
        out.push_back(static_cast<double>(k));
        break;
      }
      case Family::uniform: {
        const double u = rng.uniform01();
        out.push_back(p0(i) + (p1(i) - p0(i)) * ad::Scalar(u));
        break;
      }
    }
  }
  return out;
}

ad::Scalar Distribution::log_prob(const ad::Scalar& value, int element) const {
  switch (family_) {
    case Family::normal: {
      const ad::Scalar z = (value - p0(element)) / p1(element);
      return ad::Scalar(-kHalfLog2Pi) - ad::log(p1(element)) - ad::Scalar(0.5) * z * z;
    }
    case Family::bernoulli: {
      const double x = value.value;
      if (x != 0.0 && x != 1.0) return ad::Scalar(-kInf);
      if (from_logits_) {
        const ad::Scalar l = p0(element);
        return x == 1.0 ? -ad::softplus(-l) : -ad::softplus(l);
      }
      const ad::Scalar p = p0(element);
      if (x == 1.0) {
        if (p.value == 0.0) return ad::Scalar(-kInf);
        return ad::log(p);
      }
      if (p.value == 1.0) return ad::Scalar(-kInf);
      return ad::log(ad::Scalar(1.0) - p);
    }
    case Family::beta: {
      const ad::Scalar a = p0(element);
      const ad::Scalar b = p1(element);
      const double x = value.value;
      if (x < 0.0 || x > 1.0) return ad::Scalar(-kInf);
      const ad::Scalar lbeta = ad::lgamma(a) + ad::lgamma(b) - ad::lgamma(a + b);
      // Boundary values: finite density only when the matching concentration
      // is exactly 1 (otherwise the density is 0 or unbounded there).
      if (x == 0.0) {
        if (a.value != 1.0) return ad::Scalar(-kInf);
        return (b - ad::Scalar(1.0)) * ad::log(ad::Scalar(1.0) - value) - lbeta;
      }
      if (x == 1.0) {
        if (b.value != 1.0) return ad::Scalar(-kInf);
        return (a - ad::Scalar(1.0)) * ad::log(value) - lbeta;
      }
      return (a - ad::Scalar(1.0)) * ad::log(value) +
             (b - ad::Scalar(1.0)) * ad::log(ad::Scalar(1.0) - value) - lbeta;
    }
    case Family::categorical: {
      const double xv = value.value;
      const int k = static_cast<int>(xv);
      if (xv != static_cast<double>(k) || k < 0 || k >= static_cast<int>(p0_.size())) {
        return ad::Scalar(-kInf);
      }
      // log softmax, max-shifted for stability.
      double max_logit = -kInf;
      for (const auto& l : p0_) max_logit = std::max(max_logit, l.value);
      const ad::Scalar shift(max_logit);
      ad::Scalar z(0.0);
      for (const auto& l : p0_) z += ad::exp(l - shift);
      return p0_[k] - shift - ad::log(z);
    }
    case Family::uniform: {
      const double x = value.value;
      if (x < p0(element).value || x >= p1(element).value) return ad::Scalar(-kInf);
      return -ad::log(p1(element) - p0(element));
    }
  }
  return ad::Scalar(-kInf);
}

std::vector<double> Distribution::parameter_values() const {
  std::vector<double> out;
  out.reserve(p0_.size() + p1_.size());
  for (const auto& s : p0_) out.push_back(s.value);
  for (const auto& s : p1_) out.push_back(s.value);
  return out;
}

}  // namespace ppl
