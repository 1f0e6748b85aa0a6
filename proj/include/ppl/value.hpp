#pragma once

#include <memory>
#include <set>
#include <string>

#include "ppl/autodiff.hpp"

namespace ppl {

// Immutable set of random-variable names. Shared pointers let untouched tag
// sets flow through arithmetic without copies.
using Tags = std::shared_ptr<const std::set<std::string>>;

Tags make_tags(const std::string& name);
Tags union_tags(const Tags& a, const Tags& b);

// A Scalar tagged with the names of the random variables whose realized
// values flowed into it. Tags propagate through arithmetic, which is what
// makes the execution-trace DAG edges concrete.
class Value {
 public:
  Value() = default;
  Value(double v) : scalar_(v) {}  // NOLINT
  Value(ad::Scalar s) : scalar_(s) {}  // NOLINT
  Value(ad::Scalar s, Tags tags) : scalar_(s), tags_(std::move(tags)) {}

  const ad::Scalar& scalar() const { return scalar_; }
  double value() const { return scalar_.value; }
  const Tags& tags() const { return tags_; }

  friend Value operator+(const Value& a, const Value& b) {
    return Value(a.scalar_ + b.scalar_, union_tags(a.tags_, b.tags_));
  }
  friend Value operator-(const Value& a, const Value& b) {
    return Value(a.scalar_ - b.scalar_, union_tags(a.tags_, b.tags_));
  }
  friend Value operator*(const Value& a, const Value& b) {
    return Value(a.scalar_ * b.scalar_, union_tags(a.tags_, b.tags_));
  }
  friend Value operator/(const Value& a, const Value& b) {
    return Value(a.scalar_ / b.scalar_, union_tags(a.tags_, b.tags_));
  }
  friend Value operator-(const Value& a) { return Value(-a.scalar_, a.tags_); }

  friend Value log(const Value& a) { return Value(ad::log(a.scalar_), a.tags_); }
  friend Value exp(const Value& a) { return Value(ad::exp(a.scalar_), a.tags_); }
  friend Value sigmoid(const Value& a) { return Value(ad::sigmoid(a.scalar_), a.tags_); }
  friend Value sqrt(const Value& a) { return Value(ad::sqrt(a.scalar_), a.tags_); }
  friend Value tanh(const Value& a) { return Value(ad::tanh(a.scalar_), a.tags_); }
  friend Value pow(const Value& a, const Value& b) {
    return Value(ad::pow(a.scalar_, b.scalar_), union_tags(a.tags_, b.tags_));
  }

  Value& operator+=(const Value& b) { return *this = *this + b; }
  Value& operator-=(const Value& b) { return *this = *this - b; }
  Value& operator*=(const Value& b) { return *this = *this * b; }

 private:
  ad::Scalar scalar_;
  Tags tags_;
};

}  // namespace ppl
