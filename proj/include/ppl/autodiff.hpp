#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ppl/errors.hpp"

namespace ppl::ad {

class Tape;

// A recorded value. Constants carry no tape reference and have zero
// derivative with respect to everything.
struct Scalar {
  double value = 0.0;
  Tape* tape = nullptr;
  std::int32_t index = -1;

  Scalar() = default;
  Scalar(double v) : value(v) {}  // NOLINT: implicit constant lift is intended
  Scalar(double v, Tape* t, std::int32_t i) : value(v), tape(t), index(i) {}

  bool has_node() const { return tape != nullptr; }
};

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  log,
  exp,
  sigmoid,
  lgamma,
  digamma,
  sqrt,
  tanh,
};

const char* op_name(Op op);

// One record per produced value. Input slots hold the input value and, when
// the input lives on the same tape, its record index (-1 for constants).
struct Record {
  double va = 0.0;
  double vb = 0.0;
  double value = 0.0;
  std::int32_t a = -1;
  std::int32_t b = -1;
  Op op = Op::leaf;
};

// Ordered record arena. One tape per computation; nested gradient calls share
// the arena of the enclosing computation (the backward sweep is itself
// recorded), with `generation` tracking the current nesting depth.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Scalar variable(double v) {
    records_.push_back(Record{v, 0.0, v, -1, -1, Op::leaf});
    return Scalar(v, this, static_cast<std::int32_t>(records_.size() - 1));
  }

  std::size_t size() const { return records_.size(); }
  const Record& record(std::size_t i) const { return records_[i]; }
  void reset() { records_.clear(); }
  int generation() const { return generation_; }

  Scalar emit(Op op, double value, const Scalar& a, const Scalar& b);
  Scalar emit(Op op, double value, const Scalar& a);

  // Reverse sweep with plain doubles; no new records. Returns the adjoint of
  // every record index in [0, root], so gradients of several leaves can be
  // read off one sweep.
  void backward_values(std::int32_t root, std::vector<double>& adjoints) const;

  // Reverse sweep recorded with Scalar arithmetic, so the returned gradients
  // are themselves differentiable (nested tapes). Appends to this tape.
  std::vector<Scalar> backward_scalars(const Scalar& output, std::span<const Scalar> wrt);

 private:
  friend std::vector<Scalar> grad(const Scalar&, std::span<const Scalar>);
  std::vector<Record> records_;
  int generation_ = 0;
};

// Context-local active tape. Arithmetic on Scalars records onto the active
// tape; with no active tape the same arithmetic computes plain values.
Tape* active_tape();

class TapeGuard {
 public:
  explicit TapeGuard(Tape& tape);
  ~TapeGuard();
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for its scope (the plain-number backend).
class NoTapeGuard {
 public:
  NoTapeGuard();
  ~NoTapeGuard();
  NoTapeGuard(const NoTapeGuard&) = delete;
  NoTapeGuard& operator=(const NoTapeGuard&) = delete;

 private:
  Tape* previous_;
};

Scalar operator+(const Scalar& a, const Scalar& b);
Scalar operator-(const Scalar& a, const Scalar& b);
Scalar operator*(const Scalar& a, const Scalar& b);
Scalar operator/(const Scalar& a, const Scalar& b);
Scalar operator-(const Scalar& a);
inline Scalar& operator+=(Scalar& a, const Scalar& b) { return a = a + b; }
inline Scalar& operator-=(Scalar& a, const Scalar& b) { return a = a - b; }
inline Scalar& operator*=(Scalar& a, const Scalar& b) { return a = a * b; }

Scalar pow(const Scalar& a, const Scalar& b);
Scalar log(const Scalar& a);
Scalar exp(const Scalar& a);
Scalar sigmoid(const Scalar& a);
Scalar lgamma(const Scalar& a);
Scalar digamma(const Scalar& a);
Scalar sqrt(const Scalar& a);
Scalar tanh(const Scalar& a);

// log(1 + exp(x)) with stable branches; derivative is sigmoid(x) on every
// branch up to the approximation error of the tails.
Scalar softplus(const Scalar& a);

using ScalarFn = std::function<Scalar(std::span<const Scalar>)>;

// Gradient of f at a point: fresh tape, one reverse sweep in doubles.
std::vector<double> gradient(const ScalarFn& f, std::span<const double> at);

// Differentiable gradient of an output already on the active tape. The
// sweep records onto the same tape, so results can be differentiated again.
std::vector<Scalar> grad(const Scalar& output, std::span<const Scalar> wrt);
std::vector<Scalar> grad(const ScalarFn& f, std::span<const Scalar> at);

using RealFn = std::function<double(std::span<const double>)>;

// Central finite differences, the test oracle for every registered op.
std::vector<double> finite_difference(const RealFn& f, std::span<const double> at, double h);

}  // namespace ppl::ad

namespace ppl::math {

// Lanczos log-gamma (g = 7, 9 coefficients) and digamma via recurrence plus
// asymptotic series. Positive arguments only.
double lgamma(double x);
double digamma(double x);
double trigamma(double x);

}  // namespace ppl::math
