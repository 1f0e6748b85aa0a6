#include "ppl/autodiff.hpp"

#include <cmath>

namespace ppl::ad {

namespace {

thread_local Tape* g_active_tape = nullptr;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double eval_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (b == 0.0) throw DomainError("div", b);
      return a / b;
    case Op::pow: {
      double v = std::pow(a, b);
      if (std::isnan(v)) throw DomainError("pow", a);
      return v;
    }
    default: throw Error("eval_binary: not a binary op");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double eval_unary(Op op, double a) {
  switch (op) {
    case Op::neg: return -a;
    case Op::log:
      if (!(a > 0.0)) throw DomainError("log", a);
      return std::log(a);
    case Op::exp: return std::exp(a);
    case Op::sigmoid: return stable_sigmoid(a);
    case Op::lgamma:
      if (!(a > 0.0)) throw DomainError("lgamma", a);
      return math::lgamma(a);
    case Op::digamma:
      if (!(a > 0.0)) throw DomainError("digamma", a);
      return math::digamma(a);
    case Op::sqrt:
      if (!(a > 0.0)) throw DomainError("sqrt", a);
      return std::sqrt(a);
    case Op::tanh: return std::tanh(a);
    default: throw Error("eval_unary: not a unary op");
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::pow: return "pow";
    case Op::neg: return "neg";
    case Op::log: return "log";
    case Op::exp: return "exp";
    case Op::sigmoid: return "sigmoid";
    case Op::lgamma: return "lgamma";
    case Op::digamma: return "digamma";
    case Op::sqrt: return "sqrt";
    case Op::tanh: return "tanh";
  }
  return "?";
}

Tape* active_tape() { return g_active_tape; }

TapeGuard::TapeGuard(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeGuard::~TapeGuard() { g_active_tape = previous_; }

NoTapeGuard::NoTapeGuard() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoTapeGuard::~NoTapeGuard() { g_active_tape = previous_; }

Scalar Tape::emit(Op op, double value, const Scalar& a, const Scalar& b) {
  Record rec;
  rec.op = op;
  rec.va = a.value;
  rec.vb = b.value;
  rec.value = value;
  rec.a = (a.tape == this) ? a.index : -1;
  rec.b = (b.tape == this) ? b.index : -1;
  records_.push_back(rec);
  return Scalar(value, this, static_cast<std::int32_t>(records_.size() - 1));
}

Scalar Tape::emit(Op op, double value, const Scalar& a) {
  Record rec;
  rec.op = op;
  rec.va = a.value;
  rec.value = value;
  rec.a = (a.tape == this) ? a.index : -1;
  records_.push_back(rec);
  return Scalar(value, this, static_cast<std::int32_t>(records_.size() - 1));
}

namespace {

Scalar apply_binary(Op op, const Scalar& a, const Scalar& b) {
  double v = eval_binary(op, a.value, b.value);
  Tape* t = g_active_tape;
  if (t == nullptr || (!a.has_node() && !b.has_node())) return Scalar(v);
  return t->emit(op, v, a, b);
}

Scalar apply_unary(Op op, const Scalar& a) {
  double v = eval_unary(op, a.value);
  Tape* t = g_active_tape;
  if (t == nullptr || !a.has_node()) return Scalar(v);
  return t->emit(op, v, a);
}

}  // namespace

Scalar operator+(const Scalar& a, const Scalar& b) { return apply_binary(Op::add, a, b); }
Scalar operator-(const Scalar& a, const Scalar& b) { return apply_binary(Op::sub, a, b); }
Scalar operator*(const Scalar& a, const Scalar& b) { return apply_binary(Op::mul, a, b); }
Scalar operator/(const Scalar& a, const Scalar& b) { return apply_binary(Op::div, a, b); }
Scalar operator-(const Scalar& a) { return apply_unary(Op::neg, a); }
Scalar pow(const Scalar& a, const Scalar& b) { return apply_binary(Op::pow, a, b); }
Scalar log(const Scalar& a) { return apply_unary(Op::log, a); }
Scalar exp(const Scalar& a) { return apply_unary(Op::exp, a); }
Scalar sigmoid(const Scalar& a) { return apply_unary(Op::sigmoid, a); }
Scalar lgamma(const Scalar& a) { return apply_unary(Op::lgamma, a); }
Scalar digamma(const Scalar& a) { return apply_unary(Op::digamma, a); }
Scalar sqrt(const Scalar& a) { return apply_unary(Op::sqrt, a); }
Scalar tanh(const Scalar& a) { return apply_unary(Op::tanh, a); }

Scalar softplus(const Scalar& a) {
  if (a.value > 30.0) return a + exp(-a);
  if (a.value < -30.0) return exp(a);
  return -log(sigmoid(-a));
}

void Tape::backward_values(std::int32_t root, std::vector<double>& adjoints) const {
  adjoints.assign(static_cast<std::size_t>(root) + 1, 0.0);
  adjoints[root] = 1.0;
  for (std::int32_t i = root; i >= 0; --i) {
    double g = adjoints[i];
    if (g == 0.0) continue;
    const Record& r = records_[i];
    switch (r.op) {
      case Op::leaf:
        break;
      case Op::add:
        if (r.a >= 0) adjoints[r.a] += g;
        if (r.b >= 0) adjoints[r.b] += g;
        break;
      case Op::sub:
        if (r.a >= 0) adjoints[r.a] += g;
        if (r.b >= 0) adjoints[r.b] -= g;
        break;
      case Op::mul:
        if (r.a >= 0) adjoints[r.a] += g * r.vb;
        if (r.b >= 0) adjoints[r.b] += g * r.va;
        break;
      case Op::div:
        if (r.a >= 0) adjoints[r.a] += g / r.vb;
        if (r.b >= 0) adjoints[r.b] -= g * r.value / r.vb;
        break;
      case Op::pow:
        if (r.a >= 0) adjoints[r.a] += g * r.vb * std::pow(r.va, r.vb - 1.0);
        if (r.b >= 0) adjoints[r.b] += g * r.value * std::log(r.va);
        break;
      case Op::neg:
        if (r.a >= 0) adjoints[r.a] -= g;
        break;
      case Op::log:
        if (r.a >= 0) adjoints[r.a] += g / r.va;
        break;
      case Op::exp:
        if (r.a >= 0) adjoints[r.a] += g * r.value;
        break;
      case Op::sigmoid:
        if (r.a >= 0) adjoints[r.a] += g * r.value * (1.0 - r.value);
        break;
      case Op::lgamma:
        if (r.a >= 0) adjoints[r.a] += g * math::digamma(r.va);
        break;
      case Op::digamma:
        if (r.a >= 0) adjoints[r.a] += g * math::trigamma(r.va);
        break;
      case Op::sqrt:
        if (r.a >= 0) adjoints[r.a] += g * 0.5 / r.value;
        break;
      case Op::tanh:
        if (r.a >= 0) adjoints[r.a] += g * (1.0 - r.value * r.value);
        break;
    }
  }
}

std::vector<Scalar> Tape::backward_scalars(const Scalar& output, std::span<const Scalar> wrt) {
  if (output.tape != this) {
    // Output detached from this tape: every gradient is zero.
    return std::vector<Scalar>(wrt.size(), Scalar(0.0));
  }
  ++generation_;
  TapeGuard guard(*this);  // the sweep's own arithmetic records here
  const std::int32_t root = output.index;
  std::vector<Scalar> adj(static_cast<std::size_t>(root) + 1, Scalar(0.0));
  std::vector<char> seen(static_cast<std::size_t>(root) + 1, 0);
  adj[root] = Scalar(1.0);
  seen[root] = 1;
  auto accumulate = [&](std::int32_t idx, const Scalar& contrib) {
    if (idx < 0 || idx > root) return;
    adj[idx] = seen[idx] ? adj[idx] + contrib : contrib;
    seen[idx] = 1;
  };
  for (std::int32_t i = root; i >= 0; --i) {
    if (!seen[i]) continue;
    const Scalar g = adj[i];
    if (!g.has_node() && g.value == 0.0) continue;
    const Record r = records_[i];  // copy: the sweep appends records
    const Scalar in_a(r.va, r.a >= 0 ? this : nullptr, r.a);
    const Scalar in_b(r.vb, r.b >= 0 ? this : nullptr, r.b);
    const Scalar out(r.value, this, i);
    switch (r.op) {
      case Op::leaf:
        break;
      case Op::add:
        accumulate(r.a, g);
        accumulate(r.b, g);
        break;
      case Op::sub:
        accumulate(r.a, g);
        accumulate(r.b, -g);
        break;
      case Op::mul:
        accumulate(r.a, g * in_b);
        accumulate(r.b, g * in_a);
        break;
      case Op::div:
        accumulate(r.a, g / in_b);
        accumulate(r.b, -(g * out) / in_b);
        break;
      case Op::pow:
        accumulate(r.a, g * in_b * pow(in_a, in_b - Scalar(1.0)));
        if (r.b >= 0) accumulate(r.b, g * out * log(in_a));
        break;
      case Op::neg:
        accumulate(r.a, -g);
        break;
      case Op::log:
        accumulate(r.a, g / in_a);
        break;
      case Op::exp:
        accumulate(r.a, g * out);
        break;
      case Op::sigmoid:
        accumulate(r.a, g * out * (Scalar(1.0) - out));
        break;
      case Op::lgamma:
        accumulate(r.a, g * digamma(in_a));
        break;
      case Op::digamma:
        // Second derivative of digamma is not registered; the partial is a
        // constant trigamma value, so third-order sweeps through it detach.
        accumulate(r.a, g * Scalar(math::trigamma(r.va)));
        break;
      case Op::sqrt:
        accumulate(r.a, g * Scalar(0.5) / out);
        break;
      case Op::tanh:
        accumulate(r.a, g * (Scalar(1.0) - out * out));
        break;
    }
  }
  --generation_;
  std::vector<Scalar> result;
  result.reserve(wrt.size());
  for (const Scalar& x : wrt) {
    if (x.tape == this && x.index >= 0 && x.index <= root && seen[x.index]) {
      result.push_back(adj[x.index]);
    } else {
      result.push_back(Scalar(0.0));
    }
  }
  return result;
}

std::vector<double> gradient(const ScalarFn& f, std::span<const double> at) {
  Tape tape;
  TapeGuard guard(tape);
  std::vector<Scalar> leaves;
  leaves.reserve(at.size());
  for (double v : at) leaves.push_back(tape.variable(v));
  Scalar y = f(leaves);
  std::vector<double> result(at.size(), 0.0);
  if (!y.has_node() || y.tape != &tape) return result;  // constant output
  if (!std::isfinite(y.value)) throw DomainError("gradient", y.value);
  std::vector<double> adjoints;
  tape.backward_values(y.index, adjoints);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    result[i] = adjoints[leaves[i].index];
  }
  return result;
}

std::vector<Scalar> grad(const Scalar& output, std::span<const Scalar> wrt) {
  Tape* t = active_tape();
  if (t == nullptr || !output.has_node()) {
    return std::vector<Scalar>(wrt.size(), Scalar(0.0));
  }
  return output.tape->backward_scalars(output, wrt);
}

std::vector<Scalar> grad(const ScalarFn& f, std::span<const Scalar> at) {
  return grad(f(at), at);
}

std::vector<double> finite_difference(const RealFn& f, std::span<const double> at, double h) {
  std::vector<double> x(at.begin(), at.end());
  std::vector<double> result(at.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    result[i] = (up - down) / (2.0 * h);
  }
  return result;
}

}  // namespace ppl::ad

namespace ppl::math {

namespace {

// Lanczos approximation, g = 7, 9 coefficients.
constexpr double kLanczos[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;
constexpr double kPi = 3.1415926535897932384626433832795;

}  // namespace

double lgamma(double x) {
  if (x < 0.5) {
    // Reflection keeps the series argument away from zero.
    return std::log(kPi / std::sin(kPi * x)) - lgamma(1.0 - x);
  }
  const double z = x - 1.0;
  double series = kLanczos[0];
  for (int i = 1; i < 9; ++i) series += kLanczos[i] / (z + i);
  const double t = z + 7.5;
  return kHalfLog2Pi + (z + 0.5) * std::log(t) - t + std::log(series);
}

double digamma(double x) {
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

double trigamma(double x) {
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv +
                   inv2 * (1.0 / 6.0 -
                           inv2 * (1.0 / 30.0 -
                                   inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0)))));
  return result;
}

}  // namespace ppl::math
