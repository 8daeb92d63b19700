#include "invuq/autodiff.hpp"

#include <cassert>
#include <cmath>

namespace invuq::ad {

int Tape::add_input(double value) {
  nodes_.push_back({});
  vals_.push_back(value);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::add_node(double value, int p0, double w0, int p1, double w1) {
  nodes_.push_back({p0, p1, w0, w1});
  vals_.push_back(value);
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::clear() {
  nodes_.clear();
  vals_.clear();
}

std::vector<double> Tape::reverse(int output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  adj[static_cast<std::size_t>(output)] = 1.0;
  for (std::size_t ii = static_cast<std::size_t>(output) + 1; ii-- > 0;) {
    const double a = adj[ii];
    if (a == 0.0) continue;
    const Node& nd = nodes_[ii];
    if (nd.p0 >= 0) adj[static_cast<std::size_t>(nd.p0)] += nd.w0 * a;
    if (nd.p1 >= 0) adj[static_cast<std::size_t>(nd.p1)] += nd.w1 * a;
  }
  return adj;
}

namespace {
Tape* same_tape(const Var& a, [[maybe_unused]] const Var& b) {
  assert(a.tape() == b.tape());
  return a.tape();
}
}  // namespace

Var operator+(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  return {t, t->add_node(a.value() + b.value(), a.id(), 1.0, b.id(), 1.0)};
}
Var operator+(const Var& a, double b) {
  return {a.tape(), a.tape()->add_node(a.value() + b, a.id(), 1.0)};
}
Var operator+(double a, const Var& b) { return b + a; }

Var operator-(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  return {t, t->add_node(a.value() - b.value(), a.id(), 1.0, b.id(), -1.0)};
}
Var operator-(const Var& a, double b) {
  return {a.tape(), a.tape()->add_node(a.value() - b, a.id(), 1.0)};
}
Var operator-(double a, const Var& b) {
  return {b.tape(), b.tape()->add_node(a - b.value(), b.id(), -1.0)};
}
Var operator-(const Var& a) {
  return {a.tape(), a.tape()->add_node(-a.value(), a.id(), -1.0)};
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  return {t, t->add_node(a.value() * b.value(), a.id(), b.value(), b.id(), a.value())};
}
Var operator*(const Var& a, double b) {
  return {a.tape(), a.tape()->add_node(a.value() * b, a.id(), b)};
}
Var operator*(double a, const Var& b) { return b * a; }

Var operator/(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  const double bv = b.value();
  const double q = a.value() / bv;
  return {t, t->add_node(q, a.id(), 1.0 / bv, b.id(), -q / bv)};
}
Var operator/(const Var& a, double b) { return a * (1.0 / b); }
Var operator/(double a, const Var& b) {
  const double bv = b.value();
  return {b.tape(), b.tape()->add_node(a / bv, b.id(), -a / (bv * bv))};
}

Var exp(const Var& a) {
  const double v = std::exp(a.value());
  return {a.tape(), a.tape()->add_node(v, a.id(), v)};
}
Var log(const Var& a) {
  return {a.tape(), a.tape()->add_node(std::log(a.value()), a.id(), 1.0 / a.value())};
}
Var tanh(const Var& a) {
  const double v = std::tanh(a.value());
  return {a.tape(), a.tape()->add_node(v, a.id(), 1.0 - v * v)};
}
Var pow(const Var& a, double e) {
  const double v = std::pow(a.value(), e);
  return {a.tape(), a.tape()->add_node(v, a.id(), e * std::pow(a.value(), e - 1.0))};
}

Var sum(std::span<const Var> xs) {
  assert(!xs.empty());
  Var acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = acc + xs[i];
  return acc;
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  assert(a.size() == b.size() && !a.empty());
  Var acc = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

Var dot(std::span<const Var> a, std::span<const double> b) {
  assert(a.size() == b.size() && !a.empty());
  Var acc = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

GradResult gradient(const TapeFn& f, std::span<const double> x) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(x.size());
  for (double v : x) inputs.emplace_back(&tape, tape.add_input(v));
  const Var out = f(tape, inputs);
  const std::vector<double> adj = tape.reverse(out.id());
  GradResult r;
  r.value = out.value();
  r.grad.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r.grad[i] = adj[static_cast<std::size_t>(inputs[i].id())];
  return r;
}

}  // namespace invuq::ad
