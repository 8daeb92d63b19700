#pragma once

#include <functional>
#include <span>
#include <vector>

namespace invuq::ad {

/// Scalar reverse-mode tape. Each node records up to two parents with the
/// local partial derivatives captured at forward time; reverse() propagates
/// adjoints so that the adjoint of each input equals d(output)/d(input).
class Tape {
 public:
  struct Node {
    int p0 = -1, p1 = -1;
    double w0 = 0.0, w1 = 0.0;
  };

  int add_input(double value);
  int add_node(double value, int p0, double w0, int p1 = -1, double w1 = 0.0);
  double value(int id) const { return vals_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

  /// Adjoints of every node with respect to the given output node.
  std::vector<double> reverse(int output) const;

 private:
  std::vector<Node> nodes_;
  std::vector<double> vals_;
};

/// Value recorded on a Tape. Supported primitives: + - * / exp log tanh
/// pow sum dot (anything else simply does not compile).
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  double value() const { return tape_->value(id_); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

Var operator+(const Var& a, const Var& b);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var pow(const Var& a, double e);
Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);
Var dot(std::span<const Var> a, std::span<const double> b);

struct GradResult {
  double value = 0.0;
  std::vector<double> grad;
};

using TapeFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Record f on a fresh tape at x and run one reverse sweep.
GradResult gradient(const TapeFn& f, std::span<const double> x);

}  // namespace invuq::ad
