#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "emopred/tensor.hpp"

namespace emopred {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records operations in execution order; backward() walks them in reverse.
// Nodes only ever reference earlier nodes, so the graph is acyclic by
// construction.
class Tape {
 public:
  // Receives the node's output gradient; accumulates into parents via
  // grad_target().
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable input that is not a Parameter; read its gradient with
  // grad() after backward().
  Var input(Tensor value);
  // Each Parameter maps to a single leaf per tape; its gradient is added to
  // Parameter::grad by backward().
  Var param(Parameter& p);

  Var record(Tensor value, const std::vector<std::size_t>& parents,
             BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a parent during backward, or nullptr when that parent
  // does not need one.
  Tensor* grad_target(std::size_t id);
  // Zeros when the node received no gradient.
  Tensor grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  static bool has_grad(const Node& n) {
    return n.grad.size() == n.value.size() && n.grad.shape() == n.value.shape();
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// --- forward ops ---------------------------------------------------------

Var matmul(Var a, Var b);
// x * weight^T + bias; weight is (out x in), bias has `out` entries.
Var linear(Var x, Var weight, Var bias);
// Same shape, or `b` is a single row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var softmax(Var a, std::size_t axis);
// Row-wise softmax over entries with mask != 0; masked entries are exactly 0.
Var masked_softmax(Var a, const Tensor& mask);
Var mean(Var a, std::size_t axis);
Var sum(Var a);
Var embedding_lookup(Var table, std::span<const std::size_t> indices);
// Row r comes from `a` when take_a[r] is set, otherwise from `b`.
Var where_rows(const std::vector<std::uint8_t>& take_a, Var a, Var b);
// steps[t] is (B x D); mask is (B x T). Row b averages its unmasked steps.
Var masked_mean_steps(const std::vector<Var>& steps, const Tensor& mask);
// Row b of the result is sum_t weights[b, t] * steps[t][b]; entries with zero
// weight are skipped.
Var weighted_sum_steps(Var weights, const std::vector<Var>& steps);
// mean_b w[label_b] * -log(max(p[b, label_b], 1e-12))
Var weighted_cross_entropy(Var probs, std::span<const std::size_t> labels,
                           std::span<const double> class_weights);

// --- stochastic regularizers --------------------------------------------

// Train mode adds i.i.d. N(0, sigma^2) noise; eval mode is the identity.
// The noise is a constant for backward.
Var gaussian_noise(Var x, double sigma, Mode mode, Rng& rng);
// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
Var dropout(Var x, double p, Mode mode, Rng& rng);

// --- gradient checking ---------------------------------------------------

inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

double relative_error(double analytic, double numeric);

// Compares backward() against central differences (f(p+h) - f(p-h)) / 2h for
// every entry of every parameter. `loss` must build a deterministic scalar.
GradCheckResult finite_difference_check(
    const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
    double h = 1e-5);

}  // namespace emopred
