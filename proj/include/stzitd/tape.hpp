#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stzitd/tensor.hpp"

namespace stzitd {

using ValueId = std::size_t;

enum class Unary { Sigmoid, Tanh, Relu, LeakyRelu, Exp, Log, Power };

// Reverse-mode autodiff tape. Each forward op appends its result and a
// backward closure; backward() replays the closures in reverse, which is a
// reverse topological order of the recorded graph, so every node is visited
// exactly once. The tape is rebuilt for every forward pass.
class Tape {
 public:
  ValueId input(Tensor t);

  const Tensor& value(ValueId id) const { return vals_[id]; }
  const Tensor& grad(ValueId id) const;

  // fn(x) elementwise. `arg` is the LeakyRelu slope (default 0.2) or the
  // Power exponent. Log requires strictly positive inputs.
  ValueId unary(ValueId x, Unary fn, double arg = 0.2);
  ValueId sigmoid(ValueId x) { return unary(x, Unary::Sigmoid); }
  ValueId tanh(ValueId x) { return unary(x, Unary::Tanh); }
  ValueId relu(ValueId x) { return unary(x, Unary::Relu); }
  ValueId leaky_relu(ValueId x, double slope = 0.2) { return unary(x, Unary::LeakyRelu, slope); }
  ValueId exp(ValueId x) { return unary(x, Unary::Exp); }
  ValueId log(ValueId x) { return unary(x, Unary::Log); }
  ValueId power(ValueId x, double k) { return unary(x, Unary::Power, k); }

  ValueId matmul(ValueId a, ValueId b);
  ValueId transpose(ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);  // elementwise
  ValueId affine(ValueId x, double scale, double shift);
  ValueId one_minus(ValueId x) { return affine(x, -1.0, 1.0); }

  // (n x k) matrix plus a length-k row vector, broadcast over rows.
  ValueId add_rowvec(ValueId m, ValueId v);

  ValueId concat_cols(std::span<const ValueId> parts);

  // min(x, cap) elementwise; zero gradient where the cap is active.
  // Increments *clamp_count by the number of clamped entries if given.
  ValueId clamp_max(ValueId x, double cap, std::size_t* clamp_count = nullptr);

  // Row-wise softmax over entries where mask != 0; masked entries are 0 in
  // the output. Every row of the mask must have at least one live entry.
  ValueId masked_row_softmax(ValueId logits, Tensor mask);

  ValueId sum(ValueId x);          // -> scalar
  ValueId sum_squares(ValueId x);  // -> scalar

  // Escape hatch for ops with hand-written backward passes. `backward`
  // receives the saved input values, the output gradient, and one gradient
  // accumulator per input (accumulate with +=).
  using CustomBackward = std::function<void(const std::vector<Tensor>& inputs,
                                            const Tensor& out_grad,
                                            const std::vector<Tensor*>& input_grads)>;
  ValueId custom(const std::string& name, std::vector<ValueId> inputs, Tensor out,
                 CustomBackward backward);

  // Populates gradients of everything `loss` depends on. `loss` must be a
  // one-element tensor.
  void backward(ValueId loss);

  std::size_t size() const { return vals_.size(); }

 private:
  ValueId push(Tensor out, const std::string& op, std::function<void()> back);

  std::vector<Tensor> vals_;
  std::vector<Tensor> grads_;
  std::vector<std::function<void()>> back_;
  bool has_grads_ = false;
};

// A named learnable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape());
  }
  void zero_grad() { grad.fill(0.0); }
};

// Binds Parameters into one forward pass and pulls their gradients back out
// after Tape::backward. A parameter used several times binds to a single
// tape node, so its gradient accumulates across uses. pull_grads overwrites
// the parameters' gradients (they are zeroed, not summed, across passes).
class ParamBinding {
 public:
  explicit ParamBinding(Tape& tape) : tape_(&tape) {}

  ValueId use(Parameter& p) {
    for (const auto& [q, id] : bound_)
      if (q == &p) return id;
    ValueId id = tape_->input(p.value);
    bound_.push_back({&p, id});
    return id;
  }

  void pull_grads() {
    for (auto& [p, id] : bound_) p->grad = tape_->grad(id);
  }

  std::vector<ValueId> bound_ids() const {
    std::vector<ValueId> out;
    out.reserve(bound_.size());
    for (const auto& [p, id] : bound_) out.push_back(id);
    return out;
  }

 private:
  Tape* tape_;
  std::vector<std::pair<Parameter*, ValueId>> bound_;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double autodiff = 0.0;
  double finite_diff = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  GradCheckEntry worst;
  std::size_t entries_checked = 0;
  bool pass(double tolerance) const { return max_rel_err <= tolerance; }
};

// Central-difference check of every parameter entry. `eval(true)` must run a
// full forward+backward pass, leave gradients on the parameters, and return
// the loss; `eval(false)` only needs the loss value. Relative error is
// |autodiff - fd| / max(1, |fd|).
GradCheckReport grad_check(const std::function<double(bool with_grad)>& eval,
                           std::span<Parameter* const> params, double step = 1e-5,
                           double tolerance = 1e-4);

}  // namespace stzitd
