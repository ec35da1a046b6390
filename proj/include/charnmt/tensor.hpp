// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace charnmt {

// Thrown when an operation receives tensors with incompatible extents.
// The message always names the offending shapes.
class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

template <typename A, typename B>
inline void require_shape(bool ok, const A& what, const B& detail) {
  if (!ok) {
    std::ostringstream os;
    os << what << ": " << detail;
    throw ShapeError(os.str());
  }
}

// Shared storage behind a Tensor handle.  Gradients live next to the
// values; `leaf` marks tensors created directly (parameters, inputs)
// as opposed to op outputs, which is what lets backward() reset
// intermediate gradients while leaving parameter gradients free to
// accumulate across calls.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool leaf = true;
};

template <typename T>
class Tape;

// Dense row-major tensor handle with value semantics on the handle and
// shared ownership of the storage.  Rank is 0 (scalar), 1 or 2; all
// compute-heavy ops work on rank-2 tensors laid out [rows x cols].
template <typename T>
class Tensor {
public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), T(0));
    t.set_requires_grad(requires_grad);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false) {
    require_shape(shape_numel(shape) == values.size(), "tensor literal",
                  "value count " + std::to_string(values.size()) +
                      " does not fill shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.set_requires_grad(requires_grad);
    return t;
  }

  static Tensor scalar(T v) { return from({}, {v}); }

  static Tensor full(Shape shape, T v) {
    Tensor t = zeros(std::move(shape));
    for (T& x : t.values()) x = v;
    return t;
  }

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  // Row/column view of the shape: scalars are 1x1, vectors are Nx1.
  std::size_t rows() const {
    return node_->shape.empty() ? 1 : node_->shape[0];
  }
  std::size_t cols() const {
    return node_->shape.size() < 2 ? 1 : node_->shape[1];
  }

  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }
  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }

  T& at(std::size_t i) { return node_->value[i]; }
  T at(std::size_t i) const { return node_->value[i]; }
  T& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }

  T scalar_value() const {
    require_shape(numel() == 1, "scalar_value",
                  "tensor has shape " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }

  void set_requires_grad(bool b) {
    node_->requires_grad = b;
    if (b)
      node_->grad.assign(node_->value.size(), T(0));
    else
      node_->grad.clear();
  }

  std::vector<T>& grad() {
    require_shape(requires_grad(), "grad",
                  "tensor does not track gradients");
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    require_shape(requires_grad(), "grad",
                  "tensor does not track gradients");
    return node_->grad;
  }
  // Const-qualified like shared_ptr::get: the handle is const, the
  // shared node is not.  Backward closures capture handles by value and
  // still accumulate into the node's gradient through this.
  T* grad_data() const { return node_->grad.data(); }

  void zero_grad() {
    if (requires_grad()) node_->grad.assign(node_->value.size(), T(0));
  }

  bool is_leaf() const { return node_->leaf; }
  void mark_op_output() { node_->leaf = false; }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Reverse-mode tape.  Constructing one makes it the active tape for the
// current thread (nesting restores the previous one on destruction);
// ops append backward closures while a tape is active and any input
// tracks gradients.  backward(loss) seeds d(loss)/d(loss) = 1, resets
// the gradients of every op output recorded on this tape, then replays
// the closures in reverse.  Leaf gradients are never reset here, so
// calling backward repeatedly accumulates into parameters.
template <typename T>
class Tape {
public:
  Tape() : prev_(active_) { active_ = this; }
  ~Tape() { active_ = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_; }

  void record(std::shared_ptr<TensorNode<T>> output,
              std::function<void()> backprop) {
    steps_.push_back(Step{std::move(output), std::move(backprop)});
  }

  std::size_t size() const { return steps_.size(); }

  void backward(Tensor<T>& loss) {
    require_shape(loss.numel() == 1, "backward",
                  "loss must be a scalar, got " + shape_str(loss.shape()));
    require_shape(loss.requires_grad(), "backward",
                  "loss does not track gradients; no parameters fed it");
    for (Step& s : steps_) {
      if (!s.output->leaf) s.output->grad.assign(s.output->value.size(), T(0));
    }
    loss.grad()[0] += T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->backprop();
  }

private:
  struct Step {
    std::shared_ptr<TensorNode<T>> output;
    std::function<void()> backprop;
  };

  std::vector<Step> steps_;
  Tape* prev_ = nullptr;
  static thread_local Tape* active_;
};

template <typename T>
thread_local Tape<T>* Tape<T>::active_ = nullptr;

// Marks `out` as the result of an op over `inputs` and registers the
// backward closure if a tape is live and some input needs gradients.
// Without an active tape the forward value is still produced but
// nothing tracks, which is the inference path.
template <typename T, typename... Inputs>
inline void finish_op(Tensor<T>& out, std::function<void()> backprop,
                      const Inputs&... inputs) {
  const bool any_grad = (inputs.requires_grad() || ...);
  Tape<T>* tape = Tape<T>::active();
  if (tape && any_grad) {
    out.set_requires_grad(true);
    out.mark_op_output();
    tape->record(out.node(), std::move(backprop));
  }
}

// Named, ordered collection of trainable tensors.  Order is the
// iteration and serialization order, so it must be deterministic.
template <typename T>
class ParamSet {
public:
  void add(const std::string& name, Tensor<T> t) {
    require_shape(find(name) == nullptr, "ParamSet::add",
                  "duplicate parameter name '" + name + "'");
    items_.push_back({name, std::move(t)});
  }

  Tensor<T>* find(const std::string& name) {
    for (auto& it : items_)
      if (it.name == name) return &it.tensor;
    return nullptr;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& it : items_) n += it.tensor.numel();
    return n;
  }

  struct Item {
    std::string name;
    Tensor<T> tensor;
  };

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  Item& operator[](std::size_t i) { return items_[i]; }
  const Item& operator[](std::size_t i) const { return items_[i]; }

  void zero_grads() {
    for (auto& it : items_) it.tensor.zero_grad();
  }

private:
  std::vector<Item> items_;
};

}  // namespace charnmt
