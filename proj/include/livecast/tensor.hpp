#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "livecast/error.hpp"

namespace livecast::tensor {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int shape_size(const Shape& s);

class Tape;

// Immutable dense double tensor in row-major layout. Copies are shallow
// (shared storage); no op ever writes through an existing handle. A tensor
// optionally carries a (tape, node) link when it was produced under tracing.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_values(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  int size() const { return static_cast<int>(data_ ? data_->size() : 0); }
  bool defined() const { return static_cast<bool>(data_); }

  const std::vector<double>& values() const { return *data_; }
  double operator[](int i) const { return (*data_)[i]; }
  double at(std::initializer_list<int> idx) const;
  double item() const;  // value of a 1-element tensor

  // Autodiff linkage.
  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  bool traced() const { return tape_ != nullptr; }
  Tensor detached() const;  // same storage, no tape link

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  friend class Tape;
  friend Tensor record_op(Tape* tape, Tensor out, std::vector<int> parents,
                          std::function<void(const std::vector<double>&, Tape&)> pull);
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Activation choices for the elementwise op.
enum class Act { sigmoid, tanh, relu };

// Multiply-accumulate meter. While a guard is alive, every op executed on the
// same thread adds its MAC count (matmul m*n*k, convolution H*W*k^2*ci*co,
// hadamard n). Used to cross-check closed-form cost estimates.
class MacCounterGuard {
 public:
  MacCounterGuard();
  ~MacCounterGuard();
  MacCounterGuard(const MacCounterGuard&) = delete;
  MacCounterGuard& operator=(const MacCounterGuard&) = delete;
  std::int64_t count() const;

 private:
  std::int64_t saved_;
  bool was_active_;
};

// Reverse-mode tape. Ops append nodes in execution order, so node ids are a
// topological order by construction. backward() sweeps once in reverse from
// the loss node and accumulates gradients per node.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Register a leaf (typically a parameter). Returns a traced handle that
  // shares storage with the input.
  Tensor watch(const Tensor& t);

  // Run reverse accumulation from a traced scalar.
  void backward(const Tensor& loss);

  // Gradient of the last backward() with respect to a traced tensor.
  Tensor grad(const Tensor& t) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  bool backward_done() const { return backward_done_; }

 private:
  friend Tensor record_op(Tape* tape, Tensor out, std::vector<int> parents,
                          std::function<void(const std::vector<double>&, Tape&)> pull);
  friend struct TapeAccess;

  struct Node {
    std::vector<int> parents;
    int size = 0;
    // Accumulates this node's output gradient into its parents' buffers.
    std::function<void(const std::vector<double>& out_grad, Tape& tape)> pull;
  };

  std::vector<double>& grad_buffer(int node) { return grads_[node]; }

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool backward_done_ = false;
};

// --- primitive ops ---------------------------------------------------------
// Every op validates shapes, checks the result for NaN/Inf, and records a
// node when any input is traced. Inputs traced on different tapes are an
// error.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// [m x k] . [k x n] -> [m x n]; a rank-1 right operand [k] is treated as a
// column and yields rank-1 [m].
Tensor matmul(const Tensor& a, const Tensor& b);

// Same-padding 2-D convolution. x: [ci, H, W], kernel: [co, ci, k, k] with k
// odd, bias: [co]. Out-of-bounds taps read zero.
Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias);

Tensor elementwise(const Tensor& x, Act f);
inline Tensor sigmoid(const Tensor& x) { return elementwise(x, Act::sigmoid); }
inline Tensor tanh_act(const Tensor& x) { return elementwise(x, Act::tanh); }
inline Tensor relu(const Tensor& x) { return elementwise(x, Act::relu); }

// Concatenate along axis 0. Rank 1: lengths add. Rank 3: channel counts add,
// spatial dims must match.
Tensor concat(const std::vector<Tensor>& parts);

// Sum of all elements -> scalar tensor.
Tensor sum(const Tensor& x);

// Per-channel spatial mean: [c, H, W] -> [c].
Tensor global_avg_pool(const Tensor& x);

// Same element count, new shape; gradient passes through unchanged.
Tensor reshape(const Tensor& x, Shape shape);

}  // namespace livecast::tensor
