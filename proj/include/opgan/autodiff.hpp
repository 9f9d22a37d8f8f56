#pragma once

// Define-by-run reverse-mode differentiation over Tensor3 values.
//
// Every op returns a new Var. When any input requires a gradient the result
// keeps references to its inputs and a backward closure; calling backward()
// on a scalar result walks that graph in reverse topological order. A graph
// and its Vars belong to one thread.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "opgan/tensor.hpp"

namespace opgan::ad {

class Var;

/// Receives the upstream gradient and one slot per input. A slot is null when
/// that input does not need a gradient. Implementations must add into the
/// slots, never assign.
using BackwardFn =
    std::function<void(const Tensor3& upstream, std::span<Tensor3* const> input_grads)>;

/// One recorded operation (or a leaf) in the graph.
struct Node {
  Tensor3 value;
  std::optional<Tensor3> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

class Var {
 public:
  Var() = default;

  /// A graph leaf. Parameters are leaves with requires_grad set.
  static Var leaf(Tensor3 value, bool requires_grad = false);
  static Var constant(Tensor3 value) { return leaf(std::move(value), false); }
  static Var full(Shape shape, double v) { return leaf(Tensor3(shape, v), false); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor3& value() const;
  /// Direct write access for optimizers and weight loading. Only valid on leaves.
  Tensor3& mutable_value();
  const Shape& shape() const { return value().shape(); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  /// Only valid on leaves.
  void set_requires_grad(bool on);

  bool has_grad() const noexcept { return node_ && node_->grad.has_value(); }
  /// Throws UsageError if no gradient has been accumulated yet.
  const Tensor3& grad() const;
  void zero_grad();

  /// Scalar value of a [1, 1, 1] tensor.
  double item() const;

  /// Populates grads of every reachable leaf that requires one. Repeated calls
  /// accumulate into leaves; intermediate grads are recomputed each call.
  void backward() const;

  /// Same value, cut from the graph.
  Var detach() const;

  const char* op() const noexcept { return node_ ? node_->op : "undefined"; }
  bool is_leaf() const noexcept { return node_ && node_->inputs.empty(); }

  /// Builds an op result. If no input requires a gradient the closure is
  /// dropped and a constant is returned.
  static Var make_result(Tensor3 value, std::vector<Var> inputs, BackwardFn fn,
                         const char* op);

 private:
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

enum class UpsampleMode { kNearest, kLinear };

/// Cross-correlation: out[b,o,l] = bias[o] + sum_{i,k} kernel[o,i,k] * x[b,i,l*stride+k-pad],
/// zero outside [0, L). kernel is stored as a Tensor3 of shape (Cout, Cin, K);
/// bias, when defined, has shape (1, Cout, 1).
Var conv1d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride,
           std::size_t pad);

/// Output length of conv1d for the given geometry; throws ConfigError when < 1.
std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

/// Generative-neuron convolution: bias + sum_q conv1d(weights[..,q], x^q), q = 1..order.
/// weights has shape (Cout, Cin, K*order) laid out [o][i][k][q].
Var operational_conv1d(const Var& input, const Var& weights, const Var& bias,
                       std::size_t kernel, std::size_t order, std::size_t stride,
                       std::size_t pad);

Var pow(const Var& x, unsigned q);
Var tanh(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, double c);
Var upsample2(const Var& x, UpsampleMode mode = UpsampleMode::kNearest);
/// Center crop or symmetric zero-pad along L. Odd remainders go to the right.
Var crop_pad(const Var& x, std::size_t target_length);
Var concat_channels(const Var& a, const Var& b);
/// Mean absolute difference over all elements; returns [1, 1, 1].
Var l1_loss(const Var& a, const Var& b);

}  // namespace opgan::ad
