#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <random>
#include <string_view>
#include <vector>

#include "cyclereg/tensor.hpp"

namespace cyclereg {

/// Identifies a trainable tensor. `model` separates the forward and backward
/// networks so their parameter sets can never collide.
struct ParamId {
  std::uint32_t model = 0;
  std::uint32_t index = 0;
  auto operator<=>(const ParamId&) const = default;
};

struct NodeId {
  std::size_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

enum class Mode { Training, Inference };

enum class Primitive {
  Constant,
  Parameter,
  MatMul,
  AddBias,
  Relu,
  Tanh,
  BatchNorm,
  Dropout,
  Subtract,
  Add,
  Scale,
  ReduceMean,
  Square,
  Abs,
  SmoothL1,
};

std::string_view name(Primitive p);

/// Per-feature running statistics of a batch normalization layer.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNormState fresh(std::size_t features, double momentum = 0.1,
                              double epsilon = 1e-5);
};

using Gradients = std::map<ParamId, Tensor>;

/// Records a computation for reverse-mode differentiation. Nodes are
/// appended in evaluation order, so the node list is always topologically
/// sorted. A tape belongs to one thread.
class Tape {
 public:
  NodeId constant(Tensor value);
  /// Registers a trainable leaf. Registering the same id twice returns the
  /// existing node so reuse across a composition accumulates gradients.
  NodeId parameter(ParamId id, const Tensor& value);

  NodeId matmul(NodeId a, NodeId b);
  /// x (n x f) + bias (1 x f) broadcast over rows.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId relu(NodeId x);
  NodeId tanh(NodeId x);
  /// Training mode normalizes with batch statistics and updates `state`;
  /// inference mode uses the running statistics only.
  NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, Mode mode);
  NodeId batchnorm_inference(NodeId x, NodeId gamma, NodeId beta, const BatchNormState& state);
  /// Inverted dropout; the identity in inference mode.
  NodeId dropout(NodeId x, double drop_probability, Mode mode, std::mt19937_64& rng);
  NodeId subtract(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId reduce_mean(NodeId x);
  NodeId square(NodeId x);
  NodeId abs(NodeId x);
  NodeId smooth_l1(NodeId x, double threshold);

  const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  Primitive kind(NodeId id) const { return nodes_.at(id.index).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of a scalar node with respect to every parameter registered on
  /// this tape. Parameters with no path to `loss` get zero tensors.
  Gradients backward(NodeId loss) const;

 private:
  struct Node {
    Primitive op = Primitive::Constant;
    std::array<std::size_t, 3> inputs{};
    std::size_t input_count = 0;
    Tensor value;
    Tensor saved;   // masks, normalized activations
    Tensor saved2;  // batchnorm inverse standard deviation
    double scalar = 0.0;
    ParamId param{};
    bool needs_grad = false;
  };

  const Node& node(NodeId id, std::string_view op) const;
  NodeId push(Node n);
  NodeId batchnorm_impl(NodeId x, NodeId gamma, NodeId beta, const BatchNormState& stats,
                        BatchNormState* update);
  NodeId unary(Primitive op, NodeId x, Tensor value, Tensor saved = {}, double scalar = 0.0);

  std::vector<Node> nodes_;
  std::map<ParamId, std::size_t> params_;
};

}  // namespace cyclereg
