#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cyclereg/random.hpp"
#include "cyclereg/tape.hpp"

namespace cyclereg {

enum class Activation { None, Relu, Tanh };

std::string_view name(Activation a);
std::optional<Activation> parse_activation(std::string_view text);

/// One dense block: linear -> [batchnorm] -> activation -> [dropout].
struct LayerSpec {
  std::size_t in = 1;
  std::size_t out = 1;
  Activation activation = Activation::None;
  bool batchnorm = false;
  bool dropout = false;

  bool operator==(const LayerSpec&) const = default;
};

struct MlpSpec {
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;
  double dropout_probability = 0.1;

  /// Hidden blocks share one activation/batchnorm/dropout setting; the head
  /// is a plain linear layer.
  static MlpSpec chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                       Activation activation, bool batchnorm, bool dropout, std::uint64_t seed);

  std::size_t input_width() const;
  std::size_t output_width() const;
  /// Throws std::invalid_argument describing the first violated rule.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/// A multilayer perceptron whose parameters are tagged with `model` so two
/// networks on one tape keep disjoint parameter ids.
class Mlp {
 public:
  Mlp(MlpSpec spec, std::uint32_t model);

  /// Records the network on `tape`. Training mode uses batch statistics and
  /// dropout (which then requires `rng`).
  NodeId forward(Tape& tape, NodeId input, Mode mode, Rng* rng = nullptr);
  /// Records the network with parameters as constants and batchnorm in
  /// inference mode: gradients pass through to the input but the network
  /// itself is fixed.
  NodeId forward_frozen(Tape& tape, NodeId input) const;
  /// Inference on a batch without touching any state.
  Tensor predict(const Tensor& batch) const;
  /// Replaces every running mean/variance with the exact statistics of
  /// `inputs` propagated through the network (no dropout). Needs >= 2 rows.
  void recalibrate_batchnorm(const Tensor& inputs);

  const MlpSpec& spec() const noexcept { return spec_; }
  std::uint32_t model() const noexcept { return model_; }
  std::size_t input_width() const { return spec_.input_width(); }
  std::size_t output_width() const { return spec_.output_width(); }

  std::size_t parameter_count() const;
  const std::vector<Tensor>& parameters() const noexcept { return params_; }
  std::vector<Tensor>& parameters() noexcept { return params_; }
  ParamId id(std::size_t index) const { return ParamId{model_, static_cast<std::uint32_t>(index)}; }
  bool owns(ParamId id) const noexcept { return id.model == model_ && id.index < params_.size(); }
  Tensor& parameter(ParamId id);
  const Tensor& parameter(ParamId id) const;

  const std::vector<BatchNormState>& batchnorm_states() const noexcept { return bn_; }
  std::vector<BatchNormState>& batchnorm_states() noexcept { return bn_; }

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);

 private:
  template <typename Self, typename Bind, typename Norm>
  static NodeId run(Self& self, Tape& tape, NodeId input, Mode mode, Rng* rng, Bind&& bind,
                    Norm&& norm);

  MlpSpec spec_;
  std::uint32_t model_;
  std::vector<Tensor> params_;
  std::vector<BatchNormState> bn_;
  // Index of each layer's first parameter and batchnorm state (or npos).
  std::vector<std::size_t> param_offset_;
  std::vector<std::size_t> bn_index_;
};

}  // namespace cyclereg
