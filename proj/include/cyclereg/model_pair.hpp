#pragma once

#include <filesystem>
#include <string_view>
#include <utility>

#include "cyclereg/mlp.hpp"
#include "json.hpp"

namespace cyclereg {

inline constexpr std::uint32_t kForwardModel = 1;
inline constexpr std::uint32_t kBackwardModel = 2;

/// The forward map phi: X -> Y and the backward map psi: Y -> X.
class ModelPair {
 public:
  ModelPair(MlpSpec phi_spec, MlpSpec psi_spec);

  Mlp& phi() noexcept { return phi_; }
  const Mlp& phi() const noexcept { return phi_; }
  Mlp& psi() noexcept { return psi_; }
  const Mlp& psi() const noexcept { return psi_; }

  std::size_t x_width() const { return phi_.input_width(); }
  std::size_t y_width() const { return phi_.output_width(); }

  Mlp& owner(ParamId id);

 private:
  Mlp phi_;
  Mlp psi_;
};

enum class CycleDirection {
  Forward,   // x -> phi -> psi
  Backward,  // y -> psi -> phi
};

std::string_view name(CycleDirection d);

struct CycleNodes {
  NodeId inner;
  NodeId reconstruction;
};

/// Records both models on one tape so gradients flow through the composition.
CycleNodes cycle_forward(ModelPair& pair, Tape& tape, NodeId batch, CycleDirection direction,
                         Mode mode, Rng* rng = nullptr);

/// Inference-mode cycle: returns (inner, reconstruction).
std::pair<Tensor, Tensor> cycle_predict(const ModelPair& pair, const Tensor& batch,
                                        CycleDirection direction);

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);

/// Versioned binary checkpoint: magic, format version, a JSON header with
/// both specs plus caller metadata, then raw little-endian doubles for the
/// parameters and batchnorm running statistics of phi and then psi.
void save_checkpoint(const std::filesystem::path& path, const ModelPair& pair,
                     const nlohmann::json& metadata);

struct Checkpoint {
  ModelPair pair;
  nlohmann::json metadata;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cyclereg
