#pragma once

#include <cstdint>
#include <functional>
#include <map>

#include "cyclereg/plan.hpp"
#include "cyclereg/tape.hpp"

namespace cyclereg {

using ParameterLookup = std::function<Tensor&(ParamId)>;

/// SGD or bias-corrected Adam. Moment buffers are created lazily, shaped
/// like the parameters they track.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings);

  /// One update of every parameter present in `grads`.
  void apply(const Gradients& grads, const ParameterLookup& lookup);

  std::uint64_t steps() const noexcept { return steps_; }
  const OptimizerSettings& settings() const noexcept { return settings_; }

  struct Moments {
    Tensor first;
    Tensor second;
  };
  const std::map<ParamId, Moments>& moments() const noexcept { return moments_; }

 private:
  OptimizerSettings settings_;
  std::uint64_t steps_ = 0;
  std::map<ParamId, Moments> moments_;
};

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

}  // namespace cyclereg
