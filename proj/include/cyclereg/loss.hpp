#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cyclereg/tape.hpp"

namespace cyclereg {

enum class LossKind { L2, L1, SmoothL1 };

std::string_view name(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view text);

/// Threshold of the smooth L1 penalty on normalized data.
inline constexpr double kSmoothL1Threshold = 1.0;

/// Records mean(penalty(target - prediction)) on the tape.
NodeId record_loss(Tape& tape, LossKind kind, NodeId prediction, NodeId target,
                   double smooth_threshold = kSmoothL1Threshold);

/// Same quantity evaluated directly on tensors.
double loss_eval(LossKind kind, const Tensor& prediction, const Tensor& target,
                 double smooth_threshold = kSmoothL1Threshold);

}  // namespace cyclereg
