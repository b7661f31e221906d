#pragma once

#include <optional>
#include <string_view>

#include "cyclereg/loss.hpp"
#include "cyclereg/model_pair.hpp"

namespace cyclereg {

/// Mean absolute residual over all elements. Throws ShapeError on mismatch.
double mae(const Tensor& prediction, const Tensor& target);

/// How a cycle reconstruction is scored: plain MAE or one of the training
/// penalties.
enum class ErrorMetric { Mae, L2, L1, SmoothL1 };

std::string_view name(ErrorMetric m);
std::optional<ErrorMetric> parse_error_metric(std::string_view text);

double score(ErrorMetric metric, const Tensor& prediction, const Tensor& target,
             double smooth_threshold = kSmoothL1Threshold);

/// Inference-mode reconstruction error of `batch` through the pair in the
/// given direction (forward: x -> phi -> psi, backward: y -> psi -> phi).
double cycle_reconstruction_error(const ModelPair& pair, const Tensor& batch,
                                  CycleDirection direction, ErrorMetric metric = ErrorMetric::Mae,
                                  double smooth_threshold = kSmoothL1Threshold);

/// backward / forward, or nullopt when the forward error is zero (or either
/// value is not a finite non-negative number).
std::optional<double> relative_error_ratio(double backward_error, double forward_error);

/// 100 * (baseline - candidate) / baseline. Throws std::invalid_argument when
/// the baseline is not a positive finite number.
double improvement_vs_baseline(double candidate_error, double baseline_error);

/// All four inference-mode errors of a trained pair on one paired split.
struct ErrorBreakdown {
  double forward_direct = 0.0;   // |phi(x) - y|
  double backward_direct = 0.0;  // |psi(y) - x|
  double forward_cycle = 0.0;    // |psi(phi(x)) - x|
  double backward_cycle = 0.0;   // |phi(psi(y)) - y|
};

ErrorBreakdown measure_errors(const ModelPair& pair, const Tensor& x, const Tensor& y);

}  // namespace cyclereg
