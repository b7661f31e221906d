#include "cyclereg/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cyclereg {

double mae(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("mae: prediction " + to_string(prediction.shape()) + " vs target " +
                     to_string(target.shape()));
  }
  if (prediction.empty()) throw ShapeError("mae: empty tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) sum += std::fabs(target[i] - prediction[i]);
  return sum / static_cast<double>(prediction.size());
}

std::string_view name(ErrorMetric m) {
  switch (m) {
    case ErrorMetric::Mae: return "mae";
    case ErrorMetric::L2: return "l2";
    case ErrorMetric::L1: return "l1";
    case ErrorMetric::SmoothL1: return "smooth_l1";
  }
  return "unknown";
}

std::optional<ErrorMetric> parse_error_metric(std::string_view text) {
  if (text == "mae") return ErrorMetric::Mae;
  if (auto k = parse_loss_kind(text)) {
    switch (*k) {
      case LossKind::L2: return ErrorMetric::L2;
      case LossKind::L1: return ErrorMetric::L1;
      case LossKind::SmoothL1: return ErrorMetric::SmoothL1;
    }
  }
  return std::nullopt;
}

double score(ErrorMetric metric, const Tensor& prediction, const Tensor& target,
             double smooth_threshold) {
  switch (metric) {
    case ErrorMetric::Mae: return mae(prediction, target);
    case ErrorMetric::L2: return loss_eval(LossKind::L2, prediction, target);
    case ErrorMetric::L1: return loss_eval(LossKind::L1, prediction, target);
    case ErrorMetric::SmoothL1: return loss_eval(LossKind::SmoothL1, prediction, target, smooth_threshold);
  }
  throw std::invalid_argument("unknown error metric");
}

double cycle_reconstruction_error(const ModelPair& pair, const Tensor& batch,
                                  CycleDirection direction, ErrorMetric metric,
                                  double smooth_threshold) {
  const auto [inner, recon] = cycle_predict(pair, batch, direction);
  return score(metric, recon, batch, smooth_threshold);
}

std::optional<double> relative_error_ratio(double backward_error, double forward_error) {
  if (!std::isfinite(backward_error) || !std::isfinite(forward_error)) return std::nullopt;
  if (backward_error < 0.0 || forward_error <= 0.0) return std::nullopt;
  return backward_error / forward_error;
}

double improvement_vs_baseline(double candidate_error, double baseline_error) {
  if (!(std::isfinite(baseline_error) && baseline_error > 0.0)) {
    throw std::invalid_argument("improvement_vs_baseline: baseline error must be positive, got " +
                                std::to_string(baseline_error));
  }
  return 100.0 * (baseline_error - candidate_error) / baseline_error;
}

ErrorBreakdown measure_errors(const ModelPair& pair, const Tensor& x, const Tensor& y) {
  if (x.rows() != y.rows()) {
    throw ShapeError("measure_errors: x has " + std::to_string(x.rows()) + " rows, y has " +
                     std::to_string(y.rows()));
  }
  const auto [y_hat, x_cycle] = cycle_predict(pair, x, CycleDirection::Forward);
  const auto [x_hat, y_cycle] = cycle_predict(pair, y, CycleDirection::Backward);
  return {mae(y_hat, y), mae(x_hat, x), mae(x_cycle, x), mae(y_cycle, y)};
}

}  // namespace cyclereg
