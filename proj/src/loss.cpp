#include "cyclereg/loss.hpp"

#include <cmath>

namespace cyclereg {

std::string_view name(LossKind kind) {
  switch (kind) {
    case LossKind::L2: return "l2";
    case LossKind::L1: return "l1";
    case LossKind::SmoothL1: return "smooth_l1";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view text) {
  if (text == "l2") return LossKind::L2;
  if (text == "l1") return LossKind::L1;
  if (text == "smooth_l1") return LossKind::SmoothL1;
  return std::nullopt;
}

NodeId record_loss(Tape& tape, LossKind kind, NodeId prediction, NodeId target,
                   double smooth_threshold) {
  const NodeId residual = tape.subtract(target, prediction);
  NodeId penalty{};
  switch (kind) {
    case LossKind::L2: penalty = tape.square(residual); break;
    case LossKind::L1: penalty = tape.abs(residual); break;
    case LossKind::SmoothL1: penalty = tape.smooth_l1(residual, smooth_threshold); break;
  }
  return tape.reduce_mean(penalty);
}

double loss_eval(LossKind kind, const Tensor& prediction, const Tensor& target,
                 double smooth_threshold) {
  if (prediction.empty() || target.empty()) throw ShapeError("loss_eval: empty tensor");
  if (prediction.shape() != target.shape()) {
    throw ShapeError("loss_eval: prediction " + to_string(prediction.shape()) +
                     " does not match target " + to_string(target.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double r = target[i] - prediction[i];
    const double a = std::fabs(r);
    switch (kind) {
      case LossKind::L2: acc += r * r; break;
      case LossKind::L1: acc += a; break;
      case LossKind::SmoothL1:
        acc += a < smooth_threshold ? 0.5 * r * r / smooth_threshold : a - 0.5 * smooth_threshold;
        break;
    }
  }
  return acc / static_cast<double>(prediction.size());
}

}  // namespace cyclereg
