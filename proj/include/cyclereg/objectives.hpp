#pragma once

#include <optional>

#include "cyclereg/model_pair.hpp"
#include "cyclereg/plan.hpp"

namespace cyclereg {

struct LossSettings {
  LossKind loss = LossKind::L2;
  LossKind mapping_loss = LossKind::L2;
  double smooth_threshold = kSmoothL1Threshold;
  double alpha_f = 1.0;
  double alpha_b = 1.0;
  double beta_f = 0.0;
  double beta_b = 0.0;

  static LossSettings from(const TrainingPlan& plan);
};

/// Which halves of an objective to record.
enum class Terms { Both, ForwardOnly, BackwardOnly };

/// Loss nodes of one strategy on a tape. For the hybrid strategy the two
/// unscaled parts of L_b are exposed for stepwise updates.
struct ObjectiveNodes {
  std::optional<NodeId> forward;
  std::optional<NodeId> backward;
  std::optional<NodeId> backward_direct;
  std::optional<NodeId> backward_cycle;
};

/// Records the strategy's losses.
///  baseline:   L_f = L(y - phi(x)),  L_b = L(x - psi(y))
///  ucm:        L_f = L(y - phi(x)),  L_b = L(y - phi(psi(y)))
///  ucm_hybrid: L_f = L(y - phi(x)),  L_b = (L(y - phi(psi(y))) + L(x - psi(y))) / 2
///  jcm:        L_f = a_f L(x - psi(phi(x))) + b_f l(x - psi(phi(psi(phi(x)))))
///              L_b = a_b L(y - phi(psi(y))) + b_b l(y - phi(psi(phi(psi(y)))))
/// In the unilateral strategies phi enters L_b frozen (constant parameters,
/// running batchnorm statistics), so L_b only ever trains psi.
ObjectiveNodes record_objective(Strategy strategy, Tape& tape, ModelPair& pair, NodeId x, NodeId y,
                                const LossSettings& settings, Terms terms, Mode mode,
                                Rng* rng = nullptr);

struct LossValues {
  double forward = 0.0;
  double backward = 0.0;
  /// (forward + backward) / 2.
  double total = 0.0;
};

// Inference-mode evaluation of the same objectives.
LossValues loss_baseline(const ModelPair& pair, const Tensor& x, const Tensor& y, LossKind kind,
                         double smooth_threshold = kSmoothL1Threshold);
LossValues loss_ucm(const ModelPair& pair, const Tensor& x, const Tensor& y, LossKind kind,
                    double smooth_threshold = kSmoothL1Threshold);
LossValues loss_ucm_hybrid(const ModelPair& pair, const Tensor& x, const Tensor& y, LossKind kind,
                           double smooth_threshold = kSmoothL1Threshold);
/// x and y need not be paired or even have equal row counts.
LossValues loss_jcm(const ModelPair& pair, const Tensor& x, const Tensor& y,
                    const LossSettings& settings);
LossValues evaluate_objective(Strategy strategy, const ModelPair& pair, const Tensor& x,
                              const Tensor& y, const LossSettings& settings);

}  // namespace cyclereg
