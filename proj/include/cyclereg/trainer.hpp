#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cyclereg/objectives.hpp"
#include "cyclereg/optimizer.hpp"

namespace cyclereg {

struct EpochMetrics {
  std::size_t epoch = 0;
  double forward_loss = 0.0;
  double backward_loss = 0.0;
  double total_loss = 0.0;
  double wall_ms = 0.0;
};

struct Divergence {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::string reason;
};

struct EpochResult {
  EpochMetrics metrics;
  std::optional<Divergence> divergence;
};

/// Mini-batch size for a training split: round(fraction * rows), at least 2.
std::size_t batch_size_for(double batch_fraction, std::size_t rows);

/// Owns the optimizer state of one training run over a model pair.
///
/// Simultaneous mode takes one optimizer step per batch on the combined
/// objective (L_f + L_b for the supervised strategies, whose terms touch
/// disjoint parameters; (L_f + L_b) / 2 for JCM). Stepwise mode splits each
/// batch into sequential steps, each with its own optimizer state:
///   baseline, ucm, jcm: phi on L_f, then psi on L_b
///   ucm_hybrid:         phi on L_f, psi on the direct half, psi on the cycle half
class Trainer {
 public:
  Trainer(ModelPair& pair, TrainingPlan plan);

  /// One pass over shuffled mini-batches of (x, y). Rows of x and y are
  /// batched by the same permutation; for decoupled data they are unpaired.
  EpochResult train_epoch(const Tensor& x, const Tensor& y);

  std::size_t epochs_run() const noexcept { return epoch_; }
  const TrainingPlan& plan() const noexcept { return plan_; }
  const std::vector<Optimizer>& optimizers() const noexcept { return optimizers_; }

 private:
  enum class Target { Combined, Forward, Backward, BackwardDirect, BackwardCycle };
  struct Step {
    Terms terms;
    Target target;
    std::uint32_t model;  // 0 updates both
    double weight;
  };

  std::optional<std::string> run_step(const Step& step, std::size_t slot, const Tensor& xb,
                                      const Tensor& yb, double& forward_loss, double& backward_loss);

  ModelPair& pair_;
  TrainingPlan plan_;
  LossSettings losses_;
  std::vector<Step> steps_;
  std::vector<Optimizer> optimizers_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  std::size_t epoch_ = 0;
};

struct TrainingOutcome {
  std::vector<EpochMetrics> history;
  std::optional<Divergence> divergence;
  bool diverged() const noexcept { return divergence.has_value(); }
};

/// Runs plan.epochs epochs, stopping at the first divergence.
TrainingOutcome train(ModelPair& pair, const TrainingPlan& plan, const Tensor& x, const Tensor& y,
                      const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace cyclereg
