#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "cyclereg/loss.hpp"
#include "json.hpp"

namespace cyclereg {

enum class Strategy { Baseline, Ucm, UcmHybrid, Jcm };
enum class OptimizerKind { Adam, Sgd };
enum class UpdateMode { Simultaneous, Stepwise };

std::string_view name(Strategy s);
std::string_view name(OptimizerKind k);
std::string_view name(UpdateMode m);
std::optional<Strategy> parse_strategy(std::string_view text);
std::optional<OptimizerKind> parse_optimizer(std::string_view text);
std::optional<UpdateMode> parse_update_mode(std::string_view text);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerSettings&) const = default;
};

/// Batch fractions above this are flagged as large-batch risk.
inline constexpr double kLargeBatchRiskFraction = 0.40;

struct TrainingPlan {
  Strategy strategy = Strategy::Ucm;
  LossKind loss = LossKind::L2;
  /// Penalty for the JCM mapping-consistency terms.
  LossKind mapping_loss = LossKind::L2;
  OptimizerSettings optimizer;
  double batch_fraction = 0.02;
  std::size_t epochs = 500;
  double alpha_f = 1.0;
  double alpha_b = 1.0;
  double beta_f = 0.0;
  double beta_b = 0.0;
  UpdateMode update_mode = UpdateMode::Simultaneous;
  std::uint64_t seed = 1;
  double grad_clip = 10.0;
  double weight_decay = 0.0;
  double smooth_l1_threshold = kSmoothL1Threshold;
  /// Recompute batchnorm running statistics over the full training split at
  /// the end of every epoch, so inference uses the current weights' statistics
  /// rather than a lagging moving average.
  bool recalibrate_batchnorm = true;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
  bool large_batch_risk() const { return batch_fraction > kLargeBatchRiskFraction; }

  bool operator==(const TrainingPlan&) const = default;
};

/// Default learning rate for an optimizer kind.
double default_learning_rate(OptimizerKind kind);

nlohmann::json to_json(const TrainingPlan& plan);
/// Fields missing from `j` keep the values in `base`; unknown keys throw.
TrainingPlan plan_from_json(const nlohmann::json& j, TrainingPlan base = {});

}  // namespace cyclereg
