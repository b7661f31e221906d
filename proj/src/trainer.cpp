#include "cyclereg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cyclereg {

std::size_t batch_size_for(double batch_fraction, std::size_t rows) {
  const auto n = static_cast<std::size_t>(std::llround(batch_fraction * static_cast<double>(rows)));
  return std::min(rows, std::max<std::size_t>(2, n));
}

Trainer::Trainer(ModelPair& pair, TrainingPlan plan)
    : pair_(pair),
      plan_(std::move(plan)),
      losses_(LossSettings::from(plan_)),
      shuffle_rng_(derive_seed(plan_.seed, 10)),
      dropout_rng_(derive_seed(plan_.seed, 11)) {
  plan_.validate();
  if (plan_.update_mode == UpdateMode::Simultaneous) {
    steps_.push_back({Terms::Both, Target::Combined, 0, 1.0});
  } else if (plan_.strategy == Strategy::UcmHybrid) {
    steps_.push_back({Terms::ForwardOnly, Target::Forward, kForwardModel, 1.0});
    steps_.push_back({Terms::BackwardOnly, Target::BackwardDirect, kBackwardModel, 0.5});
    steps_.push_back({Terms::BackwardOnly, Target::BackwardCycle, kBackwardModel, 0.5});
  } else {
    steps_.push_back({Terms::ForwardOnly, Target::Forward, kForwardModel, 1.0});
    steps_.push_back({Terms::BackwardOnly, Target::Backward, kBackwardModel, 1.0});
  }
  optimizers_.assign(steps_.size(), Optimizer(plan_.optimizer));
}

std::optional<std::string> Trainer::run_step(const Step& step, std::size_t slot, const Tensor& xb,
                                             const Tensor& yb, double& forward_loss,
                                             double& backward_loss) {
  Tape tape;
  const NodeId x = tape.constant(xb);
  const NodeId y = tape.constant(yb);
  const auto nodes = record_objective(plan_.strategy, tape, pair_, x, y, losses_, step.terms,
                                      Mode::Training, &dropout_rng_);
  if (nodes.forward) forward_loss = tape.value(*nodes.forward).item();
  if (nodes.backward) backward_loss = tape.value(*nodes.backward).item();

  NodeId target{};
  switch (step.target) {
    case Target::Combined: {
      const NodeId sum = tape.add(*nodes.forward, *nodes.backward);
      target = plan_.strategy == Strategy::Jcm ? tape.scale(sum, 0.5) : sum;
      break;
    }
    case Target::Forward: target = *nodes.forward; break;
    case Target::Backward: target = *nodes.backward; break;
    case Target::BackwardDirect: target = *nodes.backward_direct; break;
    case Target::BackwardCycle: target = *nodes.backward_cycle; break;
  }
  if (step.weight != 1.0) target = tape.scale(target, step.weight);

  const double value = tape.value(target).item();
  if (!std::isfinite(value) || !std::isfinite(forward_loss) || !std::isfinite(backward_loss)) {
    return "non-finite loss";
  }

  Gradients grads = tape.backward(target);
  if (step.model != 0) std::erase_if(grads, [&](const auto& kv) { return kv.first.model != step.model; });
  if (plan_.weight_decay > 0.0) {
    for (auto& [id, g] : grads) {
      const Tensor& p = pair_.owner(id).parameter(id);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += plan_.weight_decay * p[i];
    }
  }
  const double norm = clip_global_norm(grads, plan_.grad_clip);
  if (!std::isfinite(norm)) return "non-finite gradient";
  optimizers_[slot].apply(grads, [&](ParamId id) -> Tensor& { return pair_.owner(id).parameter(id); });
  return std::nullopt;
}

EpochResult Trainer::train_epoch(const Tensor& x, const Tensor& y) {
  const auto start = std::chrono::steady_clock::now();
  if (x.empty() || y.empty() || x.rows() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  if (x.rows() != y.rows()) {
    throw ShapeError("train_epoch: x has " + std::to_string(x.rows()) + " rows, y has " +
                     std::to_string(y.rows()));
  }
  const std::size_t rows = x.rows();
  if (rows < 2) throw std::invalid_argument("train_epoch: need at least 2 training rows");
  const std::size_t bs = batch_size_for(plan_.batch_fraction, rows);
  const auto order = permutation(rows, shuffle_rng_);

  EpochResult result;
  result.metrics.epoch = ++epoch_;
  double sum_f = 0.0;
  double sum_b = 0.0;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < rows; begin += bs) {
    const std::size_t end = std::min(rows, begin + bs);
    if (end - begin < 2) break;
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    const Tensor xb = x.gather_rows(idx);
    const Tensor yb = y.gather_rows(idx);
    double lf = 0.0;
    double lb = 0.0;
    for (std::size_t s = 0; s < steps_.size(); ++s) {
      if (auto failure = run_step(steps_[s], s, xb, yb, lf, lb)) {
        result.divergence = Divergence{epoch_, batches + 1, *failure};
        break;
      }
    }
    if (result.divergence) break;
    sum_f += lf;
    sum_b += lb;
    ++batches;
  }

  if (!result.divergence && plan_.recalibrate_batchnorm) {
    pair_.phi().recalibrate_batchnorm(x);
    pair_.psi().recalibrate_batchnorm(y);
  }

  const double n = batches == 0 ? 1.0 : static_cast<double>(batches);
  result.metrics.forward_loss = result.divergence ? std::nan("") : sum_f / n;
  result.metrics.backward_loss = result.divergence ? std::nan("") : sum_b / n;
  result.metrics.total_loss = 0.5 * (result.metrics.forward_loss + result.metrics.backward_loss);
  result.metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainingOutcome train(ModelPair& pair, const TrainingPlan& plan, const Tensor& x, const Tensor& y,
                      const std::function<void(const EpochMetrics&)>& on_epoch) {
  Trainer trainer(pair, plan);
  TrainingOutcome outcome;
  for (std::size_t e = 0; e < plan.epochs; ++e) {
    auto r = trainer.train_epoch(x, y);
    outcome.history.push_back(r.metrics);
    if (on_epoch) on_epoch(r.metrics);
    if (r.divergence) {
      outcome.divergence = r.divergence;
      break;
    }
  }
  return outcome;
}

}  // namespace cyclereg
