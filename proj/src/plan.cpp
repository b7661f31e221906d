#include "cyclereg/plan.hpp"

#include <set>
#include <stdexcept>
#include <string>

namespace cyclereg {

std::string_view name(Strategy s) {
  switch (s) {
    case Strategy::Baseline: return "baseline";
    case Strategy::Ucm: return "ucm";
    case Strategy::UcmHybrid: return "ucm_hybrid";
    case Strategy::Jcm: return "jcm";
  }
  return "unknown";
}

std::string_view name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

std::string_view name(UpdateMode m) {
  return m == UpdateMode::Simultaneous ? "simultaneous" : "stepwise";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  if (text == "baseline") return Strategy::Baseline;
  if (text == "ucm") return Strategy::Ucm;
  if (text == "ucm_hybrid") return Strategy::UcmHybrid;
  if (text == "jcm") return Strategy::Jcm;
  return std::nullopt;
}

std::optional<OptimizerKind> parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd") return OptimizerKind::Sgd;
  return std::nullopt;
}

std::optional<UpdateMode> parse_update_mode(std::string_view text) {
  if (text == "simultaneous") return UpdateMode::Simultaneous;
  if (text == "stepwise") return UpdateMode::Stepwise;
  return std::nullopt;
}

double default_learning_rate(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? 1e-3 : 1e-2;
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string range_message(std::string_view field, double value, double lo, double hi) {
  return std::string(field) + " = " + std::to_string(value) + " is outside [" + std::to_string(lo) +
         ", " + std::to_string(hi) + "]";
}

}  // namespace

void TrainingPlan::validate() const {
  require(batch_fraction >= 0.02 && batch_fraction <= 0.50,
          range_message("batch_fraction", batch_fraction, 0.02, 0.50));
  require(alpha_f >= 1.0 && alpha_f <= 3.0, range_message("alpha_f", alpha_f, 1.0, 3.0));
  require(alpha_b >= 1.0 && alpha_b <= 3.0, range_message("alpha_b", alpha_b, 1.0, 3.0));
  require(beta_f >= 0.0 && beta_f <= 1.0, range_message("beta_f", beta_f, 0.0, 1.0));
  require(beta_b >= 0.0 && beta_b <= 1.0, range_message("beta_b", beta_b, 0.0, 1.0));
  require(epochs >= 1, "epochs must be positive");
  require(optimizer.learning_rate > 0.0, "learning_rate must be positive");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "adam beta1 must lie in [0, 1)");
  require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "adam beta2 must lie in [0, 1)");
  require(optimizer.epsilon > 0.0, "adam epsilon must be positive");
  require(grad_clip > 0.0, "grad_clip must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(smooth_l1_threshold > 0.0, "smooth_l1_threshold must be positive");
}

nlohmann::json to_json(const TrainingPlan& p) {
  return {{"strategy", std::string(name(p.strategy))},
          {"loss", std::string(name(p.loss))},
          {"mapping_loss", std::string(name(p.mapping_loss))},
          {"optimizer", std::string(name(p.optimizer.kind))},
          {"learning_rate", p.optimizer.learning_rate},
          {"adam_beta1", p.optimizer.beta1},
          {"adam_beta2", p.optimizer.beta2},
          {"adam_epsilon", p.optimizer.epsilon},
          {"batch_fraction", p.batch_fraction},
          {"epochs", p.epochs},
          {"alpha_f", p.alpha_f},
          {"alpha_b", p.alpha_b},
          {"beta_f", p.beta_f},
          {"beta_b", p.beta_b},
          {"update_mode", std::string(name(p.update_mode))},
          {"seed", p.seed},
          {"grad_clip", p.grad_clip},
          {"weight_decay", p.weight_decay},
          {"smooth_l1_threshold", p.smooth_l1_threshold},
          {"recalibrate_batchnorm", p.recalibrate_batchnorm}};
}

TrainingPlan plan_from_json(const nlohmann::json& j, TrainingPlan p) {
  if (!j.is_object()) throw std::invalid_argument("plan must be a JSON object");
  static const std::set<std::string> known = {
      "strategy",   "loss",    "mapping_loss", "optimizer",   "learning_rate",      "adam_beta1",
      "adam_beta2", "adam_epsilon", "batch_fraction", "epochs", "alpha_f",          "alpha_b",
      "beta_f",     "beta_b",  "update_mode",  "seed",        "grad_clip",          "weight_decay",
      "smooth_l1_threshold", "recalibrate_batchnorm"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown plan key: " + key);
  }
  auto text = [&](const char* key) { return j.at(key).get<std::string>(); };
  if (j.contains("strategy")) {
    auto s = parse_strategy(text("strategy"));
    require(s.has_value(), "unknown strategy '" + text("strategy") + "' (baseline, ucm, ucm_hybrid, jcm)");
    p.strategy = *s;
  }
  if (j.contains("loss")) {
    auto k = parse_loss_kind(text("loss"));
    require(k.has_value(), "unknown loss '" + text("loss") + "' (l2, l1, smooth_l1)");
    p.loss = *k;
    if (!j.contains("mapping_loss")) p.mapping_loss = *k;
  }
  if (j.contains("mapping_loss")) {
    auto k = parse_loss_kind(text("mapping_loss"));
    require(k.has_value(), "unknown mapping_loss '" + text("mapping_loss") + "'");
    p.mapping_loss = *k;
  }
  if (j.contains("optimizer")) {
    auto k = parse_optimizer(text("optimizer"));
    require(k.has_value(), "unknown optimizer '" + text("optimizer") + "' (adam, sgd)");
    if (*k != p.optimizer.kind && !j.contains("learning_rate")) {
      p.optimizer.learning_rate = default_learning_rate(*k);
    }
    p.optimizer.kind = *k;
  }
  if (j.contains("update_mode")) {
    auto m = parse_update_mode(text("update_mode"));
    require(m.has_value(), "unknown update_mode '" + text("update_mode") + "'");
    p.update_mode = *m;
  }
  auto num = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  num("learning_rate", p.optimizer.learning_rate);
  num("adam_beta1", p.optimizer.beta1);
  num("adam_beta2", p.optimizer.beta2);
  num("adam_epsilon", p.optimizer.epsilon);
  num("batch_fraction", p.batch_fraction);
  num("alpha_f", p.alpha_f);
  num("alpha_b", p.alpha_b);
  num("beta_f", p.beta_f);
  num("beta_b", p.beta_b);
  num("grad_clip", p.grad_clip);
  num("weight_decay", p.weight_decay);
  num("smooth_l1_threshold", p.smooth_l1_threshold);
  if (j.contains("epochs")) p.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("recalibrate_batchnorm")) p.recalibrate_batchnorm = j.at("recalibrate_batchnorm").get<bool>();
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace cyclereg
