#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cyclereg/dataset.hpp"
#include "cyclereg/mlp.hpp"
#include "cyclereg/model_pair.hpp"
#include "cyclereg/plan.hpp"
#include "cyclereg/report.hpp"
#include "cyclereg/trainer.hpp"
#include "json.hpp"

namespace cyclereg {

/// Raised for any invalid configuration, before computation starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataSource {
  std::optional<TaskId> task;
  std::filesystem::path csv;  // used when task is empty
  std::vector<std::string> x_columns;
  std::vector<std::string> y_columns;
  std::size_t n = 20000;
  std::vector<Range> ranges;  // empty: the task's defaults
  std::uint64_t seed = 7;

  /// Task name, or the CSV file stem.
  std::string label() const;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  Activation activation = Activation::Tanh;
  bool batchnorm = true;
  bool dropout = false;
  double dropout_probability = 0.1;

  MlpSpec spec(std::size_t in, std::size_t out, std::uint64_t seed) const;
  bool operator==(const ModelConfig&) const = default;
};

/// One sweep axis: a plan key (or "task") and the values it takes.
struct GridAxis {
  std::string key;
  std::vector<nlohmann::json> values;
};

struct ExperimentConfig {
  DataSource data;
  SplitSpec split{0.8, 0.1, 0.1, 3};
  bool normalize = true;
  ModelConfig phi;
  ModelConfig psi;
  TrainingPlan plan;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "out";
  std::vector<GridAxis> grid;

  /// Throws ConfigError naming the first problem, including any grid value
  /// that would produce an invalid plan.
  void validate() const;
};

/// Reads a config object; unknown keys at any level are rejected. Fields that
/// are absent keep the values in `base`. Epochs default to 2000 for CSV
/// sources when the plan does not set them.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& c);

/// Applies one grid assignment (a plan key or "task") to a config.
void apply_setting(ExperimentConfig& c, const std::string& key, const nlohmann::json& value);

/// Cartesian product of the grid; each entry carries its assignment.
std::vector<std::pair<ExperimentConfig, nlohmann::json>> expand_grid(const ExperimentConfig& c);

struct PreparedData {
  std::string label;
  Dataset train;
  Dataset validation;
  Dataset test;
  std::optional<NormalizationStats> stats;
};

/// Generates or loads the data, splits it and min-max normalizes every split
/// with statistics fitted on the training split.
PreparedData prepare_data(const ExperimentConfig& c);

/// Model initialization seeds derive from the plan seed.
ModelPair build_pair(const ExperimentConfig& c, std::size_t x_width, std::size_t y_width);

/// JCM trains on a decoupled copy of the training split.
Dataset training_view(const Dataset& train, const TrainingPlan& plan);

struct RunResult {
  ModelPair pair;
  TrainingOutcome outcome;
  MetricsReport report;
};

/// Trains one pair under `c.plan` and evaluates it on the test split. The
/// report includes a sampled Lipschitz lower bound of psi o phi.
RunResult run_experiment(const ExperimentConfig& c, const PreparedData& data,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace cyclereg
