#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cyclereg/evaluation.hpp"
#include "cyclereg/plan.hpp"
#include "cyclereg/trainer.hpp"
#include "json.hpp"

namespace cyclereg {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Whether an error compares a model output with ground truth or an input
/// with its reconstruction through the pair.
enum class ErrorKind { Direct, CycleReconstruction };

std::string_view name(ErrorKind k);
std::optional<ErrorKind> parse_error_kind(std::string_view text);

/// One evaluated run. Measurements are absent (not NaN) when a run diverged
/// before they could be taken.
struct MetricsReport {
  std::string task;
  Strategy strategy = Strategy::Baseline;
  UpdateMode update_mode = UpdateMode::Simultaneous;
  double batch_fraction = 0.02;
  std::uint64_t seed = 0;
  std::string config_digest;

  ErrorKind forward_kind = ErrorKind::Direct;
  std::optional<double> forward_error;
  ErrorKind backward_kind = ErrorKind::Direct;
  std::optional<double> backward_error;

  std::optional<double> forward_direct_mae;
  std::optional<double> backward_direct_mae;
  std::optional<double> forward_cycle_mae;
  std::optional<double> backward_cycle_mae;

  std::optional<double> ratio;        // backward_error / forward_error
  std::optional<double> improvement;  // percent, backward error vs baseline backward error
  std::optional<double> lipschitz_lower_bound;  // of psi o phi on the evaluation inputs
  std::optional<double> final_total_loss;

  std::size_t epochs_run = 0;
  bool diverged = false;
  bool large_batch_risk = false;

  bool operator==(const MetricsReport&) const = default;
};

/// Stable 64-bit FNV-1a hash of the canonical plan JSON, as 16 hex digits.
std::string config_digest(const TrainingPlan& plan);

/// Fills a report from a finished run evaluated on (x, y). The headline
/// errors follow each strategy's assessment: baseline uses both direct
/// errors, ucm/ucm_hybrid use the forward direct and backward cycle errors,
/// jcm uses both cycle reconstruction errors.
MetricsReport make_report(std::string task, const TrainingPlan& plan, const ModelPair& pair,
                          const Tensor& x, const Tensor& y, const TrainingOutcome& outcome);

/// Sets each non-baseline report's improvement against the baseline report
/// for the same task and seed; missing or zero baselines leave it empty.
void fill_improvements(std::vector<MetricsReport>& reports);

/// Column names of the CSV form, in emission order.
const std::vector<std::string>& report_columns();

void write_reports_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> read_reports_csv(const std::filesystem::path& path);
nlohmann::json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
void write_reports_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> read_reports_json(const std::filesystem::path& path);

double median(std::vector<double> values);

/// Aggregate over the runs of one (task, strategy, update mode, batch
/// fraction) group. Diverged runs count toward the convergence rate only.
struct Summary {
  std::string task;
  Strategy strategy = Strategy::Baseline;
  UpdateMode update_mode = UpdateMode::Simultaneous;
  double batch_fraction = 0.0;
  std::size_t runs = 0;
  std::size_t converged = 0;
  double convergence_rate = 0.0;
  std::optional<double> forward_median, forward_min, forward_max;
  std::optional<double> backward_median, backward_min, backward_max;
  std::optional<double> ratio_median;
  std::optional<double> improvement_median;
};

std::vector<Summary> summarize(const std::vector<MetricsReport>& reports);
void write_summary_csv(const std::filesystem::path& path, const std::vector<Summary>& summaries);

/// Task | Direction | one column per strategy, holding median errors: the
/// layout used to compare joint, baseline and unilateral models.
std::string comparison_table(const std::vector<Summary>& summaries);

}  // namespace cyclereg
