#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cyclereg/random.hpp"
#include "cyclereg/tensor.hpp"
#include "json.hpp"

namespace cyclereg {

enum class Pairing { Paired, Decoupled };

struct Dataset {
  Tensor x;
  Tensor y;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
  Pairing pairing = Pairing::Paired;

  std::size_t rows() const { return x.rows(); }
  /// Throws std::invalid_argument if widths/names/row counts disagree.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// ---- synthetic tasks ----------------------------------------------------

enum class TaskId {
  XSquared,             // y = x^2
  Sin,                  // y = sin x
  SinSquared,           // y = sin(x)^2
  XSquaredSin,          // y = x^2 sin x
  Gaussian,             // y = exp(-x^2)
  Rational,             // y = x^2 / (1 + x^2)
  CubicSinSquareCos,    // y = x^3 sin x + x^2 cos x
  SinHarmonics,         // y = sin x + sin 2x + sin 3x
  Quartic,              // y = x^4 - 2x^3 + 3x^2 - 4x + 5 + x
  SinExpCubic,          // y = sin x + exp(-x) + x^3
  GaussianSinCubicCos,  // y = exp(-x^2) sin x + x^3 cos x
  Spring,               // f = sqrt(k / m) / (2 pi)
};

std::string_view name(TaskId id);
std::optional<TaskId> parse_task(std::string_view text);
/// Comma separated list of every task name, for error messages.
std::string task_names();
const std::vector<TaskId>& all_tasks();

struct Range {
  double low = 0.0;
  double high = 1.0;
  bool operator==(const Range&) const = default;
};

std::size_t task_input_width(TaskId id);
/// [-3, 3] for single-variable tasks; k, m in [0.5, 5] for the spring.
std::vector<Range> default_ranges(TaskId id);
/// Closed-form evaluation of one sample.
std::vector<double> evaluate_task(TaskId id, std::span<const double> input);

/// n uniform samples over `ranges` mapped through the closed form.
Dataset gen_synthetic(TaskId id, std::size_t n, const std::vector<Range>& ranges, std::uint64_t seed);

// ---- preprocessing -------------------------------------------------------

/// Per-column min/max of x and y, taken from the training split.
struct NormalizationStats {
  std::vector<double> x_min, x_max, y_min, y_max;

  static NormalizationStats fit(const Dataset& d);
  bool operator==(const NormalizationStats&) const = default;
};

nlohmann::json to_json(const NormalizationStats& s);
NormalizationStats normalization_from_json(const nlohmann::json& j);

/// v' = (v - min) / (max - min); constant columns map to 0. Values outside
/// the fitted range are not clipped.
Tensor normalize_columns(const Tensor& t, const std::vector<double>& lo, const std::vector<double>& hi);
Tensor denormalize_columns(const Tensor& t, const std::vector<double>& lo, const std::vector<double>& hi);

/// Fits stats on `d` unless `stats` is supplied, then normalizes.
std::pair<Dataset, NormalizationStats> normalize(const Dataset& d,
                                                 const std::optional<NormalizationStats>& stats = {});
Dataset denormalize(const Dataset& d, const NormalizationStats& stats);

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 1;
};

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
  /// Original row indices of each split, in split order.
  std::vector<std::size_t> train_rows, validation_rows, test_rows;
};

/// Validation and test take floor(fraction * n) rows, training takes the rest.
Splits split_shuffle(const Dataset& d, const SplitSpec& spec);

/// Independently permutes x rows and y rows, breaking the pairing.
Dataset decouple_pairs(const Dataset& d, std::uint64_t seed);

// ---- CSV -----------------------------------------------------------------

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header row required; x columns then y columns selected by name.
Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& x_columns,
                 const std::vector<std::string>& y_columns);
/// Writes x columns then y columns with shortest round-trip formatting.
void write_csv(const std::filesystem::path& path, const Dataset& d);
std::string format_double(double v);

}  // namespace cyclereg
