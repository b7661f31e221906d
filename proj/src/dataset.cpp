#include "cyclereg/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace cyclereg {

void Dataset::validate() const {
  if (x.empty() || y.empty()) throw std::invalid_argument("dataset is empty");
  if (x.rank() != 2 || y.rank() != 2) throw std::invalid_argument("dataset tensors must be matrices");
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("dataset x has " + std::to_string(x.rows()) + " rows but y has " +
                                std::to_string(y.rows()));
  }
  if (x_names.size() != x.cols() || y_names.size() != y.cols()) {
    throw std::invalid_argument("dataset column names do not match widths");
  }
}

namespace {

struct TaskInfo {
  TaskId id;
  std::string_view name;
};

constexpr TaskInfo kTasks[] = {
    {TaskId::XSquared, "x_squared"},
    {TaskId::Sin, "sin"},
    {TaskId::SinSquared, "sin_squared"},
    {TaskId::XSquaredSin, "x_squared_sin"},
    {TaskId::Gaussian, "gaussian"},
    {TaskId::Rational, "rational"},
    {TaskId::CubicSinSquareCos, "cubic_sin_square_cos"},
    {TaskId::SinHarmonics, "sin_harmonics"},
    {TaskId::Quartic, "quartic"},
    {TaskId::SinExpCubic, "sin_exp_cubic"},
    {TaskId::GaussianSinCubicCos, "gaussian_sin_cubic_cos"},
    {TaskId::Spring, "spring"},
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::string_view name(TaskId id) {
  for (const auto& t : kTasks) {
    if (t.id == id) return t.name;
  }
  return "unknown";
}

std::optional<TaskId> parse_task(std::string_view text) {
  for (const auto& t : kTasks) {
    if (t.name == text) return t.id;
  }
  return std::nullopt;
}

std::string task_names() {
  std::string out;
  for (const auto& t : kTasks) {
    if (!out.empty()) out += ", ";
    out += t.name;
  }
  return out;
}

const std::vector<TaskId>& all_tasks() {
  static const std::vector<TaskId> ids = [] {
    std::vector<TaskId> v;
    for (const auto& t : kTasks) v.push_back(t.id);
    return v;
  }();
  return ids;
}

std::size_t task_input_width(TaskId id) { return id == TaskId::Spring ? 2 : 1; }

std::vector<Range> default_ranges(TaskId id) {
  if (id == TaskId::Spring) return {{0.5, 5.0}, {0.5, 5.0}};
  return {{-3.0, 3.0}};
}

std::vector<double> evaluate_task(TaskId id, std::span<const double> in) {
  const double x = in[0];
  switch (id) {
    case TaskId::XSquared: return {x * x};
    case TaskId::Sin: return {std::sin(x)};
    case TaskId::SinSquared: return {std::sin(x) * std::sin(x)};
    case TaskId::XSquaredSin: return {x * x * std::sin(x)};
    case TaskId::Gaussian: return {std::exp(-x * x)};
    case TaskId::Rational: return {x * x / (1.0 + x * x)};
    case TaskId::CubicSinSquareCos: return {x * x * x * std::sin(x) + x * x * std::cos(x)};
    case TaskId::SinHarmonics: return {std::sin(x) + std::sin(2.0 * x) + std::sin(3.0 * x)};
    case TaskId::Quartic:
      return {x * x * x * x - 2.0 * x * x * x + 3.0 * x * x - 4.0 * x + 5.0 + x};
    case TaskId::SinExpCubic: return {std::sin(x) + std::exp(-x) + x * x * x};
    case TaskId::GaussianSinCubicCos:
      return {std::exp(-x * x) * std::sin(x) + x * x * x * std::cos(x)};
    case TaskId::Spring: return {std::sqrt(in[0] / in[1]) / (2.0 * std::numbers::pi)};
  }
  throw std::invalid_argument("unknown task");
}

Dataset gen_synthetic(TaskId id, std::size_t n, const std::vector<Range>& ranges, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("gen_synthetic: n must be at least 1");
  const std::size_t width = task_input_width(id);
  if (ranges.size() != width) {
    throw std::invalid_argument("gen_synthetic: task " + std::string(name(id)) + " needs " +
                                std::to_string(width) + " input range(s), got " +
                                std::to_string(ranges.size()));
  }
  for (const auto& r : ranges) {
    if (!(r.low < r.high) || !std::isfinite(r.low) || !std::isfinite(r.high)) {
      throw std::invalid_argument("gen_synthetic: invalid range [" + std::to_string(r.low) + ", " +
                                  std::to_string(r.high) + "]");
    }
  }
  if (id == TaskId::Spring) {
    if (ranges[0].low < 0.0) throw std::invalid_argument("gen_synthetic: spring stiffness k must be non-negative");
    if (ranges[1].low <= 0.0) {
      throw std::invalid_argument("gen_synthetic: spring mass range must exclude 0 (m low > 0)");
    }
  }

  Rng rng(seed);
  Tensor x = Tensor::matrix(n, width);
  Tensor y = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (std::size_t j = 0; j < width; ++j) row[j] = uniform(rng, ranges[j].low, ranges[j].high);
    y[i] = evaluate_task(id, row)[0];
  }
  Dataset d;
  d.x = std::move(x);
  d.y = std::move(y);
  if (id == TaskId::Spring) {
    d.x_names = {"k", "m"};
    d.y_names = {"f"};
  } else {
    d.x_names = {"x"};
    d.y_names = {"y"};
  }
  return d;
}

namespace {

void column_min_max(const Tensor& t, std::vector<double>& lo, std::vector<double>& hi) {
  lo.assign(t.cols(), 0.0);
  hi.assign(t.cols(), 0.0);
  for (std::size_t j = 0; j < t.cols(); ++j) {
    lo[j] = hi[j] = t.at(0, j);
  }
  for (std::size_t i = 1; i < t.rows(); ++i) {
    auto r = t.row(i);
    for (std::size_t j = 0; j < t.cols(); ++j) {
      lo[j] = std::min(lo[j], r[j]);
      hi[j] = std::max(hi[j], r[j]);
    }
  }
}

}  // namespace

NormalizationStats NormalizationStats::fit(const Dataset& d) {
  d.validate();
  NormalizationStats s;
  column_min_max(d.x, s.x_min, s.x_max);
  column_min_max(d.y, s.y_min, s.y_max);
  return s;
}

nlohmann::json to_json(const NormalizationStats& s) {
  return {{"x_min", s.x_min}, {"x_max", s.x_max}, {"y_min", s.y_min}, {"y_max", s.y_max}};
}

NormalizationStats normalization_from_json(const nlohmann::json& j) {
  NormalizationStats s{j.at("x_min").get<std::vector<double>>(), j.at("x_max").get<std::vector<double>>(),
                       j.at("y_min").get<std::vector<double>>(), j.at("y_max").get<std::vector<double>>()};
  if (s.x_min.size() != s.x_max.size() || s.y_min.size() != s.y_max.size()) {
    throw std::invalid_argument("normalization stats: min/max lengths differ");
  }
  for (std::size_t j2 = 0; j2 < s.x_min.size(); ++j2) {
    if (s.x_max[j2] < s.x_min[j2]) throw std::invalid_argument("normalization stats: max < min");
  }
  for (std::size_t j2 = 0; j2 < s.y_min.size(); ++j2) {
    if (s.y_max[j2] < s.y_min[j2]) throw std::invalid_argument("normalization stats: max < min");
  }
  return s;
}

Tensor normalize_columns(const Tensor& t, const std::vector<double>& lo, const std::vector<double>& hi) {
  if (t.cols() != lo.size() || t.cols() != hi.size()) {
    throw ShapeError("normalize: tensor has " + std::to_string(t.cols()) + " columns, stats have " +
                     std::to_string(lo.size()));
  }
  Tensor out = t;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double span = hi[j] - lo[j];
      r[j] = span > 0.0 ? (r[j] - lo[j]) / span : 0.0;
    }
  }
  return out;
}

Tensor denormalize_columns(const Tensor& t, const std::vector<double>& lo, const std::vector<double>& hi) {
  if (t.cols() != lo.size() || t.cols() != hi.size()) {
    throw ShapeError("denormalize: tensor has " + std::to_string(t.cols()) + " columns, stats have " +
                     std::to_string(lo.size()));
  }
  Tensor out = t;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double span = hi[j] - lo[j];
      r[j] = span > 0.0 ? lo[j] + r[j] * span : lo[j];
    }
  }
  return out;
}

std::pair<Dataset, NormalizationStats> normalize(const Dataset& d,
                                                 const std::optional<NormalizationStats>& stats) {
  d.validate();
  const NormalizationStats s = stats ? *stats : NormalizationStats::fit(d);
  Dataset out = d;
  out.x = normalize_columns(d.x, s.x_min, s.x_max);
  out.y = normalize_columns(d.y, s.y_min, s.y_max);
  return {std::move(out), s};
}

Dataset denormalize(const Dataset& d, const NormalizationStats& s) {
  Dataset out = d;
  out.x = denormalize_columns(d.x, s.x_min, s.x_max);
  out.y = denormalize_columns(d.y, s.y_min, s.y_max);
  return out;
}

Splits split_shuffle(const Dataset& d, const SplitSpec& spec) {
  d.validate();
  if (!(spec.train > 0.0 && spec.validation > 0.0 && spec.test > 0.0)) {
    throw std::invalid_argument("split fractions must all be positive");
  }
  if (std::fabs(spec.train + spec.validation + spec.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  const std::size_t n = d.rows();
  const auto take = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = take(spec.validation);
  const std::size_t n_test = take(spec.test);
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw std::invalid_argument("split of " + std::to_string(n) + " rows leaves an empty part (train " +
                                std::to_string(n - std::min(n, n_val + n_test)) + ", validation " +
                                std::to_string(n_val) + ", test " + std::to_string(n_test) + ")");
  }
  Rng rng(spec.seed);
  const auto order = permutation(n, rng);
  Splits s;
  const std::size_t n_train = n - n_val - n_test;
  s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  auto pick = [&](const std::vector<std::size_t>& rows) {
    Dataset part = d;
    part.x = d.x.gather_rows(rows);
    part.y = d.y.gather_rows(rows);
    return part;
  };
  s.train = pick(s.train_rows);
  s.validation = pick(s.validation_rows);
  s.test = pick(s.test_rows);
  return s;
}

Dataset decouple_pairs(const Dataset& d, std::uint64_t seed) {
  d.validate();
  Rng rng(seed);
  const auto px = permutation(d.rows(), rng);
  const auto py = permutation(d.rows(), rng);
  Dataset out = d;
  out.x = d.x.gather_rows(px);
  out.y = d.y.gather_rows(py);
  out.pairing = Pairing::Decoupled;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& x_columns,
                 const std::vector<std::string>& y_columns) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open CSV file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path.string() + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);

  auto locate = [&](const std::string& col) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == col) return i;
    }
    throw CsvError(path.string() + ": missing column '" + col + "'");
  };
  if (x_columns.empty() || y_columns.empty()) throw CsvError("load_csv: x and y column lists must be non-empty");
  std::vector<std::size_t> xi;
  std::vector<std::size_t> yi;
  for (const auto& c : x_columns) xi.push_back(locate(c));
  for (const auto& c : y_columns) yi.push_back(locate(c));

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t row = 0;
  std::size_t line_no = 1;
  std::vector<double> values(header.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw CsvError(path.string() + ": line " + std::to_string(line_no) + " has " +
                     std::to_string(fields.size()) + " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto& f = fields[c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
        throw CsvError(path.string() + ": line " + std::to_string(line_no) + ", column '" + header[c] +
                       "': cannot parse '" + f + "' as a number");
      }
      values[c] = v;
    }
    for (auto c : xi) xs.push_back(values[c]);
    for (auto c : yi) ys.push_back(values[c]);
    ++row;
  }
  if (row == 0) throw CsvError(path.string() + ": no data rows");
  Dataset d;
  d.x = Tensor({row, xi.size()}, std::move(xs));
  d.y = Tensor({row, yi.size()}, std::move(ys));
  d.x_names = x_columns;
  d.y_names = y_columns;
  return d;
}

void write_csv(const std::filesystem::path& path, const Dataset& d) {
  d.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CsvError("cannot open CSV file for writing: " + path.string());
  std::string line;
  for (std::size_t j = 0; j < d.x_names.size(); ++j) line += (j ? "," : "") + d.x_names[j];
  for (const auto& n : d.y_names) line += "," + n;
  out << line << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    line.clear();
    auto xr = d.x.row(i);
    for (std::size_t j = 0; j < xr.size(); ++j) {
      if (j) line += ',';
      line += format_double(xr[j]);
    }
    for (double v : d.y.row(i)) {
      line += ',';
      line += format_double(v);
    }
    out << line << '\n';
  }
  if (!out) throw CsvError("failed writing CSV file: " + path.string());
}

}  // namespace cyclereg
