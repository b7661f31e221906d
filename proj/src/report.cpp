#include "cyclereg/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "cyclereg/dataset.hpp"

namespace cyclereg {

std::string_view name(ErrorKind k) {
  return k == ErrorKind::Direct ? "direct" : "cycle";
}

std::optional<ErrorKind> parse_error_kind(std::string_view text) {
  if (text == "direct") return ErrorKind::Direct;
  if (text == "cycle") return ErrorKind::CycleReconstruction;
  return std::nullopt;
}

std::string config_digest(const TrainingPlan& plan) {
  const std::string text = to_json(plan).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::optional<double> finite(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

}  // namespace

MetricsReport make_report(std::string task, const TrainingPlan& plan, const ModelPair& pair,
                          const Tensor& x, const Tensor& y, const TrainingOutcome& outcome) {
  MetricsReport r;
  r.task = std::move(task);
  r.strategy = plan.strategy;
  r.update_mode = plan.update_mode;
  r.batch_fraction = plan.batch_fraction;
  r.seed = plan.seed;
  r.config_digest = config_digest(plan);
  r.epochs_run = outcome.history.size();
  r.diverged = outcome.diverged();
  r.large_batch_risk = plan.large_batch_risk();
  if (!outcome.history.empty()) r.final_total_loss = finite(outcome.history.back().total_loss);

  switch (plan.strategy) {
    case Strategy::Baseline:
      r.forward_kind = ErrorKind::Direct;
      r.backward_kind = ErrorKind::Direct;
      break;
    case Strategy::Ucm:
    case Strategy::UcmHybrid:
      r.forward_kind = ErrorKind::Direct;
      r.backward_kind = ErrorKind::CycleReconstruction;
      break;
    case Strategy::Jcm:
      r.forward_kind = ErrorKind::CycleReconstruction;
      r.backward_kind = ErrorKind::CycleReconstruction;
      break;
  }
  if (r.diverged) return r;

  const ErrorBreakdown e = measure_errors(pair, x, y);
  r.forward_direct_mae = finite(e.forward_direct);
  r.backward_direct_mae = finite(e.backward_direct);
  r.forward_cycle_mae = finite(e.forward_cycle);
  r.backward_cycle_mae = finite(e.backward_cycle);
  r.forward_error = r.forward_kind == ErrorKind::Direct ? r.forward_direct_mae : r.forward_cycle_mae;
  r.backward_error = r.backward_kind == ErrorKind::Direct ? r.backward_direct_mae : r.backward_cycle_mae;
  if (r.forward_error && r.backward_error) r.ratio = relative_error_ratio(*r.backward_error, *r.forward_error);
  return r;
}

void fill_improvements(std::vector<MetricsReport>& reports) {
  std::map<std::pair<std::string, std::uint64_t>, double> baseline;
  for (const auto& r : reports) {
    if (r.strategy == Strategy::Baseline && !r.diverged && r.backward_error) {
      baseline.emplace(std::make_pair(r.task, r.seed), *r.backward_error);
    }
  }
  for (auto& r : reports) {
    r.improvement.reset();
    if (r.strategy == Strategy::Baseline || !r.backward_error) continue;
    auto it = baseline.find({r.task, r.seed});
    if (it == baseline.end() || !(it->second > 0.0)) continue;
    r.improvement = improvement_vs_baseline(*r.backward_error, it->second);
  }
}

// ---- CSV -------------------------------------------------------------------

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> columns = {
      "task",           "strategy",          "update_mode",        "batch_fraction",
      "seed",           "config_digest",     "forward_kind",       "forward_error",
      "backward_kind",  "backward_error",    "forward_direct_mae", "backward_direct_mae",
      "forward_cycle_mae", "backward_cycle_mae", "ratio",          "improvement_pct",
      "lipschitz_lower_bound", "final_total_loss", "epochs_run",  "diverged",
      "large_batch_risk"};
  return columns;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> cells(const MetricsReport& r) {
  return {quote(r.task),
          std::string(name(r.strategy)),
          std::string(name(r.update_mode)),
          format_double(r.batch_fraction),
          std::to_string(r.seed),
          r.config_digest,
          std::string(name(r.forward_kind)),
          opt(r.forward_error),
          std::string(name(r.backward_kind)),
          opt(r.backward_error),
          opt(r.forward_direct_mae),
          opt(r.backward_direct_mae),
          opt(r.forward_cycle_mae),
          opt(r.backward_cycle_mae),
          opt(r.ratio),
          opt(r.improvement),
          opt(r.lipschitz_lower_bound),
          opt(r.final_total_loss),
          std::to_string(r.epochs_run),
          r.diverged ? "1" : "0",
          r.large_batch_risk ? "1" : "0"};
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw IoError(where + ": cannot parse number '" + s + "'");
  return v;
}

std::optional<double> parse_opt(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  return parse_number(s, where);
}

std::uint64_t parse_count(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw IoError(where + ": cannot parse integer '" + s + "'");
  return v;
}

template <typename T, typename Parse>
T parse_enum(const std::string& s, Parse parse, const std::string& where) {
  auto v = parse(s);
  if (!v) throw IoError(where + ": unknown value '" + s + "'");
  return *v;
}

bool parse_flag(const std::string& s, const std::string& where) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw IoError(where + ": expected 0 or 1, got '" + s + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line;
}

}  // namespace

void write_reports_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  std::string text = join(report_columns()) + "\n";
  for (const auto& r : reports) text += join(cells(r)) + "\n";
  write_text(path, text);
}

std::vector<MetricsReport> read_reports_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != report_columns()) {
    throw IoError(path.string() + ": not a metrics report (header mismatch)");
  }
  std::vector<MetricsReport> reports;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != report_columns().size()) {
      throw IoError(where + ": expected " + std::to_string(report_columns().size()) + " fields, got " +
                    std::to_string(f.size()));
    }
    MetricsReport r;
    r.task = f[0];
    r.strategy = parse_enum<Strategy>(f[1], parse_strategy, where);
    r.update_mode = parse_enum<UpdateMode>(f[2], parse_update_mode, where);
    r.batch_fraction = parse_number(f[3], where);
    r.seed = parse_count(f[4], where);
    r.config_digest = f[5];
    r.forward_kind = parse_enum<ErrorKind>(f[6], parse_error_kind, where);
    r.forward_error = parse_opt(f[7], where);
    r.backward_kind = parse_enum<ErrorKind>(f[8], parse_error_kind, where);
    r.backward_error = parse_opt(f[9], where);
    r.forward_direct_mae = parse_opt(f[10], where);
    r.backward_direct_mae = parse_opt(f[11], where);
    r.forward_cycle_mae = parse_opt(f[12], where);
    r.backward_cycle_mae = parse_opt(f[13], where);
    r.ratio = parse_opt(f[14], where);
    r.improvement = parse_opt(f[15], where);
    r.lipschitz_lower_bound = parse_opt(f[16], where);
    r.final_total_loss = parse_opt(f[17], where);
    r.epochs_run = parse_count(f[18], where);
    r.diverged = parse_flag(f[19], where);
    r.large_batch_risk = parse_flag(f[20], where);
    reports.push_back(std::move(r));
  }
  return reports;
}

// ---- JSON ------------------------------------------------------------------

namespace {

nlohmann::json jopt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> jread(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  return {{"task", r.task},
          {"strategy", std::string(name(r.strategy))},
          {"update_mode", std::string(name(r.update_mode))},
          {"batch_fraction", r.batch_fraction},
          {"seed", r.seed},
          {"config_digest", r.config_digest},
          {"forward_kind", std::string(name(r.forward_kind))},
          {"forward_error", jopt(r.forward_error)},
          {"backward_kind", std::string(name(r.backward_kind))},
          {"backward_error", jopt(r.backward_error)},
          {"forward_direct_mae", jopt(r.forward_direct_mae)},
          {"backward_direct_mae", jopt(r.backward_direct_mae)},
          {"forward_cycle_mae", jopt(r.forward_cycle_mae)},
          {"backward_cycle_mae", jopt(r.backward_cycle_mae)},
          {"ratio", jopt(r.ratio)},
          {"improvement_pct", jopt(r.improvement)},
          {"lipschitz_lower_bound", jopt(r.lipschitz_lower_bound)},
          {"final_total_loss", jopt(r.final_total_loss)},
          {"epochs_run", r.epochs_run},
          {"diverged", r.diverged},
          {"large_batch_risk", r.large_batch_risk}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  auto text = [&](const char* key) { return j.at(key).get<std::string>(); };
  const std::string where = "metrics report";
  MetricsReport r;
  r.task = text("task");
  r.strategy = parse_enum<Strategy>(text("strategy"), parse_strategy, where);
  r.update_mode = parse_enum<UpdateMode>(text("update_mode"), parse_update_mode, where);
  r.batch_fraction = j.at("batch_fraction").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_digest = text("config_digest");
  r.forward_kind = parse_enum<ErrorKind>(text("forward_kind"), parse_error_kind, where);
  r.forward_error = jread(j, "forward_error");
  r.backward_kind = parse_enum<ErrorKind>(text("backward_kind"), parse_error_kind, where);
  r.backward_error = jread(j, "backward_error");
  r.forward_direct_mae = jread(j, "forward_direct_mae");
  r.backward_direct_mae = jread(j, "backward_direct_mae");
  r.forward_cycle_mae = jread(j, "forward_cycle_mae");
  r.backward_cycle_mae = jread(j, "backward_cycle_mae");
  r.ratio = jread(j, "ratio");
  r.improvement = jread(j, "improvement_pct");
  r.lipschitz_lower_bound = jread(j, "lipschitz_lower_bound");
  r.final_total_loss = jread(j, "final_total_loss");
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  r.diverged = j.at("diverged").get<bool>();
  r.large_batch_risk = j.at("large_batch_risk").get<bool>();
  return r;
}

void write_reports_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  write_text(path, arr.dump(2) + "\n");
}

std::vector<MetricsReport> read_reports_json(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw IoError(path.string() + ": expected a JSON array of reports");
  std::vector<MetricsReport> reports;
  for (const auto& item : j) reports.push_back(report_from_json(item));
  return reports;
}

// ---- aggregation -----------------------------------------------------------

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<Summary> summarize(const std::vector<MetricsReport>& reports) {
  using Key = std::tuple<std::string, Strategy, UpdateMode, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const MetricsReport*>> groups;
  for (const auto& r : reports) {
    Key k{r.task, r.strategy, r.update_mode, r.batch_fraction};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(&r);
  }
  auto stats = [](const std::vector<double>& v, std::optional<double>& med, std::optional<double>* lo,
                  std::optional<double>* hi) {
    if (v.empty()) return;
    med = median(v);
    if (lo) *lo = *std::min_element(v.begin(), v.end());
    if (hi) *hi = *std::max_element(v.begin(), v.end());
  };
  std::vector<Summary> out;
  for (const auto& k : order) {
    const auto& runs = groups[k];
    Summary s;
    std::tie(s.task, s.strategy, s.update_mode, s.batch_fraction) = k;
    s.runs = runs.size();
    std::vector<double> fwd, bwd, ratio, imp;
    for (const auto* r : runs) {
      if (r->diverged) continue;
      ++s.converged;
      if (r->forward_error) fwd.push_back(*r->forward_error);
      if (r->backward_error) bwd.push_back(*r->backward_error);
      if (r->ratio) ratio.push_back(*r->ratio);
      if (r->improvement) imp.push_back(*r->improvement);
    }
    s.convergence_rate = static_cast<double>(s.converged) / static_cast<double>(s.runs);
    stats(fwd, s.forward_median, &s.forward_min, &s.forward_max);
    stats(bwd, s.backward_median, &s.backward_min, &s.backward_max);
    stats(ratio, s.ratio_median, nullptr, nullptr);
    stats(imp, s.improvement_median, nullptr, nullptr);
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<Summary>& summaries) {
  std::string text =
      "task,strategy,update_mode,batch_fraction,runs,converged,convergence_rate,forward_median,"
      "forward_min,forward_max,backward_median,backward_min,backward_max,ratio_median,"
      "improvement_median_pct\n";
  for (const auto& s : summaries) {
    text += join({quote(s.task), std::string(name(s.strategy)), std::string(name(s.update_mode)),
                  format_double(s.batch_fraction), std::to_string(s.runs), std::to_string(s.converged),
                  format_double(s.convergence_rate), opt(s.forward_median), opt(s.forward_min),
                  opt(s.forward_max), opt(s.backward_median), opt(s.backward_min), opt(s.backward_max),
                  opt(s.ratio_median), opt(s.improvement_median)}) +
            "\n";
  }
  write_text(path, text);
}

std::string comparison_table(const std::vector<Summary>& summaries) {
  std::vector<std::string> tasks;
  std::vector<Strategy> strategies;
  for (const auto& s : summaries) {
    if (std::find(tasks.begin(), tasks.end(), s.task) == tasks.end()) tasks.push_back(s.task);
    if (std::find(strategies.begin(), strategies.end(), s.strategy) == strategies.end()) {
      strategies.push_back(s.strategy);
    }
  }
  auto cell = [&](const std::string& task, Strategy st, bool forward) -> std::string {
    for (const auto& s : summaries) {
      if (s.task != task || s.strategy != st) continue;
      const auto& v = forward ? s.forward_median : s.backward_median;
      if (!v) return "-";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3g", *v);
      return buf;
    }
    return "-";
  };
  std::string out = "Task\tDirection";
  for (auto st : strategies) out += "\t" + std::string(name(st));
  out += "\n";
  for (const auto& task : tasks) {
    for (bool forward : {true, false}) {
      out += (forward ? task : std::string()) + "\t" + (forward ? "Forward" : "Backward");
      for (auto st : strategies) out += "\t" + cell(task, st, forward);
      out += "\n";
    }
  }
  return out;
}

}  // namespace cyclereg
