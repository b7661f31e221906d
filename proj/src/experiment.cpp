#include "cyclereg/experiment.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "cyclereg/stability.hpp"

namespace cyclereg {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

TaskId task_or_throw(const std::string& text) {
  auto t = parse_task(text);
  require(t.has_value(), "unknown task '" + text + "'; valid tasks: " + task_names());
  return *t;
}

ModelConfig model_from_json(const nlohmann::json& j, ModelConfig m, const std::string& where) {
  reject_unknown(j, {"hidden", "activation", "batchnorm", "dropout", "dropout_probability"}, where);
  if (j.contains("hidden")) m.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  if (j.contains("activation")) {
    const auto text = j.at("activation").get<std::string>();
    auto a = parse_activation(text);
    require(a.has_value(), "unknown activation '" + text + "' in " + where + " (none, relu, tanh)");
    m.activation = *a;
  }
  if (j.contains("batchnorm")) m.batchnorm = j.at("batchnorm").get<bool>();
  if (j.contains("dropout")) m.dropout = j.at("dropout").get<bool>();
  if (j.contains("dropout_probability")) m.dropout_probability = j.at("dropout_probability").get<double>();
  return m;
}

nlohmann::json model_to_json(const ModelConfig& m) {
  return {{"hidden", m.hidden},
          {"activation", std::string(name(m.activation))},
          {"batchnorm", m.batchnorm},
          {"dropout", m.dropout},
          {"dropout_probability", m.dropout_probability}};
}

std::vector<Range> resolved_ranges(const DataSource& d) {
  if (!d.task) return {};
  return d.ranges.empty() ? default_ranges(*d.task) : d.ranges;
}

}  // namespace

std::string DataSource::label() const {
  if (task) return std::string(name(*task));
  return csv.stem().string();
}

MlpSpec ModelConfig::spec(std::size_t in, std::size_t out, std::uint64_t seed) const {
  MlpSpec s = MlpSpec::chain(in, hidden, out, activation, batchnorm, dropout, seed);
  s.dropout_probability = dropout_probability;
  return s;
}

void ExperimentConfig::validate() const {
  if (data.task) {
    require(data.n >= 10, "n must be at least 10 samples");
    const auto ranges = resolved_ranges(data);
    require(ranges.size() == task_input_width(*data.task),
            "task " + std::string(name(*data.task)) + " needs " + std::to_string(task_input_width(*data.task)) +
                " input range(s), got " + std::to_string(ranges.size()));
    for (const auto& r : ranges) {
      require(std::isfinite(r.low) && std::isfinite(r.high) && r.low < r.high,
              "input range [" + std::to_string(r.low) + ", " + std::to_string(r.high) + "] is empty or invalid");
    }
  } else {
    require(!data.csv.empty(), "no data source: set a task or a csv path");
    require(!data.x_columns.empty() && !data.y_columns.empty(), "csv source needs x_columns and y_columns");
  }
  for (double f : {split.train, split.validation, split.test}) {
    require(f >= 0.0 && f < 1.0, "split fractions must lie in [0, 1)");
  }
  require(std::fabs(split.train + split.validation + split.test - 1.0) < 1e-9, "split fractions must sum to 1");
  require(split.validation > 0.0 && split.test > 0.0, "validation and test fractions must be positive");
  for (const auto* m : {&phi, &psi}) {
    for (auto h : m->hidden) require(h > 0, "hidden widths must be positive");
    require(m->dropout_probability >= 0.0 && m->dropout_probability < 1.0, "dropout_probability must lie in [0, 1)");
  }
  require(!seeds.empty(), "seed list is empty");
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& axis : grid) {
    require(!axis.values.empty(), "grid axis '" + axis.key + "' has no values");
  }
  if (!grid.empty()) {
    for (auto& [cfg, _] : expand_grid(*this)) {
      ExperimentConfig single = cfg;
      single.grid.clear();
      single.validate();
    }
  }
}

void apply_setting(ExperimentConfig& c, const std::string& key, const nlohmann::json& value) {
  if (key == "task") {
    require(value.is_string(), "grid task values must be strings");
    const TaskId t = task_or_throw(value.get<std::string>());
    if (c.data.task != t) c.data.ranges.clear();
    c.data.task = t;
    c.data.csv.clear();
    return;
  }
  try {
    c.plan = plan_from_json(nlohmann::json{{key, value}}, c.plan);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("setting '") + key + "': " + e.what());
  }
}

std::vector<std::pair<ExperimentConfig, nlohmann::json>> expand_grid(const ExperimentConfig& c) {
  std::vector<std::pair<ExperimentConfig, nlohmann::json>> out;
  ExperimentConfig base = c;
  base.grid.clear();
  out.emplace_back(base, nlohmann::json::object());
  for (const auto& axis : c.grid) {
    require(!axis.values.empty(), "grid axis '" + axis.key + "' has no values");
    std::vector<std::pair<ExperimentConfig, nlohmann::json>> next;
    for (const auto& [cfg, assignment] : out) {
      for (const auto& v : axis.values) {
        ExperimentConfig e = cfg;
        apply_setting(e, axis.key, v);
        nlohmann::json a = assignment;
        a[axis.key] = v;
        next.emplace_back(std::move(e), std::move(a));
      }
    }
    out = std::move(next);
  }
  return out;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  try {
    reject_unknown(j, {"task", "csv", "n", "ranges", "data_seed", "split", "normalize", "model", "phi", "psi",
                       "plan", "seeds", "output_dir", "grid"},
                   "config");
    require(!(j.contains("task") && j.contains("csv")), "config sets both task and csv");
    if (j.contains("task")) {
      c.data.task = task_or_throw(j.at("task").get<std::string>());
      c.data.csv.clear();
    }
    if (j.contains("csv")) {
      const auto& s = j.at("csv");
      reject_unknown(s, {"path", "x_columns", "y_columns"}, "csv");
      c.data.task.reset();
      c.data.csv = s.at("path").get<std::string>();
      c.data.x_columns = s.at("x_columns").get<std::vector<std::string>>();
      c.data.y_columns = s.at("y_columns").get<std::vector<std::string>>();
    }
    if (j.contains("n")) c.data.n = j.at("n").get<std::size_t>();
    if (j.contains("ranges")) {
      c.data.ranges.clear();
      for (const auto& r : j.at("ranges")) {
        require(r.is_array() && r.size() == 2, "each range must be a [low, high] pair");
        c.data.ranges.push_back({r[0].get<double>(), r[1].get<double>()});
      }
    }
    if (j.contains("data_seed")) c.data.seed = j.at("data_seed").get<std::uint64_t>();
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, {"train", "validation", "test", "seed"}, "split");
      if (s.contains("train")) c.split.train = s.at("train").get<double>();
      if (s.contains("validation")) c.split.validation = s.at("validation").get<double>();
      if (s.contains("test")) c.split.test = s.at("test").get<double>();
      if (s.contains("seed")) c.split.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("normalize")) c.normalize = j.at("normalize").get<bool>();
    if (j.contains("model")) {
      c.phi = model_from_json(j.at("model"), c.phi, "model");
      c.psi = model_from_json(j.at("model"), c.psi, "model");
    }
    if (j.contains("phi")) c.phi = model_from_json(j.at("phi"), c.phi, "phi");
    if (j.contains("psi")) c.psi = model_from_json(j.at("psi"), c.psi, "psi");
    const bool epochs_given = j.contains("plan") && j.at("plan").contains("epochs");
    if (j.contains("plan")) {
      try {
        c.plan = plan_from_json(j.at("plan"), c.plan);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("plan: ") + e.what());
      }
    }
    if (!c.data.task && !epochs_given && c.plan.epochs == TrainingPlan{}.epochs) c.plan.epochs = 2000;
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      require(g.is_object(), "grid must be an object of key: [values]");
      c.grid.clear();
      for (const auto& [key, values] : g.items()) {
        require(values.is_array(), "grid axis '" + key + "' must be an array");
        GridAxis axis{key, {}};
        for (const auto& v : values) axis.values.push_back(v);
        c.grid.push_back(std::move(axis));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  if (c.data.task) {
    j["task"] = std::string(name(*c.data.task));
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& r : resolved_ranges(c.data)) ranges.push_back({r.low, r.high});
    j["ranges"] = ranges;
    j["n"] = c.data.n;
    j["data_seed"] = c.data.seed;
  } else {
    j["csv"] = {{"path", c.data.csv.string()}, {"x_columns", c.data.x_columns}, {"y_columns", c.data.y_columns}};
  }
  j["split"] = {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test},
                {"seed", c.split.seed}};
  j["normalize"] = c.normalize;
  j["phi"] = model_to_json(c.phi);
  j["psi"] = model_to_json(c.psi);
  j["plan"] = to_json(c.plan);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
  if (!c.grid.empty()) {
    nlohmann::json g = nlohmann::json::object();
    for (const auto& axis : c.grid) g[axis.key] = axis.values;
    j["grid"] = g;
  }
  return j;
}

PreparedData prepare_data(const ExperimentConfig& c) {
  Dataset d;
  if (c.data.task) {
    d = gen_synthetic(*c.data.task, c.data.n, resolved_ranges(c.data), c.data.seed);
  } else {
    d = load_csv(c.data.csv, c.data.x_columns, c.data.y_columns);
  }
  Splits s = split_shuffle(d, c.split);
  PreparedData p;
  p.label = c.data.label();
  if (c.normalize) {
    auto [train, stats] = normalize(s.train);
    p.train = std::move(train);
    p.validation = normalize(s.validation, stats).first;
    p.test = normalize(s.test, stats).first;
    p.stats = std::move(stats);
  } else {
    p.train = std::move(s.train);
    p.validation = std::move(s.validation);
    p.test = std::move(s.test);
  }
  return p;
}

ModelPair build_pair(const ExperimentConfig& c, std::size_t x_width, std::size_t y_width) {
  return ModelPair(c.phi.spec(x_width, y_width, derive_seed(c.plan.seed, 1)),
                   c.psi.spec(y_width, x_width, derive_seed(c.plan.seed, 2)));
}

Dataset training_view(const Dataset& train, const TrainingPlan& plan) {
  if (plan.strategy != Strategy::Jcm) return train;
  return decouple_pairs(train, derive_seed(plan.seed, 20));
}

RunResult run_experiment(const ExperimentConfig& c, const PreparedData& data,
                         const std::function<void(const EpochMetrics&)>& on_epoch) {
  ModelPair pair = build_pair(c, data.train.x.cols(), data.train.y.cols());
  const Dataset view = training_view(data.train, c.plan);
  TrainingOutcome outcome = train(pair, c.plan, view.x, view.y, on_epoch);
  MetricsReport report = make_report(data.label, c.plan, pair, data.test.x, data.test.y, outcome);
  if (!outcome.diverged()) {
    const std::size_t rows = std::min<std::size_t>(data.test.rows(), 200);
    try {
      const auto est = stability::estimate_cycle_lipschitz(pair, data.test.x.slice_rows(0, rows),
                                                           rows * (rows - 1) / 2, derive_seed(c.plan.seed, 30));
      if (std::isfinite(est.lower_bound)) report.lipschitz_lower_bound = est.lower_bound;
    } catch (const std::invalid_argument&) {
      // every sampled input identical: no estimate
    }
  }
  return {std::move(pair), std::move(outcome), std::move(report)};
}

}  // namespace cyclereg
