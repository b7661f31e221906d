// cyclereg: data generation, training, evaluation, sweeps and stability runs.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cyclereg/dataset.hpp"
#include "cyclereg/evaluation.hpp"
#include "cyclereg/experiment.hpp"
#include "cyclereg/report.hpp"
#include "cyclereg/stability.hpp"
#include "cyclereg/svg.hpp"

namespace fs = std::filesystem;
using namespace cyclereg;

namespace {

enum Exit { kOk = 0, kViolation = 1, kConfig = 2, kDiverged = 3, kIo = 4 };

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("failed writing: " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Range parse_range(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 2) throw ConfigError("range '" + text + "' must look like low,high");
  try {
    return {std::stod(parts[0]), std::stod(parts[1])};
  } catch (const std::exception&) {
    throw ConfigError("range '" + text + "' is not numeric");
  }
}

// Flags shared by train and sweep; only those given on the command line
// override the config file.
struct Overrides {
  std::string config;
  std::string out;
  std::string task, csv, x_cols, y_cols;
  std::size_t n = 0;
  std::uint64_t data_seed = 0;
  std::vector<std::string> ranges;
  std::string strategy, loss, mapping_loss, optimizer, update_mode, activation;
  double lr = 0, batch_fraction = 0, alpha_f = 0, alpha_b = 0, beta_f = 0, beta_b = 0, weight_decay = 0,
         grad_clip = 0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> hidden;
  bool batchnorm = true;
  bool recalibrate = true;
  std::map<std::string, CLI::Option*> given;

  void add(CLI::App* app, bool with_seeds) {
    app->add_option("-c,--config", config, "JSON experiment config");
    given["out"] = app->add_option("-o,--out", out, "output directory (default: $CYCLEREG_OUT or ./out)");
    given["task"] = app->add_option("--task", task, "synthetic task id");
    given["csv"] = app->add_option("--csv", csv, "CSV data file (needs --x-cols and --y-cols)");
    given["x_cols"] = app->add_option("--x-cols", x_cols, "comma separated x column names");
    given["y_cols"] = app->add_option("--y-cols", y_cols, "comma separated y column names");
    given["n"] = app->add_option("--n", n, "synthetic sample count");
    given["data_seed"] = app->add_option("--data-seed", data_seed, "synthetic data seed");
    given["ranges"] = app->add_option("--range", ranges, "input range low,high (repeat per input)");
    given["strategy"] = app->add_option("--strategy", strategy, "baseline, ucm, ucm_hybrid or jcm");
    given["loss"] = app->add_option("--loss", loss, "l2, l1 or smooth_l1");
    given["mapping_loss"] = app->add_option("--mapping-loss", mapping_loss, "penalty of the jcm mapping term");
    given["optimizer"] = app->add_option("--optimizer", optimizer, "adam or sgd");
    given["learning_rate"] = app->add_option("--lr", lr, "learning rate");
    given["batch_fraction"] = app->add_option("--batch-fraction", batch_fraction, "batch size / training rows");
    given["epochs"] = app->add_option("--epochs", epochs, "training epochs");
    given["alpha_f"] = app->add_option("--alpha-f", alpha_f, "jcm forward cycle weight");
    given["alpha_b"] = app->add_option("--alpha-b", alpha_b, "jcm backward cycle weight");
    given["beta_f"] = app->add_option("--beta-f", beta_f, "jcm forward mapping weight");
    given["beta_b"] = app->add_option("--beta-b", beta_b, "jcm backward mapping weight");
    given["update_mode"] = app->add_option("--update-mode", update_mode, "simultaneous or stepwise");
    given["weight_decay"] = app->add_option("--weight-decay", weight_decay, "L2 weight decay");
    given["grad_clip"] = app->add_option("--grad-clip", grad_clip, "global gradient norm clip");
    given["recalibrate_batchnorm"] =
        app->add_option("--recalibrate-batchnorm", recalibrate, "refresh batchnorm statistics each epoch");
    given["seed"] = app->add_option("--seed", seed, "training seed");
    if (with_seeds) given["seeds"] = app->add_option("--seeds", seeds, "seed list")->delimiter(',');
    given["hidden"] = app->add_option("--hidden", hidden, "hidden widths, e.g. 64,64")->delimiter(',');
    given["activation"] = app->add_option("--activation", activation, "relu, tanh or none");
    given["batchnorm"] = app->add_option("--batchnorm", batchnorm, "batchnorm on hidden layers (true/false)");
  }

  bool has(const std::string& key) const {
    auto it = given.find(key);
    return it != given.end() && it->second->count() > 0;
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    bool output_from_config = false;
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw IoError("cannot open config: " + config);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(config + ": " + e.what());
      }
      c = config_from_json(j);
      output_from_config = j.is_object() && j.contains("output_dir");
    }
    nlohmann::json patch = nlohmann::json::object();
    nlohmann::json plan = nlohmann::json::object();
    if (has("task") && has("csv")) throw ConfigError("--task and --csv are mutually exclusive");
    if (has("task")) patch["task"] = task;
    if (has("csv")) {
      if (!has("x_cols") || !has("y_cols")) throw ConfigError("--csv needs --x-cols and --y-cols");
      patch["csv"] = {{"path", csv}, {"x_columns", split_list(x_cols)}, {"y_columns", split_list(y_cols)}};
    }
    if (has("n")) patch["n"] = n;
    if (has("data_seed")) patch["data_seed"] = data_seed;
    if (has("ranges")) {
      nlohmann::json rs = nlohmann::json::array();
      for (const auto& r : ranges) {
        const Range parsed = parse_range(r);
        rs.push_back({parsed.low, parsed.high});
      }
      patch["ranges"] = rs;
    }
    for (const char* key : {"strategy", "loss", "mapping_loss", "optimizer", "update_mode"}) {
      if (!has(key)) continue;
      const std::string& v = std::string(key) == "strategy"       ? strategy
                             : std::string(key) == "loss"         ? loss
                             : std::string(key) == "mapping_loss" ? mapping_loss
                             : std::string(key) == "optimizer"    ? optimizer
                                                                  : update_mode;
      plan[key] = v;
    }
    const std::pair<const char*, double> nums[] = {
        {"learning_rate", lr}, {"batch_fraction", batch_fraction}, {"alpha_f", alpha_f}, {"alpha_b", alpha_b},
        {"beta_f", beta_f},    {"beta_b", beta_b},                 {"weight_decay", weight_decay},
        {"grad_clip", grad_clip}};
    for (const auto& [key, v] : nums) {
      if (has(key)) plan[key] = v;
    }
    if (has("epochs")) plan["epochs"] = epochs;
    if (has("seed")) plan["seed"] = seed;
    if (has("recalibrate_batchnorm")) plan["recalibrate_batchnorm"] = recalibrate;
    if (!plan.empty()) patch["plan"] = plan;
    if (has("seeds")) patch["seeds"] = seeds;
    nlohmann::json model = nlohmann::json::object();
    if (has("hidden")) model["hidden"] = hidden;
    if (has("activation")) model["activation"] = activation;
    if (has("batchnorm")) model["batchnorm"] = batchnorm;
    if (!model.empty()) patch["model"] = model;
    c = config_from_json(patch, c);
    if (has("out")) {
      c.output_dir = out;
    } else if (!output_from_config) {
      const char* env = std::getenv("CYCLEREG_OUT");
      c.output_dir = env && *env ? fs::path(env) : fs::path("out");
    }
    c.validate();
    return c;
  }
};

// Appends one line per epoch as training runs, so an interrupted or diverged
// run still leaves its partial history on disk.
class EpochLog {
 public:
  explicit EpochLog(const fs::path& dir)
      : metrics_(open(dir / "metrics.csv")), timing_(open(dir / "timing.csv")), dir_(dir) {
    metrics_ << "epoch,L_f,L_b,L_total\n" << std::flush;
    timing_ << "epoch,wall_ms\n" << std::flush;
  }

  void add(const EpochMetrics& m) {
    metrics_ << m.epoch << ',' << format_double(m.forward_loss) << ',' << format_double(m.backward_loss) << ','
             << format_double(m.total_loss) << '\n'
             << std::flush;
    timing_ << m.epoch << ',' << format_double(m.wall_ms) << '\n' << std::flush;
    if (!metrics_ || !timing_) throw IoError("failed writing epoch metrics in " + dir_.string());
  }

 private:
  static std::ofstream open(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
  }

  std::ofstream metrics_;
  std::ofstream timing_;
  fs::path dir_;
};

void print_report(const MetricsReport& r) {
  auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
  std::cout << r.task << " " << name(r.strategy) << " seed " << r.seed << ": forward " << name(r.forward_kind)
            << " MAE " << show(r.forward_error) << ", backward " << name(r.backward_kind) << " MAE "
            << show(r.backward_error) << ", ratio " << show(r.ratio)
            << (r.diverged ? ", DIVERGED" : "") << "\n";
  if (r.large_batch_risk) {
    std::cout << "warning: batch fraction " << r.batch_fraction
              << " is above 0.40 of the dataset, where cycle training is known to degrade or diverge\n";
  }
}

// ---- gen-data ----------------------------------------------------------------

int cmd_gen_data(const std::string& task_text, std::size_t n, std::uint64_t seed,
                 const std::vector<std::string>& range_text, const std::string& out_flag) {
  auto task = parse_task(task_text);
  if (!task) throw ConfigError("unknown task '" + task_text + "'; valid tasks: " + task_names());
  std::vector<Range> ranges;
  for (const auto& r : range_text) ranges.push_back(parse_range(r));
  if (ranges.empty()) ranges = default_ranges(*task);
  if (n == 0) throw ConfigError("--n must be positive");
  Dataset d;
  try {
    d = gen_synthetic(*task, n, ranges, seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = out_flag;
  make_dir(dir);
  const std::string stem(name(*task));
  const fs::path csv = dir / (stem + ".csv");
  write_csv(csv, d);
  nlohmann::json range_json = nlohmann::json::array();
  for (const auto& r : ranges) range_json.push_back({r.low, r.high});
  std::vector<std::string> columns = d.x_names;
  columns.insert(columns.end(), d.y_names.begin(), d.y_names.end());
  const nlohmann::json manifest = {{"generator", stem},     {"n", n},
                                   {"ranges", range_json},  {"seed", seed},
                                   {"x_columns", d.x_names}, {"y_columns", d.y_names},
                                   {"columns", columns},    {"file", csv.filename().string()}};
  write_text(dir / (stem + ".manifest.json"), manifest.dump(2) + "\n");
  std::cout << "wrote " << csv.string() << " (" << n << " rows)\n";
  return kOk;
}

// ---- train -------------------------------------------------------------------

nlohmann::json checkpoint_metadata(const ExperimentConfig& c, const PreparedData& data, const RunResult& run) {
  nlohmann::json config = to_json(c);
  config.erase("output_dir");  // keeps checkpoints byte-identical across output locations
  nlohmann::json meta = {{"config", config},
                         {"label", data.label},
                         {"epochs_run", run.outcome.history.size()},
                         {"diverged", run.outcome.diverged()}};
  meta["normalization"] = data.stats ? to_json(*data.stats) : nlohmann::json();
  if (run.report.final_total_loss) meta["final_total_loss"] = *run.report.final_total_loss;
  return meta;
}

int cmd_train(const Overrides& o) {
  const ExperimentConfig c = o.resolve();
  const PreparedData data = prepare_data(c);
  make_dir(c.output_dir);
  std::cout << "training " << name(c.plan.strategy) << " on " << data.label << " (" << data.train.rows()
            << " training rows, " << c.plan.epochs << " epochs)\n";
  const fs::path dir = c.output_dir;
  write_text(dir / "config.resolved.json", to_json(c).dump(2) + "\n");
  if (data.stats) write_text(dir / "normalization.json", to_json(*data.stats).dump(2) + "\n");
  EpochLog log(dir);
  RunResult run = run_experiment(c, data, [&](const EpochMetrics& m) { log.add(m); });
  save_checkpoint(dir / "checkpoint.bin", run.pair, checkpoint_metadata(c, data, run));
  write_reports_csv(dir / "report.csv", {run.report});
  write_reports_json(dir / "report.json", {run.report});
  print_report(run.report);
  if (run.outcome.diverged()) {
    const auto& d = *run.outcome.divergence;
    std::cout << "diverged at epoch " << d.epoch << ", batch " << d.batch << ": " << d.reason << "\n";
    return kDiverged;
  }
  return kOk;
}

Checkpoint read_checkpoint(const std::string& path) {
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    throw IoError(std::string("cannot read checkpoint: ") + e.what());
  }
}

// ---- eval --------------------------------------------------------------------

std::vector<double> column(const Tensor& t, std::size_t col, std::size_t limit) {
  std::vector<double> out;
  for (std::size_t r = 0; r < std::min(limit, t.rows()); ++r) out.push_back(t.at(r, col));
  return out;
}

void plot_direction(const fs::path& path, const std::string& title, const Tensor& in, const Tensor& truth,
                    const Tensor& prediction, const std::string& in_name, const std::string& out_name) {
  const std::size_t limit = 1000;
  const std::vector<PlotSeries> series = {
      {"ground truth", "#7f7f7f", column(in, 0, limit), column(truth, 0, limit)},
      {"prediction", "#1f77b4", column(in, 0, limit), column(prediction, 0, limit)}};
  write_scatter_svg(path, {title, in_name, out_name}, series);
}

int cmd_eval(const std::string& checkpoint_path, const std::string& split, bool plot, const std::string& out_flag) {
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  const auto& meta = ck.metadata;
  if (!meta.contains("config")) throw IoError(checkpoint_path + ": checkpoint carries no experiment config");
  const ExperimentConfig c = config_from_json(meta.at("config"));
  const PreparedData data = prepare_data(c);
  const Dataset* part = nullptr;
  if (split == "test") {
    part = &data.test;
  } else if (split == "validation") {
    part = &data.validation;
  } else if (split == "train") {
    part = &data.train;
  } else {
    throw ConfigError("unknown split '" + split + "' (train, validation, test)");
  }
  if (part->x.cols() != ck.pair.x_width() || part->y.cols() != ck.pair.y_width()) {
    throw ConfigError("checkpoint widths do not match the dataset");
  }
  TrainingOutcome outcome;
  if (meta.value("diverged", false)) outcome.divergence = Divergence{0, 0, "diverged during training"};
  MetricsReport r = make_report(data.label, c.plan, ck.pair, part->x, part->y, outcome);
  r.epochs_run = meta.value("epochs_run", std::size_t{0});
  if (meta.contains("final_total_loss")) r.final_total_loss = meta.at("final_total_loss").get<double>();
  if (!r.diverged) {
    const std::size_t rows = std::min<std::size_t>(part->rows(), 200);
    try {
      r.lipschitz_lower_bound = stability::estimate_cycle_lipschitz(ck.pair, part->x.slice_rows(0, rows),
                                                                    rows * (rows - 1) / 2,
                                                                    derive_seed(c.plan.seed, 30))
                                    .lower_bound;
    } catch (const std::invalid_argument&) {
    }
  }
  const fs::path dir = out_flag.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(out_flag);
  make_dir(dir.empty() ? fs::path(".") : dir);
  write_reports_csv(dir / "eval_report.csv", {r});
  write_reports_json(dir / "eval_report.json", {r});
  print_report(r);
  if (plot) {
    const std::string xn = part->x_names.empty() ? "x" : part->x_names[0];
    const std::string yn = part->y_names.empty() ? "y" : part->y_names[0];
    plot_direction(dir / "forward.svg", data.label + " forward (" + std::string(name(c.plan.strategy)) + ")",
                   part->x, part->y, ck.pair.phi().predict(part->x), xn, yn);
    plot_direction(dir / "backward.svg", data.label + " backward (" + std::string(name(c.plan.strategy)) + ")",
                   part->y, part->x, ck.pair.psi().predict(part->y), yn, xn);
    std::cout << "wrote " << (dir / "forward.svg").string() << " and " << (dir / "backward.svg").string() << "\n";
  }
  return kOk;
}

// ---- sweep -------------------------------------------------------------------

int cmd_sweep(const Overrides& o, int jobs) {
  const ExperimentConfig c = o.resolve();
  if (c.grid.empty()) throw ConfigError("sweep needs a non-empty grid in the config");
  const auto cells = expand_grid(c);
  struct Job {
    ExperimentConfig config;
    std::string data_key;
  };
  std::vector<Job> runs;
  std::map<std::string, PreparedData> data;
  for (const auto& [cell, assignment] : cells) {
    const std::string key = to_json(cell).at(cell.data.task ? "task" : "csv").dump();
    if (!data.contains(key)) data.emplace(key, prepare_data(cell));
    for (auto seed : cell.seeds) {
      Job j{cell, key};
      j.config.plan.seed = seed;
      runs.push_back(std::move(j));
    }
  }
  std::cout << "sweep: " << cells.size() << " grid cells x " << c.seeds.size() << " seeds = " << runs.size()
            << " runs\n";
  std::vector<MetricsReport> reports(runs.size());
  std::vector<std::string> failures(runs.size());
  if (jobs > 0) omp_set_num_threads(jobs);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < runs.size(); ++i) {
    try {
      reports[i] = run_experiment(runs[i].config, data.at(runs[i].data_key)).report;
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  std::vector<MetricsReport> done;
  std::string failure_text = "task,strategy,seed,error\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (failures[i].empty()) {
      done.push_back(reports[i]);
    } else {
      ++failed;
      failure_text += runs[i].config.data.label() + "," + std::string(name(runs[i].config.plan.strategy)) + "," +
                      std::to_string(runs[i].config.plan.seed) + ",\"" + failures[i] + "\"\n";
    }
  }
  fill_improvements(done);
  const auto summary = summarize(done);
  make_dir(c.output_dir);
  write_reports_csv(c.output_dir / "runs.csv", done);
  write_reports_json(c.output_dir / "runs.json", done);
  write_summary_csv(c.output_dir / "summary.csv", summary);
  const std::string table = comparison_table(summary);
  write_text(c.output_dir / "comparison.tsv", table);
  if (failed) write_text(c.output_dir / "failures.csv", failure_text);
  std::cout << table;
  for (const auto& s : summary) {
    std::cout << s.task << " " << name(s.strategy) << " " << name(s.update_mode) << " batch " << s.batch_fraction
              << ": converged " << s.converged << "/" << s.runs << "\n";
  }
  if (failed) std::cout << failed << " run(s) failed; see failures.csv\n";
  return kOk;
}

// ---- stability ---------------------------------------------------------------

struct StabilityArgs {
  stability::SuiteConfig suite;
  double lipschitz = -1.0;
  double delta_max = 0.0;
  std::size_t trajectories = 3;
  std::string checkpoint;
  std::size_t samples = 200;
  std::size_t pairs = 20000;
  std::string out;
  CLI::Option* lipschitz_opt = nullptr;
};

int cmd_stability(const StabilityArgs& a) {
  const fs::path dir = a.out;
  if (!a.checkpoint.empty()) {
    const Checkpoint ck = read_checkpoint(a.checkpoint);
    const ExperimentConfig c = config_from_json(ck.metadata.at("config"));
    const PreparedData data = prepare_data(c);
    const std::size_t rows = std::min(a.samples, data.test.rows());
    const auto est = stability::estimate_cycle_lipschitz(ck.pair, data.test.x.slice_rows(0, rows), a.pairs,
                                                         derive_seed(c.plan.seed, 30));
    make_dir(dir);
    const nlohmann::json j = {{"map", "psi(phi(x))"},
                              {"samples", rows},
                              {"pairs", est.pairs},
                              {"lipschitz_lower_bound", est.lower_bound},
                              {"note", "empirical maximum over sampled pairs; a lower bound on the true constant"}};
    write_text(dir / "lipschitz.json", j.dump(2) + "\n");
    std::cout << "Lipschitz lower bound of psi(phi(x)) over " << est.pairs << " pairs: "
              << format_double(est.lower_bound) << "\n";
    return kOk;
  }

  make_dir(dir);
  if (a.lipschitz_opt && a.lipschitz_opt->count() > 0) {
    if (!(a.lipschitz >= 0.0 && a.lipschitz < 1.0)) {
      throw ConfigError("--lipschitz must lie in [0, 1), got " + std::to_string(a.lipschitz));
    }
    if (!(a.delta_max >= 0.0)) throw ConfigError("--delta-max must be non-negative");
    auto sys = stability::random_affine_contraction(a.suite.dimension, a.lipschitz, a.delta_max, a.suite.seed);
    sys.system.split = a.suite.split;
    Rng rng(derive_seed(a.suite.seed, 1));
    const stability::State x0 = sys.system.equilibrium + stability::sample_ball(a.suite.dimension, 1.0, rng);
    const auto rec = stability::simulate(sys.system, x0, a.suite.steps, derive_seed(a.suite.seed, 2));
    const auto rep = stability::check_decrease(rec, sys.system);
    stability::write_trajectory_csv(dir / "trajectory.csv", rec, rep);
    std::cout << "steps " << rec.steps() << ": condition met " << rep.condition_met << " (decrease "
              << rep.decreases << ", violation " << rep.violations << "), condition not met " << rep.not_met
              << ", bound failures " << rep.bound_failures << "\n";
    if (rec.aborted_at) std::cout << "aborted: " << rec.abort_reason << "\n";
    return rep.passed() && !rec.aborted_at ? kOk : kViolation;
  }

  if (!(a.suite.lipschitz_max < 1.0 && a.suite.lipschitz_min >= 0.0 && a.suite.lipschitz_min <= a.suite.lipschitz_max)) {
    throw ConfigError("need 0 <= --l-min <= --l-max < 1");
  }
  const auto result = stability::run_suite(
      a.suite, [&](std::size_t k, const stability::AffineSystem&, const stability::TrajectoryRecord& rec,
                   const stability::DecreaseReport& rep) {
        if (k >= a.trajectories) return;
        char name_buf[40];
        std::snprintf(name_buf, sizeof(name_buf), "trajectory_%04zu.csv", k);
        stability::write_trajectory_csv(dir / name_buf, rec, rep);
      });
  const nlohmann::json summary = {{"systems", result.systems},
                                  {"steps", result.steps},
                                  {"condition_met", result.condition_met},
                                  {"decreases", result.decreases},
                                  {"violations", result.violations},
                                  {"condition_not_met", result.not_met},
                                  {"bound_failures", result.bound_failures},
                                  {"aborted", result.aborted},
                                  {"passed", result.passed()}};
  write_text(dir / "stability_summary.json", summary.dump(2) + "\n");
  std::cout << result.systems << " systems, " << result.steps << " steps: condition met " << result.condition_met
            << " (decrease " << result.decreases << ", violation " << result.violations
            << "), condition not met " << result.not_met << ", bound failures " << result.bound_failures << "\n";
  return result.passed() ? kOk : kViolation;
}

std::string default_out() {
  const char* env = std::getenv("CYCLEREG_OUT");
  return env && *env ? env : "out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cycle-consistent forward/backward regression"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and its manifest");
  std::string gen_task;
  std::size_t gen_n = 20000;
  std::uint64_t gen_seed = 7;
  std::vector<std::string> gen_ranges;
  std::string gen_out = default_out();
  gen->add_option("--task", gen_task, "task id")->required();
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--range", gen_ranges, "input range low,high (repeat per input)");
  gen->add_option("-o,--out", gen_out, "output directory");

  auto* train_cmd = app.add_subcommand("train", "train one model pair");
  Overrides train_o;
  train_o.add(train_cmd, false);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ck, eval_split = "test", eval_out;
  bool eval_plot = false;
  eval->add_option("--checkpoint", eval_ck, "checkpoint.bin written by train")->required();
  eval->add_option("--split", eval_split, "train, validation or test");
  eval->add_flag("--plot", eval_plot, "write forward.svg and backward.svg");
  eval->add_option("-o,--out", eval_out, "output directory (default: the checkpoint's)");

  auto* sweep = app.add_subcommand("sweep", "run a grid of experiments over seeds");
  Overrides sweep_o;
  sweep_o.add(sweep, true);
  int jobs = 0;
  sweep->add_option("-j,--jobs", jobs, "worker threads (default: all cores)");

  auto* stab = app.add_subcommand("stability", "Lyapunov decrease checks on perturbed contractions");
  StabilityArgs sa;
  sa.out = default_out();
  stab->add_option("--systems", sa.suite.systems, "random systems in the suite");
  stab->add_option("--dim", sa.suite.dimension, "state dimension");
  stab->add_option("--split", sa.suite.split, "size of the first state block");
  stab->add_option("--steps", sa.suite.steps, "steps per trajectory");
  stab->add_option("--l-min", sa.suite.lipschitz_min, "smallest Lipschitz bound");
  stab->add_option("--l-max", sa.suite.lipschitz_max, "largest Lipschitz bound");
  stab->add_option("--delta-fraction", sa.suite.delta_fraction, "delta_max / ((1 - L) ||X_0 - X*||)");
  stab->add_option("--seed", sa.suite.seed, "suite seed");
  stab->add_option("--trajectories", sa.trajectories, "trajectory CSVs to write");
  sa.lipschitz_opt = stab->add_option("--lipschitz", sa.lipschitz, "simulate one system with this L");
  stab->add_option("--delta-max", sa.delta_max, "perturbation bound for --lipschitz");
  stab->add_option("--from-checkpoint", sa.checkpoint, "estimate the Lipschitz constant of psi o phi");
  stab->add_option("--samples", sa.samples, "test rows used with --from-checkpoint");
  stab->add_option("--pairs", sa.pairs, "sampled pairs with --from-checkpoint");
  stab->add_option("-o,--out", sa.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen) return cmd_gen_data(gen_task, gen_n, gen_seed, gen_ranges, gen_out);
    if (*train_cmd) return cmd_train(train_o);
    if (*eval) return cmd_eval(eval_ck, eval_split, eval_plot, eval_out);
    if (*sweep) return cmd_sweep(sweep_o, jobs);
    if (*stab) return cmd_stability(sa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const CsvError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
