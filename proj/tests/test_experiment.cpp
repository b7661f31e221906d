#include <gtest/gtest.h>

#include "cyclereg/experiment.hpp"

using namespace cyclereg;
using nlohmann::json;

TEST(Config, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), ConfigError);  // no data source yet
  c.data.task = TaskId::XSquared;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.plan.epochs, 500u);
  EXPECT_EQ(c.phi.hidden, (std::vector<std::size_t>{64, 64, 64, 64}));
  EXPECT_EQ(c.data.n, 20000u);
}

TEST(Config, ParsesNestedSections) {
  const ExperimentConfig c = config_from_json(json::parse(R"({
    "task": "spring", "n": 300, "data_seed": 4,
    "split": {"train": 0.6, "validation": 0.2, "test": 0.2, "seed": 8},
    "model": {"hidden": [8, 8], "activation": "relu", "batchnorm": false},
    "psi": {"hidden": [16]},
    "plan": {"strategy": "jcm", "beta_f": 0.5, "update_mode": "stepwise"},
    "seeds": [1, 2, 3]
  })"));
  EXPECT_EQ(c.data.task, TaskId::Spring);
  EXPECT_EQ(c.data.n, 300u);
  EXPECT_EQ(c.split.train, 0.6);
  EXPECT_EQ(c.phi.hidden, (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(c.psi.hidden, (std::vector<std::size_t>{16}));
  EXPECT_EQ(c.psi.activation, Activation::Relu);
  EXPECT_EQ(c.plan.strategy, Strategy::Jcm);
  EXPECT_EQ(c.plan.update_mode, UpdateMode::Stepwise);
  EXPECT_EQ(c.seeds.size(), 3u);
  EXPECT_EQ(config_from_json(to_json(c)).plan, c.plan);
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
  EXPECT_THROW(config_from_json(json{{"tsak", "sin"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"model", {{"widths", {4}}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"plan", {{"lr", 0.1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"split", {{"holdout", 0.1}}}}), ConfigError);
}

TEST(Config, RangeChecksBeforeCompute) {
  auto invalid = [](json j) {
    EXPECT_THROW(config_from_json(j).validate(), ConfigError) << j.dump();
  };
  invalid(json{{"plan", {{"batch_fraction", 0.6}}}});
  invalid(json{{"plan", {{"alpha_f", 4.0}}}});
  invalid(json{{"task", "not_a_task"}});
  invalid(json{{"seeds", json::array()}});
  invalid(json{{"grid", {{"batch_fraction", json::array()}}}});
  invalid(json{{"grid", {{"batch_fraction", {0.1, 0.9}}}}});
}

TEST(Config, CsvSourceUsesLongerEpochDefault) {
  const auto c = config_from_json(json{{"csv", {{"path", "d.csv"}, {"x_columns", {"a"}}, {"y_columns", {"b"}}}}});
  EXPECT_EQ(c.plan.epochs, 2000u);
  EXPECT_EQ(c.data.label(), "d");
  const auto d = config_from_json(
      json{{"csv", {{"path", "d.csv"}, {"x_columns", {"a"}}, {"y_columns", {"b"}}}}, {"plan", {{"epochs", 7}}}});
  EXPECT_EQ(d.plan.epochs, 7u);
}

TEST(Grid, CartesianExpansion) {
  const auto c = config_from_json(json::parse(R"({
    "grid": {"strategy": ["baseline", "ucm", "jcm"], "task": ["x_squared", "sin"]}
  })"));
  const auto cells = expand_grid(c);
  ASSERT_EQ(cells.size(), 6u);
  std::set<std::pair<Strategy, TaskId>> seen;
  for (const auto& [cfg, assignment] : cells) {
    EXPECT_TRUE(cfg.grid.empty());
    EXPECT_TRUE(assignment.contains("strategy"));
    seen.insert({cfg.plan.strategy, *cfg.data.task});
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Prepare, SplitsAndNormalizesWithTrainingStatistics) {
  const auto c = config_from_json(json{{"task", "x_squared"}, {"n", 1000}});
  const PreparedData d = prepare_data(c);
  EXPECT_EQ(d.train.rows(), 800u);
  EXPECT_EQ(d.test.rows(), 100u);
  ASSERT_TRUE(d.stats.has_value());
  for (double v : d.train.x.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(prepare_data(c).test.x, d.test.x);
}

TEST(Prepare, JcmTrainsOnDecoupledPairs) {
  auto c = config_from_json(json{{"task", "x_squared"}, {"n", 200}, {"plan", {{"strategy", "jcm"}}}});
  const PreparedData d = prepare_data(c);
  EXPECT_EQ(training_view(d.train, c.plan).pairing, Pairing::Decoupled);
  c.plan.strategy = Strategy::Ucm;
  EXPECT_EQ(training_view(d.train, c.plan).pairing, Pairing::Paired);
}

TEST(Run, ReportCarriesLipschitzBound) {
  const auto c = config_from_json(json::parse(R"({
    "task": "x_squared", "n": 400,
    "model": {"hidden": [8], "batchnorm": false},
    "plan": {"strategy": "ucm", "epochs": 3, "batch_fraction": 0.1}
  })"));
  const RunResult r = run_experiment(c, prepare_data(c));
  EXPECT_FALSE(r.report.diverged);
  ASSERT_TRUE(r.report.lipschitz_lower_bound.has_value());
  EXPECT_TRUE(std::isfinite(*r.report.lipschitz_lower_bound));
  EXPECT_EQ(r.report.epochs_run, 3u);
}
