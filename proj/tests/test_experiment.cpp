#include <filesystem>

#include <gtest/gtest.h>

#include "ppo/experiment.hpp"
#include "test_util.hpp"

namespace ppo {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ppo_experiment_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ResultTable table_of(std::initializer_list<ResultEntry> entries) {
  ResultTable t;
  t.entries = entries;
  return t;
}

TEST(NormalizeGroups, DividesByGroupMax) {
  const auto t = normalize_groups(table_of({{"clean", "std", "a", 2.0}, {"clean", "std", "b", 4.0},
                                            {"clean", "std", "c", 8.0}}));
  EXPECT_EQ(t.entries[0].normalized_mse, 0.25);
  EXPECT_EQ(t.entries[1].normalized_mse, 0.5);
  EXPECT_EQ(t.entries[2].normalized_mse, 1.0);
  EXPECT_TRUE(t.degenerate_groups.empty());
}

TEST(NormalizeGroups, SingletonAndIndependentGroups) {
  const auto a = normalize_groups(table_of({{"outliers", "minmax", "x", 0.3}}));
  EXPECT_EQ(a.entries[0].normalized_mse, 1.0);

  const auto base = normalize_groups(table_of({{"clean", "std", "a", 1.0}, {"clean", "std", "b", 3.0},
                                               {"shuffle", "std", "a", 5.0}, {"shuffle", "std", "b", 2.0}}));
  const auto scaled = normalize_groups(table_of({{"clean", "std", "a", 1.0}, {"clean", "std", "b", 3.0},
                                                 {"shuffle", "std", "a", 50.0}, {"shuffle", "std", "b", 20.0}}));
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_DOUBLE_EQ(base.entries[i].normalized_mse, scaled.entries[i].normalized_mse);
}

TEST(NormalizeGroups, DegenerateGroupReportedAsZero) {
  const auto t = normalize_groups(table_of({{"clean", "none", "a", 0.0}, {"clean", "none", "b", 0.0}}));
  EXPECT_EQ(t.entries[0].normalized_mse, 0.0);
  ASSERT_EQ(t.degenerate_groups.size(), 1u);
  EXPECT_EQ(t.degenerate_groups[0].first, "clean");
}

TEST(NormalizeGroups, PreservesOrderingProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    ResultTable t;
    for (int g = 0; g < 3; ++g)
      for (int m = 0; m < 6; ++m)
        t.entries.push_back({"d" + std::to_string(g), "s", "m" + std::to_string(m), rng.uniform(0.01, 5.0)});
    const auto n = normalize_groups(t);
    for (int g = 0; g < 3; ++g) {
      double mx = 0.0;
      for (int i = 0; i < 6; ++i) {
        const auto& a = n.entries[static_cast<std::size_t>(g * 6 + i)];
        EXPECT_GE(a.normalized_mse, 0.0);
        EXPECT_LE(a.normalized_mse, 1.0);
        mx = std::max(mx, a.normalized_mse);
        for (int j = 0; j < 6; ++j) {
          const auto& b = n.entries[static_cast<std::size_t>(g * 6 + j)];
          EXPECT_EQ(a.raw_mse < b.raw_mse, a.normalized_mse < b.normalized_mse);
        }
      }
      EXPECT_EQ(mx, 1.0);
    }
  }
}

TEST(Report, DeterministicCsvWithOneRowPerEntry) {
  const auto t = normalize_groups(table_of({{"clean", "standard", "PPO1", 0.125, 0, 0.001},
                                            {"clean", "standard", "PO 0.5", 1.0 / 3.0},
                                            {"outliers", "standard", "PO", 0.7}}));
  const auto dir = scratch("report");
  const auto files = emit_report(t, dir);
  const std::string first = read_file(dir / "results.csv");
  emit_report(t, dir);
  EXPECT_EQ(read_file(dir / "results.csv"), first);
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 4);
  EXPECT_NE(first.find("clean,standard,PO 0.5,0.33333333333333331,1,0\n"), std::string::npos);
  EXPECT_EQ(files.size(), 3u);  // CSV + two group charts
  EXPECT_TRUE(fs::exists(dir / "mse_outliers_standard.svg"));

  const auto parsed = normalize_groups(parse_results_csv(first));
  EXPECT_EQ(results_csv(parsed), first);
  EXPECT_THROW(emit_report(ResultTable{}, dir), std::invalid_argument);
}

TEST(ModelSpecs, ParseNames) {
  EXPECT_EQ(ModelSpec::parse("PO").name(), "PO");
  EXPECT_EQ(ModelSpec::parse("PO 0.5").name(), "PO 0.5");
  EXPECT_EQ(*ModelSpec::parse("PO 0.25").threshold(), 0.25);
  EXPECT_EQ(ModelSpec::parse("DAE3").kind(), ModelKind::dae3);
  EXPECT_THROW(ModelSpec::parse("PO x"), std::invalid_argument);
  EXPECT_THROW(ModelSpec::parse("PO -1"), std::invalid_argument);
  EXPECT_THROW(ModelSpec::parse("MLP"), std::invalid_argument);
}

TEST(Config, ParsesEveryFieldAndRejectsUnknownKeys) {
  const auto c = parse_experiment_config(R"({
    "source": "synthetic",
    "synthetic": {"rows": 100, "samples": 64, "active_indices": [1, 2], "amplitude_min": -2, "amplitude_max": 2},
    "max_index": 10,
    "eval_fraction": 0.25,
    "scalers": ["minmax", "standard"],
    "noise": "outliers",
    "models": ["PPO2", "PO 0.3"],
    "train": {"epochs": 7, "batch_size": 16, "learning_rates": [0.1], "l2": 0, "validation_fraction": 0.1,
              "optimizer": "sgd"},
    "output_dir": "somewhere",
    "seed": 42
  })");
  EXPECT_EQ(c.synthetic.rows, 100u);
  EXPECT_EQ(c.synthetic.active_indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.max_index, 10u);
  EXPECT_EQ(c.scalers.size(), 2u);
  ASSERT_EQ(c.noises.size(), 1u);
  EXPECT_EQ(c.noises[0], NoiseKind::outliers);
  ASSERT_EQ(c.models.size(), 2u);
  EXPECT_EQ(c.models[1].name(), "PO 0.3");
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.train.optimizer, OptimizerKind::sgd);
  EXPECT_EQ(c.output_dir, "somewhere");
  EXPECT_EQ(c.seed, 42u);

  EXPECT_THROW(parse_experiment_config(R"({"seeed": 1})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"train": {"epoch": 1}})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"synthetic": {"row": 1}})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"noise": ["gaussian"]})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"seed": "seven"})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config("{"), std::invalid_argument);

  const auto defaults = parse_experiment_config("{}");
  EXPECT_EQ(defaults.models.size(), 10u);
  EXPECT_EQ(defaults.train.learning_rates, (std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5}));
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.synthetic = {80, 32, {1, 4, 9}, -1.0, 1.0};
  c.max_index = 6;
  c.scalers = {ScalerKind::none, ScalerKind::minmax};
  c.noises = {NoiseKind::clean, NoiseKind::shuffle};
  c.models = {ModelSpec{ModelKind::ppo1}, ModelSpec{ModelKind::dae1}, ModelSpec{std::optional<double>{}},
              ModelSpec{std::optional<double>{0.5}}};
  c.train.epochs = 3;
  c.train.batch_size = 16;
  c.train.learning_rates = {1e-2, 1e-3};
  c.output_dir = out;
  c.seed = 9;
  return c;
}

TEST(RunExperiment, AllPassIsExactOnUnscaledCleanSyntheticData) {
  const auto out = scratch("allpass");
  const auto table = run_experiment(tiny_config(out));
  const auto* all_pass = table.find("clean", "none", "PO");
  ASSERT_NE(all_pass, nullptr);
  EXPECT_LT(all_pass->raw_mse, 1e-12);
  EXPECT_EQ(table.entries.size(), 16u);
  EXPECT_TRUE(fs::exists(out / "shuffle_minmax" / "checkpoints" / "DAE1.ckpt"));
  EXPECT_TRUE(fs::exists(out / "clean_none" / "history" / "PPO1_lr0.001.csv"));
  EXPECT_FALSE(fs::exists(out / "STALE"));
}

TEST(RunExperiment, RepeatedRunsGiveIdenticalArtifacts) {
  const auto a = scratch("repeat_a"), b = scratch("repeat_b");
  run_experiment(tiny_config(a));
  run_experiment(tiny_config(b));
  EXPECT_EQ(read_file(a / "results.csv"), read_file(b / "results.csv"));
  EXPECT_EQ(read_file(a / "shuffle_minmax" / "checkpoints" / "PPO1.ckpt"),
            read_file(b / "shuffle_minmax" / "checkpoints" / "PPO1.ckpt"));
  EXPECT_EQ(read_file(a / "clean_none" / "eval_noisy.sigmat"), read_file(b / "clean_none" / "eval_noisy.sigmat"));
}

TEST(RunExperiment, TamperedEvaluationFileIsDetected) {
  const auto out = scratch("tamper");
  const auto c = tiny_config(out);
  const auto data = load_source(c);
  const auto basis = TrigBasis::build(32, 6);
  const auto pair = EvalPair::write(out, data.topRows(5), data.topRows(5));
  EXPECT_NO_THROW(pair.load_verified());
  auto m = load_signal_matrix(pair.clean_path);
  m(0, 0) += 1e-9;
  save_signal_matrix(pair.clean_path, m);
  EXPECT_THROW(pair.load_verified(), FormatError);
}

TEST(RunExperiment, FailureIsStageTaggedAndMarksOutputStale) {
  const auto out = scratch("stale");
  auto c = tiny_config(out);
  save_signal_matrix(out / "data.sigmat", load_source(c));
  c.source = SourceKind::dataset_file;
  c.path = out / "data.sigmat";
  c.max_index = 40;  // too many coefficients for 32 samples
  try {
    run_experiment(c);
    FAIL() << "expected ExperimentError";
  } catch (const ExperimentError& e) {
    EXPECT_EQ(e.stage(), "basis");
  }
  EXPECT_TRUE(fs::exists(out / "STALE"));

  c.path = out / "missing.sigmat";
  EXPECT_THROW(run_experiment(c), ExperimentError);
}

TEST(RunExperiment, DatasetFileSourceMatchesSynthetic) {
  const auto out = scratch("file_source");
  auto c = tiny_config(out / "a");
  c.noises = {NoiseKind::outliers};
  c.scalers = {ScalerKind::standard};
  c.models = {ModelSpec{std::optional<double>{0.3}}};
  const auto direct = run_experiment(c);
  save_signal_matrix(out / "data.sigmat", load_source(c));
  c.source = SourceKind::dataset_file;
  c.path = out / "data.sigmat";
  c.output_dir = out / "b";
  const auto from_file = run_experiment(c);
  EXPECT_EQ(results_csv(direct), results_csv(from_file));
}

}  // namespace
}  // namespace ppo
