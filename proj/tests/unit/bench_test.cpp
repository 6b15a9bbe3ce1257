#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "mixprompt/bench.hpp"
#include "mixprompt/errors.hpp"
#include "test_support.hpp"

namespace mp = mixprompt;
namespace mt = mixprompt::testing;

namespace {

mp::TrialReport report(const std::string& column, std::vector<double> accs) {
  mp::TrialReport r;
  r.dataset = "sst2";
  r.amount = "0.01";
  r.column = column;
  r.accuracies = accs;
  r.mean = mp::mean_of(accs);
  r.std = mp::population_std(accs);
  for (std::size_t i = 0; i < accs.size(); ++i) {
    mp::TrialRecord t;
    t.trial = static_cast<int>(i);
    t.accuracy = accs[i];
    r.trials.push_back(t);
  }
  return r;
}

mp::ExperimentConfig small_experiment() {
  mp::ExperimentConfig c;
  c.name = "toy";
  c.task_spec = "sst2";
  c.amounts = {mp::PerClassCount{4}};
  c.augmenters = {mp::AugmenterKind::kNone, mp::AugmenterKind::kEda, mp::AugmenterKind::kGpt3Mix};
  c.trials = 2;
  c.master_seed = 50;
  c.augment.ratio = 2.0;
  c.augment.generation = mp::default_generation_params(*mp::builtin_task_spec("sst2"));
  c.eda.n_aug_per_example = 2;
  c.train.max_epochs = 5;
  c.features.hash_buckets = 1u << 10;
  c.backend.mock = mt::make_disjoint_mock(0.1, 3);
  return c;
}

mp::ExperimentData small_data() {
  auto d = mt::make_disjoint_task(10, 10, 10, 12);
  return {"toy", d.split("train"), d.split("validation"), d.split("test")};
}

}  // namespace

TEST(Stats, MeanStdAndSeeds) {
  std::vector<double> v = {0.628, 0.631, 0.627};
  EXPECT_NEAR(mp::mean_of(v), 0.62866666666, 1e-9);
  // Population std, computed by hand: sqrt(((-.000667)^2 + .002333^2 + .001667^2) / 3).
  EXPECT_NEAR(mp::population_std(v), 0.0016996731711976, 1e-12);
  EXPECT_EQ(mp::population_std(std::vector<double>{0.5}), 0.0);
  EXPECT_EQ(mp::trial_seed(100, 3), 103u);
}

TEST(FormatCell, PercentOneDecimalHalfAway) {
  EXPECT_EQ(mp::format_cell(0.753, 0.045), "75.3_{4.5}");
  EXPECT_EQ(mp::format_cell(0.62866666666, 0.0016996731711976), "62.9_{0.2}");
  EXPECT_EQ(mp::format_cell(0.0, 0.0), "0.0_{0.0}");
  EXPECT_EQ(mp::format_cell(1.0, 0.0), "100.0_{0.0}");
  EXPECT_EQ(mp::format_cell(0.12345, 0.00051), "12.3_{0.1}");
}

TEST(Report, EmptyIsHeaderOnly) {
  std::vector<mp::TrialReport> none;
  EXPECT_EQ(mp::format_report(none, mp::ReportStyle::kMarkdown), "| Dataset | Sub. |\n|---|---|\n");
  EXPECT_EQ(mp::format_report(none, mp::ReportStyle::kTsv), "dataset\tamount\n");
}

TEST(Report, LayoutAndIncompleteCells) {
  auto ok = report("No Aug.", {0.7, 0.8});
  auto bad = report("GPT3Mix", {0.9});
  bad.complete = false;
  mp::TrialRecord failed;
  failed.trial = 1;
  failed.error = "auth: revoked";
  bad.trials.push_back(failed);
  std::vector<mp::TrialReport> reports = {ok, bad};
  EXPECT_EQ(mp::format_report(reports, mp::ReportStyle::kMarkdown),
            "| Dataset | Sub. | No Aug. | GPT3Mix |\n"
            "|---|---|---|---|\n"
            "| sst2 | 0.01 | 75.0_{5.0} | — |\n"
            "\n"
            "— sst2 / 0.01 / GPT3Mix: 1 of 2 trials failed (auth: revoked)\n");
  EXPECT_EQ(mp::format_report(reports, mp::ReportStyle::kTsv),
            "dataset\tamount\tNo Aug.\tGPT3Mix\n"
            "sst2\t0.01\t75.0_{5.0}\t—\n"
            "# — sst2 / 0.01 / GPT3Mix: 1 of 2 trials failed (auth: revoked)\n");
}

TEST(ExperimentConfig, ParseResolvesPathsAndAmounts) {
  auto c = mp::parse_experiment_config(R"({
    "name": "x", "dataset": "data/all.jsonl", "task_spec": "sst2",
    "amounts": [0.01, 10, "0.1"], "augmenters": ["none", "eda"], "label_mode": "hard",
    "trials": 3, "master_seed": 7,
    "augment": {"k": 3, "ratio": 5},
    "training": {"max_epochs": 9, "metric": "loss"},
    "backend": {"kind": "mock", "mock": {"epsilon": 0.2}}
  })",
                                       "/base");
  EXPECT_EQ(c.dataset, std::filesystem::path("/base/data/all.jsonl"));
  ASSERT_EQ(c.amounts.size(), 3u);
  EXPECT_TRUE(std::holds_alternative<mp::Fraction>(c.amounts[0]));
  EXPECT_EQ(std::get<mp::PerClassCount>(c.amounts[1]).value, 10u);
  EXPECT_DOUBLE_EQ(std::get<mp::Fraction>(c.amounts[2]).value, 0.1);
  EXPECT_EQ(c.label_mode, mp::LabelMode::kHard);
  EXPECT_EQ(c.augment.k, 3u);
  EXPECT_EQ(c.train.max_epochs, 9);
  EXPECT_EQ(c.train.metric, mp::ValidationMetric::kLoss);
  EXPECT_DOUBLE_EQ(c.backend.mock.epsilon, 0.2);
  // The manifest summary records the effective settings.
  auto summary = nlohmann::json::parse(mp::experiment_config_to_json(c));
  EXPECT_EQ(summary["amounts"], nlohmann::json::parse("[0.01, 10, 0.1]"));
  EXPECT_EQ(summary["training"]["metric"], "loss");
  EXPECT_EQ(summary["backend"]["mock_epsilon"], 0.2);

  EXPECT_THROW(mp::parse_experiment_config(R"({"trials": 0})"), mp::ConfigError);
  EXPECT_THROW(mp::parse_experiment_config(R"({"augmenters": ["magic"]})"), mp::ConfigError);
  EXPECT_THROW(mp::parse_experiment_config("{"), mp::ConfigError);
}

TEST(Arms, DefaultAndAblationColumns) {
  auto c = small_experiment();
  std::vector<std::string> cols;
  for (const auto& a : mp::default_arms(c)) cols.push_back(a.column);
  EXPECT_EQ(cols, (std::vector<std::string>{"No Aug.", "EDA", "GPT3Mix"}));

  std::vector<std::string> ks = {"1", "4"};
  cols.clear();
  for (const auto& a : mp::ablation_arms(mp::AblationKind::kKSweep, c, ks)) cols.push_back(a.column);
  EXPECT_EQ(cols, (std::vector<std::string>{"k=1", "k=4"}));

  std::vector<std::string> modes = {"hard", "soft"};
  cols.clear();
  for (const auto& a : mp::ablation_arms(mp::AblationKind::kLabelMode, c, modes)) {
    cols.push_back(a.column);
  }
  EXPECT_EQ(cols, (std::vector<std::string>{"No Aug.", "Hard Labels", "Soft-labels"}));

  std::vector<std::string> bad = {"0"};
  EXPECT_THROW(mp::ablation_arms(mp::AblationKind::kKSweep, c, bad), mp::ConfigError);
  EXPECT_THROW(mp::parse_ablation_kind("depth"), mp::ConfigError);
}

TEST(RunExperiment, PairedSubsetsAndDeterminism) {
  auto c = small_experiment();
  auto data = small_data();
  mp::MockBackend mock(c.backend.mock);
  auto a = mp::run_experiment(c, data, &mock);
  ASSERT_EQ(a.size(), 3u);
  for (const auto& r : a) {
    EXPECT_TRUE(r.complete) << r.column;
    ASSERT_EQ(r.trials.size(), 2u);
    for (int t = 0; t < 2; ++t) {
      EXPECT_EQ(r.trials[t].seed, 50u + t);
      EXPECT_EQ(r.trials[t].subset_hash, a[0].trials[t].subset_hash);
      EXPECT_EQ(r.trials[t].real_examples, 8u);
    }
  }
  EXPECT_EQ(a[0].trials[0].synthetic_examples, 0u);
  EXPECT_EQ(a[1].trials[0].synthetic_examples, 16u);
  EXPECT_EQ(a[2].trials[0].synthetic_examples + a[2].trials[0].skipped, 16u);
  auto b = mp::run_experiment(c, data, &mock);
  EXPECT_EQ(mp::format_report(a, mp::ReportStyle::kTsv), mp::format_report(b, mp::ReportStyle::kTsv));
  EXPECT_EQ(mp::trial_log_jsonl(a), mp::trial_log_jsonl(b));
  EXPECT_NE(a[0].trials[0].subset_hash, a[0].trials[1].subset_hash);
}

TEST(RunExperiment, BackendFailureMarksTheCellIncomplete) {
  auto c = small_experiment();
  c.augmenters = {mp::AugmenterKind::kGpt3Mix};
  mt::ScriptedBackend broken([](const mp::Prompt&, const mp::GenerationParams&, std::uint64_t)
                                 -> mp::Completion {
    throw mp::BackendError(mp::BackendErrorKind::kAuth, "revoked", 401);
  });
  auto reports = mp::run_experiment(c, small_data(), &broken);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_FALSE(reports[0].complete);
  EXPECT_TRUE(reports[0].accuracies.empty());
  EXPECT_NE(mp::format_report(reports, mp::ReportStyle::kMarkdown).find("2 of 2 trials failed"),
            std::string::npos);
}

TEST(TrialLog, OneObjectPerTrial) {
  std::vector<mp::TrialReport> reports = {report("No Aug.", {0.5, 0.6, 0.7})};
  auto log = mp::trial_log_jsonl(reports);
  std::size_t lines = 0;
  std::size_t start = 0;
  while (start < log.size()) {
    auto end = log.find('\n', start);
    auto doc = nlohmann::json::parse(log.substr(start, end - start));
    EXPECT_EQ(doc["column"], "No Aug.");
    ++lines;
    start = end + 1;
  }
  EXPECT_EQ(lines, 3u);
}
