#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixprompt/augment.hpp"
#include "mixprompt/classify.hpp"
#include "mixprompt/corpus.hpp"
#include "mixprompt/mock_backend.hpp"
#include "mixprompt/task_spec.hpp"

namespace mixprompt {

enum class AugmenterKind { kNone, kGpt3Mix, kEda };
enum class LabelMode { kSoft, kHard };

AugmenterKind parse_augmenter(std::string_view name);
const char* to_string(AugmenterKind kind) noexcept;
LabelMode parse_label_mode(std::string_view name);
const char* to_string(LabelMode mode) noexcept;

struct BackendSelection {
  std::string kind = "mock";  // mock | http
  MockConfig mock;
  std::string base_url = "https://api.openai.com";
  std::string model = "davinci";
};

struct ExperimentConfig {
  std::string name = "experiment";
  // Either one dataset with train/validation/test splits, or three files.
  std::filesystem::path dataset;
  std::filesystem::path train_path;
  std::filesystem::path validation_path;
  std::filesystem::path test_path;
  DatasetFormat format = DatasetFormat::kJsonl;

  std::string task_spec = "generic";
  std::vector<SubsampleAmount> amounts = {Fraction{0.01}};
  std::vector<AugmenterKind> augmenters = {AugmenterKind::kNone, AugmenterKind::kGpt3Mix};
  LabelMode label_mode = LabelMode::kSoft;
  int trials = 10;
  std::uint64_t master_seed = 0;

  AugmentConfig augment;
  EdaConfig eda;
  TrainConfig train;
  FeatureConfig features;
  BackendSelection backend;

  void validate() const;
};

// JSON document; relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

struct ExperimentData {
  std::string name;
  Dataset train;
  Dataset validation;
  Dataset test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

// One column of a report: an augmenter plus the knobs an ablation varies.
struct Arm {
  std::string column;
  AugmenterKind augmenter = AugmenterKind::kNone;
  LabelMode label_mode = LabelMode::kSoft;
  std::optional<std::size_t> k;
  std::optional<double> ratio;
  std::optional<std::string> task_spec;
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string subset_hash;
  std::optional<double> accuracy;  // absent when the trial failed
  std::size_t real_examples = 0;
  std::size_t synthetic_examples = 0;
  std::size_t skipped = 0;
  std::size_t requests = 0;
  int best_epoch = 0;
  std::string error;
};

struct TrialReport {
  std::string dataset;
  std::string amount;
  std::string column;
  std::vector<double> accuracies;  // successful trials, in trial order
  double mean = 0.0;
  double std = 0.0;  // population
  bool complete = true;
  std::vector<TrialRecord> trials;
};

double mean_of(std::span<const double> values);
double population_std(std::span<const double> values);

// Trial seed: master_seed + trial index.
std::uint64_t trial_seed(std::uint64_t master_seed, int trial) noexcept;

// Runs config.trials seeded trials for one (amount, arm) cell. `backend` may
// be null unless the arm uses gpt3mix.
TrialReport run_trials(const ExperimentConfig& config, const ExperimentData& data,
                       const SubsampleAmount& amount, const Arm& arm, Backend* backend);

std::vector<Arm> default_arms(const ExperimentConfig& config);

// Every amount x augmenter cell of the experiment.
std::vector<TrialReport> run_experiment(const ExperimentConfig& config,
                                        const ExperimentData& data, Backend* backend);

enum class AblationKind { kKSweep, kLabelMode, kTaskSpec, kRatioSweep };

AblationKind parse_ablation_kind(std::string_view name);
const char* to_string(AblationKind kind) noexcept;

// Arms for an ablation axis. label_mode always adds a no-augmentation column
// in front; task_spec values are "generic" and "optimal" (the configured
// spec) or spec names.
std::vector<Arm> ablation_arms(AblationKind kind, const ExperimentConfig& base,
                               std::span<const std::string> values);

// Every amount x value cell; all arms share the subsample seeds.
std::vector<TrialReport> run_ablation(AblationKind kind, const ExperimentConfig& base,
                                      const ExperimentData& data,
                                      std::span<const std::string> values, Backend* backend);

enum class ReportStyle { kTsv, kMarkdown };

ReportStyle parse_report_style(std::string_view name);

// "MEAN_{STD}" in percent with one decimal, rounded half away from zero.
std::string format_cell(double mean, double std);

// Rows are dataset x amount, columns are arms in first-appearance order.
// Incomplete cells render as an em dash with a footnote.
std::string format_report(std::span<const TrialReport> reports, ReportStyle style);

// One JSON object per trial.
std::string trial_log_jsonl(std::span<const TrialReport> reports);

}  // namespace mixprompt
