#include "mixprompt/cli.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "mixprompt/augment.hpp"
#include "mixprompt/bench.hpp"
#include "mixprompt/classify.hpp"
#include "mixprompt/corpus.hpp"
#include "mixprompt/errors.hpp"
#include "mixprompt/extract.hpp"
#include "mixprompt/http_backend.hpp"
#include "mixprompt/mock_backend.hpp"
#include "mixprompt/task_spec.hpp"
#include "mixprompt/text_util.hpp"

#ifndef MIXPROMPT_VERSION
#define MIXPROMPT_VERSION "0.0.0"
#endif

namespace mixprompt::cli {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Thrown for a subcommand whose run aborted after writing partial output.
struct RuntimeFailure : Error {
  using Error::Error;
};

struct DatasetFlags {
  std::string path;
  std::string format;  // jsonl | tsv; empty guesses from the extension
  std::string split;
  bool tsv_header = false;

  void add(CLI::App* app, const std::string& flag, const std::string& help, bool required) {
    auto* opt = app->add_option(flag, path, help);
    if (required) opt->required();
    app->add_option("--format", format, "Dataset format (jsonl, tsv); default from extension")
        ->check(CLI::IsMember({"jsonl", "tsv"}));
    app->add_flag("--tsv-header", tsv_header, "TSV files start with a header row");
  }

  LoadOptions options(const std::string& file) const {
    LoadOptions o;
    o.format = format.empty() ? format_from_path(file) : parse_dataset_format(format);
    o.tsv_header = tsv_header;
    return o;
  }

  Dataset load() const { return load(path); }

  Dataset load(const std::string& file,
               std::optional<std::vector<std::string>> labels = std::nullopt) const {
    LoadOptions o = options(file);
    o.labels = std::move(labels);
    Dataset d = load_dataset(file, o);
    if (!split.empty()) return d.split(split);
    return d;
  }
};

struct BackendFlags {
  std::string kind = "mock";
  std::string mock_config;
  std::string base_url = "https://api.openai.com";
  std::string model = "davinci";

  void add(CLI::App* app) {
    app->add_option("--backend", kind, "Completion backend (mock, http)")
        ->check(CLI::IsMember({"mock", "http"}));
    app->add_option("--mock-config", mock_config, "Mock backend fixture (JSON)");
    app->add_option("--base-url", base_url, "HTTP backend base URL");
    app->add_option("--model", model, "HTTP backend model name");
  }

  std::unique_ptr<Backend> make() const {
    if (kind == "http") {
      // The only environment variable the tool reads.
      return std::make_unique<HttpBackend>(HttpBackendConfig::from_env(base_url, model));
    }
    MockConfig config = mock_config.empty() ? MockConfig{} : load_mock_config(mock_config);
    return std::make_unique<MockBackend>(std::move(config));
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("failed writing " + path);
}

std::string json_to_flag_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config values must be strings, numbers or booleans");
}

// Fills options that were not given on the command line from a JSON object
// keyed by long flag name. A manifest written by a previous run is accepted
// too, which is how runs are repeated.
void apply_flag_config(CLI::App* app, const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + " is not valid JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) doc = doc["config"];
  if (!doc.is_object()) throw ConfigError(path + " must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") continue;
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr) throw ConfigError(path + ": unknown setting '" + key + "'");
    if (opt->count() > 0) continue;  // flags win
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(json_to_flag_value(item));
    } else {
      opt->add_result(json_to_flag_value(value));
    }
    opt->run_callback();
  }
}

// Effective option values, keyed by long flag name.
ordered_json effective_flags(const CLI::App* app) {
  ordered_json flags = ordered_json::object();
  for (const CLI::Option* opt : app->get_options()) {
    std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_items_expected_max() > 1) {
        flags[name] = results;
      } else {
        flags[name] = results.back();
      }
    } else if (opt->get_items_expected_max() == 1 && !opt->get_default_str().empty()) {
      flags[name] = opt->get_default_str();
    }
  }
  return flags;
}

void write_manifest(const std::string& out_path, const CLI::App* app, ordered_json extra) {
  ordered_json doc = {{"tool", "mixprompt"},
                      {"version", MIXPROMPT_VERSION},
                      {"command", app->get_name()},
                      {"config", effective_flags(app)}};
  for (auto& [key, value] : extra.items()) doc[key] = value;
  write_file(out_path + ".manifest.json", doc.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---- subcommands ----------------------------------------------------------

struct SubsampleCmd {
  DatasetFlags data;
  std::string amount;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App* app) {
    data.add(app, "--dataset", "Input dataset", true);
    app->add_option("--split", data.split, "Only sample from this split");
    app->add_option("--amount", amount, "Fraction (0.01) or per-class count (10)")->required();
    app->add_option("--seed", seed, "Sampling seed");
    app->add_option("--out", out, "Output dataset")->required();
  }

  int run(const CLI::App* app, std::ostream& os) {
    Dataset d = data.load();
    Dataset sub = class_balanced_subsample(d, parse_subsample_amount(amount), seed);
    SaveOptions so;
    so.format = format_from_path(out);
    save_dataset(sub, out, so);
    ordered_json counts = ordered_json::object();
    auto cc = sub.class_counts();
    for (std::size_t c = 0; c < cc.size(); ++c) counts[sub.labels()[c]] = cc[c];
    write_manifest(out, app,
                   {{"input_fingerprint", dataset_fingerprint(d)},
                    {"output_fingerprint", dataset_fingerprint(sub)},
                    {"class_counts", counts}});
    os << sub.size() << " examples written to " << out << "\n";
    return kExitOk;
  }
};

struct AugmentCmd {
  DatasetFlags data;
  std::string method = "gpt3mix";
  std::string spec = "generic";
  double ratio = 10.0;
  std::size_t k = kDefaultAnchorCount;
  int max_retries = 4;
  bool no_dedup = false;
  std::size_t concurrency = 4;
  int max_tokens = 80;
  double temperature = 1.0;
  double top_p = 1.0;
  double frequency_penalty = 0.02;
  double alpha = 0.1;
  std::vector<std::string> ops = {"rs", "rd"};
  std::string lexicon;
  std::optional<std::size_t> n_aug;
  std::uint64_t seed = 0;
  std::string out;
  BackendFlags backend;

  void add(CLI::App* app) {
    data.add(app, "--dataset", "Source dataset", true);
    app->add_option("--split", data.split, "Only augment this split");
    app->add_option("--method", method, "Augmenter (gpt3mix, eda)")
        ->check(CLI::IsMember({"gpt3mix", "eda"}));
    app->add_option("--spec", spec, "Task specification: built-in name, 'generic' or a file");
    app->add_option("--ratio", ratio, "Synthetic examples per real example");
    app->add_option("--k", k, "Examples per prompt");
    app->add_option("--max-retries", max_retries, "Extra attempts per slot");
    app->add_flag("--no-dedup", no_dedup, "Keep duplicate generations");
    app->add_option("--concurrency", concurrency, "Concurrent backend calls");
    app->add_option("--max-tokens", max_tokens, "Generation length limit");
    app->add_option("--temperature", temperature, "Sampling temperature");
    app->add_option("--top-p", top_p, "Nucleus sampling mass");
    app->add_option("--frequency-penalty", frequency_penalty, "Frequency penalty");
    app->add_option("--alpha", alpha, "EDA: fraction of words changed");
    app->add_option("--ops", ops, "EDA operations (sr, ri, rs, rd)")
        ->delimiter(',')
        ->default_str("rs,rd");
    app->add_option("--lexicon", lexicon, "EDA synonym lexicon");
    app->add_option("--n-aug", n_aug, "EDA copies per example; default ceil(ratio)");
    app->add_option("--seed", seed, "Augmentation seed");
    app->add_option("--out", out, "Output file")->required();
    backend.add(app);
  }

  int run(const CLI::App* app, std::ostream& os) {
    Dataset d = data.load();
    if (method == "eda") return run_eda(app, d, os);

    TaskSpecification task = resolve_task_spec(spec, d.labels());
    AugmentConfig config;
    config.k = k;
    config.ratio = ratio;
    config.max_retries = max_retries;
    config.dedup = !no_dedup;
    config.seed = seed;
    config.concurrency = concurrency;
    config.generation = default_generation_params(task);
    config.generation.max_tokens = max_tokens;
    config.generation.temperature = temperature;
    config.generation.top_p = top_p;
    config.generation.frequency_penalty = frequency_penalty;
    config.validate();

    auto lm = backend.make();
    AugmentRun run = gpt3mix_augment(d, task, *lm, config);
    save_records(run.records, d.labels(), out);
    write_manifest(out, app,
                   {{"input_fingerprint", dataset_fingerprint(d)},
                    {"run", ordered_json::parse(run_manifest_json(run, task, d.size()))}});
    os << run.records.size() << " records written to " << out << " (" << run.skipped
       << " skipped, " << run.requests_made << " requests)\n";
    if (run.aborted) throw RuntimeFailure("augmentation aborted: " + run.abort_reason);
    return kExitOk;
  }

  int run_eda(const CLI::App* app, const Dataset& d, std::ostream& os) {
    EdaConfig config;
    config.alpha = alpha;
    config.ops.clear();
    for (const auto& op : ops) config.ops.push_back(parse_eda_op(op));
    config.n_aug_per_example = n_aug ? *n_aug : augmentation_target(ratio, 1);
    if (!lexicon.empty()) config.lexicon = load_lexicon(lexicon);
    config.seed = seed;
    config.validate();
    Dataset extra(d.labels(), eda_augment(d, config));
    SaveOptions so;
    so.format = format_from_path(out);
    save_dataset(extra, out, so);
    write_manifest(out, app,
                   {{"input_fingerprint", dataset_fingerprint(d)},
                    {"output_fingerprint", dataset_fingerprint(extra)}});
    os << extra.size() << " examples written to " << out << "\n";
    return kExitOk;
  }
};

struct TrainCmd {
  DatasetFlags data;
  std::string validation;
  std::string validation_split;
  std::vector<std::string> synthetic;
  std::vector<std::string> extra;
  std::string label_mode = "soft";
  TrainConfig train;
  FeatureConfig features;
  std::string metric = "accuracy";
  std::string out;

  void add(CLI::App* app) {
    data.add(app, "--train", "Real training examples", true);
    app->add_option("--split", data.split, "Training split of --train");
    app->add_option("--validation", validation, "Validation dataset for early stopping");
    app->add_option("--validation-split", validation_split,
                    "Validation split of --validation (or of --train when it is absent)");
    app->add_option("--synthetic", synthetic, "Augmentation records (repeatable)")
        ->default_str("");
    app->add_option("--extra", extra, "Extra labeled examples, e.g. EDA output (repeatable)")
        ->default_str("");
    app->add_option("--label-mode", label_mode, "Synthetic label use (soft, hard)")
        ->check(CLI::IsMember({"soft", "hard"}));
    app->add_option("--lr", train.learning_rate, "Peak learning rate");
    app->add_option("--weight-decay", train.weight_decay, "Decoupled weight decay");
    app->add_option("--epochs", train.max_epochs, "Maximum epochs");
    app->add_option("--patience", train.patience, "Epochs without improvement before stopping");
    app->add_option("--warmup", train.warmup_epochs, "Linear warm-up epochs");
    app->add_option("--batch-size", train.batch_size, "Mini-batch size");
    app->add_option("--metric", metric, "Early-stopping metric (accuracy, loss)")
        ->check(CLI::IsMember({"accuracy", "loss"}));
    app->add_option("--ngram-max", features.ngram_max, "Longest hashed n-gram");
    app->add_option("--buckets", features.hash_buckets, "Hashed feature buckets");
    app->add_option("--seed", train.seed, "Training seed");
    app->add_option("--out", out, "Model file (JSON)")->required();
  }

  int run(const CLI::App* app, std::ostream& os) {
    train.metric = metric == "loss" ? ValidationMetric::kLoss : ValidationMetric::kAccuracy;
    LoadOptions lo = data.options(data.path);
    Dataset all = load_dataset(data.path, lo);
    Dataset real = data.split.empty() ? all : all.split(data.split);
    const auto& labels = real.labels();
    Dataset val(labels, {});
    if (!validation.empty()) {
      LoadOptions vo = data.options(validation);
      vo.labels = labels;
      val = load_dataset(validation, vo);
      if (!validation_split.empty()) val = val.split(validation_split);
    } else if (!validation_split.empty()) {
      val = all.split(validation_split);
    }

    std::vector<TrainExample> examples;
    for (const auto& ex : real.examples()) examples.push_back(one_hot_example(ex, labels.size()));
    std::size_t n_synthetic = 0;
    for (const auto& path : synthetic) {
      for (const auto& r : load_records(path, labels)) {
        if (label_mode == "soft") {
          examples.push_back({r.text, r.soft_label});
        } else {
          examples.push_back(one_hot_example(to_hard_label(r), labels.size()));
        }
        ++n_synthetic;
      }
    }
    for (const auto& path : extra) {
      for (const auto& ex : data.load(path, labels).examples()) {
        examples.push_back(one_hot_example(ex, labels.size()));
        ++n_synthetic;
      }
    }
    TrainResult result = mixprompt::train(examples, val, train, features);
    result.model.save(out);
    write_manifest(out, app,
                   {{"real_examples", real.size()},
                    {"synthetic_examples", n_synthetic},
                    {"best_epoch", result.best_epoch},
                    {"epochs_run", result.epochs_run},
                    {"validation_scores", result.scores}});
    os << "model written to " << out << " (best epoch " << result.best_epoch << " of "
       << result.epochs_run << ")\n";
    return kExitOk;
  }
};

struct EvaluateCmd {
  DatasetFlags data;
  std::string model;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Trained model")->required();
    data.add(app, "--test", "Test dataset", true);
    app->add_option("--split", data.split, "Evaluate on this split only");
    app->add_option("--out", out, "Write the result JSON here too");
  }

  int run(const CLI::App* app, std::ostream& os) {
    ClassifierModel m = ClassifierModel::load(model);
    Dataset test = data.load(data.path, m.labels());
    double acc = evaluate(m, test);
    ordered_json result = {{"accuracy", acc}, {"examples", test.size()}};
    os << result.dump() << "\n";
    if (!out.empty()) {
      write_file(out, result.dump(2) + "\n");
      write_manifest(out, app, {{"test_fingerprint", dataset_fingerprint(test)}});
    }
    return kExitOk;
  }
};

struct NormalizeCmd {
  DatasetFlags data;
  std::string out;

  void add(CLI::App* app) {
    data.add(app, "--dataset", "Input dataset", true);
    app->add_option("--out", out, "Output dataset")->required();
  }

  int run(const CLI::App* app, std::ostream& os) {
    Dataset d = data.load();
    std::vector<LabeledExample> examples;
    examples.reserve(d.size());
    for (const auto& ex : d.examples()) examples.push_back({normalize_text(ex.text), ex.label});
    Dataset normalized(d.labels(), std::move(examples), d.splits());
    SaveOptions so;
    so.format = format_from_path(out);
    save_dataset(normalized, out, so);
    write_manifest(out, app, {{"output_fingerprint", dataset_fingerprint(normalized)}});
    os << normalized.size() << " examples written to " << out << "\n";
    return kExitOk;
  }
};

struct ValidateSpecCmd {
  std::string spec;
  std::string labels;
  DatasetFlags data;

  void add(CLI::App* app) {
    app->add_option("--spec", spec, "Built-in name or specification file")->required();
    app->add_option("--labels", labels, "Comma-separated label set to bind against");
    data.add(app, "--dataset", "Bind against this dataset's labels", false);
  }

  int run(const CLI::App*, std::ostream& os) {
    TaskSpecification task;
    if (!data.path.empty()) {
      task = resolve_task_spec(spec, data.load().labels());
    } else if (!labels.empty()) {
      auto names = split_list(labels);
      task = resolve_task_spec(spec, names);
    } else {
      task = resolve_task_spec(spec);
    }
    validate_task_spec(task);
    os << task_spec_to_json(task) << "\n";
    return kExitOk;
  }
};

struct ExperimentFlags {
  std::string config;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> concurrency;
  std::optional<std::string> backend_kind;
  std::optional<std::string> mock_config;
  std::optional<std::string> base_url;
  std::optional<std::string> model;
  std::string style = "markdown";
  std::string report;
  std::string log;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Experiment config (JSON)")->required();
    app->add_option("--trials", trials, "Override the number of trials");
    app->add_option("--seed", seed, "Override the master seed");
    app->add_option("--concurrency", concurrency, "Concurrent backend calls");
    app->add_option("--backend", backend_kind, "Completion backend (mock, http)")
        ->check(CLI::IsMember({"mock", "http"}));
    app->add_option("--mock-config", mock_config, "Mock backend fixture (JSON)");
    app->add_option("--base-url", base_url, "HTTP backend base URL");
    app->add_option("--model", model, "HTTP backend model name");
    app->add_option("--style", style, "Report style (markdown, tsv)")
        ->check(CLI::IsMember({"markdown", "tsv"}));
    app->add_option("--report", report, "Write the rendered table here");
    app->add_option("--log", log, "Write the per-trial JSONL log here");
  }

  ExperimentConfig load() const {
    ExperimentConfig c = load_experiment_config(config);
    if (trials) c.trials = *trials;
    if (seed) c.master_seed = *seed;
    if (concurrency) c.augment.concurrency = *concurrency;
    if (backend_kind) c.backend.kind = *backend_kind;
    if (mock_config) c.backend.mock = load_mock_config(*mock_config);
    if (base_url) c.backend.base_url = *base_url;
    if (model) c.backend.model = *model;
    c.validate();
    return c;
  }

  std::unique_ptr<Backend> backend(const ExperimentConfig& c) const {
    BackendFlags b;
    b.kind = c.backend.kind;
    b.base_url = c.backend.base_url;
    b.model = c.backend.model;
    if (b.kind == "http") return b.make();
    return std::make_unique<MockBackend>(c.backend.mock);
  }

  bool needs_backend(const ExperimentConfig& c, bool ablation) const {
    return ablation || std::find(c.augmenters.begin(), c.augmenters.end(),
                                 AugmenterKind::kGpt3Mix) != c.augmenters.end();
  }

  int finish(const CLI::App* app, const ExperimentConfig& c,
             std::span<const TrialReport> reports, ordered_json extra, std::ostream& os) {
    std::string table = format_report(reports, parse_report_style(style));
    std::string trial_log = trial_log_jsonl(reports);
    os << table;
    if (!log.empty()) write_file(log, trial_log);
    if (!report.empty()) {
      write_file(report, table);
      extra["experiment"] = ordered_json::parse(experiment_config_to_json(c));
      extra["log"] = log;
      write_manifest(report, app, std::move(extra));
    }
    bool complete = std::all_of(reports.begin(), reports.end(),
                                [](const TrialReport& r) { return r.complete; });
    if (!complete) throw RuntimeFailure("some trials failed; see the report footnotes");
    return kExitOk;
  }
};

struct BenchCmd {
  ExperimentFlags exp;

  void add(CLI::App* app) { exp.add(app); }

  int run(const CLI::App* app, std::ostream& os) {
    ExperimentConfig c = exp.load();
    ExperimentData data = load_experiment_data(c);
    std::unique_ptr<Backend> lm;
    if (exp.needs_backend(c, false)) lm = exp.backend(c);
    auto reports = run_experiment(c, data, lm.get());
    return exp.finish(app, c, reports, ordered_json::object(), os);
  }
};

struct AblateCmd {
  ExperimentFlags exp;
  std::string kind;
  std::string values;

  void add(CLI::App* app) {
    exp.add(app);
    app->add_option("--kind", kind, "Ablation axis (k_sweep, label_mode, task_spec, ratio_sweep)")
        ->required()
        ->check(CLI::IsMember({"k_sweep", "label_mode", "task_spec", "ratio_sweep"}));
    app->add_option("--values", values, "Comma-separated values along the axis");
  }

  int run(const CLI::App* app, std::ostream& os) {
    ExperimentConfig c = exp.load();
    ExperimentData data = load_experiment_data(c);
    auto lm = exp.backend(c);
    auto vals = split_list(values);
    AblationKind k = parse_ablation_kind(kind);
    auto reports = run_ablation(k, c, data, vals, lm.get());
    return exp.finish(app, c, reports, {{"ablation", kind}, {"values", vals}}, os);
  }
};

void add_config_option(CLI::App* app, std::string& path) {
  app->add_option("--config", path, "JSON file of flag values (or a previous manifest)");
}

class LoggerScope {
 public:
  LoggerScope(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("mixprompt", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::from_str(level));
    spdlog::set_default_logger(logger);
  }
  ~LoggerScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mixprompt: prompt-based data augmentation with soft labels"};
  app.name("mixprompt");
  app.set_version_flag("--version", MIXPROMPT_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  SubsampleCmd subsample;
  AugmentCmd augment;
  TrainCmd train_cmd;
  EvaluateCmd evaluate_cmd;
  BenchCmd bench;
  AblateCmd ablate;
  NormalizeCmd normalize;
  ValidateSpecCmd validate_spec;
  std::string flag_config;

  auto* s_subsample = app.add_subcommand("subsample", "Class-balanced seeded sub-sample");
  auto* s_augment = app.add_subcommand("augment", "Generate synthetic examples");
  auto* s_train = app.add_subcommand("train", "Train the downstream classifier");
  auto* s_evaluate = app.add_subcommand("evaluate", "Accuracy of a model on a test set");
  auto* s_bench = app.add_subcommand("bench", "Seeded multi-trial experiment");
  auto* s_ablate = app.add_subcommand("ablate", "Ablation along one axis");
  auto* s_normalize = app.add_subcommand("normalize", "Normalize dataset texts");
  auto* s_validate = app.add_subcommand("validate-spec", "Check a task specification");

  subsample.add(s_subsample);
  augment.add(s_augment);
  train_cmd.add(s_train);
  evaluate_cmd.add(s_evaluate);
  normalize.add(s_normalize);
  validate_spec.add(s_validate);
  for (auto* sub : {s_subsample, s_augment, s_train, s_evaluate, s_normalize, s_validate}) {
    add_config_option(sub, flag_config);
  }
  bench.add(s_bench);
  ablate.add(s_ablate);

  // Required flags may come from --config, which is read after parsing, so the
  // requirement is checked by hand once the config has been applied.
  std::vector<std::pair<const CLI::App*, CLI::Option*>> required;
  for (auto* sub : app.get_subcommands({})) {
    for (auto* opt : sub->get_options()) {
      if (!opt->get_required()) continue;
      opt->required(false);
      opt->description(opt->get_description() + " (required)");
      required.emplace_back(sub, opt);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  LoggerScope logging(err, log_level);
  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!flag_config.empty()) apply_flag_config(sub, flag_config);
    for (const auto& [owner, opt] : required) {
      if (owner == sub && opt->count() == 0) {
        throw CLI::RequiredError(opt->get_name());
      }
    }
    if (sub == s_subsample) return subsample.run(sub, out);
    if (sub == s_augment) return augment.run(sub, out);
    if (sub == s_train) return train_cmd.run(sub, out);
    if (sub == s_evaluate) return evaluate_cmd.run(sub, out);
    if (sub == s_bench) return bench.run(sub, out);
    if (sub == s_ablate) return ablate.run(sub, out);
    if (sub == s_normalize) return normalize.run(sub, out);
    if (sub == s_validate) return validate_spec.run(sub, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MultiTokenVerbalizerError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace mixprompt::cli
