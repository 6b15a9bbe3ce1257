#include "mixprompt/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixprompt/errors.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SubsampleAmount amount_from_json(const json& j) {
  if (j.is_number_integer() || j.is_number_unsigned()) {
    if (j.get<long long>() < 1) throw ConfigError("per-class counts must be >= 1");
    return PerClassCount{j.get<std::size_t>()};
  }
  if (j.is_number_float()) return Fraction{j.get<double>()};
  if (j.is_string()) return parse_subsample_amount(j.get<std::string>());
  throw ConfigError("sub-sample amounts must be numbers or strings");
}

ordered_json amount_to_json(const SubsampleAmount& amount) {
  if (const auto* f = std::get_if<Fraction>(&amount)) return f->value;
  return std::get<PerClassCount>(amount).value;
}

}  // namespace

AugmenterKind parse_augmenter(std::string_view name) {
  if (name == "none" || name == "no-aug") return AugmenterKind::kNone;
  if (name == "gpt3mix") return AugmenterKind::kGpt3Mix;
  if (name == "eda") return AugmenterKind::kEda;
  throw ConfigError("unknown augmenter '" + std::string(name) + "' (none, gpt3mix, eda)");
}

const char* to_string(AugmenterKind kind) noexcept {
  switch (kind) {
    case AugmenterKind::kNone:
      return "none";
    case AugmenterKind::kGpt3Mix:
      return "gpt3mix";
    case AugmenterKind::kEda:
      return "eda";
  }
  return "none";
}

LabelMode parse_label_mode(std::string_view name) {
  if (name == "soft") return LabelMode::kSoft;
  if (name == "hard") return LabelMode::kHard;
  throw ConfigError("unknown label mode '" + std::string(name) + "' (soft, hard)");
}

const char* to_string(LabelMode mode) noexcept {
  return mode == LabelMode::kSoft ? "soft" : "hard";
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (amounts.empty()) throw ConfigError("at least one sub-sample amount is required");
  if (augmenters.empty()) throw ConfigError("at least one augmenter is required");
  for (const auto& amount : amounts) {
    if (const auto* f = std::get_if<Fraction>(&amount); f && !(f->value > 0.0 && f->value <= 1.0)) {
      throw ConfigError("sub-sample fraction must be in (0, 1]");
    }
  }
  augment.validate();
  train.validate();
  features.validate();
  backend.mock.validate();
  for (auto a : augmenters) {
    if (a == AugmenterKind::kEda) eda.validate();
  }
  if (backend.kind != "mock" && backend.kind != "http") {
    throw ConfigError("backend kind must be mock or http");
  }
}

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.name = doc.value("name", c.name);
    c.dataset = resolve(base_dir, doc.value("dataset", std::string()));
    c.train_path = resolve(base_dir, doc.value("train", std::string()));
    c.validation_path = resolve(base_dir, doc.value("validation", std::string()));
    c.test_path = resolve(base_dir, doc.value("test", std::string()));
    if (doc.contains("format")) c.format = parse_dataset_format(doc["format"].get<std::string>());
    c.task_spec = doc.value("task_spec", c.task_spec);
    if (c.task_spec != "generic" && !builtin_task_spec(c.task_spec)) {
      c.task_spec = resolve(base_dir, c.task_spec).string();
    }
    if (doc.contains("amounts")) {
      c.amounts.clear();
      for (const auto& a : doc["amounts"]) c.amounts.push_back(amount_from_json(a));
    }
    if (doc.contains("augmenters")) {
      c.augmenters.clear();
      for (const auto& a : doc["augmenters"]) c.augmenters.push_back(parse_augmenter(a.get<std::string>()));
    }
    if (doc.contains("label_mode")) c.label_mode = parse_label_mode(doc["label_mode"].get<std::string>());
    c.trials = doc.value("trials", c.trials);
    c.master_seed = doc.value("master_seed", c.master_seed);

    if (doc.contains("augment")) {
      const auto& a = doc["augment"];
      c.augment.k = a.value("k", c.augment.k);
      c.augment.ratio = a.value("ratio", c.augment.ratio);
      c.augment.max_retries = a.value("max_retries", c.augment.max_retries);
      c.augment.dedup = a.value("dedup", c.augment.dedup);
      c.augment.concurrency = a.value("concurrency", c.augment.concurrency);
      if (a.contains("generation")) {
        const auto& g = a["generation"];
        auto& p = c.augment.generation;
        p.max_tokens = g.value("max_tokens", p.max_tokens);
        p.temperature = g.value("temperature", p.temperature);
        p.top_p = g.value("top_p", p.top_p);
        p.frequency_penalty = g.value("frequency_penalty", p.frequency_penalty);
        p.stop_sequences = g.value("stop", p.stop_sequences);
      }
    }
    c.eda.n_aug_per_example =
        static_cast<std::size_t>(std::ceil(std::max(0.0, c.augment.ratio) - 1e-9));
    if (doc.contains("eda")) {
      const auto& e = doc["eda"];
      c.eda.alpha = e.value("alpha", c.eda.alpha);
      c.eda.n_aug_per_example = e.value("n_aug_per_example", c.eda.n_aug_per_example);
      if (e.contains("ops")) {
        c.eda.ops.clear();
        for (const auto& op : e["ops"]) c.eda.ops.push_back(parse_eda_op(op.get<std::string>()));
      }
      if (e.contains("lexicon")) c.eda.lexicon = load_lexicon(resolve(base_dir, e["lexicon"].get<std::string>()));
    }
    if (doc.contains("training")) {
      const auto& t = doc["training"];
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.patience = t.value("patience", c.train.patience);
      c.train.warmup_epochs = t.value("warmup_epochs", c.train.warmup_epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      if (t.contains("metric")) {
        auto m = t["metric"].get<std::string>();
        if (m == "accuracy") {
          c.train.metric = ValidationMetric::kAccuracy;
        } else if (m == "loss") {
          c.train.metric = ValidationMetric::kLoss;
        } else {
          throw ConfigError("training.metric must be accuracy or loss");
        }
      }
    }
    if (doc.contains("features")) {
      const auto& f = doc["features"];
      c.features.ngram_min = f.value("ngram_min", c.features.ngram_min);
      c.features.ngram_max = f.value("ngram_max", c.features.ngram_max);
      c.features.hash_buckets = f.value("hash_buckets", c.features.hash_buckets);
      c.features.hash_seed = f.value("hash_seed", c.features.hash_seed);
      c.features.lowercase = f.value("lowercase", c.features.lowercase);
    }
    if (doc.contains("backend")) {
      const auto& b = doc["backend"];
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.base_url = b.value("base_url", c.backend.base_url);
      c.backend.model = b.value("model", c.backend.model);
      if (b.contains("mock")) c.backend.mock = parse_mock_config(b["mock"].dump());
      if (b.contains("mock_config")) {
        c.backend.mock = load_mock_config(resolve(base_dir, b["mock_config"].get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open experiment config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  ordered_json amounts = ordered_json::array();
  for (const auto& a : c.amounts) amounts.push_back(amount_to_json(a));
  ordered_json augmenters = ordered_json::array();
  for (auto a : c.augmenters) augmenters.push_back(to_string(a));
  ordered_json ops = ordered_json::array();
  for (auto op : c.eda.ops) ops.push_back(to_string(op));
  ordered_json doc = {
      {"name", c.name},
      {"dataset", c.dataset.string()},
      {"train", c.train_path.string()},
      {"validation", c.validation_path.string()},
      {"test", c.test_path.string()},
      {"format", c.format == DatasetFormat::kJsonl ? "jsonl" : "tsv"},
      {"task_spec", c.task_spec},
      {"amounts", amounts},
      {"augmenters", augmenters},
      {"label_mode", to_string(c.label_mode)},
      {"trials", c.trials},
      {"master_seed", c.master_seed},
      {"augment",
       {{"k", c.augment.k},
        {"ratio", c.augment.ratio},
        {"max_retries", c.augment.max_retries},
        {"dedup", c.augment.dedup},
        {"concurrency", c.augment.concurrency},
        {"generation",
         {{"max_tokens", c.augment.generation.max_tokens},
          {"temperature", c.augment.generation.temperature},
          {"top_p", c.augment.generation.top_p},
          {"frequency_penalty", c.augment.generation.frequency_penalty},
          {"stop", c.augment.generation.stop_sequences}}}}},
      {"eda",
       {{"alpha", c.eda.alpha},
        {"ops", ops},
        {"n_aug_per_example", c.eda.n_aug_per_example},
        {"lexicon_entries", c.eda.lexicon ? c.eda.lexicon->size() : 0}}},
      {"training",
       {{"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"warmup_epochs", c.train.warmup_epochs},
        {"batch_size", c.train.batch_size},
        {"metric", c.train.metric == ValidationMetric::kAccuracy ? "accuracy" : "loss"}}},
      {"features",
       {{"ngram_min", c.features.ngram_min},
        {"ngram_max", c.features.ngram_max},
        {"hash_buckets", c.features.hash_buckets},
        {"hash_seed", c.features.hash_seed},
        {"lowercase", c.features.lowercase}}},
      {"backend",
       {{"kind", c.backend.kind},
        {"base_url", c.backend.base_url},
        {"model", c.backend.kind == "mock" ? c.backend.mock.model : c.backend.model},
        {"mock_epsilon", c.backend.mock.epsilon},
        {"mock_seed", c.backend.mock.seed}}},
  };
  return doc.dump(2);
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  if (config.dataset.empty() &&
      (config.train_path.empty() || config.validation_path.empty() || config.test_path.empty())) {
    throw ConfigError("set \"dataset\" (with splits) or all of \"train\", \"validation\", \"test\"");
  }
  ExperimentData data;
  data.name = config.name;
  LoadOptions options;
  options.format = config.format;
  if (!config.dataset.empty()) {
    Dataset all = load_dataset(config.dataset, options);
    for (const char* split : {"train", "validation", "test"}) {
      if (!all.has_split(split)) {
        throw ValidationError("dataset " + config.dataset.string() + " has no '" + split +
                              "' split");
      }
    }
    data.train = all.split("train");
    data.validation = all.split("validation");
    data.test = all.split("test");
    return data;
  }
  options.format = format_from_path(config.train_path);
  data.train = load_dataset(config.train_path, options);
  options.labels = data.train.labels();
  options.format = format_from_path(config.validation_path);
  data.validation = load_dataset(config.validation_path, options);
  options.format = format_from_path(config.test_path);
  data.test = load_dataset(config.test_path, options);
  return data;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

std::uint64_t trial_seed(std::uint64_t master_seed, int trial) noexcept {
  return master_seed + static_cast<std::uint64_t>(trial);
}

TrialReport run_trials(const ExperimentConfig& config, const ExperimentData& data,
                       const SubsampleAmount& amount, const Arm& arm, Backend* backend) {
  TrialReport report;
  report.dataset = data.name;
  report.amount = to_string(amount);
  report.column = arm.column;

  std::optional<TaskSpecification> spec;
  AugmentConfig augment = config.augment;
  if (arm.k) augment.k = *arm.k;
  if (arm.ratio) augment.ratio = *arm.ratio;
  if (arm.augmenter == AugmenterKind::kGpt3Mix) {
    if (!backend) throw ConfigError("the gpt3mix augmenter needs a backend");
    spec = resolve_task_spec(arm.task_spec.value_or(config.task_spec), data.train.labels());
  }
  const std::size_t num_labels = data.train.labels().size();

  for (int t = 0; t < config.trials; ++t) {
    TrialRecord rec;
    rec.trial = t;
    rec.seed = trial_seed(config.master_seed, t);
    Dataset sub = class_balanced_subsample(data.train, amount, rec.seed);
    rec.subset_hash = dataset_fingerprint(sub);
    rec.real_examples = sub.size();

    std::vector<TrainExample> examples;
    for (const auto& ex : sub.examples()) examples.push_back(one_hot_example(ex, num_labels));

    try {
      if (arm.augmenter == AugmenterKind::kGpt3Mix) {
        AugmentConfig ac = augment;
        ac.seed = mix_seed({rec.seed, 0x6a7});
        AugmentRun run = gpt3mix_augment(sub, *spec, *backend, ac);
        rec.skipped = run.skipped;
        rec.requests = run.requests_made;
        if (run.aborted) throw BackendError(BackendErrorKind::kServer, run.abort_reason);
        for (const auto& r : run.records) {
          if (arm.label_mode == LabelMode::kSoft) {
            examples.push_back({r.text, r.soft_label});
          } else {
            examples.push_back(one_hot_example(to_hard_label(r), num_labels));
          }
        }
        rec.synthetic_examples = run.records.size();
      } else if (arm.augmenter == AugmenterKind::kEda) {
        EdaConfig ec = config.eda;
        ec.seed = mix_seed({rec.seed, 0xeda});
        auto extra = eda_augment(sub, ec);
        for (const auto& ex : extra) examples.push_back(one_hot_example(ex, num_labels));
        rec.synthetic_examples = extra.size();
      }
    } catch (const BackendError& e) {
      rec.error = e.what();
    } catch (const MultiTokenVerbalizerError& e) {
      rec.error = e.what();
    }

    if (rec.error.empty()) {
      TrainConfig tc = config.train;
      tc.seed = rec.seed;
      TrainResult trained = train(examples, data.validation, tc, config.features);
      rec.best_epoch = trained.best_epoch;
      rec.accuracy = evaluate(trained.model, data.test);
      report.accuracies.push_back(*rec.accuracy);
    } else {
      report.complete = false;
    }
    report.trials.push_back(std::move(rec));
  }
  report.mean = mean_of(report.accuracies);
  report.std = population_std(report.accuracies);
  return report;
}

std::vector<Arm> default_arms(const ExperimentConfig& config) {
  std::vector<Arm> arms;
  for (auto kind : config.augmenters) {
    Arm arm;
    arm.augmenter = kind;
    arm.label_mode = config.label_mode;
    switch (kind) {
      case AugmenterKind::kNone:
        arm.column = "No Aug.";
        break;
      case AugmenterKind::kEda:
        arm.column = "EDA";
        break;
      case AugmenterKind::kGpt3Mix:
        arm.column = config.label_mode == LabelMode::kSoft ? "GPT3Mix" : "GPT3Mix (hard)";
        break;
    }
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<TrialReport> run_experiment(const ExperimentConfig& config,
                                        const ExperimentData& data, Backend* backend) {
  config.validate();
  std::vector<TrialReport> reports;
  for (const auto& amount : config.amounts) {
    for (const auto& arm : default_arms(config)) {
      reports.push_back(run_trials(config, data, amount, arm, backend));
    }
  }
  return reports;
}

AblationKind parse_ablation_kind(std::string_view name) {
  if (name == "k_sweep" || name == "k") return AblationKind::kKSweep;
  if (name == "label_mode") return AblationKind::kLabelMode;
  if (name == "task_spec") return AblationKind::kTaskSpec;
  if (name == "ratio_sweep" || name == "ratio") return AblationKind::kRatioSweep;
  throw ConfigError("unknown ablation '" + std::string(name) +
                    "' (k_sweep, label_mode, task_spec, ratio_sweep)");
}

const char* to_string(AblationKind kind) noexcept {
  switch (kind) {
    case AblationKind::kKSweep:
      return "k_sweep";
    case AblationKind::kLabelMode:
      return "label_mode";
    case AblationKind::kTaskSpec:
      return "task_spec";
    case AblationKind::kRatioSweep:
      return "ratio_sweep";
  }
  return "unknown";
}

std::vector<Arm> ablation_arms(AblationKind kind, const ExperimentConfig& base,
                               std::span<const std::string> values) {
  std::vector<Arm> arms;
  auto gpt3mix_arm = [&](std::string column) {
    Arm arm;
    arm.column = std::move(column);
    arm.augmenter = AugmenterKind::kGpt3Mix;
    arm.label_mode = base.label_mode;
    return arm;
  };
  switch (kind) {
    case AblationKind::kKSweep:
      for (const auto& v : values) {
        std::size_t k = 0;
        try {
          k = std::stoul(v);
        } catch (const std::exception&) {
          throw ConfigError("k_sweep values must be integers, got '" + v + "'");
        }
        if (k < 1 || k > kMaxAnchorCount) {
          throw ConfigError("k_sweep values must be in 1.." + std::to_string(kMaxAnchorCount));
        }
        Arm arm = gpt3mix_arm("k=" + std::to_string(k));
        arm.k = k;
        arms.push_back(std::move(arm));
      }
      break;
    case AblationKind::kLabelMode: {
      Arm none;
      none.column = "No Aug.";
      arms.push_back(none);
      std::vector<std::string> modes(values.begin(), values.end());
      if (modes.empty()) modes = {"hard", "soft"};
      for (const auto& v : modes) {
        if (v == "none" || v == "no-aug") continue;
        Arm arm = gpt3mix_arm("");
        arm.label_mode = parse_label_mode(v);
        arm.column = arm.label_mode == LabelMode::kHard ? "Hard Labels" : "Soft-labels";
        arms.push_back(std::move(arm));
      }
      break;
    }
    case AblationKind::kTaskSpec:
      for (const auto& v : values) {
        Arm arm = gpt3mix_arm(v);
        arm.task_spec = v == "optimal" ? base.task_spec : v;
        arms.push_back(std::move(arm));
      }
      break;
    case AblationKind::kRatioSweep:
      for (const auto& v : values) {
        double ratio = 0.0;
        try {
          ratio = std::stod(v);
        } catch (const std::exception&) {
          throw ConfigError("ratio_sweep values must be numbers, got '" + v + "'");
        }
        if (!(ratio >= 0.0)) throw ConfigError("ratio_sweep values must be >= 0");
        Arm arm = gpt3mix_arm("ratio=" + v);
        arm.ratio = ratio;
        arms.push_back(std::move(arm));
      }
      break;
  }
  if (arms.empty()) throw ConfigError("ablation needs at least one value");
  return arms;
}

std::vector<TrialReport> run_ablation(AblationKind kind, const ExperimentConfig& base,
                                      const ExperimentData& data,
                                      std::span<const std::string> values, Backend* backend) {
  base.validate();
  auto arms = ablation_arms(kind, base, values);
  std::vector<TrialReport> reports;
  for (const auto& amount : base.amounts) {
    for (const auto& arm : arms) reports.push_back(run_trials(base, data, amount, arm, backend));
  }
  return reports;
}

ReportStyle parse_report_style(std::string_view name) {
  if (name == "tsv") return ReportStyle::kTsv;
  if (name == "markdown" || name == "md") return ReportStyle::kMarkdown;
  throw ConfigError("unknown report style '" + std::string(name) + "' (tsv, markdown)");
}

std::string format_cell(double mean, double std) {
  auto one_decimal = [](double fraction) {
    double tenths = std::round(fraction * 1000.0);  // percent * 10, half away from zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
    return std::string(buf);
  };
  return one_decimal(mean) + "_{" + one_decimal(std) + "}";
}

std::string format_report(std::span<const TrialReport> reports, ReportStyle style) {
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& r : reports) {
    if (std::find(columns.begin(), columns.end(), r.column) == columns.end()) {
      columns.push_back(r.column);
    }
    std::pair<std::string, std::string> row{r.dataset, r.amount};
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
  }

  const std::string dash = "—";
  std::vector<std::string> footnotes;
  auto cell = [&](const std::pair<std::string, std::string>& row, const std::string& column) {
    for (const auto& r : reports) {
      if (r.dataset != row.first || r.amount != row.second || r.column != column) continue;
      if (r.complete && !r.accuracies.empty()) return format_cell(r.mean, r.std);
      std::size_t failed = 0;
      std::string reason;
      for (const auto& t : r.trials) {
        if (!t.accuracy) {
          ++failed;
          if (reason.empty()) reason = t.error;
        }
      }
      footnotes.push_back(dash + " " + row.first + " / " + row.second + " / " + column + ": " +
                          std::to_string(failed) + " of " + std::to_string(r.trials.size()) +
                          " trials failed" + (reason.empty() ? "" : " (" + reason + ")"));
      return dash;
    }
    return std::string();
  };

  std::ostringstream out;
  if (style == ReportStyle::kTsv) {
    out << "dataset\tamount";
    for (const auto& c : columns) out << '\t' << c;
    out << '\n';
    for (const auto& row : rows) {
      out << row.first << '\t' << row.second;
      for (const auto& c : columns) out << '\t' << cell(row, c);
      out << '\n';
    }
    for (const auto& f : footnotes) out << "# " << f << '\n';
    return out.str();
  }
  out << "| Dataset | Sub. |";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& row : rows) {
    out << "| " << row.first << " | " << row.second << " |";
    for (const auto& c : columns) out << ' ' << cell(row, c) << " |";
    out << '\n';
  }
  if (!footnotes.empty()) {
    out << '\n';
    for (const auto& f : footnotes) out << f << '\n';
  }
  return out.str();
}

std::string trial_log_jsonl(std::span<const TrialReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    for (const auto& t : r.trials) {
      ordered_json obj = {{"dataset", r.dataset},
                          {"amount", r.amount},
                          {"column", r.column},
                          {"trial", t.trial},
                          {"seed", t.seed},
                          {"subset_hash", t.subset_hash},
                          {"accuracy", t.accuracy ? ordered_json(*t.accuracy) : ordered_json(nullptr)},
                          {"real_examples", t.real_examples},
                          {"synthetic_examples", t.synthetic_examples},
                          {"skipped", t.skipped},
                          {"requests", t.requests},
                          {"best_epoch", t.best_epoch},
                          {"error", t.error}};
      out += obj.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace mixprompt
