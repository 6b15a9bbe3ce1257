#include "mixprompt/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixprompt/errors.hpp"
#include "mixprompt/random.hpp"

namespace mixprompt {
namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "mixprompt-linear";
constexpr int kModelVersion = 1;

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::vector<std::string> words_of(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string w(text.substr(start, i - start));
      if (lowercase) {
        for (char& c : w) {
          if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
      }
      words.push_back(std::move(w));
    }
  }
  return words;
}

double dot(const double* row, const SparseVector& x) {
  double s = 0.0;
  for (const auto& e : x) s += row[e.index] * e.value;
  return s;
}

double log_sum_exp(std::span<const double> logits) {
  double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  return max + std::log(sum);
}

void check_target(std::span<const double> target, std::size_t num_labels, std::size_t record) {
  auto where = [&] { return "training record " + std::to_string(record); };
  if (target.size() != num_labels) {
    throw ValidationError(where() + ": soft label has " + std::to_string(target.size()) +
                          " entries for " + std::to_string(num_labels) + " labels");
  }
  double sum = 0.0;
  for (double p : target) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError(where() + ": soft label has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ValidationError(where() + ": soft label sums to " + std::to_string(sum));
  }
}

}  // namespace

void FeatureConfig::validate() const {
  if (ngram_min < 1 || ngram_min > ngram_max) {
    throw ConfigError("n-gram range must satisfy 1 <= min <= max");
  }
  if (hash_buckets < 2) throw ConfigError("hash_buckets must be >= 2");
}

std::uint32_t feature_bucket(std::string_view ngram, const FeatureConfig& config) {
  return static_cast<std::uint32_t>(stable_hash(ngram, config.hash_seed) % config.hash_buckets);
}

SparseVector featurize(std::string_view text, const FeatureConfig& config) {
  auto words = words_of(text, config.lowercase);
  std::map<std::uint32_t, double> counts;
  for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= words.size(); ++i) {
      std::string gram = words[i];
      for (std::size_t j = 1; j < len; ++j) {
        gram += ' ';
        gram += words[i + j];
      }
      counts[feature_bucket(gram, config)] += 1.0;
    }
  }
  double norm = 0.0;
  for (const auto& [idx, c] : counts) norm += c * c;
  norm = std::sqrt(norm);
  SparseVector out;
  out.reserve(counts.size());
  for (const auto& [idx, c] : counts) out.push_back({idx, c / norm});
  return out;
}

ClassifierModel::ClassifierModel(std::vector<std::string> labels, FeatureConfig features)
    : labels_(std::move(labels)),
      features_(features),
      weights_(labels_.size() * features.hash_buckets, 0.0),
      bias_(labels_.size(), 0.0) {
  features_.validate();
  if (labels_.empty()) throw ValidationError("classifier needs at least one label");
}

std::vector<double> ClassifierModel::logits(const SparseVector& x) const {
  std::vector<double> z(num_classes());
  for (std::size_t c = 0; c < z.size(); ++c) {
    z[c] = dot(weights_.data() + c * num_features(), x) + bias_[c];
  }
  return z;
}

std::vector<double> ClassifierModel::predict(const SparseVector& x) const {
  return softmax(logits(x));
}

std::vector<double> ClassifierModel::predict(std::string_view text) const {
  return predict(featurize(text, features_));
}

std::size_t ClassifierModel::predict_label(std::string_view text) const {
  return argmax(logits(featurize(text, features_)));
}

std::string ClassifierModel::to_json() const {
  json weights = json::array();
  for (std::size_t c = 0; c < num_classes(); ++c) {
    for (std::size_t j = 0; j < num_features(); ++j) {
      double w = weights_[c * num_features() + j];
      if (w != 0.0) weights.push_back(json::array({c, j, w}));
    }
  }
  json doc = {{"format", kModelFormat},
              {"version", kModelVersion},
              {"labels", labels_},
              {"features",
               {{"ngram_min", features_.ngram_min},
                {"ngram_max", features_.ngram_max},
                {"hash_buckets", features_.hash_buckets},
                {"hash_seed", features_.hash_seed},
                {"lowercase", features_.lowercase}}},
              {"bias", bias_},
              {"weights", weights}};
  return doc.dump();
}

ClassifierModel ClassifierModel::from_json(std::string_view text) {
  try {
    json doc = json::parse(text);
    if (doc.at("format") != kModelFormat) throw ValidationError("not a mixprompt model file");
    if (doc.at("version") != kModelVersion) {
      throw ValidationError("unsupported model version " + doc.at("version").dump());
    }
    FeatureConfig f;
    const auto& fj = doc.at("features");
    f.ngram_min = fj.at("ngram_min");
    f.ngram_max = fj.at("ngram_max");
    f.hash_buckets = fj.at("hash_buckets");
    f.hash_seed = fj.at("hash_seed");
    f.lowercase = fj.at("lowercase");
    ClassifierModel model(doc.at("labels").get<std::vector<std::string>>(), f);
    model.bias_ = doc.at("bias").get<std::vector<double>>();
    if (model.bias_.size() != model.num_classes()) throw ValidationError("bias size mismatch");
    for (const auto& entry : doc.at("weights")) {
      auto c = entry.at(0).get<std::size_t>();
      auto j = entry.at(1).get<std::size_t>();
      if (c >= model.num_classes() || j >= model.num_features()) {
        throw ValidationError("weight index out of range");
      }
      model.weights_[c * model.num_features() + j] = entry.at(2).get<double>();
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json() << '\n';
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double soft_cross_entropy(std::span<const double> logits, std::span<const double> target) {
  const double lse = log_sum_exp(logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (target[i] == 0.0) continue;
    loss -= target[i] * (logits[i] - lse);
  }
  return loss;
}

double hard_cross_entropy(std::span<const double> logits, std::size_t label) {
  const double lse = log_sum_exp(logits);
  double loss = 0.0;
  loss -= logits[label] - lse;
  return loss;
}

double mean_loss(const ClassifierModel& model, std::span<const FeatureRow> rows) {
  double total = 0.0;
  for (const auto& row : rows) total += soft_cross_entropy(model.logits(row.x), row.target);
  return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

Gradient loss_gradient(const ClassifierModel& model, std::span<const FeatureRow> rows) {
  Gradient g;
  g.weights.assign(model.weights().size(), 0.0);
  g.bias.assign(model.num_classes(), 0.0);
  if (rows.empty()) return g;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  const std::size_t f = model.num_features();
  for (const auto& row : rows) {
    auto p = softmax(model.logits(row.x));
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double delta = (p[c] - row.target[c]) * inv_n;
      g.bias[c] += delta;
      for (const auto& e : row.x) g.weights[c * f + e.index] += delta * e.value;
    }
  }
  return g;
}

TrainExample one_hot_example(const LabeledExample& example, std::size_t num_labels) {
  TrainExample out{example.text, std::vector<double>(num_labels, 0.0)};
  out.target.at(example.label) = 1.0;
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

TrainResult train_with_scorer(std::span<const TrainExample> train,
                              std::span<const std::string> labels, const EpochScorer& scorer,
                              const TrainConfig& config, const FeatureConfig& features) {
  config.validate();
  features.validate();
  if (train.empty()) throw ValidationError("training set is empty");
  const std::size_t num_classes = labels.size();
  std::vector<SparseVector> xs;
  xs.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    check_target(train[i].target, num_classes, i);
    xs.push_back(featurize(train[i].text, features));
  }

  // Weights are kept as scale * v so decoupled decay is O(1) per step.
  ClassifierModel working(std::vector<std::string>(labels.begin(), labels.end()), features);
  const std::size_t nf = working.num_features();
  std::vector<double>& v = working.weights();
  std::vector<double>& bias = working.bias();
  double scale = 1.0;

  const std::size_t n = train.size();
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const auto warmup_steps = static_cast<std::size_t>(config.warmup_epochs) * steps_per_epoch;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng({config.seed, 0x7ea1});

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::size_t step = 0;
  std::vector<double> deltas(batch * num_classes);

  auto snapshot = [&] {
    ClassifierModel m = working;
    if (scale != 1.0) {
      for (double& w : m.weights()) w *= scale;
    }
    return m;
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      const std::size_t m = end - begin;
      double lr = config.learning_rate;
      if (warmup_steps > 0 && step < warmup_steps) {
        lr *= static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
      }
      for (std::size_t b = 0; b < m; ++b) {
        const auto& x = xs[order[begin + b]];
        const auto& q = train[order[begin + b]].target;
        std::vector<double> z(num_classes);
        for (std::size_t c = 0; c < num_classes; ++c) {
          z[c] = scale * dot(v.data() + c * nf, x) + bias[c];
        }
        auto p = softmax(z);
        for (std::size_t c = 0; c < num_classes; ++c) deltas[b * num_classes + c] = p[c] - q[c];
      }
      scale *= 1.0 - lr * config.weight_decay;
      if (scale < 1e-3) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
      const double coef = lr / (static_cast<double>(m) * scale);
      for (std::size_t b = 0; b < m; ++b) {
        const auto& x = xs[order[begin + b]];
        for (std::size_t c = 0; c < num_classes; ++c) {
          const double d = deltas[b * num_classes + c];
          if (d == 0.0) continue;
          double* row = v.data() + c * nf;
          for (const auto& e : x) row[e.index] -= coef * d * e.value;
          bias[c] -= lr / static_cast<double>(m) * d;
        }
      }
      ++step;
    }

    ClassifierModel current = snapshot();
    const double score = scorer(current, epoch);
    result.scores.push_back(score);
    result.epochs_run = epoch;
    if (score > best) {
      best = score;
      result.best_epoch = epoch;
      result.model = std::move(current);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

TrainResult train(std::span<const TrainExample> train, const Dataset& validation,
                  const TrainConfig& config, const FeatureConfig& features) {
  const auto& labels = validation.labels();
  if (validation.empty()) {
    return train_with_scorer(
        train, labels, [](const ClassifierModel&, int epoch) { return static_cast<double>(epoch); },
        config, features);
  }
  std::vector<SparseVector> xs;
  xs.reserve(validation.size());
  for (const auto& ex : validation.examples()) xs.push_back(featurize(ex.text, features));

  EpochScorer scorer;
  if (config.metric == ValidationMetric::kAccuracy) {
    scorer = [&](const ClassifierModel& model, int) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (argmax(model.logits(xs[i])) == validation[i].label) ++correct;
      }
      return static_cast<double>(correct) / static_cast<double>(xs.size());
    };
  } else {
    scorer = [&](const ClassifierModel& model, int) {
      double total = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        total += hard_cross_entropy(model.logits(xs[i]), validation[i].label);
      }
      return -total / static_cast<double>(xs.size());
    };
  }
  return train_with_scorer(train, labels, scorer, config, features);
}

double evaluate(const ClassifierModel& model, const Dataset& test) {
  if (test.empty()) throw ValidationError("cannot evaluate on an empty test set");
  if (test.labels() != model.labels()) {
    throw ValidationError("test label set differs from the model's labels");
  }
  std::size_t correct = 0;
  for (const auto& ex : test.examples()) {
    if (model.predict_label(ex.text) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace mixprompt
