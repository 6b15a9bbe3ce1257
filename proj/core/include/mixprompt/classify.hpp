#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixprompt/corpus.hpp"

namespace mixprompt {

struct FeatureConfig {
  int ngram_min = 1;
  int ngram_max = 2;
  std::uint32_t hash_buckets = 1u << 18;
  std::uint64_t hash_seed = 0;
  bool lowercase = true;

  void validate() const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct SparseEntry {
  std::uint32_t index;
  double value;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Sorted by index, no duplicate indices.
using SparseVector = std::vector<SparseEntry>;

// Hashed bag of n-grams over alphanumeric runs, L2-normalized. Bytes >= 0x80
// count as word characters so UTF-8 words stay whole.
SparseVector featurize(std::string_view text, const FeatureConfig& config);

// Bucket of one n-gram whose words are joined by a single space.
std::uint32_t feature_bucket(std::string_view ngram, const FeatureConfig& config);

// Softmax regression over hashed features.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(std::vector<std::string> labels, FeatureConfig features);

  std::size_t num_classes() const noexcept { return labels_.size(); }
  std::size_t num_features() const noexcept { return features_.hash_buckets; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const FeatureConfig& feature_config() const noexcept { return features_; }

  // Row-major num_classes x num_features.
  std::vector<double>& weights() noexcept { return weights_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::vector<double>& bias() noexcept { return bias_; }
  const std::vector<double>& bias() const noexcept { return bias_; }

  std::vector<double> logits(const SparseVector& x) const;
  std::vector<double> predict(std::string_view text) const;
  std::vector<double> predict(const SparseVector& x) const;
  // Argmax, ties to the lowest label index.
  std::size_t predict_label(std::string_view text) const;

  std::string to_json() const;
  static ClassifierModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  std::vector<std::string> labels_;
  FeatureConfig features_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

std::vector<double> softmax(std::span<const double> logits);
std::size_t argmax(std::span<const double> values);

// H(target, softmax(logits)). Zero-weight target entries are skipped, so a
// one-hot target gives exactly hard_cross_entropy.
double soft_cross_entropy(std::span<const double> logits, std::span<const double> target);
double hard_cross_entropy(std::span<const double> logits, std::size_t label);

struct FeatureRow {
  SparseVector x;
  std::vector<double> target;
};

double mean_loss(const ClassifierModel& model, std::span<const FeatureRow> rows);

struct Gradient {
  std::vector<double> weights;  // same layout as ClassifierModel::weights()
  std::vector<double> bias;
};

// Gradient of mean_loss with respect to weights and bias.
Gradient loss_gradient(const ClassifierModel& model, std::span<const FeatureRow> rows);

struct TrainExample {
  std::string text;
  std::vector<double> target;  // distribution over labels
};

TrainExample one_hot_example(const LabeledExample& example, std::size_t num_labels);

enum class ValidationMetric { kAccuracy, kLoss };

struct TrainConfig {
  double learning_rate = 0.1;
  double weight_decay = 1e-4;  // decoupled
  int max_epochs = 200;
  int patience = 20;
  int warmup_epochs = 3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  ValidationMetric metric = ValidationMetric::kAccuracy;

  void validate() const;
};

// Higher is better. Called after every epoch (1-based).
using EpochScorer = std::function<double(const ClassifierModel&, int epoch)>;

struct TrainResult {
  ClassifierModel model;  // best-scoring snapshot
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<double> scores;  // per epoch
};

// Mini-batch gradient descent on soft-label cross-entropy with decoupled
// weight decay and per-step linear warm-up. Stops after `patience` epochs
// without a strictly better score; returns the best snapshot. Deterministic.
TrainResult train_with_scorer(std::span<const TrainExample> train,
                              std::span<const std::string> labels, const EpochScorer& scorer,
                              const TrainConfig& config, const FeatureConfig& features);

// Early stopping on the validation split. An empty validation set trains for
// max_epochs.
TrainResult train(std::span<const TrainExample> train, const Dataset& validation,
                  const TrainConfig& config, const FeatureConfig& features);

// Mean argmax accuracy. Throws ValidationError on an empty set or a label set
// different from the model's.
double evaluate(const ClassifierModel& model, const Dataset& test);

}  // namespace mixprompt
