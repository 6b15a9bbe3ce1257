#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mixprompt {

struct LabeledExample {
  std::string text;   // trimmed, non-empty
  std::size_t label;  // index into Dataset::labels()

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

// An ordered labeled corpus. Immutable once built; construction validates
// that labels are unique and non-empty and every example refers to one.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> labels, std::vector<LabeledExample> examples,
          std::map<std::string, std::vector<std::size_t>> splits = {});

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }

  // Named partitions, as example indices in dataset order.
  const std::map<std::string, std::vector<std::size_t>>& splits() const noexcept {
    return splits_;
  }
  bool has_split(std::string_view name) const;
  // Materializes a split as its own Dataset sharing the label set.
  Dataset split(std::string_view name) const;

  std::optional<std::size_t> label_index(std::string_view name) const;
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<LabeledExample> examples_;
  std::map<std::string, std::vector<std::size_t>> splits_;
};

enum class DatasetFormat { kJsonl, kTsv };

DatasetFormat parse_dataset_format(std::string_view name);
// Guesses from the extension; defaults to jsonl.
DatasetFormat format_from_path(const std::filesystem::path& path);

struct LoadOptions {
  DatasetFormat format = DatasetFormat::kJsonl;
  // Fixed label set; unknown labels become load errors. When absent the
  // labels are collected in first-appearance order (or from a jsonl header).
  std::optional<std::vector<std::string>> labels;
  // tsv only: first row is a column header.
  bool tsv_header = false;
};

// jsonl: one {"text","label"[,"split"]} object per line. An optional first
// line {"labels":[...]} fixes the label order.
// tsv: text<TAB>label[<TAB>split].
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
Dataset parse_dataset(std::string_view content, const LoadOptions& options = {});

struct SaveOptions {
  DatasetFormat format = DatasetFormat::kJsonl;
  bool tsv_header = false;
};

std::string serialize_dataset(const Dataset& dataset, const SaveOptions& options = {});
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  const SaveOptions& options = {});

// Lowercases, pads the characters " . ? ! : ( ) [ ] , with single spaces,
// collapses whitespace runs and trims. Idempotent.
std::string normalize_text(std::string_view text);

struct Fraction {
  double value;
};
struct PerClassCount {
  std::size_t value;
};
using SubsampleAmount = std::variant<Fraction, PerClassCount>;

// "0.01" -> Fraction, "10" -> PerClassCount.
SubsampleAmount parse_subsample_amount(std::string_view text);
std::string to_string(const SubsampleAmount& amount);

// Number of examples drawn from a class holding `available` examples.
std::size_t subsample_class_size(const SubsampleAmount& amount, std::size_t available);

// Per class c, draws subsample_class_size(...) examples uniformly without
// replacement using a generator seeded from (seed, c). Output is class-major,
// original order within each class. Classes with no examples are skipped.
Dataset class_balanced_subsample(const Dataset& dataset, const SubsampleAmount& amount,
                                 std::uint64_t seed);

// Hash over labels, texts and example labels; equal datasets give equal
// fingerprints.
std::string dataset_fingerprint(const Dataset& dataset);

}  // namespace mixprompt
