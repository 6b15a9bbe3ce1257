#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixprompt/corpus.hpp"
#include "mixprompt/extract.hpp"
#include "mixprompt/lmclient.hpp"
#include "mixprompt/task_spec.hpp"

namespace mixprompt {

struct AugmentConfig {
  std::size_t k = kDefaultAnchorCount;
  double ratio = 10.0;  // synthetic examples per real example
  int max_retries = 4;
  bool dedup = true;
  std::uint64_t seed = 0;
  std::size_t concurrency = 4;  // in-flight backend calls
  GenerationParams generation;

  void validate() const;
};

// ceil(ratio * source_size), tolerant to floating error in the product.
std::size_t augmentation_target(double ratio, std::size_t source_size);

struct AugmentRun {
  std::vector<AugmentationRecord> records;  // in slot order
  std::size_t skipped = 0;
  std::size_t requests_made = 0;
  bool aborted = false;
  std::string abort_reason;
  AugmentConfig config;
  std::string model;
};

// For every slot: anchors -> mix prompt -> completion -> parse -> label query
// -> label-token scores -> soft label. Parse failures and (with dedup)
// duplicates retry with fresh anchors; exhausted slots count as skipped.
// Fatal backend errors stop the run; committed records are kept and
// `aborted` is set. Output depends only on the inputs and config.seed.
AugmentRun gpt3mix_augment(const Dataset& source, const TaskSpecification& spec,
                           Backend& backend, const AugmentConfig& config);

LabeledExample to_hard_label(const AugmentationRecord& record);
std::vector<LabeledExample> to_hard_labels(std::span<const AugmentationRecord> records);

std::string run_manifest_json(const AugmentRun& run, const TaskSpecification& spec,
                              std::size_t source_size);

enum class EdaOp { kSynonymReplace, kRandomInsert, kRandomSwap, kRandomDelete };

EdaOp parse_eda_op(std::string_view name);
const char* to_string(EdaOp op) noexcept;

// head word -> synonyms
using SynonymLexicon = std::map<std::string, std::vector<std::string>>;

// One entry per line: head synonym1 synonym2 ... ('#' starts a comment).
SynonymLexicon parse_lexicon(std::string_view content);
SynonymLexicon load_lexicon(const std::filesystem::path& path);

struct EdaConfig {
  double alpha = 0.1;
  std::vector<EdaOp> ops = {EdaOp::kRandomSwap, EdaOp::kRandomDelete};
  std::size_t n_aug_per_example = 10;
  std::optional<SynonymLexicon> lexicon;
  std::uint64_t seed = 0;

  void validate() const;
};

// Applies one EDA operation to round(alpha * words) positions.
std::string eda_apply(std::string_view text, EdaOp op, double alpha,
                      const SynonymLexicon* lexicon, Rng& rng);

// n_aug_per_example perturbed copies per example, cycling through the enabled
// operations; labels are copied. Example-major order.
std::vector<LabeledExample> eda_augment(const Dataset& source, const EdaConfig& config);

}  // namespace mixprompt
