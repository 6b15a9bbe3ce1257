#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixprompt/lmclient.hpp"
#include "mixprompt/task_spec.hpp"

namespace mixprompt {

struct ParsedAugmentation {
  std::string text;
  std::size_t label;
};

// Reads the first generated item (up to the first newline) and matches the
// trailing "(<L>: <token>)" group, case-insensitively. The last '(' of the
// item opens the group, so parentheses inside the text are kept. Throws
// ParseError.
ParsedAugmentation parse_augmentation(std::string_view completion_text,
                                      const TaskSpecification& spec);

// Normalized label-token likelihoods, ordered by label index. Keys of
// `scores` are matched to verbalized tokens case-insensitively. Throws
// ScoringError on a missing, duplicated or non-finite entry.
std::vector<double> compute_soft_label(const ScoreMap& scores, const TaskSpecification& spec);

struct AugmentationRecord {
  std::string text;
  std::vector<double> soft_label;
  std::size_t generated_label = 0;
  std::vector<std::size_t> anchor_indices;
  std::string raw_completion;
  std::string model;

  friend bool operator==(const AugmentationRecord&, const AugmentationRecord&) = default;
};

// Throws ValidationError when a record breaks its invariants for `num_labels`.
void validate_record(const AugmentationRecord& record, std::size_t num_labels);

// One JSON object per line: {"text","soft_label","generated_label","anchors",
// "model","raw_completion"}. generated_label is written as the label name.
std::string serialize_records(std::span<const AugmentationRecord> records,
                              std::span<const std::string> labels);
std::vector<AugmentationRecord> parse_records(std::string_view content,
                                              std::span<const std::string> labels);
void save_records(std::span<const AugmentationRecord> records,
                  std::span<const std::string> labels, const std::filesystem::path& path);
std::vector<AugmentationRecord> load_records(const std::filesystem::path& path,
                                             std::span<const std::string> labels);

}  // namespace mixprompt
