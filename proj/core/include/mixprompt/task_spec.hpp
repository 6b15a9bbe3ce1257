#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mixprompt {

// Task specification (text type, label type, verbalizer). labels[i] is
// verbalized as tokens[i]; the index order is the dataset's label order once
// bound.
struct TaskSpecification {
  std::string name;  // "sst2", "generic", a file stem, ...
  std::string text_type;
  std::string label_type;
  std::vector<std::string> labels;
  std::vector<std::string> tokens;

  std::size_t num_labels() const noexcept { return labels.size(); }
  const std::string& token(std::size_t label) const { return tokens.at(label); }
  // Token preimage under the verbalizer, ASCII case-insensitive.
  std::optional<std::size_t> label_for_token(std::string_view token) const;

  friend bool operator==(const TaskSpecification&, const TaskSpecification&) = default;
};

// Throws ValidationError naming the offending labels when the verbalizer is
// not injective (case-insensitively), not total, or has tokens that are empty
// or contain a newline or parenthesis.
void validate_task_spec(const TaskSpecification& spec);

std::vector<std::string> builtin_task_spec_names();

// Built-in specification in its own label order. "generic" has no fixed
// label set and needs resolve_task_spec with labels.
std::optional<TaskSpecification> builtin_task_spec(std::string_view name);

TaskSpecification make_task_spec(std::string text_type, std::string label_type,
                                 std::vector<std::pair<std::string, std::string>> verbalizer,
                                 std::string name = "custom");

// Reads {"text_type", "label_type", "verbalizer": {label: token, ...}}.
TaskSpecification load_task_spec(const std::filesystem::path& path);
TaskSpecification parse_task_spec(std::string_view json_text, std::string name = "custom");

// Reorders a specification to the given label order. Throws ValidationError
// when the label sets differ.
TaskSpecification bind_task_spec(const TaskSpecification& spec,
                                 std::span<const std::string> labels);

// Built-in name or path to a spec file, bound to `labels`. "generic" maps
// every label to itself.
TaskSpecification resolve_task_spec(std::string_view name_or_path,
                                    std::span<const std::string> labels);

// Without a label set: built-ins other than generic, or a file.
TaskSpecification resolve_task_spec(std::string_view name_or_path);

std::string task_spec_to_json(const TaskSpecification& spec);

}  // namespace mixprompt
