#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mixprompt/corpus.hpp"
#include "mixprompt/random.hpp"
#include "mixprompt/task_spec.hpp"

namespace mixprompt {

inline constexpr std::size_t kDefaultAnchorCount = 2;
inline constexpr std::size_t kMaxAnchorCount = 8;

struct PromptExamples {
  std::vector<LabeledExample> examples;  // in sampled order
  std::vector<std::size_t> source_indices;
};

enum class PromptKind { kMixGeneration, kLabelQuery };

struct Prompt {
  PromptKind kind = PromptKind::kMixGeneration;
  std::string text;
};

// k distinct examples drawn uniformly without replacement, in draw order.
PromptExamples select_examples(const Dataset& dataset, std::size_t k, Rng& rng,
                               std::size_t max_k = kMaxAnchorCount);

// "Each item in the following list contains a <T> and the respective <L>.
// The <L> is one of '<v1>' or '<v2>'."
std::string render_prompt_header(const TaskSpecification& spec);

// "<text> (<L>: <V>)" with L and V capitalized.
std::string format_example_body(std::string_view text, std::size_t label,
                                const TaskSpecification& spec);

// "<T>: " + format_example_body(...)
std::string format_example_line(std::string_view text, std::size_t label,
                                const TaskSpecification& spec);

// "<T>:"
std::string augmentation_prefix(const TaskSpecification& spec);

// Header, blank line, one line per anchor, augmentation prefix. No trailing
// newline. Line breaks inside anchor texts become spaces.
Prompt build_mix_prompt(const PromptExamples& examples, const TaskSpecification& spec);

// mix prompt + " " + generated text + " (<L>: ", the context under which the
// next-token likelihood of each verbalized label is read.
Prompt build_label_query(const Prompt& mix_prompt, std::string_view generated_text,
                         const TaskSpecification& spec);

// Verbalized tokens as they appear in prompt bodies (capitalized).
std::vector<std::string> label_candidates(const TaskSpecification& spec);

}  // namespace mixprompt
