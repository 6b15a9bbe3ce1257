#include "mixprompt/promptgen.hpp"

#include <algorithm>

#include "mixprompt/errors.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {

PromptExamples select_examples(const Dataset& dataset, std::size_t k, Rng& rng,
                               std::size_t max_k) {
  if (k < 1) throw ConfigError("number of anchor examples must be >= 1");
  if (k > max_k) {
    throw ConfigError("number of anchor examples " + std::to_string(k) + " exceeds the maximum " +
                      std::to_string(max_k));
  }
  if (k > dataset.size()) {
    throw ConfigError("cannot draw " + std::to_string(k) + " anchors from " +
                      std::to_string(dataset.size()) + " examples");
  }
  PromptExamples out;
  out.source_indices.reserve(k);
  // k is tiny, so rejection of repeats is cheaper than a partial shuffle of N.
  while (out.source_indices.size() < k) {
    auto idx = static_cast<std::size_t>(uniform_index(rng, dataset.size()));
    if (std::find(out.source_indices.begin(), out.source_indices.end(), idx) ==
        out.source_indices.end()) {
      out.source_indices.push_back(idx);
    }
  }
  for (std::size_t idx : out.source_indices) out.examples.push_back(dataset[idx]);
  return out;
}

std::string render_prompt_header(const TaskSpecification& spec) {
  std::string choices;
  const auto& tokens = spec.tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      if (tokens.size() == 2) {
        choices += " or ";
      } else if (i + 1 == tokens.size()) {
        choices += ", or ";
      } else {
        choices += ", ";
      }
    }
    choices += "'" + tokens[i] + "'";
  }
  return "Each item in the following list contains a " + spec.text_type +
         " and the respective " + spec.label_type + ". The " + spec.label_type + " is one of " +
         choices + ".";
}

namespace {

std::string single_line(std::string_view text) {
  std::string out = trim(text);
  std::replace_if(out.begin(), out.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
  return out;
}

}  // namespace

std::string format_example_body(std::string_view text, std::size_t label,
                                const TaskSpecification& spec) {
  return single_line(text) + " (" + capitalize_first(spec.label_type) + ": " +
         capitalize_first(spec.token(label)) + ")";
}

std::string augmentation_prefix(const TaskSpecification& spec) {
  return capitalize_first(spec.text_type) + ":";
}

std::string format_example_line(std::string_view text, std::size_t label,
                                const TaskSpecification& spec) {
  return augmentation_prefix(spec) + " " + format_example_body(text, label, spec);
}

Prompt build_mix_prompt(const PromptExamples& examples, const TaskSpecification& spec) {
  if (examples.examples.empty()) throw ValidationError("mix prompt needs at least one example");
  std::string text = render_prompt_header(spec);
  text += "\n\n";
  for (const auto& ex : examples.examples) {
    if (ex.label >= spec.num_labels()) {
      throw ValidationError("anchor label index outside the task specification");
    }
    text += format_example_line(ex.text, ex.label, spec);
    text += '\n';
  }
  text += augmentation_prefix(spec);
  return {PromptKind::kMixGeneration, std::move(text)};
}

Prompt build_label_query(const Prompt& mix_prompt, std::string_view generated_text,
                         const TaskSpecification& spec) {
  if (mix_prompt.kind != PromptKind::kMixGeneration) {
    throw ValidationError("label query must extend a mix-generation prompt");
  }
  if (generated_text.find_first_of("\r\n") != std::string_view::npos) {
    throw ValidationError("generated text spans more than one line");
  }
  if (trim_view(generated_text).empty()) throw ValidationError("generated text is empty");
  std::string text = mix_prompt.text;
  text += ' ';
  text += generated_text;
  text += " (" + capitalize_first(spec.label_type) + ": ";
  return {PromptKind::kLabelQuery, std::move(text)};
}

std::vector<std::string> label_candidates(const TaskSpecification& spec) {
  std::vector<std::string> out;
  out.reserve(spec.tokens.size());
  for (const auto& token : spec.tokens) out.push_back(capitalize_first(token));
  return out;
}

}  // namespace mixprompt
