#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mixprompt/lmclient.hpp"

namespace mixprompt {

struct MockConfig {
  // Keyed by verbalized label token (case-insensitive). Phrases for a label
  // are spliced into items generated for that label.
  std::map<std::string, std::vector<std::string>> phrase_pools;
  // Label noise: the emitted label is the anchors' majority label with
  // probability 1 - epsilon, otherwise a uniformly chosen other label.
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string model = "mock-mixer";

  std::size_t min_span_words = 2;
  std::size_t max_span_words = 6;
  std::size_t phrases_per_item = 2;

  // Fixtures checked before template parsing. The "" key matches any prompt.
  std::map<std::string, std::string> canned_completions;
  std::map<std::string, std::map<std::string, double>> canned_next_token;

  void validate() const;
};

// {"epsilon": 0.1, "seed": 3, "model": "...", "phrase_pools": {"positive": [...]}, ...}
MockConfig parse_mock_config(std::string_view json_text);
MockConfig load_mock_config(const std::filesystem::path& path);

// Whitespace-attached word pieces; punctuation and hyphens are separate
// tokens. "grammatical-acceptability" is three tokens.
std::vector<std::string> mock_tokenize(std::string_view text);

// Deterministic in-process stand-in for a completions backend. Parses the mix
// prompt, splices spans of the anchor texts with phrases from the pool of the
// chosen label, and emits the next list item in template form. Label queries
// are scored with probability 1 - epsilon on the item's content label.
// Prompts that do not follow the template raise MockFormatError.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockConfig config);

  Completion complete(const Prompt& prompt, const GenerationParams& params,
                      std::uint64_t request_key) override;
  std::vector<TokenLogprob> score_continuation(std::string_view context,
                                               std::string_view continuation,
                                               std::uint64_t request_key) override;
  std::string model_name() const override { return config_.model; }

  const MockConfig& config() const noexcept { return config_; }

 private:
  MockConfig config_;
};

}  // namespace mixprompt
