#include "mixprompt/lmclient.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mixprompt/errors.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {

void GenerationParams::validate() const {
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (!std::isfinite(frequency_penalty)) throw ConfigError("frequency_penalty must be finite");
  if (logprob_top_k < 0) throw ConfigError("logprob_top_k must be >= 0");
  for (const auto& s : stop_sequences) {
    if (s.empty()) throw ConfigError("stop sequences must be non-empty");
  }
}

GenerationParams default_generation_params(const TaskSpecification& spec) {
  GenerationParams params;
  params.stop_sequences = {"\n" + capitalize_first(spec.text_type) + ":", "\n\n"};
  return params;
}

FinishReason parse_finish_reason(std::string_view s) noexcept {
  if (s == "stop") return FinishReason::kStop;
  if (s == "length") return FinishReason::kLength;
  return FinishReason::kOther;
}

const char* to_string(FinishReason reason) noexcept {
  switch (reason) {
    case FinishReason::kStop:
      return "stop";
    case FinishReason::kLength:
      return "length";
    case FinishReason::kOther:
      return "other";
  }
  return "other";
}

bool truncate_at_stop(std::string& text, std::span<const std::string> stops) {
  std::size_t cut = std::string::npos;
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    cut = std::min(cut, text.find(stop));
  }
  if (cut == std::string::npos) return false;
  text.resize(cut);
  return true;
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  double ms = static_cast<double>(initial_delay.count()) *
              std::pow(backoff_factor, static_cast<double>(std::max(0, attempt - 1)));
  ms = std::min(ms, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

ScoreMap score_label_tokens(Backend& backend, const Prompt& label_query,
                            std::span<const std::string> candidates,
                            std::uint64_t request_key) {
  if (candidates.empty()) throw ValidationError("no label candidates to score");
  std::set<std::string> distinct(candidates.begin(), candidates.end());
  if (distinct.size() != candidates.size()) {
    throw ValidationError("label candidates must be distinct");
  }

  GenerationParams params;
  params.max_tokens = 1;
  params.temperature = 0.0;
  params.frequency_penalty = 0.0;
  params.logprob_top_k = static_cast<int>(candidates.size());
  Completion next = backend.complete(label_query, params, request_key);

  std::map<std::string, double> alternatives;
  if (!next.tokens.empty()) {
    alternatives = next.tokens.front().top_alternatives;
    alternatives.emplace(next.tokens.front().token, next.tokens.front().logprob);
  }

  ScoreMap scores;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& candidate = candidates[i];
    if (auto it = alternatives.find(candidate); it != alternatives.end()) {
      scores[candidate] = it->second;
      continue;
    }
    auto pieces = backend.score_continuation(label_query.text, candidate, request_key + i + 1);
    if (pieces.size() > 1) throw MultiTokenVerbalizerError(candidate, pieces.size());
    if (pieces.empty()) {
      throw ScoringError("backend returned no score for label token '" + candidate + "'");
    }
    scores[candidate] = pieces.front().logprob;
  }
  for (const auto& [token, logprob] : scores) {
    if (std::isnan(logprob) || logprob > 1e-6) {
      throw ScoringError("invalid log-probability for label token '" + token + "'");
    }
  }
  return scores;
}

}  // namespace mixprompt
