#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixprompt/errors.hpp"
#include "mixprompt/promptgen.hpp"

namespace mixprompt {

struct GenerationParams {
  int max_tokens = 80;
  double temperature = 1.0;
  double top_p = 1.0;
  double frequency_penalty = 0.02;
  std::vector<std::string> stop_sequences;
  int logprob_top_k = 0;

  // Throws ConfigError.
  void validate() const;
};

// Generation defaults for a task: stop at the next list item or a blank line.
GenerationParams default_generation_params(const TaskSpecification& spec);

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  std::map<std::string, double> top_alternatives;
};

enum class FinishReason { kStop, kLength, kOther };

FinishReason parse_finish_reason(std::string_view s) noexcept;
const char* to_string(FinishReason reason) noexcept;

struct Completion {
  std::string text;
  std::vector<TokenLogprob> tokens;
  FinishReason finish_reason = FinishReason::kOther;
};

// Cuts `text` at the earliest occurrence of any stop sequence. Returns true
// when something was cut.
bool truncate_at_stop(std::string& text, std::span<const std::string> stops);

// A text-completion backend with token log-likelihoods. Implementations must
// allow concurrent calls. `request_key` identifies the logical request; the
// mock derives its randomness from it, remote backends ignore it.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual Completion complete(const Prompt& prompt, const GenerationParams& params,
                              std::uint64_t request_key) = 0;

  // Log-likelihood of each backend token of `continuation` when it follows
  // `context` (echo scoring). Only the continuation's tokens are returned.
  virtual std::vector<TokenLogprob> score_continuation(std::string_view context,
                                                       std::string_view continuation,
                                                       std::uint64_t request_key) = 0;

  virtual std::string model_name() const = 0;
};

using ScoreMap = std::map<std::string, double>;

// Next-token log-likelihood of every candidate after a label-query prompt.
// One 1-token completion with top-k alternatives; candidates missing from the
// alternatives are scored one by one through echo scoring. Throws
// MultiTokenVerbalizerError when a candidate is more than one backend token,
// ScoringError when a candidate cannot be scored.
ScoreMap score_label_tokens(Backend& backend, const Prompt& label_query,
                            std::span<const std::string> candidates,
                            std::uint64_t request_key = 0);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_delay{20000};

  std::chrono::milliseconds delay_for(int attempt) const;  // attempt >= 1
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Runs `call`, retrying BackendError::retryable() failures with exponential
// backoff until the attempt budget is spent. Fatal errors propagate at once.
template <typename F>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, F&& call,
                  const std::function<void(int, const BackendError&)>& on_retry = {})
    -> decltype(call()) {
  for (int attempt = 1;; ++attempt) {
    try {
      return call();
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
      if (on_retry) on_retry(attempt, e);
      if (sleep) sleep(policy.delay_for(attempt));
    }
  }
}

}  // namespace mixprompt
