#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>

#include "mixprompt/lmclient.hpp"

namespace mixprompt {

inline constexpr const char* kApiKeyEnvVar = "MIXPROMPT_API_KEY";

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";  // scheme://host[:port][/prefix]
  std::string model = "davinci";
  std::string api_key;  // sent as a bearer token when non-empty
  std::chrono::seconds timeout{60};
  RetryPolicy retry;
  Sleeper sleep;  // defaults to std::this_thread::sleep_for

  // Fills api_key from MIXPROMPT_API_KEY.
  static HttpBackendConfig from_env(std::string base_url, std::string model);
};

// JSON body of POST /v1/completions.
std::string completion_request_body(const std::string& model, std::string_view prompt,
                                    const GenerationParams& params, bool echo);

// Parses a completions response. Throws BackendError(kProtocol) when the
// schema does not match.
Completion parse_completion_response(std::string_view body);

// Client for the completions wire protocol: POST <base_url>/v1/completions.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  Completion complete(const Prompt& prompt, const GenerationParams& params,
                      std::uint64_t request_key) override;
  std::vector<TokenLogprob> score_continuation(std::string_view context,
                                               std::string_view continuation,
                                               std::uint64_t request_key) override;
  std::string model_name() const override { return config_.model; }

  // HTTP requests issued so far, retries included.
  std::size_t requests_sent() const noexcept { return requests_sent_.load(); }

 private:
  std::string post(const std::string& body);

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace mixprompt
