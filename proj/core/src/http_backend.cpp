#include "mixprompt/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mixprompt/errors.hpp"

namespace mixprompt {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

BackendErrorKind kind_for_status(int status) {
  if (status == 429) return BackendErrorKind::kRateLimited;
  if (status == 401 || status == 403) return BackendErrorKind::kAuth;
  if (status == 408 || status >= 500) return BackendErrorKind::kServer;
  return BackendErrorKind::kBadRequest;
}

std::string error_message(const std::string& body) {
  try {
    auto doc = json::parse(body);
    if (doc.contains("error") && doc["error"].is_object() && doc["error"].contains("message")) {
      return doc["error"]["message"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return body.substr(0, 200);
}

// Drops tokens that start at or after `length` bytes of text.
void clip_tokens(std::vector<TokenLogprob>& tokens, std::size_t length) {
  std::size_t offset = 0;
  std::size_t keep = 0;
  while (keep < tokens.size() && offset < length) {
    offset += tokens[keep].token.size();
    ++keep;
  }
  tokens.resize(keep);
}

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env(std::string base_url, std::string model) {
  HttpBackendConfig config;
  config.base_url = std::move(base_url);
  config.model = std::move(model);
  if (const char* key = std::getenv(kApiKeyEnvVar)) config.api_key = key;
  return config;
}

std::string completion_request_body(const std::string& model, std::string_view prompt,
                                    const GenerationParams& params, bool echo) {
  ordered_json body;
  body["model"] = model;
  body["prompt"] = std::string(prompt);
  body["max_tokens"] = echo ? 0 : params.max_tokens;
  body["temperature"] = params.temperature;
  body["top_p"] = params.top_p;
  body["frequency_penalty"] = params.frequency_penalty;
  body["stop"] = params.stop_sequences.empty() ? ordered_json(nullptr)
                                               : ordered_json(params.stop_sequences);
  if (echo) {
    body["logprobs"] = 0;
  } else if (params.logprob_top_k > 0) {
    body["logprobs"] = params.logprob_top_k;
  } else {
    body["logprobs"] = nullptr;
  }
  body["echo"] = echo;
  return body.dump();
}

Completion parse_completion_response(std::string_view body) {
  auto fail = [](const std::string& what) {
    return BackendError(BackendErrorKind::kProtocol, "malformed completion response: " + what);
  };
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    throw fail("not JSON");
  }
  if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    throw fail("no choices");
  }
  const json& choice = doc["choices"][0];
  if (!choice.is_object() || !choice.contains("text") || !choice["text"].is_string()) {
    throw fail("choices[0].text missing");
  }
  Completion out;
  out.text = choice["text"].get<std::string>();
  if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) {
    out.finish_reason = parse_finish_reason(it->get<std::string>());
  }
  auto lp = choice.find("logprobs");
  if (lp == choice.end() || lp->is_null()) return out;
  if (!lp->is_object()) throw fail("logprobs is not an object");
  try {
    const json& tokens = lp->at("tokens");
    const json& token_logprobs = lp->at("token_logprobs");
    const json* top = lp->contains("top_logprobs") ? &lp->at("top_logprobs") : nullptr;
    if (!tokens.is_array() || !token_logprobs.is_array() ||
        tokens.size() != token_logprobs.size()) {
      throw fail("token arrays differ in length");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      TokenLogprob t;
      t.token = tokens[i].get<std::string>();
      // The first echoed prompt token has no likelihood.
      t.logprob = token_logprobs[i].is_null() ? 0.0 : token_logprobs[i].get<double>();
      if (top && top->is_array() && i < top->size() && (*top)[i].is_object()) {
        for (auto& [tok, value] : (*top)[i].items()) {
          if (value.is_number()) t.top_alternatives[tok] = value.get<double>();
        }
      }
      out.tokens.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  return out;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto& url = config_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("base URL needs a scheme (http:// or https://): " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (!config_.sleep) {
    config_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpBackend::post(const std::string& body) {
  return with_retries(config_.retry, config_.sleep, [&]() -> std::string {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    ++requests_sent_;
    auto res = client.Post(path_prefix_ + "/v1/completions", headers, body, "application/json");
    if (!res) {
      throw BackendError(BackendErrorKind::kTransport, httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw BackendError(kind_for_status(res->status),
                         "HTTP " + std::to_string(res->status) + ": " + error_message(res->body),
                         res->status);
    }
    return res->body;
  });
}

Completion HttpBackend::complete(const Prompt& prompt, const GenerationParams& params,
                                 std::uint64_t /*request_key*/) {
  params.validate();
  Completion out = parse_completion_response(
      post(completion_request_body(config_.model, prompt.text, params, false)));
  if (truncate_at_stop(out.text, params.stop_sequences)) {
    out.finish_reason = FinishReason::kStop;
    clip_tokens(out.tokens, out.text.size());
  }
  return out;
}

std::vector<TokenLogprob> HttpBackend::score_continuation(std::string_view context,
                                                          std::string_view continuation,
                                                          std::uint64_t /*request_key*/) {
  GenerationParams params;
  params.temperature = 0.0;
  params.frequency_penalty = 0.0;
  std::string full(context);
  full += continuation;
  Completion echoed =
      parse_completion_response(post(completion_request_body(config_.model, full, params, true)));

  std::size_t offset = 0;
  std::size_t first = 0;
  while (first < echoed.tokens.size() && offset < context.size()) {
    offset += echoed.tokens[first].token.size();
    ++first;
  }
  if (offset != context.size()) {
    throw ScoringError("echoed tokens straddle the end of the scoring context");
  }
  std::vector<TokenLogprob> out(echoed.tokens.begin() + static_cast<std::ptrdiff_t>(first),
                                echoed.tokens.end());
  std::size_t covered = 0;
  for (const auto& t : out) covered += t.token.size();
  if (covered != continuation.size()) {
    throw ScoringError("echoed tokens do not cover the scored continuation");
  }
  return out;
}

}  // namespace mixprompt
