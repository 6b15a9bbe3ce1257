#include "mixprompt/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixprompt/errors.hpp"
#include "mixprompt/random.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {
namespace {

using nlohmann::json;

constexpr double kProbabilityFloor = 1e-15;

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80 || c == '_';
}

// What the mock understands of a prompt written in the mix template.
struct ParsedPrompt {
  std::string text_prefix;  // "Movie review"
  std::string label_name;   // "Sentiment"
  std::vector<std::string> tokens;
  std::vector<std::string> anchor_texts;
  std::vector<std::size_t> anchor_labels;
  bool label_query = false;
  std::string generated;  // label queries only
};

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    auto nl = text.find('\n', start);
    lines.emplace_back(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

std::string expected_enumeration(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += tokens.size() == 2 ? " or " : (i + 1 == tokens.size() ? ", or " : ", ");
    out += "'" + tokens[i] + "'";
  }
  return out;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
  static const std::regex header_re(
      R"(^Each item in the following list contains an? (.+) and the respective (.+)\. The (.+) is one of (.+)\.$)");
  static const std::regex token_re(R"('([^']*)')");

  auto lines = split_lines(prompt);
  if (lines.size() < 4) throw MockFormatError("prompt has fewer than four lines");
  std::smatch m;
  if (!std::regex_match(lines[0], m, header_re)) {
    throw MockFormatError("unrecognized header: " + lines[0]);
  }
  if (m[2].str() != m[3].str()) throw MockFormatError("header names two label types");
  ParsedPrompt parsed;
  parsed.text_prefix = capitalize_first(m[1].str());
  parsed.label_name = capitalize_first(m[2].str());
  const std::string enumeration = m[4].str();
  for (auto it = std::sregex_iterator(enumeration.begin(), enumeration.end(), token_re);
       it != std::sregex_iterator(); ++it) {
    parsed.tokens.push_back((*it)[1].str());
  }
  if (parsed.tokens.empty() || expected_enumeration(parsed.tokens) != enumeration) {
    throw MockFormatError("malformed label enumeration: " + enumeration);
  }
  if (!lines[1].empty()) throw MockFormatError("header is not followed by a blank line");

  const std::string item_prefix = parsed.text_prefix + ": ";
  for (std::size_t i = 2; i + 1 < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.rfind(item_prefix, 0) != 0) throw MockFormatError("bad example line: " + line);
    auto open = line.rfind('(');
    if (open == std::string::npos || line.back() != ')') {
      throw MockFormatError("example line has no label group: " + line);
    }
    std::string group = line.substr(open + 1, line.size() - open - 2);
    std::string label_prefix = parsed.label_name + ": ";
    if (group.rfind(label_prefix, 0) != 0) throw MockFormatError("bad label group: " + line);
    std::string token = group.substr(label_prefix.size());
    std::size_t label = parsed.tokens.size();
    for (std::size_t t = 0; t < parsed.tokens.size(); ++t) {
      if (capitalize_first(parsed.tokens[t]) == token) label = t;
    }
    if (label == parsed.tokens.size()) throw MockFormatError("unknown label token: " + token);
    if (open < item_prefix.size() + 2 || line[open - 1] != ' ') {
      throw MockFormatError("example text is empty: " + line);
    }
    parsed.anchor_texts.push_back(line.substr(item_prefix.size(), open - 1 - item_prefix.size()));
    parsed.anchor_labels.push_back(label);
  }
  if (parsed.anchor_texts.empty()) throw MockFormatError("prompt has no examples");

  const auto& last = lines.back();
  const std::string query_suffix = " (" + parsed.label_name + ": ";
  if (last == parsed.text_prefix + ":") return parsed;
  if (last.rfind(item_prefix, 0) == 0 && last.size() >= item_prefix.size() + query_suffix.size() &&
      last.compare(last.size() - query_suffix.size(), query_suffix.size(), query_suffix) == 0) {
    parsed.label_query = true;
    parsed.generated =
        last.substr(item_prefix.size(), last.size() - item_prefix.size() - query_suffix.size());
    if (trim_view(parsed.generated).empty()) throw MockFormatError("label query has empty text");
    return parsed;
  }
  throw MockFormatError("prompt does not end with the augmentation prefix: " + last);
}

std::size_t anchor_majority(const ParsedPrompt& p, Rng* rng) {
  std::vector<std::size_t> counts(p.tokens.size(), 0);
  for (auto l : p.anchor_labels) ++counts[l];
  std::size_t best = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == best) tied.push_back(i);
  }
  if (!rng) return tied.front();
  return tied[uniform_index(*rng, tied.size())];
}

const std::vector<std::string>* pool_for(const MockConfig& config, const std::string& token) {
  for (const auto& [key, pool] : config.phrase_pools) {
    if (iequals_ascii(key, token)) return &pool;
  }
  return nullptr;
}

// Distinct phrases of each label's pool found in `text`, case-insensitively.
std::vector<std::size_t> pool_hits(const MockConfig& config, const std::vector<std::string>& tokens,
                                   const std::string& text) {
  const std::string lower = to_lower_ascii(text);
  std::vector<std::size_t> hits(tokens.size(), 0);
  for (std::size_t l = 0; l < tokens.size(); ++l) {
    if (const auto* pool = pool_for(config, tokens[l])) {
      for (const auto& phrase : *pool) {
        if (!phrase.empty() && lower.find(to_lower_ascii(phrase)) != std::string::npos) ++hits[l];
      }
    }
  }
  return hits;
}

// Label with strictly the most hits, if any.
std::optional<std::size_t> dominant(const std::vector<std::size_t>& hits) {
  auto best = std::max_element(hits.begin(), hits.end());
  if (best == hits.end() || *best == 0 || std::count(hits.begin(), hits.end(), *best) != 1) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(best - hits.begin());
}

// Label the mock assigns to a generated item: the pool whose phrases it
// contains most, falling back to the anchors' majority.
std::size_t content_label(const MockConfig& config, const ParsedPrompt& p) {
  if (auto d = dominant(pool_hits(config, p.tokens, p.generated))) return *d;
  return anchor_majority(p, nullptr);
}

std::vector<double> label_logprobs(const MockConfig& config, const ParsedPrompt& p) {
  const std::size_t n = p.tokens.size();
  const std::size_t c = content_label(config, p);
  std::vector<double> out(n);
  for (std::size_t l = 0; l < n; ++l) {
    double prob = n == 1 ? 1.0
                         : (l == c ? 1.0 - config.epsilon
                                   : config.epsilon / static_cast<double>(n - 1));
    out[l] = std::log(std::max(prob, kProbabilityFloor));
  }
  return out;
}

std::string generate_item(const MockConfig& config, const ParsedPrompt& p, std::size_t label,
                          Rng& rng) {
  std::vector<std::size_t> order(p.anchor_texts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(std::span<std::size_t>(order), rng);

  std::vector<std::string> segments;
  for (std::size_t a : order) {
    auto words = split_whitespace(p.anchor_texts[a]);
    if (words.empty()) continue;
    std::size_t span = config.min_span_words +
                       uniform_index(rng, config.max_span_words - config.min_span_words + 1);
    span = std::min(span, words.size());
    std::size_t start = uniform_index(rng, words.size() - span + 1);
    std::vector<std::string> piece(words.begin() + static_cast<std::ptrdiff_t>(start),
                                   words.begin() + static_cast<std::ptrdiff_t>(start + span));
    segments.push_back(join(piece, " "));
  }
  const auto* pool = pool_for(config, p.tokens[label]);
  if (!pool || pool->empty()) return join(segments, " ");
  for (std::size_t i = 0; i < config.phrases_per_item; ++i) {
    const auto& phrase = (*pool)[uniform_index(rng, pool->size())];
    auto at = uniform_index(rng, segments.size() + 1);
    segments.insert(segments.begin() + static_cast<std::ptrdiff_t>(at), phrase);
  }
  // Spans of other-label anchors can carry their own pool's phrases. Add
  // unused phrases of the chosen label until the item reads as that label.
  while (true) {
    std::string item = join(segments, " ");
    if (dominant(pool_hits(config, p.tokens, item)) == label) return item;
    const std::string lower = to_lower_ascii(item);
    std::vector<const std::string*> unused;
    for (const auto& phrase : *pool) {
      if (!phrase.empty() && lower.find(to_lower_ascii(phrase)) == std::string::npos) {
        unused.push_back(&phrase);
      }
    }
    if (unused.empty()) return item;
    auto at = uniform_index(rng, segments.size() + 1);
    segments.insert(segments.begin() + static_cast<std::ptrdiff_t>(at),
                    *unused[uniform_index(rng, unused.size())]);
  }
}

// Streams `raw` token by token, honoring stop sequences and max_tokens.
Completion emit(const std::string& raw, const GenerationParams& params, Rng& rng) {
  Completion out;
  out.finish_reason = FinishReason::kStop;
  for (auto& piece : mock_tokenize(raw)) {
    if (out.tokens.size() >= static_cast<std::size_t>(params.max_tokens)) {
      out.finish_reason = FinishReason::kLength;
      break;
    }
    out.text += piece;
    double lp = std::log(0.2 + 0.8 * uniform01(rng));
    TokenLogprob t{piece, lp, {}};
    if (params.logprob_top_k > 0) t.top_alternatives[piece] = lp;
    out.tokens.push_back(std::move(t));
    if (truncate_at_stop(out.text, params.stop_sequences)) {
      std::size_t offset = 0;
      std::size_t keep = 0;
      while (keep < out.tokens.size() && offset < out.text.size()) {
        offset += out.tokens[keep].token.size();
        ++keep;
      }
      out.tokens.resize(keep);
      out.finish_reason = FinishReason::kStop;
      break;
    }
  }
  if (params.logprob_top_k == 0) {
    for (auto& t : out.tokens) t.top_alternatives.clear();
  }
  return out;
}

Completion next_token_completion(const std::vector<std::pair<std::string, double>>& scored,
                                 const GenerationParams& params) {
  // scored: (capitalized token, logprob); multi-piece tokens are only visible
  // through their first piece.
  std::vector<std::pair<std::string, double>> visible;
  for (const auto& [tok, lp] : scored) {
    if (mock_tokenize(tok).size() == 1) visible.emplace_back(tok, lp);
  }
  std::stable_sort(visible.begin(), visible.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Completion out;
  out.finish_reason = FinishReason::kLength;
  if (visible.empty()) {
    out.text = mock_tokenize(scored.front().first).front();
    out.tokens.push_back({out.text, -1.0, {}});
    return out;
  }
  out.text = visible.front().first;
  TokenLogprob t{visible.front().first, visible.front().second, {}};
  const auto k = std::min<std::size_t>(visible.size(), static_cast<std::size_t>(params.logprob_top_k));
  for (std::size_t i = 0; i < k; ++i) t.top_alternatives[visible[i].first] = visible[i].second;
  out.tokens.push_back(std::move(t));
  return out;
}

template <typename Map>
const typename Map::mapped_type* find_fixture(const Map& map, const std::string& key) {
  if (auto it = map.find(key); it != map.end()) return &it->second;
  if (auto it = map.find(""); it != map.end()) return &it->second;
  return nullptr;
}

}  // namespace

void MockConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("mock epsilon must be in [0, 1]");
  if (min_span_words < 1 || min_span_words > max_span_words) {
    throw ConfigError("mock span bounds must satisfy 1 <= min <= max");
  }
}

MockConfig parse_mock_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("mock config is not valid JSON: ") + e.what());
  }
  MockConfig config;
  try {
    config.epsilon = doc.value("epsilon", config.epsilon);
    config.seed = doc.value("seed", config.seed);
    config.model = doc.value("model", config.model);
    config.min_span_words = doc.value("min_span_words", config.min_span_words);
    config.max_span_words = doc.value("max_span_words", config.max_span_words);
    config.phrases_per_item = doc.value("phrases_per_item", config.phrases_per_item);
    if (doc.contains("phrase_pools")) {
      config.phrase_pools =
          doc["phrase_pools"].get<std::map<std::string, std::vector<std::string>>>();
    }
    if (doc.contains("canned_completions")) {
      config.canned_completions =
          doc["canned_completions"].get<std::map<std::string, std::string>>();
    }
    if (doc.contains("canned_next_token")) {
      config.canned_next_token =
          doc["canned_next_token"].get<std::map<std::string, std::map<std::string, double>>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid mock config: ") + e.what());
  }
  config.validate();
  return config;
}

MockConfig load_mock_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open mock config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mock_config(ss.str());
}

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) {
      out.emplace_back(text.substr(start));
      break;
    }
    if (is_word_byte(static_cast<unsigned char>(text[i]))) {
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

MockBackend::MockBackend(MockConfig config) : config_(std::move(config)) { config_.validate(); }

Completion MockBackend::complete(const Prompt& prompt, const GenerationParams& params,
                                 std::uint64_t request_key) {
  params.validate();
  Rng rng = make_rng({config_.seed, request_key, stable_hash(prompt.text)});

  if (const auto* canned = find_fixture(config_.canned_completions, prompt.text)) {
    return emit(*canned, params, rng);
  }
  if (const auto* dist = find_fixture(config_.canned_next_token, prompt.text)) {
    std::vector<std::pair<std::string, double>> scored(dist->begin(), dist->end());
    if (scored.empty()) throw MockFormatError("empty canned next-token table");
    return next_token_completion(scored, params);
  }

  ParsedPrompt parsed = parse_prompt(prompt.text);
  if (parsed.label_query) {
    auto lps = label_logprobs(config_, parsed);
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t l = 0; l < parsed.tokens.size(); ++l) {
      scored.emplace_back(capitalize_first(parsed.tokens[l]), lps[l]);
    }
    return next_token_completion(scored, params);
  }

  const std::size_t n = parsed.tokens.size();
  const std::size_t content = anchor_majority(parsed, &rng);
  std::size_t emitted = content;
  if (n > 1 && uniform01(rng) < config_.epsilon) {
    emitted = uniform_index(rng, n - 1);
    if (emitted >= content) ++emitted;
  }
  std::string item = generate_item(config_, parsed, content, rng);
  std::string follow_up = generate_item(config_, parsed, anchor_majority(parsed, &rng), rng);
  std::string raw = " " + item + " (" + parsed.label_name + ": " +
                    capitalize_first(parsed.tokens[emitted]) + ")\n" + parsed.text_prefix + ": " +
                    follow_up + "\n\n";
  return emit(raw, params, rng);
}

std::vector<TokenLogprob> MockBackend::score_continuation(std::string_view context,
                                                          std::string_view continuation,
                                                          std::uint64_t /*request_key*/) {
  auto pieces = mock_tokenize(continuation);
  std::vector<TokenLogprob> out;
  if (pieces.size() != 1) {
    for (auto& piece : pieces) out.push_back({piece, -1.0, {}});
    return out;
  }
  const std::string key(context);
  double lp = std::log(kProbabilityFloor);
  if (const auto* dist = find_fixture(config_.canned_next_token, key)) {
    if (auto it = dist->find(pieces.front()); it != dist->end()) lp = it->second;
  } else {
    ParsedPrompt parsed = parse_prompt(context);
    if (!parsed.label_query) throw MockFormatError("echo scoring context is not a label query");
    auto lps = label_logprobs(config_, parsed);
    for (std::size_t l = 0; l < parsed.tokens.size(); ++l) {
      if (capitalize_first(parsed.tokens[l]) == pieces.front()) lp = lps[l];
    }
  }
  out.push_back({pieces.front(), lp, {}});
  return out;
}

}  // namespace mixprompt
