#include "mixprompt/augment.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mixprompt/errors.hpp"
#include "mixprompt/promptgen.hpp"
#include "mixprompt/random.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {
namespace {

using ordered_json = nlohmann::ordered_json;

// Counts backend calls made through it.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  Completion complete(const Prompt& prompt, const GenerationParams& params,
                      std::uint64_t request_key) override {
    ++calls_;
    return inner_.complete(prompt, params, request_key);
  }
  std::vector<TokenLogprob> score_continuation(std::string_view context,
                                               std::string_view continuation,
                                               std::uint64_t request_key) override {
    ++calls_;
    return inner_.score_continuation(context, continuation, request_key);
  }
  std::string model_name() const override { return inner_.model_name(); }

  std::size_t calls() const noexcept { return calls_; }

 private:
  Backend& inner_;
  std::size_t calls_ = 0;
};

enum class Outcome { kRecord, kSkipped, kFatal };

struct SlotResult {
  Outcome outcome = Outcome::kSkipped;
  AugmentationRecord record;
  std::string normalized;
  int attempt = 0;  // attempt that produced the record
  std::size_t requests = 0;
  std::string error;
};

class SlotRunner {
 public:
  SlotRunner(const Dataset& source, const TaskSpecification& spec, Backend& backend,
             const AugmentConfig& config)
      : source_(source), spec_(spec), backend_(backend), config_(config) {
    generation_ = config.generation;
    if (generation_.stop_sequences.empty()) {
      generation_.stop_sequences = default_generation_params(spec).stop_sequences;
    }
    candidates_ = label_candidates(spec);
    if (config.dedup) {
      for (const auto& ex : source.examples()) source_texts_.insert(normalize_text(ex.text));
    }
  }

  // Attempts first_attempt..max_retries until one yields a record.
  SlotResult run(std::size_t slot, int first_attempt) const {
    SlotResult result;
    std::string last_error;
    for (int attempt = first_attempt; attempt <= config_.max_retries; ++attempt) {
      CountingBackend counter(backend_);
      try {
        auto record = attempt_once(counter, slot, attempt);
        result.requests += counter.calls();
        if (record) {
          result.outcome = Outcome::kRecord;
          result.normalized = normalize_text(record->text);
          result.record = std::move(*record);
          result.attempt = attempt;
          return result;
        }
        last_error = "duplicate of a source text";
      } catch (const ParseError& e) {
        result.requests += counter.calls();
        last_error = e.what();
      } catch (const ScoringError& e) {
        result.requests += counter.calls();
        last_error = e.what();
      } catch (const std::exception& e) {
        result.requests += counter.calls();
        result.outcome = Outcome::kFatal;
        result.error = e.what();
        return result;
      }
    }
    result.outcome = Outcome::kSkipped;
    result.error = last_error;
    result.attempt = config_.max_retries;
    return result;
  }

 private:
  std::optional<AugmentationRecord> attempt_once(Backend& backend, std::size_t slot,
                                                 int attempt) const {
    const auto slot_key = static_cast<std::uint64_t>(slot);
    const auto attempt_key = static_cast<std::uint64_t>(attempt);
    Rng rng = make_rng({config_.seed, slot_key, attempt_key, 0xa5c407});
    PromptExamples anchors = select_examples(source_, config_.k, rng);
    Prompt prompt = build_mix_prompt(anchors, spec_);
    const std::uint64_t request_key = mix_seed({config_.seed, slot_key, attempt_key});

    Completion completion = backend.complete(prompt, generation_, request_key);
    ParsedAugmentation parsed = parse_augmentation(completion.text, spec_);
    if (config_.dedup && source_texts_.count(normalize_text(parsed.text))) return std::nullopt;

    Prompt query = build_label_query(prompt, parsed.text, spec_);
    ScoreMap scores = score_label_tokens(backend, query, candidates_, mix_seed({request_key, 1}));

    AugmentationRecord record;
    record.soft_label = compute_soft_label(scores, spec_);
    record.text = std::move(parsed.text);
    record.generated_label = parsed.label;
    record.anchor_indices = std::move(anchors.source_indices);
    record.raw_completion = std::move(completion.text);
    record.model = backend.model_name();
    return record;
  }

  const Dataset& source_;
  const TaskSpecification& spec_;
  Backend& backend_;
  const AugmentConfig& config_;
  GenerationParams generation_;
  std::vector<std::string> candidates_;
  std::unordered_set<std::string> source_texts_;
};

}  // namespace

void AugmentConfig::validate() const {
  if (k < 1 || k > kMaxAnchorCount) {
    throw ConfigError("k must be in 1.." + std::to_string(kMaxAnchorCount));
  }
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw ConfigError("ratio must be >= 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  generation.validate();
}

std::size_t augmentation_target(double ratio, std::size_t source_size) {
  if (!(ratio >= 0.0)) throw ConfigError("ratio must be >= 0");
  const double x = ratio * static_cast<double>(source_size);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

AugmentRun gpt3mix_augment(const Dataset& source, const TaskSpecification& spec,
                           Backend& backend, const AugmentConfig& config) {
  config.validate();
  validate_task_spec(spec);
  if (source.empty()) throw ValidationError("augmentation source is empty");
  if (spec.labels != source.labels()) {
    throw ValidationError("task specification is not bound to the source label set");
  }
  if (config.k > source.size()) {
    throw ConfigError("k = " + std::to_string(config.k) + " exceeds the " +
                      std::to_string(source.size()) + " source examples");
  }

  AugmentRun run;
  run.config = config;
  run.model = backend.model_name();
  const std::size_t target = augmentation_target(config.ratio, source.size());
  SlotRunner runner(source, spec, backend, config);
  std::unordered_set<std::string> committed;

  std::vector<SlotResult> batch;
  for (std::size_t begin = 0; begin < target && !run.aborted; begin += config.concurrency) {
    const std::size_t end = std::min(target, begin + config.concurrency);
    batch.assign(end - begin, SlotResult{});
    if (batch.size() == 1) {
      batch[0] = runner.run(begin, 0);
    } else {
      std::vector<std::thread> workers;
      workers.reserve(batch.size());
      for (std::size_t s = begin; s < end; ++s) {
        workers.emplace_back([&, s] { batch[s - begin] = runner.run(s, 0); });
      }
      for (auto& w : workers) w.join();
    }

    // Commit in slot order; duplicates of earlier records continue the
    // slot's attempt sequence here so the result is order-independent.
    for (std::size_t i = 0; i < batch.size(); ++i) {
      run.requests_made += batch[i].requests;
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      SlotResult result = std::move(batch[i]);
      const std::size_t slot = begin + i;
      while (config.dedup && result.outcome == Outcome::kRecord &&
             committed.count(result.normalized)) {
        if (result.attempt >= config.max_retries) {
          result.outcome = Outcome::kSkipped;
          result.error = "duplicate of an earlier record";
          break;
        }
        result = runner.run(slot, result.attempt + 1);
        run.requests_made += result.requests;
      }
      if (result.outcome == Outcome::kFatal) {
        run.aborted = true;
        run.abort_reason = "slot " + std::to_string(slot) + ": " + result.error;
        spdlog::error("augmentation aborted at {}", run.abort_reason);
        break;
      }
      if (result.outcome == Outcome::kSkipped) {
        ++run.skipped;
        spdlog::warn("slot {} skipped after {} retries: {}", slot, config.max_retries,
                     result.error);
        continue;
      }
      committed.insert(result.normalized);
      run.records.push_back(std::move(result.record));
    }
  }
  return run;
}

LabeledExample to_hard_label(const AugmentationRecord& record) {
  return {record.text, record.generated_label};
}

std::vector<LabeledExample> to_hard_labels(std::span<const AugmentationRecord> records) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_hard_label(r));
  return out;
}

std::string run_manifest_json(const AugmentRun& run, const TaskSpecification& spec,
                              std::size_t source_size) {
  const auto& c = run.config;
  ordered_json gen = {{"max_tokens", c.generation.max_tokens},
                      {"temperature", c.generation.temperature},
                      {"top_p", c.generation.top_p},
                      {"frequency_penalty", c.generation.frequency_penalty},
                      {"stop", c.generation.stop_sequences},
                      {"logprob_top_k", c.generation.logprob_top_k}};
  ordered_json doc = {
      {"augmenter", "gpt3mix"},
      {"model", run.model},
      {"task_spec", ordered_json::parse(task_spec_to_json(spec))},
      {"config",
       {{"k", c.k},
        {"ratio", c.ratio},
        {"max_retries", c.max_retries},
        {"dedup", c.dedup},
        {"seed", c.seed},
        {"concurrency", c.concurrency},
        {"generation", gen}}},
      {"source_size", source_size},
      {"target", augmentation_target(c.ratio, source_size)},
      {"records", run.records.size()},
      {"skipped", run.skipped},
      {"requests_made", run.requests_made},
      {"aborted", run.aborted},
      {"abort_reason", run.abort_reason},
  };
  return doc.dump(2);
}

EdaOp parse_eda_op(std::string_view name) {
  if (name == "synonym_replace" || name == "sr") return EdaOp::kSynonymReplace;
  if (name == "random_insert" || name == "ri") return EdaOp::kRandomInsert;
  if (name == "random_swap" || name == "rs") return EdaOp::kRandomSwap;
  if (name == "random_delete" || name == "rd") return EdaOp::kRandomDelete;
  throw ConfigError("unknown EDA operation '" + std::string(name) + "'");
}

const char* to_string(EdaOp op) noexcept {
  switch (op) {
    case EdaOp::kSynonymReplace:
      return "synonym_replace";
    case EdaOp::kRandomInsert:
      return "random_insert";
    case EdaOp::kRandomSwap:
      return "random_swap";
    case EdaOp::kRandomDelete:
      return "random_delete";
  }
  return "unknown";
}

SynonymLexicon parse_lexicon(std::string_view content) {
  SynonymLexicon lexicon;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto words = split_whitespace(line);
    if (words.size() < 2) continue;
    auto& syns = lexicon[to_lower_ascii(words[0])];
    syns.insert(syns.end(), words.begin() + 1, words.end());
  }
  return lexicon;
}

SynonymLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open lexicon " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_lexicon(ss.str());
}

void EdaConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("EDA alpha must be in [0, 1]");
  if (ops.empty()) throw ConfigError("EDA needs at least one operation");
  for (EdaOp op : ops) {
    if ((op == EdaOp::kSynonymReplace || op == EdaOp::kRandomInsert) && !lexicon) {
      throw ConfigError(std::string("EDA ") + to_string(op) + " requires a synonym lexicon");
    }
  }
}

namespace {

const std::vector<std::string>* synonyms_of(const SynonymLexicon* lexicon, const std::string& word) {
  if (!lexicon) return nullptr;
  auto it = lexicon->find(to_lower_ascii(word));
  if (it == lexicon->end() || it->second.empty()) return nullptr;
  return &it->second;
}

}  // namespace

std::string eda_apply(std::string_view text, EdaOp op, double alpha, const SynonymLexicon* lexicon,
                      Rng& rng) {
  auto words = split_whitespace(text);
  auto n = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(words.size())));
  if (n == 0 || words.empty()) return std::string(text);

  switch (op) {
    case EdaOp::kRandomSwap:
      for (std::size_t i = 0; i < n && words.size() >= 2; ++i) {
        std::size_t a = uniform_index(rng, words.size());
        std::size_t b = uniform_index(rng, words.size() - 1);
        if (b >= a) ++b;
        std::swap(words[a], words[b]);
      }
      break;
    case EdaOp::kRandomDelete:
      // Never deletes the last word.
      n = std::min(n, words.size() - 1);
      for (std::size_t i = 0; i < n; ++i) {
        words.erase(words.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, words.size())));
      }
      break;
    case EdaOp::kSynonymReplace: {
      std::vector<std::size_t> positions;
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (synonyms_of(lexicon, words[i])) positions.push_back(i);
      }
      shuffle(std::span<std::size_t>(positions), rng);
      for (std::size_t i = 0; i < std::min(n, positions.size()); ++i) {
        const auto& syns = *synonyms_of(lexicon, words[positions[i]]);
        words[positions[i]] = syns[uniform_index(rng, syns.size())];
      }
      break;
    }
    case EdaOp::kRandomInsert:
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> positions;
        for (std::size_t w = 0; w < words.size(); ++w) {
          if (synonyms_of(lexicon, words[w])) positions.push_back(w);
        }
        if (positions.empty()) break;
        const auto& syns = *synonyms_of(lexicon, words[positions[uniform_index(rng, positions.size())]]);
        std::string inserted = syns[uniform_index(rng, syns.size())];
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, words.size() + 1)),
                     std::move(inserted));
      }
      break;
  }
  return join(words, " ");
}

std::vector<LabeledExample> eda_augment(const Dataset& source, const EdaConfig& config) {
  config.validate();
  const SynonymLexicon* lexicon = config.lexicon ? &*config.lexicon : nullptr;
  std::vector<LabeledExample> out;
  out.reserve(source.size() * config.n_aug_per_example);
  for (std::size_t i = 0; i < source.size(); ++i) {
    for (std::size_t j = 0; j < config.n_aug_per_example; ++j) {
      EdaOp op = config.ops[j % config.ops.size()];
      Rng rng = make_rng({config.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      std::string text = eda_apply(source[i].text, op, config.alpha, lexicon, rng);
      out.push_back({trim_view(text).empty() ? source[i].text : std::move(text), source[i].label});
    }
  }
  return out;
}

}  // namespace mixprompt
