#include <gtest/gtest.h>

#include <cmath>

#include "mixprompt/errors.hpp"
#include "mixprompt/extract.hpp"
#include "mixprompt/mock_backend.hpp"
#include "mixprompt/promptgen.hpp"
#include "mixprompt/text_util.hpp"
#include "test_support.hpp"

namespace mp = mixprompt;
namespace mt = mixprompt::testing;

namespace {

mp::TaskSpecification sst2() { return *mp::builtin_task_spec("sst2"); }

mp::Prompt positive_mix_prompt() {
  mp::PromptExamples pe;
  pe.examples = {{"a superb and moving film", 0}, {"the cast is witty and warm", 0}};
  pe.source_indices = {0, 1};
  return mp::build_mix_prompt(pe, sst2());
}

}  // namespace

TEST(MockTokenize, SplitsPunctuationAndHyphens) {
  EXPECT_EQ(mp::mock_tokenize("Positive"), (std::vector<std::string>{"Positive"}));
  EXPECT_EQ(mp::mock_tokenize("grammatical-acceptability").size(), 3u);
  EXPECT_EQ(mp::mock_tokenize("a b"), (std::vector<std::string>{"a", " b"}));
}

TEST(MockBackend, EmitsTemplateItemsFromPools) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 1));
  auto params = mp::default_generation_params(sst2());
  auto c = mock.complete(positive_mix_prompt(), params, 7);
  auto parsed = mp::parse_augmentation(c.text, sst2());
  EXPECT_EQ(parsed.label, 0u);
  bool has_pool_word = false;
  for (const auto& w : mp::split_whitespace(parsed.text)) {
    for (const auto& p : mt::positive_words()) has_pool_word |= (w == p);
  }
  EXPECT_TRUE(has_pool_word) << parsed.text;
  EXPECT_EQ(c.text.find('\n'), std::string::npos) << "stop sequences apply";
  // Same request key, same output.
  EXPECT_EQ(mock.complete(positive_mix_prompt(), params, 7).text, c.text);
}

TEST(MockBackend, LabelNoiseFrequencyMatchesEpsilon) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.25, 3));
  auto params = mp::default_generation_params(sst2());
  const auto prompt = positive_mix_prompt();
  const int draws = 10000;
  int flipped = 0;
  for (int i = 0; i < draws; ++i) {
    auto parsed = mp::parse_augmentation(mock.complete(prompt, params, i).text, sst2());
    flipped += parsed.label != 0;
  }
  EXPECT_NEAR(flipped / double(draws), 0.25, 0.03);
}

TEST(MockBackend, ScoresContentLabel) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.1, 1));
  auto query = mp::build_label_query(positive_mix_prompt(), "a dazzling and luminous story", sst2());
  auto scores = mp::score_label_tokens(mock, query, mp::label_candidates(sst2()));
  auto soft = mp::compute_soft_label(scores, sst2());
  EXPECT_NEAR(soft[0], 0.9, 1e-9);
  EXPECT_NEAR(soft[1], 0.1, 1e-9);

  mp::MockBackend exact(mt::make_disjoint_mock(0.0, 1));
  soft = mp::compute_soft_label(
      mp::score_label_tokens(exact, query, mp::label_candidates(sst2())), sst2());
  EXPECT_NEAR(soft[0], 1.0, 1e-12);
}

TEST(MockBackend, CannedFixtures) {
  auto config = mt::make_disjoint_mock(0.0, 1);
  config.canned_completions["hello"] = " world (Sentiment: Positive)\nnext";
  config.canned_next_token["ctx"] = {{"Positive", std::log(0.2)}, {"Negative", std::log(0.8)}};
  mp::MockBackend mock(config);
  mp::GenerationParams params;
  params.stop_sequences = {"\n"};
  auto c = mock.complete({mp::PromptKind::kMixGeneration, "hello"}, params, 0);
  EXPECT_EQ(c.text, " world (Sentiment: Positive)");
  EXPECT_EQ(c.finish_reason, mp::FinishReason::kStop);

  auto scores = mp::score_label_tokens(mock, {mp::PromptKind::kLabelQuery, "ctx"},
                                       mp::label_candidates(sst2()));
  EXPECT_NEAR(scores.at("Negative"), std::log(0.8), 1e-12);
  EXPECT_NEAR(scores.at("Positive"), std::log(0.2), 1e-12);
}

TEST(MockBackend, RejectsOffTemplatePrompts) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 1));
  EXPECT_THROW(mock.complete({mp::PromptKind::kMixGeneration, "free text"},
                             mp::GenerationParams{}, 0),
               mp::MockFormatError);
}

TEST(MockBackend, MultiTokenVerbalizerIsReported) {
  auto spec = mp::make_task_spec("sentence", "grammar",
                                 {{"ok", "grammatical-acceptability"}, {"bad", "wrong"}});
  mp::PromptExamples pe;
  pe.examples = {{"she runs fast", 0}};
  pe.source_indices = {0};
  auto query = mp::build_label_query(mp::build_mix_prompt(pe, spec), "he run", spec);
  mp::MockBackend mock(mp::MockConfig{});
  try {
    mp::score_label_tokens(mock, query, mp::label_candidates(spec));
    FAIL();
  } catch (const mp::MultiTokenVerbalizerError& e) {
    EXPECT_EQ(e.candidate(), "Grammatical-acceptability");
  }
}

TEST(MockConfig, ParseAndValidate) {
  auto c = mp::parse_mock_config(
      R"({"epsilon":0.2,"seed":5,"model":"m","phrase_pools":{"positive":["great"]}})");
  EXPECT_DOUBLE_EQ(c.epsilon, 0.2);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.model, "m");
  EXPECT_EQ(c.phrase_pools.at("positive"), (std::vector<std::string>{"great"}));
  EXPECT_THROW(mp::parse_mock_config(R"({"epsilon":1.5})"), mp::ConfigError);
  EXPECT_THROW(mp::parse_mock_config("[1,2"), mp::ConfigError);
  EXPECT_THROW(mp::load_mock_config("/nonexistent/mock.json"), mp::ConfigError);
}
