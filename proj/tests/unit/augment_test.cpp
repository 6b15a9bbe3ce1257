#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <set>

#include "mixprompt/augment.hpp"
#include "mixprompt/errors.hpp"
#include "mixprompt/mock_backend.hpp"
#include "mixprompt/text_util.hpp"
#include "test_support.hpp"

namespace mp = mixprompt;
namespace mt = mixprompt::testing;

namespace {

mp::TaskSpecification sst2() { return *mp::builtin_task_spec("sst2"); }

mp::Dataset source(std::size_t per_class) {
  return mt::make_disjoint_task(per_class, 0, 0, 3).split("train");
}

mp::AugmentConfig base_config(double ratio, std::uint64_t seed) {
  mp::AugmentConfig c;
  c.ratio = ratio;
  c.seed = seed;
  c.generation = mp::default_generation_params(sst2());
  return c;
}

}  // namespace

TEST(AugmentTarget, CeilWithFloatingTolerance) {
  EXPECT_EQ(mp::augmentation_target(10.0, 20), 200u);
  EXPECT_EQ(mp::augmentation_target(0.5, 3), 2u);
  EXPECT_EQ(mp::augmentation_target(0.1, 30), 3u);  // 0.1 * 30 is 3.0000000000000004
  EXPECT_EQ(mp::augmentation_target(0.0, 30), 0u);
}

TEST(Gpt3Mix, ZeroRatioMakesNoRequests) {
  mt::ScriptedBackend backend([](const mp::Prompt&, const mp::GenerationParams&, std::uint64_t) {
    ADD_FAILURE() << "backend called";
    return mp::Completion{};
  });
  auto run = mp::gpt3mix_augment(source(5), sst2(), backend, base_config(0.0, 1));
  EXPECT_TRUE(run.records.empty());
  EXPECT_EQ(run.requests_made, 0u);
  EXPECT_EQ(backend.complete_calls, 0);
}

TEST(Gpt3Mix, RecordsPlusSkippedMeetTheTarget) {
  // Every third generation is unparseable; retries use fresh anchors.
  std::atomic<int> n{0};
  mp::MockBackend mock(mt::make_disjoint_mock(0.1, 5));
  mt::ScriptedBackend backend(
      [&](const mp::Prompt& p, const mp::GenerationParams& params, std::uint64_t key) {
        if (p.kind == mp::PromptKind::kMixGeneration && ++n % 3 == 0) {
          return mp::Completion{" garbled output", {}, mp::FinishReason::kStop};
        }
        return mock.complete(p, params, key);
      },
      [&](std::string_view c, std::string_view t) { return mock.score_continuation(c, t, 0); });
  auto config = base_config(2.0, 4);
  config.concurrency = 1;
  config.max_retries = 0;
  auto src = source(5);
  auto run = mp::gpt3mix_augment(src, sst2(), backend, config);
  EXPECT_FALSE(run.aborted);
  EXPECT_EQ(run.records.size() + run.skipped, 20u);
  EXPECT_GT(run.skipped, 0u);
  for (const auto& r : run.records) {
    EXPECT_NO_THROW(mp::validate_record(r, 2));
    EXPECT_EQ(r.anchor_indices.size(), config.k);
  }
}

TEST(Gpt3Mix, ZeroEpsilonGivesOneHotSoftLabelsOnTheAnchorMajority) {
  // 25 real examples at ratio 2 give 50 slots. With k = 3 on two classes the
  // anchors always have a strict majority.
  mp::Dataset src = mp::class_balanced_subsample(source(13), mp::PerClassCount{13}, 1);
  std::vector<mp::LabeledExample> ex(src.examples().begin(), src.examples().end() - 1);
  mp::Dataset odd(src.labels(), ex);
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 8));
  auto config = base_config(2.0, 2);
  config.k = 3;
  auto run = mp::gpt3mix_augment(odd, sst2(), mock, config);
  ASSERT_EQ(run.records.size(), 50u);
  EXPECT_EQ(run.skipped, 0u);
  for (const auto& r : run.records) {
    std::size_t pos = 0;
    for (auto i : r.anchor_indices) pos += odd[i].label == 0;
    const std::size_t majority = pos >= 2 ? 0 : 1;
    EXPECT_NEAR(r.soft_label[majority], 1.0, 1e-12) << r.text;
    EXPECT_EQ(r.generated_label, majority);
    EXPECT_EQ(mp::to_hard_label(r).label, r.generated_label);
    EXPECT_EQ(mp::to_hard_label(r).text, r.text);
  }
}

TEST(Gpt3Mix, ZeroEpsilonTiesStayOneHot) {
  // With k = 2 and mixed anchors the majority is a tie; the item still reads
  // as the label it was generated for.
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 8));
  auto run = mp::gpt3mix_augment(source(5), sst2(), mock, base_config(5.0, 2));
  ASSERT_EQ(run.records.size(), 50u);
  for (const auto& r : run.records) {
    EXPECT_NEAR(r.soft_label[r.generated_label], 1.0, 1e-12) << r.text;
  }
}

TEST(Gpt3Mix, DedupRemovesRepeats) {
  // A backend that always writes the same item forces duplicates.
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 1));
  mt::ScriptedBackend backend(
      [&](const mp::Prompt& p, const mp::GenerationParams& params, std::uint64_t key) {
        if (p.kind == mp::PromptKind::kMixGeneration) {
          return mp::Completion{" same text (Sentiment: Positive)", {}, mp::FinishReason::kStop};
        }
        return mock.complete(p, params, key);
      });
  auto config = base_config(1.0, 1);
  config.max_retries = 2;
  auto run = mp::gpt3mix_augment(source(2), sst2(), backend, config);
  EXPECT_EQ(run.records.size(), 1u);
  EXPECT_EQ(run.skipped, 3u);

  config.dedup = false;
  run = mp::gpt3mix_augment(source(2), sst2(), backend, config);
  EXPECT_EQ(run.records.size(), 4u);
  EXPECT_EQ(run.skipped, 0u);
}

TEST(Gpt3Mix, OutputIndependentOfConcurrency) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.2, 4));
  auto src = source(6);
  auto c1 = base_config(4.0, 11);
  c1.concurrency = 1;
  auto c8 = c1;
  c8.concurrency = 8;
  auto a = mp::gpt3mix_augment(src, sst2(), mock, c1);
  auto b = mp::gpt3mix_augment(src, sst2(), mock, c8);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.skipped, b.skipped);
  auto c = mp::gpt3mix_augment(src, sst2(), mock, base_config(4.0, 12));
  EXPECT_NE(a.records, c.records);
}

TEST(Gpt3Mix, FatalBackendErrorAbortsAndKeepsCommittedRecords) {
  std::atomic<int> n{0};
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 1));
  mt::ScriptedBackend backend(
      [&](const mp::Prompt& p, const mp::GenerationParams& params, std::uint64_t key) {
        if (p.kind == mp::PromptKind::kMixGeneration && ++n > 3) {
          throw mp::BackendError(mp::BackendErrorKind::kAuth, "revoked", 401);
        }
        return mock.complete(p, params, key);
      });
  auto config = base_config(2.0, 1);
  config.concurrency = 1;
  auto run = mp::gpt3mix_augment(source(3), sst2(), backend, config);
  EXPECT_TRUE(run.aborted);
  EXPECT_EQ(run.records.size(), 3u);
  EXPECT_NE(run.abort_reason.find("revoked"), std::string::npos);
}

TEST(Gpt3Mix, ConfigValidation) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.0, 1));
  auto config = base_config(1.0, 1);
  config.k = 0;
  EXPECT_THROW(mp::gpt3mix_augment(source(3), sst2(), mock, config), mp::ConfigError);
  config = base_config(-1.0, 1);
  EXPECT_THROW(mp::gpt3mix_augment(source(3), sst2(), mock, config), mp::ConfigError);
  config = base_config(1.0, 1);
  config.k = 7;  // more anchors than the 6-example source
  EXPECT_THROW(mp::gpt3mix_augment(source(3), sst2(), mock, config), mp::ConfigError);
}

TEST(Eda, RandomSwapGolden) {
  const std::string text = "one two three four five six seven eight nine ten";
  mp::Rng rng = mp::make_rng({2024});
  auto out = mp::eda_apply(text, mp::EdaOp::kRandomSwap, 0.1, nullptr, rng);
  // round(0.1 * 10) = 1 swap: exactly two positions differ, same multiset.
  auto a = mp::split_whitespace(text), b = mp::split_whitespace(out);
  ASSERT_EQ(a.size(), b.size());
  int diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  EXPECT_EQ(diff, 2);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(out, "one two three four five seven six eight nine ten");
}

TEST(Eda, OperationCounts) {
  const std::string text = "one two three four five six seven eight nine ten";
  mp::Rng rng = mp::make_rng({1});
  EXPECT_EQ(mp::split_whitespace(mp::eda_apply(text, mp::EdaOp::kRandomDelete, 0.3, nullptr, rng))
                .size(),
            7u);
  // Short texts at small alpha round to zero operations.
  EXPECT_EQ(mp::eda_apply("too short", mp::EdaOp::kRandomSwap, 0.1, nullptr, rng), "too short");
  // Deletion never empties a text.
  EXPECT_EQ(mp::eda_apply("single", mp::EdaOp::kRandomDelete, 1.0, nullptr, rng), "single");
  EXPECT_EQ(mp::split_whitespace(mp::eda_apply("a b", mp::EdaOp::kRandomDelete, 1.0, nullptr, rng))
                .size(),
            1u);
}

TEST(Eda, LexiconOperations) {
  auto lex = mp::parse_lexicon("# comment\ngood fine nice\nfilm movie\n");
  EXPECT_EQ(lex.at("good"), (std::vector<std::string>{"fine", "nice"}));
  mp::Rng rng = mp::make_rng({3});
  auto out = mp::eda_apply("a good film", mp::EdaOp::kSynonymReplace, 0.67, &lex, rng);
  auto w = mp::split_whitespace(out);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0], "a");
  EXPECT_TRUE(w[1] == "fine" || w[1] == "nice");
  EXPECT_EQ(w[2], "movie");
  auto ins = mp::eda_apply("a good film", mp::EdaOp::kRandomInsert, 0.34, &lex, rng);
  EXPECT_EQ(mp::split_whitespace(ins).size(), 4u);
  // Without a lexicon there is nothing to replace.
  EXPECT_EQ(mp::eda_apply("a good film", mp::EdaOp::kSynonymReplace, 1.0, nullptr, rng),
            "a good film");
}

TEST(Eda, AugmentShapeAndDeterminism) {
  auto src = source(3);
  mp::EdaConfig config;
  config.n_aug_per_example = 4;
  config.seed = 9;
  auto a = mp::eda_augment(src, config);
  ASSERT_EQ(a.size(), 24u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].label, src[i / 4].label);
  EXPECT_EQ(a, mp::eda_augment(src, config));
  EXPECT_EQ(mp::parse_eda_op("rs"), mp::EdaOp::kRandomSwap);
  EXPECT_EQ(mp::parse_eda_op("synonym_replace"), mp::EdaOp::kSynonymReplace);
  EXPECT_THROW(mp::parse_eda_op("shuffle"), mp::ConfigError);
  config.alpha = 1.5;
  EXPECT_THROW(mp::eda_augment(src, config), mp::ConfigError);
}
