#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mixprompt/errors.hpp"
#include "mixprompt/extract.hpp"
#include "mixprompt/random.hpp"

namespace mp = mixprompt;

namespace {

mp::TaskSpecification sst2() { return *mp::builtin_task_spec("sst2"); }

mp::ParseErrorKind parse_kind(std::string_view text) {
  try {
    mp::parse_augmentation(text, sst2());
  } catch (const mp::ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ParseError for: " << text;
  return mp::ParseErrorKind::kEmptyText;
}

}  // namespace

TEST(ParseAugmentation, ReadsFirstItem) {
  auto p = mp::parse_augmentation(" a dull affair (Sentiment: Negative)\nMovie review: x", sst2());
  EXPECT_EQ(p.text, "a dull affair");
  EXPECT_EQ(p.label, 1u);
  p = mp::parse_augmentation("fun (for kids) (sentiment: POSITIVE)  ", sst2());
  EXPECT_EQ(p.text, "fun (for kids)");
  EXPECT_EQ(p.label, 0u);
}

TEST(ParseAugmentation, ErrorKinds) {
  EXPECT_EQ(parse_kind("no label here"), mp::ParseErrorKind::kNoLabel);
  EXPECT_EQ(parse_kind(""), mp::ParseErrorKind::kNoLabel);
  EXPECT_EQ(parse_kind("text)"), mp::ParseErrorKind::kNoLabel);
  EXPECT_EQ(parse_kind("text (Mood: Positive)"), mp::ParseErrorKind::kNoLabel);
  EXPECT_EQ(parse_kind("text (Sentiment: Neutral)"), mp::ParseErrorKind::kUnknownLabel);
  EXPECT_EQ(parse_kind("(Sentiment: Positive)"), mp::ParseErrorKind::kEmptyText);
  EXPECT_EQ(parse_kind("\ntext (Sentiment: Positive)"), mp::ParseErrorKind::kNoLabel);
}

TEST(SoftLabel, NormalizedExponentials) {
  auto soft = mp::compute_soft_label({{"Positive", std::log(0.3)}, {"negative", std::log(0.1)}},
                                     sst2());
  ASSERT_EQ(soft.size(), 2u);
  EXPECT_NEAR(soft[0], 0.75, 1e-12);
  EXPECT_NEAR(soft[1], 0.25, 1e-12);
}

TEST(SoftLabel, StableForExtremeLogits) {
  auto soft = mp::compute_soft_label({{"positive", -2000.0}, {"negative", -2001.0}}, sst2());
  EXPECT_NEAR(soft[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(soft[0] + soft[1], 1.0, 1e-15);
}

TEST(SoftLabel, Errors) {
  EXPECT_THROW(mp::compute_soft_label({{"positive", -1.0}}, sst2()), mp::ScoringError);
  EXPECT_THROW(mp::compute_soft_label({{"positive", -1.0}, {"Positive", -2.0}, {"negative", -1.0}},
                                      sst2()),
               mp::ScoringError);
  EXPECT_THROW(mp::compute_soft_label(
                   {{"positive", std::numeric_limits<double>::quiet_NaN()}, {"negative", -1.0}},
                   sst2()),
               mp::ScoringError);
}

TEST(Records, RoundTripAndValidation) {
  std::vector<std::string> labels = {"pos", "neg"};
  std::vector<mp::AugmentationRecord> records = {
      {"a \"quoted\" text", {0.25, 0.75}, 1, {3, 0}, "raw (Sentiment: Negative)", "m"},
      {"plain", {1.0, 0.0}, 0, {1, 2}, "plain (Sentiment: Positive)", "m"},
  };
  auto text = mp::serialize_records(records, labels);
  EXPECT_NE(text.find("\"generated_label\":\"neg\""), std::string::npos);
  EXPECT_EQ(mp::parse_records(text, labels), records);

  mp::AugmentationRecord bad = records[0];
  bad.soft_label = {0.5, 0.6};
  EXPECT_THROW(mp::validate_record(bad, 2), mp::ValidationError);
  bad = records[0];
  bad.generated_label = 2;
  EXPECT_THROW(mp::validate_record(bad, 2), mp::ValidationError);
  bad = records[0];
  bad.soft_label = {1.0};
  EXPECT_THROW(mp::validate_record(bad, 2), mp::ValidationError);

  std::vector<std::string> other = {"pos", "neutral"};
  EXPECT_THROW(mp::parse_records(text, other), mp::LoadError);
  EXPECT_THROW(mp::parse_records("{broken\n", labels), mp::LoadError);
}

TEST(Records, RandomSoftLabelsSurviveBitExact) {
  std::vector<std::string> labels = {"a", "b", "c"};
  mp::Rng rng = mp::make_rng({9});
  std::vector<mp::AugmentationRecord> records;
  for (int i = 0; i < 200; ++i) {
    double x = mp::uniform01(rng), y = mp::uniform01(rng) * (1.0 - x);
    records.push_back({"t" + std::to_string(i), {x, y, 1.0 - x - y}, 0, {0}, "", "m"});
  }
  EXPECT_EQ(mp::parse_records(mp::serialize_records(records, labels), labels), records);
}
