#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "mixprompt/augment.hpp"
#include "mixprompt/classify.hpp"
#include "mixprompt/extract.hpp"
#include "mixprompt/mock_backend.hpp"
#include "mixprompt/promptgen.hpp"
#include "test_support.hpp"

namespace mp = mixprompt;
namespace mt = mixprompt::testing;

namespace {

const mp::TaskSpecification& sst2() {
  static const mp::TaskSpecification spec = *mp::builtin_task_spec("sst2");
  return spec;
}

const mp::Dataset& corpus() {
  static const mp::Dataset d = mt::make_disjoint_task(500, 0, 0, 1).split("train");
  return d;
}

void BM_Featurize(benchmark::State& state) {
  mp::FeatureConfig f;
  f.ngram_max = static_cast<int>(state.range(0));
  const auto& d = corpus();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mp::featurize(d[i++ % d.size()].text, f));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Featurize)->Arg(1)->Arg(2)->Arg(3);

void BM_BuildMixPrompt(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  mp::Rng rng = mp::make_rng({1});
  for (auto _ : state) {
    auto examples = mp::select_examples(corpus(), k, rng);
    benchmark::DoNotOptimize(mp::build_mix_prompt(examples, sst2()));
  }
}
BENCHMARK(BM_BuildMixPrompt)->Arg(2)->Arg(4)->Arg(8);

void BM_ParseAugmentation(benchmark::State& state) {
  const std::string completion =
      " the cast is witty and warm with a gripping score (Sentiment: Positive)\nMovie review:";
  for (auto _ : state) benchmark::DoNotOptimize(mp::parse_augmentation(completion, sst2()));
}
BENCHMARK(BM_ParseAugmentation);

void BM_SoftLabel(benchmark::State& state) {
  const mp::ScoreMap scores = {{"Positive", -0.4}, {"Negative", -1.3}};
  for (auto _ : state) benchmark::DoNotOptimize(mp::compute_soft_label(scores, sst2()));
}
BENCHMARK(BM_SoftLabel);

void BM_MockAugment(benchmark::State& state) {
  mp::MockBackend mock(mt::make_disjoint_mock(0.1, 1));
  const mp::Dataset source = mp::class_balanced_subsample(corpus(), mp::PerClassCount{10}, 3);
  mp::AugmentConfig config;
  config.ratio = 1.0;
  config.concurrency = static_cast<std::size_t>(state.range(0));
  config.generation = mp::default_generation_params(sst2());
  for (auto _ : state) benchmark::DoNotOptimize(mp::gpt3mix_augment(source, sst2(), mock, config));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(source.size()));
}
BENCHMARK(BM_MockAugment)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TrainingEpoch(benchmark::State& state) {
  std::vector<mp::TrainExample> train;
  for (const auto& e : corpus().examples()) train.push_back(mp::one_hot_example(e, 2));
  mp::TrainConfig tc;
  tc.max_epochs = 1;
  tc.batch_size = static_cast<std::size_t>(state.range(0));
  mp::FeatureConfig f;
  const mp::Dataset no_validation(corpus().labels(), {});
  for (auto _ : state) benchmark::DoNotOptimize(mp::train(train, no_validation, tc, f));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(train.size()));
}
BENCHMARK(BM_TrainingEpoch)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
