#include <benchmark/benchmark.h>

#include <acton/act2vec.hpp>
#include <acton/experiments.hpp>
#include <acton/noise.hpp>
#include <acton/synthgen.hpp>

using namespace acton;

namespace {

PreparedCorpus cohort(std::size_t n, int period) {
  SynthConfig c;
  c.n_subjects = n;
  c.sampling_period_s = period;
  return prepare_corpus(generate_cohort(c).dataset);
}

}  // namespace

static void BM_NegativeSamplingKernel(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix table(64, d);
  for (auto& v : table.data()) v = uniform(rng, -0.5, 0.5);
  std::vector<double> x(d);
  for (auto& v : x) v = uniform(rng, -0.5, 0.5);
  const std::int64_t negs[] = {3, 9, 17, 33, 60};
  for (auto _ : state) benchmark::DoNotOptimize(negative_sampling_loss_grad(x, table, 1, negs));
}
BENCHMARK(BM_NegativeSamplingKernel)->Arg(16)->Arg(100);

static void BM_NoiseSample(benchmark::State& state) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = 1 + (i * 7919) % 1000;
  const NoiseTable table(counts);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(table.sample(rng));
}
BENCHMARK(BM_NoiseSample)->Arg(50)->Arg(5000);

// One training epoch over 50 subjects at 15-minute sampling.
static void BM_TrainEpoch(benchmark::State& state) {
  const auto level = static_cast<GranularityLevel>(state.range(0));
  const auto pc = cohort(50, 900);
  auto cfg = TrainConfig::defaults_for(level);
  cfg.dim = 16;
  cfg.epochs = 1;
  cfg.convergence_tol = 0;
  if (level == GranularityLevel::Hour) cfg.window = 4;  // an hour is 4 samples here
  for (auto _ : state) benchmark::DoNotOptimize(train(pc.sequences, pc.vocab.size(), cfg));
  state.SetLabel(std::string(to_string(level)));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(GranularityLevel::Sample))
    ->Arg(static_cast<int>(GranularityLevel::Hour))
    ->Arg(static_cast<int>(GranularityLevel::Day))
    ->Arg(static_cast<int>(GranularityLevel::Week))
    ->Unit(benchmark::kMillisecond);

static void BM_InferSequence(benchmark::State& state) {
  const auto pc = cohort(20, 900);
  auto cfg = TrainConfig::defaults_for(GranularityLevel::Day);
  cfg.dim = 16;
  cfg.epochs = 2;
  const auto space = train(pc.sequences, pc.vocab.size(), cfg).space;
  InferConfig inf;
  inf.steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(infer_sequence(space, pc.sequences[0], inf));
}
BENCHMARK(BM_InferSequence)->Arg(10)->Arg(50)->Unit(benchmark::kMicrosecond);

static void BM_GenerateCohort(benchmark::State& state) {
  SynthConfig c;
  c.n_subjects = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_cohort(c));
}
BENCHMARK(BM_GenerateCohort)->Arg(10)->Unit(benchmark::kMillisecond);
