#include <benchmark/benchmark.h>

#include <sstream>

#include <acton/act2vec.hpp>
#include <acton/experiments.hpp>
#include <acton/persist.hpp>
#include <acton/synthgen.hpp>

using namespace acton;

namespace {

Dataset small_dataset() {
  SynthConfig c;
  c.n_subjects = 10;
  c.sampling_period_s = 900;
  return generate_cohort(c).dataset;
}

EmbeddingSpace small_space() {
  const auto pc = prepare_corpus(small_dataset());
  auto cfg = TrainConfig::defaults_for(GranularityLevel::Hour);
  cfg.dim = 16;
  cfg.epochs = 1;
  cfg.window = 4;
  return train(pc.sequences, pc.vocab.size(), cfg).space;
}

}  // namespace

static void BM_ParseActivityCsv(benchmark::State& state) {
  std::ostringstream os;
  write_activity_csv(os, small_dataset());
  const std::string text = os.str();
  for (auto _ : state) {
    std::istringstream in(text);
    benchmark::DoNotOptimize(parse_activity_csv(in, 900));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseActivityCsv)->Unit(benchmark::kMillisecond);

static void BM_SerializeEmbeddings(benchmark::State& state) {
  const auto space = small_space();
  for (auto _ : state) benchmark::DoNotOptimize(serialize_embeddings(space));
}
BENCHMARK(BM_SerializeEmbeddings)->Unit(benchmark::kMillisecond);

static void BM_ParseEmbeddings(benchmark::State& state) {
  const std::string text = serialize_embeddings(small_space());
  for (auto _ : state) benchmark::DoNotOptimize(parse_embeddings(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseEmbeddings)->Unit(benchmark::kMillisecond);
