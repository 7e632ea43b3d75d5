#include <benchmark/benchmark.h>

#include <acton/layers.hpp>
#include <acton/models.hpp>

using namespace acton;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.storage()) v = uniform(rng, -1.0, 1.0);
  return t;
}

}  // namespace

// Batch 32, sequence 672 (a week at 15 minutes), 16 channels in and out.
static void BM_ConvForward(benchmark::State& state) {
  Conv1D conv(16, 16, static_cast<std::size_t>(state.range(0)), 4);
  conv.weight.value = random_tensor(conv.weight.value.shape(), 9);
  const Tensor x = random_tensor({32, 672, 16}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
}
BENCHMARK(BM_ConvForward)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_ConvBackward(benchmark::State& state) {
  Conv1D conv(16, 16, 5, 4);
  conv.weight.value = random_tensor(conv.weight.value.shape(), 9);  // live ReLUs
  const Tensor x = random_tensor({32, 672, 16}, 1);
  const Tensor y = conv.forward(x);
  const Tensor dy = random_tensor(y.shape(), 2);
  for (auto _ : state) {
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    benchmark::DoNotOptimize(conv.backward(dy));
  }
}
BENCHMARK(BM_ConvBackward)->Unit(benchmark::kMillisecond);

static void BM_BatchNormForwardBackward(benchmark::State& state) {
  BatchNorm bn(16);
  const Tensor x = random_tensor({32, 168, 16}, 3);
  const Tensor dy = random_tensor({32, 168, 16}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bn.forward(x, Mode::Train));
    benchmark::DoNotOptimize(bn.backward(dy));
  }
}
BENCHMARK(BM_BatchNormForwardBackward)->Unit(benchmark::kMicrosecond);

// Full forward + backward of the small network used in the experiments.
static void BM_CnnStep(benchmark::State& state) {
  NetworkSpec spec;
  spec.vocab_size = 200;
  spec.seq_len = 672;
  spec.embed_dim = 16;
  spec.filters = 16;
  spec.dense_units = 32;
  spec.depth = 3;
  const std::size_t batch = 32;
  CnnModel model(spec, 7);
  Rng rng(5);
  std::vector<SymbolId> ids(batch * spec.seq_len);
  for (auto& id : ids) id = static_cast<SymbolId>(uniform_index(rng, spec.vocab_size));
  for (auto _ : state) {
    auto probs = model.forward(ids, batch, Mode::Train, rng);
    Tensor d = probs[0];
    const Tensor* grads[] = {&d};
    model.backward(grads);
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_CnnStep)->Unit(benchmark::kMillisecond);
