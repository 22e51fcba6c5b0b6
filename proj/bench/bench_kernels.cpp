// Serial vs OpenMP kernels on training- and retrieval-sized inputs.

#include <benchmark/benchmark.h>

#include <map>

#include "sense/kernels.hpp"
#include "sense/rng.hpp"

namespace {

using namespace sense;

struct Workload {
  ModelParams params;
  std::vector<Tensor> frames;
  std::vector<Vector> teachers;
  std::vector<kernels::LossItem> items;
};

// Utterances of 20-50 frames at the default model size.
const Workload& workload(std::size_t n) {
  static std::map<std::size_t, Workload> cache;
  auto [it, fresh] = cache.try_emplace(n);
  Workload& w = it->second;
  if (!fresh) return w;
  w.params = init_params(ModelDims{}, 1);
  SplitMix64 g(2);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x(20 + g.below(31), 16);
    for (auto& v : x.data) v = g.normal();
    w.frames.push_back(std::move(x));
    Vector t(32);
    for (auto& v : t) v = g.normal();
    w.teachers.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < n; ++i) w.items.push_back({&w.frames[i], &w.teachers[i]});
  return w;
}

void BM_BatchGradientSerial(benchmark::State& st) {
  const auto& w = workload(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::batch_gradient_serial(w.params, w.items));
}
void BM_BatchGradientParallel(benchmark::State& st) {
  const auto& w = workload(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::batch_gradient_parallel(w.params, w.items));
}

void BM_EmbedSerial(benchmark::State& st) {
  const auto& w = workload(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::embed_serial(w.params, w.frames));
}
void BM_EmbedParallel(benchmark::State& st) {
  const auto& w = workload(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::embed_parallel(w.params, w.frames));
}

kernels::VectorBlock random_block(std::size_t n) {
  SplitMix64 g(3);
  std::vector<Vector> vs(n, Vector(32));
  for (auto& v : vs)
    for (auto& x : v) x = g.normal();
  return kernels::make_block(32, vs);
}

void BM_CosineSerial(benchmark::State& st) {
  const auto block = random_block(static_cast<std::size_t>(st.range(0)));
  const Vector q(32, 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::cosine_scores_serial(q, block));
}
void BM_CosineParallel(benchmark::State& st) {
  const auto block = random_block(static_cast<std::size_t>(st.range(0)));
  const Vector q(32, 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::cosine_scores_parallel(q, block));
}

}  // namespace

BENCHMARK(BM_BatchGradientSerial)->Arg(2)->Arg(32)->Arg(256);
BENCHMARK(BM_BatchGradientParallel)->Arg(2)->Arg(32)->Arg(256);
BENCHMARK(BM_EmbedSerial)->Arg(256)->Arg(1024);
BENCHMARK(BM_EmbedParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_CosineSerial)->Arg(1024)->Arg(100000);
BENCHMARK(BM_CosineParallel)->Arg(1024)->Arg(100000);

BENCHMARK_MAIN();
