// Serial reference loops vs their OpenMP counterparts.
// PRGA_THREADS caps the worker count of the parallel variants.

#include <benchmark/benchmark.h>

#include "prga/kernels.hpp"
#include "prga/rng.hpp"
#include "prga/train.hpp"

using namespace prga;

namespace {

Eigen::MatrixXd gaussian(SplitMix64& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// A 10-way 16-shot cache at width 512, roughly CLIP-sized.
CacheModel make_cache() {
  SplitMix64 rng(1);
  const Eigen::Index classes = 10, shots = 16, d = 512;
  std::vector<std::uint32_t> labels;
  for (Eigen::Index c = 0; c < classes; ++c)
    for (Eigen::Index k = 0; k < shots; ++k) labels.push_back(static_cast<std::uint32_t>(c));
  return build_cache(gaussian(rng, classes * shots, d), labels, classes, gaussian(rng, classes, d), 1.0, 5.0);
}

Model make_model(Eigen::Index d) {
  SplitMix64 rng(2);
  EmbeddingBank support;
  support.dim = static_cast<std::uint32_t>(d);
  support.patches_per_item = 26;
  support.class_names = {"a", "b"};
  for (std::uint32_t i = 0; i < 4; ++i) {
    support.labels.push_back(i % 2);
    for (Eigen::Index k = 0; k < d; ++k) support.globals.push_back(static_cast<float>(rng.normal()));
    for (Eigen::Index k = 0; k < 26 * d; ++k) support.patches.push_back(static_cast<float>(rng.normal()));
  }
  ClassifierWeights wc;
  wc.classes = 2;
  wc.dim = static_cast<std::uint32_t>(d);
  for (Eigen::Index k = 0; k < 2 * d; ++k) wc.values.push_back(static_cast<float>(rng.normal()));
  return init_model(support, wc, TrainConfig{});
}

void BM_InferSerial(benchmark::State& state) {
  const CacheModel cache = make_cache();
  SplitMix64 rng(3);
  const Eigen::MatrixXd q = gaussian(rng, state.range(0), cache.dim());
  for (auto _ : state) benchmark::DoNotOptimize(kernels::infer_batch_serial(q, cache));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_InferParallel(benchmark::State& state) {
  const CacheModel cache = make_cache();
  SplitMix64 rng(3);
  const Eigen::MatrixXd q = gaussian(rng, state.range(0), cache.dim());
  for (auto _ : state) benchmark::DoNotOptimize(kernels::infer_batch_parallel(q, cache));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<Eigen::MatrixXd> images(Eigen::Index n, Eigen::Index d) {
  SplitMix64 rng(4);
  std::vector<Eigen::MatrixXd> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(gaussian(rng, 26, d));
  return out;
}

void BM_RefineSerial(benchmark::State& state) {
  const Model m = make_model(128);
  const auto imgs = images(state.range(0), 128);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::refine_batch_serial(m, imgs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RefineParallel(benchmark::State& state) {
  const Model m = make_model(128);
  const auto imgs = images(state.range(0), 128);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::refine_batch_parallel(m, imgs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_InferSerial)->Arg(256)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InferParallel)->Arg(256)->Arg(4096)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_RefineSerial)->Arg(64)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RefineParallel)->Arg(64)->Arg(512)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
