#include <benchmark/benchmark.h>

#include "modfield/adam.hpp"
#include "modfield/metrics.hpp"
#include "modfield/model.hpp"
#include "modfield/tiling.hpp"

using namespace modfield;

namespace {

ModelConfig bench_config(int width) {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 3;
  c.latent_dim = 64;
  c.hidden_layers = 3;
  c.width = width;
  return c;
}

struct Batch {
  ModelParams<float> params;
  Matrix<float> coords, latents;
  std::vector<Index> groups;
};

Batch make_batch(int width, Index samples, Index groups) {
  RngStream rng(1);
  Batch b;
  b.params = ModelParams<float>::init(bench_config(width), rng);
  b.coords.resize(2, samples);
  for (Index i = 0; i < b.coords.size(); ++i) b.coords.data()[i] = static_cast<float>(rng.uniform());
  b.latents.resize(64, groups);
  for (Index i = 0; i < b.latents.size(); ++i) b.latents.data()[i] = static_cast<float>(0.01 * rng.normal());
  for (Index s = 0; s < samples; ++s) b.groups.push_back(s * groups / samples);
  return b;
}

void BM_Forward(benchmark::State& state) {
  const Batch b = make_batch(static_cast<int>(state.range(0)), 4096, 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_forward<float>(b.params, b.coords, b.latents, b.groups).output.data());
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const Batch b = make_batch(static_cast<int>(state.range(0)), 4096, 64);
  const Matrix<float> upstream = Matrix<float>::Ones(3, 4096);
  for (auto _ : state) {
    const auto tape = model_forward<float>(b.params, b.coords, b.latents, b.groups);
    benchmark::DoNotOptimize(model_backward<float>(b.params, tape, upstream).latents.data());
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_BlendedDecode(benchmark::State& state) {
  RngStream rng(2);
  const auto params = ModelParams<float>::init(bench_config(128), rng);
  Codebook cb(TileGrid::uniform({128, 128}, 32, 8), 64);
  for (Index i = 0; i < cb.codes.size(); ++i) cb.codes.data()[i] = static_cast<float>(rng.normal());
  Eigen::MatrixXd pts(2, 128 * 128);
  for (Index j = 0; j < pts.cols(); ++j) pts.col(j) << (j % 128) + 0.5, (j / 128) + 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(blended_decode_points(params, cb, pts).data());
  state.SetItemsProcessed(state.iterations() * pts.cols());
}
BENCHMARK(BM_BlendedDecode)->Unit(benchmark::kMillisecond);

void BM_Adam(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> p(n, 0.5f), g(n, 0.01f);
  AdamState<float> st(n, AdamConfig{});
  for (auto _ : state) {
    adam_step<float>(p, g, st);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Adam)->Arg(1 << 16)->Arg(1 << 20);

void BM_Chamfer(benchmark::State& state) {
  RngStream rng(3);
  const Index n = state.range(0);
  Eigen::MatrixXd a(3, n), b(3, n);
  for (Index i = 0; i < a.size(); ++i) {
    a.data()[i] = rng.uniform(-1, 1);
    b.data()[i] = rng.uniform(-1, 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_distance(a, b));
}
BENCHMARK(BM_Chamfer)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
