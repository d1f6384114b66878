#include <benchmark/benchmark.h>

#include <random>

#include "chisep/fft.hpp"
#include "chisep/layers.hpp"
#include "chisep/network.hpp"
#include "chisep/phantoms.hpp"
#include "chisep/physics.hpp"

namespace {

using namespace chisep;

template <typename T>
Tensor<T> random_tensor(TensorShape s, std::uint64_t seed) {
  Tensor<T> t(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& v : t.data) v = static_cast<T>(g(rng));
  return t;
}

void BM_Fft3(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ComplexVolume x({n, n, n});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (auto& v : x.data) v = {g(rng), 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(fft3(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_Fft3)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_FieldForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dims d{n, n, n};
  const Phantom p = generate_brain_phantom(3, d, {});
  const DipoleKernel k = dipole_kernel(d, {});
  for (auto _ : state) benchmark::DoNotOptimize(field_forward(p.sources, k));
}
BENCHMARK(BM_FieldForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Conv3Forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  Conv3<float> conv("bench", c, c);
  const auto x = random_tensor<float>({2, n, n, n, c}, 2);
  const PassMode mode{true, true, false};
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, mode));
}
BENCHMARK(BM_Conv3Forward)->Args({32, 16})->Args({16, 32})->Unit(benchmark::kMillisecond);

void BM_Conv3Backward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  Conv3<float> conv("bench", c, c);
  const auto x = random_tensor<float>({2, n, n, n, c}, 3);
  const auto dy = random_tensor<float>({2, n, n, n, c}, 4);
  conv.forward(x, PassMode{true, true, true});
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(dy));
}
BENCHMARK(BM_Conv3Backward)->Args({32, 16})->Args({16, 32})->Unit(benchmark::kMillisecond);

void BM_NetworkForward(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.base_channels = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  cfg.patch = {n, n, n};
  DualBranchNet<float> net(cfg);
  net.init(5);
  const auto x = random_tensor<float>({1, n, n, n, 3}, 6);
  const PassMode mode{false, false, false};
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, mode));
}
BENCHMARK(BM_NetworkForward)->Args({8, 16})->Args({16, 32})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
