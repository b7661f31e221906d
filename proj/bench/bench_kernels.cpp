#include <benchmark/benchmark.h>

#include <vector>

#include "cyclereg/dataset.hpp"
#include "cyclereg/kernels.hpp"
#include "cyclereg/trainer.hpp"

using namespace cyclereg;
namespace k = cyclereg::kernels;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

// A batch of activations times a square weight matrix, the shape of a
// hidden layer forward pass.
template <void (*Matmul)(k::ConstMat, k::ConstMat, k::MutMat)>
void BM_Matmul(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  const auto a = filled(rows * width, 1), b = filled(width * width, 2);
  std::vector<double> out(rows * width);
  for (auto _ : state) {
    Matmul({a.data(), rows, width}, {b.data(), width, width}, {out.data(), rows, width});
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * width * width));
}

// Weight gradient: activations^T times upstream gradient.
template <void (*MatmulTn)(k::ConstMat, k::ConstMat, k::MutMat)>
void BM_MatmulTn(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  const auto a = filled(rows * width, 1), g = filled(rows * width, 2);
  std::vector<double> out(width * width);
  for (auto _ : state) {
    MatmulTn({a.data(), rows, width}, {g.data(), rows, width}, {out.data(), width, width});
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * width * width));
}

template <void (*Tanh)(std::span<const double>, std::span<double>)>
void BM_Tanh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = filled(n, 3);
  std::vector<double> out(n);
  for (auto _ : state) {
    Tanh(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void MatmulArgs(benchmark::internal::Benchmark* b) {
  for (int rows : {320, 4000, 16000}) b->Args({rows, 64});
}

// One epoch of UCM training with the default 4 x 64 tanh + batchnorm networks.
void BM_TrainEpoch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = gen_synthetic(TaskId::XSquared, n, default_ranges(TaskId::XSquared), 1);
  const auto [norm, stats] = normalize(d);
  for (auto _ : state) {
    state.PauseTiming();
    ModelPair pair(MlpSpec::chain(1, {64, 64, 64, 64}, 1, Activation::Tanh, true, false, 1),
                   MlpSpec::chain(1, {64, 64, 64, 64}, 1, Activation::Tanh, true, false, 2));
    TrainingPlan plan;
    plan.epochs = 1;
    plan.batch_fraction = static_cast<double>(state.range(1)) / 100.0;
    state.ResumeTiming();
    benchmark::DoNotOptimize(train(pair, plan, norm.x, norm.y));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_Matmul<k::serial::matmul>)->Name("matmul/serial")->Apply(MatmulArgs);
BENCHMARK(BM_Matmul<k::omp::matmul>)->Name("matmul/omp")->Apply(MatmulArgs)->UseRealTime();
BENCHMARK(BM_MatmulTn<k::serial::matmul_tn>)->Name("matmul_tn/serial")->Apply(MatmulArgs);
BENCHMARK(BM_MatmulTn<k::omp::matmul_tn>)->Name("matmul_tn/omp")->Apply(MatmulArgs)->UseRealTime();
BENCHMARK(BM_Tanh<k::serial::tanh>)->Name("tanh/serial")->Arg(1 << 20);
BENCHMARK(BM_Tanh<k::omp::tanh>)->Name("tanh/omp")->Arg(1 << 20)->UseRealTime();
BENCHMARK(BM_TrainEpoch)->Name("train_epoch/ucm")->Args({16000, 2})->Args({16000, 25})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
