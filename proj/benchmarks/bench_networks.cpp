#include <benchmark/benchmark.h>

#include "faceerase/models/networks.hpp"

namespace {

using faceerase::nn::Shape;
using faceerase::nn::Tensor;
using faceerase::nn::Var;
namespace models = faceerase::models;
namespace ops = faceerase::nn::ops;

Var<float> random_input(Shape s, std::uint64_t seed) {
  faceerase::nn::Rng rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> t(s);
  for (auto& v : t.storage()) v = u(rng);
  return Var<float>(std::move(t));
}

void BM_EdgeGeneratorStep(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  faceerase::nn::Rng rng(1);
  models::ResnetGenerator<float> net(models::GeneratorSpec::edge(width), rng);
  auto x = random_input({8, 3, size, size}, 2);
  for (auto _ : state) {
    auto y = net.forward(x);
    auto loss = ops::mean(y);
    faceerase::nn::backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_EdgeGeneratorStep)->Args({8, 64})->Args({16, 64})->Unit(benchmark::kMillisecond);

void BM_RefineStep(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  faceerase::nn::Rng rng(1);
  models::RefineSpec spec;
  spec.widths = {width, 2 * width, 4 * width, 8 * width, 8 * width};
  models::RefineNet<float> net(spec, rng);
  auto x = random_input({8, 8, 64, 64}, 2);
  for (auto _ : state) {
    auto y = net.forward(x);
    auto loss = ops::mean(y);
    faceerase::nn::backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_RefineStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_DiscriminatorStep(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  faceerase::nn::Rng rng(1);
  models::PatchDiscriminator<float> net(models::DiscriminatorSpec::inpaint(width), rng);
  auto x = random_input({8, 4, 64, 64}, 2);
  x.set_requires_grad(true);
  for (auto _ : state) {
    auto y = net.forward(x);
    auto loss = ops::mean(y.scores);
    faceerase::nn::backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_DiscriminatorStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Warp(benchmark::State& state) {
  auto img = random_input({8, 3, 64, 64}, 3);
  auto flow = random_input({8, 2, 64, 64}, 4);
  flow.set_requires_grad(true);
  for (auto _ : state) {
    auto y = ops::warp(img, flow);
    auto loss = ops::mean(y);
    faceerase::nn::backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_Warp)->Unit(benchmark::kMillisecond);

}  // namespace


BENCHMARK_MAIN();
