#include <benchmark/benchmark.h>

#include <vector>

#include "nlsd/labellers.hpp"
#include "nlsd/metrics.hpp"
#include "nlsd/noise.hpp"
#include "nlsd/predictor.hpp"
#include "nlsd/rng.hpp"
#include "nlsd/tensor.hpp"

namespace {

nlsd::Image random_image(int channels, int height, int width, std::uint64_t seed) {
  nlsd::Image img(channels, height, width);
  nlsd::StreamRng rng(nlsd::derive_stream(seed, {nlsd::fnv1a("bench")}));
  for (double& v : img.data) v = rng.next_double();
  return img;
}

// Middle stage of the default predictor: 16 -> 16 channels, 3x3, dilation 2.
void BM_conv2d_forward(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  nlsd::Tensor x({16, hw, hw}, 0.0);
  nlsd::Tensor k({16, 16, 3, 3}, 0.0);
  nlsd::StreamRng rng(1);
  for (double& v : x.data) v = rng.next_double();
  for (double& v : k.data) v = 0.1 * (rng.next_double() - 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nlsd::conv2d_forward(x, k, nlsd::Conv2dSpec{1, 2, 2}));
  }
  state.SetItemsProcessed(state.iterations() * hw * hw * 16LL * 16 * 9);
}
BENCHMARK(BM_conv2d_forward)->Arg(16)->Arg(64);

void BM_predictor_forward(benchmark::State& state) {
  nlsd::PredictorConfig cfg;
  const std::vector<nlsd::Tensor> params = nlsd::init_params(cfg, 1);
  const nlsd::Image img = random_image(3, cfg.input_height, cfg.input_width, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nlsd::predict(cfg, params, img));
  }
}
BENCHMARK(BM_predictor_forward);

// One full training step on one image: tape build, loss, backward.
void BM_predictor_backward(benchmark::State& state) {
  nlsd::PredictorConfig cfg;
  const std::vector<nlsd::Tensor> params = nlsd::init_params(cfg, 1);
  const nlsd::Image img = random_image(3, cfg.input_height, cfg.input_width, 2);
  nlsd::Tensor target({1, cfg.input_height, cfg.input_width}, 0.0);
  nlsd::StreamRng rng(3);
  for (double& v : target.data) v = rng.next_double();
  for (auto _ : state) {
    nlsd::Graph g;
    const nlsd::PredictorGraph pg = nlsd::build_predictor_graph(g, cfg, params, img);
    const int loss = g.bce_sum(pg.output, target);
    g.backward(loss);
    benchmark::DoNotOptimize(g.grad(pg.param_ids[0]).data.data());
  }
}
BENCHMARK(BM_predictor_backward);

void BM_prior_labellers(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const nlsd::Image img = random_image(3, hw, hw, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nlsd::run_prior_labellers(img));
  }
}
BENCHMARK(BM_prior_labellers)->Arg(16)->Arg(64);

void BM_sample_noise(benchmark::State& state) {
  nlsd::VarianceMap var("bench", 16, 16, 0.01);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nlsd::sample_noise(var, 0, 2, 5, 42));
  }
}
BENCHMARK(BM_sample_noise);

void BM_pr_curve(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  nlsd::SaliencyMap s(hw, hw);
  nlsd::SaliencyMap gt(hw, hw, 0.0);
  nlsd::StreamRng rng(5);
  for (double& v : s.data) v = rng.next_double();
  for (int y = hw / 4; y < 3 * hw / 4; ++y)
    for (int x = hw / 4; x < 3 * hw / 4; ++x) gt.at(y, x) = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nlsd::pr_curve(s, gt));
  }
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_pr_curve)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
