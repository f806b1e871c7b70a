#include <benchmark/benchmark.h>

#include "walnet/data.hpp"
#include "walnet/imaging.hpp"
#include "walnet/losses.hpp"
#include "walnet/model.hpp"
#include "walnet/ops.hpp"
#include "walnet/pgm.hpp"

using namespace walnet;

namespace {

nn::Tensor random_tensor(Rng& rng, std::vector<int> dims, bool grad = false) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return nn::Tensor::from(std::move(dims), std::move(v), grad);
}

imaging::RasterImage synthetic_image(int side) {
  data::SyntheticSpec spec;
  spec.size = side;
  return data::synthesize_sample(spec, 0, 2).image;
}

void BM_Conv3x3(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const int side = static_cast<int>(state.range(1));
  Rng rng(1);
  const auto x = random_tensor(rng, {ch, side, side});
  const auto w = random_tensor(rng, {ch, ch, 3, 3});
  const auto b = random_tensor(rng, {ch});
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, b, {1, 1, 1}).values().data());
  state.SetItemsProcessed(state.iterations() * 2LL * ch * ch * 9 * side * side);
}
BENCHMARK(BM_Conv3x3)->Args({32, 16})->Args({64, 8})->Args({128, 4});

void BM_Conv3x3Backward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const int side = static_cast<int>(state.range(1));
  Rng rng(2);
  const auto x = random_tensor(rng, {ch, side, side}, true);
  const auto w = random_tensor(rng, {ch, ch, 3, 3}, true);
  for (auto _ : state) {
    nn::sum(nn::conv2d(x, w, nn::Tensor(), {1, 1, 1})).backward();
  }
}
BENCHMARK(BM_Conv3x3Backward)->Args({32, 16})->Args({64, 8});

void BM_Felzenszwalb(benchmark::State& state) {
  const auto img = synthetic_image(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(imaging::felzenszwalb_segment(img, {50, 0.8, 20}).region_count);
}
BENCHMARK(BM_Felzenszwalb)->Arg(64)->Arg(224);

void BM_PseudoMask(benchmark::State& state) {
  const auto img = synthetic_image(64);
  const auto sp = imaging::felzenszwalb_segment(img, {50, 0.8, 20});
  Rng rng(3);
  pgm::AttentionSet att;
  att.a1 = imaging::ScalarMap(16, 16, 0.5);
  att.a2 = imaging::ScalarMap(8, 8, 0.5);
  att.a3 = imaging::ScalarMap(4, 4, 0.5);
  for (auto* m : {&att.a1, &att.a2, &att.a3})
    for (auto& v : m->values()) v = rng.uniform();
  att.source_rows = att.source_cols = 64;
  const pgm::PgmParams params{{50, 0.8, 20}, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(pgm::generate_pseudo_mask(sp, att, params).mask.size());
}
BENCHMARK(BM_PseudoMask);

void BM_Forward(benchmark::State& state) {
  const model::WalNet net(model::ModelConfig{}, 4);
  const auto img = synthetic_image(64);
  nn::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(img).class_logits.values().data());
}
BENCHMARK(BM_Forward);

void BM_ForwardBackward(benchmark::State& state) {
  model::WalNet net(model::ModelConfig{}, 5);
  const auto img = synthetic_image(64);
  const imaging::BinaryMask target(64, 64, 0);
  for (auto _ : state) {
    const auto out = net.forward(img);
    nn::add(losses::segmentation_loss(out.seg_prob, target), losses::classification_loss(out.class_logits, 2))
        .backward();
    net.parameters().zero_grad();
  }
}
BENCHMARK(BM_ForwardBackward);

}  // namespace

BENCHMARK_MAIN();
