#include <benchmark/benchmark.h>

#include "random_tensor.hpp"
#include "semcom/adam.hpp"
#include "semcom/channel.hpp"
#include "semcom/codec.hpp"
#include "semcom/kernels.hpp"
#include "semcom/rng.hpp"
#include "semcom/tape.hpp"

using namespace semcom;
using tensor::Shape;
using tensor::Tensor;

namespace {

// state.range(0): input side; channels double per the codec's second stage.
void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const Tensor x = testing::random_tensor({1, 32, side, side}, 1, -1.0, 1.0);
  const Tensor w = testing::random_tensor({64, 32, 4, 4}, 2, -0.1, 0.1);
  const Tensor b(Shape{1, 64, 1, 1});
  for (auto _ : state) benchmark::DoNotOptimize(tensor::conv2d(x, w, b, {2, 1}));
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64);

void BM_Conv2dBackward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const Tensor x = testing::random_tensor({1, 32, side, side}, 1, -1.0, 1.0);
  const Tensor w = testing::random_tensor({64, 32, 4, 4}, 2, -0.1, 0.1);
  const Tensor g = testing::random_tensor({1, 64, side / 2, side / 2}, 3, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(tensor::conv2d_backward(x, w, g, {2, 1}));
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_ConvTranspose2dForward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const Tensor x = testing::random_tensor({1, 64, side / 2, side / 2}, 1, -1.0, 1.0);
  const Tensor w = testing::random_tensor({64, 32, 4, 4}, 2, -0.1, 0.1);
  const Tensor b(Shape{1, 32, 1, 1});
  for (auto _ : state) benchmark::DoNotOptimize(tensor::conv_transpose2d(x, w, b, {2, 1}));
}
BENCHMARK(BM_ConvTranspose2dForward)->Arg(16)->Arg(32)->Arg(64);

void BM_CodecEncode(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const codec::CodecModel model = codec::build_codec(codec::CodecConfig::for_square_input(side), 1);
  const Tensor x = testing::random_tensor({1, 3, side, side}, 4, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(x));
}
BENCHMARK(BM_CodecEncode)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

// One full training step: forward, backward and Adam.
void BM_TrainStep64(benchmark::State& state) {
  codec::CodecModel model = codec::build_codec(codec::CodecConfig::for_square_input(64), 1);
  const Tensor x = testing::random_tensor({1, 3, 64, 64}, 5, 0.0, 1.0);
  for (auto _ : state) {
    tensor::Tape tape;
    const auto input = tape.constant(x);
    const auto recon = model.decode(tape, codec::power_normalize(tape, model.encode(tape, input)));
    tape.backward(tape.mse_loss(recon, input));
    tensor::adam_step(model.parameters(), model.optimizer());
  }
}
BENCHMARK(BM_TrainStep64)->Unit(benchmark::kMillisecond);

void BM_Awgn(benchmark::State& state) {
  const Tensor x = codec::power_normalize(testing::random_tensor({1, 128, 32, 32}, 6, -1.0, 1.0));
  RngStream rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(channel::awgn(x, 10.0, rng));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * x.numel()));
}
BENCHMARK(BM_Awgn);

}  // namespace

BENCHMARK_MAIN();
