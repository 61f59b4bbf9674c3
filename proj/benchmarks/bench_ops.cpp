#include <benchmark/benchmark.h>

#include <cmath>

#include "plcrnn/ad/ops.hpp"
#include "plcrnn/audio/corpus.hpp"
#include "plcrnn/dsp/stft.hpp"
#include "plcrnn/model/model_graph.hpp"
#include "plcrnn/rng.hpp"

using namespace plcrnn;
using ad::Tensor;

namespace {

Tensor<float> random_tensor(ad::Shape shape, std::uint64_t seed, bool grad = false) {
    Rng rng(seed);
    Tensor<float> t(std::move(shape), grad);
    for (float& v : t.data()) v = static_cast<float>(rng.normal());
    return t;
}

// First encoder layer: [B, 1, T, 161] -> [B, 16, T, 80].
void BM_ConvForward(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    auto x = random_tensor({1, 1, T, 161}, 1);
    auto k = random_tensor({16, 1, 2, 3}, 2);
    auto b = random_tensor({16}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(ad::conv2d_causal(x, k, b, {1, 2}).data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_ConvForward)->Arg(100)->Arg(400);

void BM_ConvForwardBackward(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    auto x = random_tensor({1, 16, T, 80}, 4, true);
    auto k = random_tensor({16, 16, 2, 3}, 5, true);
    auto b = random_tensor({16}, 6, true);
    for (auto _ : state) {
        ad::backward(ad::sum(ad::conv2d_causal(x, k, b, {1, 2})));
        benchmark::DoNotOptimize(k.grad().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_ConvForwardBackward)->Arg(100);

// Decoder layer with skip input: [B, 32, T, 39] -> [B, 16, T, 80].
void BM_DeconvForward(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    auto x = random_tensor({1, 32, T, 39}, 7);
    auto k = random_tensor({32, 16, 2, 3}, 8);
    auto b = random_tensor({16}, 9);
    for (auto _ : state) benchmark::DoNotOptimize(ad::deconv2d_causal(x, k, b, {1, 2}, 80).data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_DeconvForward)->Arg(100);

// Bottleneck LSTM, 256 inputs and 256 units.
void BM_LstmForward(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const float s = 1.0f / 16.0f;
    auto x = random_tensor({1, T, 256}, 10);
    auto wih = random_tensor({1024, 256}, 11), whh = random_tensor({1024, 256}, 12), bias = random_tensor({1024}, 13);
    for (float& v : wih.data()) v *= s;
    for (float& v : whh.data()) v *= s;
    for (auto _ : state) benchmark::DoNotOptimize(ad::lstm_forward(x, wih, whh, bias).data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_LstmForward)->Arg(100);

// One second of audio through the 320-point direct transform and back.
void BM_StftOneSecond(benchmark::State& state) {
    const auto signal = audio::synth_corpus(1, 14, {.min_duration_s = 1.0, .max_duration_s = 1.0})[0].pair.noisy;
    for (auto _ : state) benchmark::DoNotOptimize(dsp::stft(signal).values.data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dsp::frame_count(signal.size())));
}
BENCHMARK(BM_StftOneSecond);

void BM_IstftOneSecond(benchmark::State& state) {
    const auto signal = audio::synth_corpus(1, 15, {.min_duration_s = 1.0, .max_duration_s = 1.0})[0].pair.noisy;
    const auto spec = dsp::stft(signal);
    const auto mag = dsp::magnitude(spec);
    for (auto _ : state) benchmark::DoNotOptimize(dsp::istft_ola(mag, spec, signal.size()).samples.data());
}
BENCHMARK(BM_IstftOneSecond);

// Full-width three-stage model, eval mode, one second of frames.
void BM_PlcrnnForward(benchmark::State& state) {
    auto model = model::build_plcrnn<float>(targets::StagePlan::standard(3, targets::TargetKind::Iam),
                                            static_cast<double>(state.range(0)) / 8.0, 16);
    for (auto& [name, st] : model.bn_states()) st.initialize_identity();
    auto x = random_tensor({1, 100, 161}, 17);
    for (float& v : x.data()) v = std::abs(v);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, ad::NormMode::Eval).back().data().data());
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_PlcrnnForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
