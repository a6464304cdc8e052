#include <benchmark/benchmark.h>

#include <cmath>

#include "convsynth/dsp.hpp"
#include "convsynth/rng.hpp"

using namespace convsynth;

namespace {

AudioClip noise(std::size_t n, int rate) {
  Rng rng(3);
  AudioClip c{std::vector<double>(n), rate};
  for (auto& x : c.samples) x = rng.uniform(-0.5, 0.5);
  return c;
}

void BM_Resample44to16(benchmark::State& state) {
  const auto clip = noise(44100 * static_cast<std::size_t>(state.range(0)), 44100);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::resample(clip, 16000));
}
BENCHMARK(BM_Resample44to16)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Bandlimit(benchmark::State& state) {
  const auto clip = noise(16000 * 10, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::telephone_bandlimit(clip));
}
BENCHMARK(BM_Bandlimit)->Unit(benchmark::kMillisecond);

void BM_Rir(benchmark::State& state) {
  dsp::RoomSpec room;
  room.max_order = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dsp::generate_rir(room, 16000));
}
BENCHMARK(BM_Rir)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Convolve(benchmark::State& state) {
  const auto clip = noise(16000 * 10, 16000);
  const auto rir = noise(static_cast<std::size_t>(state.range(0)), 16000);
  const auto method = state.range(1) ? dsp::ConvolutionMethod::fft : dsp::ConvolutionMethod::direct;
  for (auto _ : state) benchmark::DoNotOptimize(dsp::convolve(clip, rir, method));
}
BENCHMARK(BM_Convolve)->Args({256, 0})->Args({256, 1})->Args({8000, 1})->Unit(benchmark::kMillisecond);

}  // namespace
