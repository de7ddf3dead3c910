// SPDX-License-Identifier: Apache-2.0
//
// Hot-path timings: convolution, foveation, a full recognition episode, and
// one EOT gradient (the inner loop of PGD).

#include <benchmark/benchmark.h>

#include "saccade/attack.hpp"
#include "saccade/model.hpp"
#include "saccade/ops.hpp"
#include "saccade/retina.hpp"

namespace {

using namespace saccade;

ModelConfig bench_config() {
  ModelConfig mc;
  mc.variant = Variant::retina;
  mc.image_px = 64;
  mc.patch_px = 32;
  mc.dorsal_px = 32;
  mc.ventral_channels = {12, 12, 24, 24, 48, 48};
  mc.dorsal_channels = {6, 6, 12, 12, 24, 24};
  mc.gru_hidden = 64;
  mc.init_seed = 3;
  return mc;
}

Tensor random_images(int b, int c, int n, std::uint64_t seed) {
  Tensor t = Tensor::zeros({b, c, n, n});
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

void bm_conv2d_forward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor x = random_images(8, c, 32, 1);
  Rng rng(2);
  ConvLayer layer = make_conv(c, c, rng);
  Tape tape;
  for (auto _ : state) {
    Tensor y = ad::conv2d(tape, x, layer.w, layer.b);
    benchmark::DoNotOptimize(y.data());
    tape.reset();  // recorded entries pin their outputs
  }
}
BENCHMARK(bm_conv2d_forward)->Arg(16)->Arg(48);

void bm_conv2d_backward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor x = random_images(8, c, 32, 1);
  x.set_requires_grad(true);
  Rng rng(2);
  ConvLayer layer = make_conv(c, c, rng);
  for (auto _ : state) {
    Tape tape;
    Tensor y = ad::conv2d(tape, x, layer.w, layer.b);
    Tensor loss = ad::sum_all(tape, y);
    tape.backward(loss);
    benchmark::DoNotOptimize(x.grad().data());
    tape.reset();
  }
}
BENCHMARK(bm_conv2d_backward)->Arg(16)->Arg(48);

void bm_foveate(benchmark::State& state) {
  Tensor x = random_images(8, 3, 64, 1);
  FoveationParams p;
  Tape tape;
  for (auto _ : state) {
    Tensor y = foveate(tape, x, {0.5f, 0.5f}, p);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(bm_foveate);

void bm_episode_forward(benchmark::State& state) {
  Model model = build_model(bench_config());
  Tensor images = random_images(8, 3, 64, 5);
  std::vector<int> labels(8, 0);
  for (auto _ : state) {
    Tape tape;
    Tape::Pause pause(tape);
    Rng rng(7);
    EpisodeOptions opt;
    opt.glances = 4;
    opt.sample_policy = true;
    opt.record_policy = false;
    GlanceTrajectory traj = forward_episode(tape, model, images, labels, opt, rng);
    benchmark::DoNotOptimize(traj.step_probs.back().data());
  }
}
BENCHMARK(bm_episode_forward);

void bm_eot_gradient(benchmark::State& state) {
  Model model = build_model(bench_config());
  Tensor images = random_images(4, 3, 64, 5);
  std::vector<int> labels(4, 0);
  AttackConfig cfg;
  cfg.glances = 4;
  cfg.eot_samples = 1;
  for (auto _ : state) {
    Rng rng(7);
    Tensor g = eot_gradient(model, images, labels, cfg, rng);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(bm_eot_gradient);

}  // namespace

BENCHMARK_MAIN();
