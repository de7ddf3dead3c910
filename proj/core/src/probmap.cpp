// SPDX-License-Identifier: Apache-2.0
#include "saccade/probmap.hpp"

#include <algorithm>
#include <cstring>

#include "saccade/manifest.hpp"
#include "saccade/ops.hpp"

namespace saccade {

namespace {

// Replicates a [1,C,H,W] image to [B,C,H,W].
Tensor replicate(const Tensor& image, int b) {
  Shape s = image.shape();
  s[0] = b;
  Tensor out = Tensor::zeros(s);
  const std::size_t plane = image.numel();
  for (int i = 0; i < b; ++i)
    std::memcpy(out.data() + static_cast<std::size_t>(i) * plane, image.data(),
                plane * sizeof(float));
  return out;
}

}  // namespace

Fixation grid_cell_center(int row, int col, int grid_px) {
  check(grid_px > 0 && row >= 0 && row < grid_px && col >= 0 && col < grid_px,
        "grid_cell_center: cell outside the grid");
  return {(static_cast<float>(col) + 0.5f) / static_cast<float>(grid_px),
          (static_cast<float>(row) + 0.5f) / static_cast<float>(grid_px)};
}

Fixation first_fixation(const Model& model, const Tensor& image) {
  check(model.has_dorsal(), "first_fixation: needs a fixating variant");
  Tape tape;
  Tape::Pause pause(tape);
  EpisodeOptions opt;
  opt.glances = 1;
  opt.fixation_noise_std = 0.0f;
  opt.sample_policy = false;
  opt.record_policy = false;
  Rng rng(0);
  std::vector<int> labels(static_cast<std::size_t>(image.dim(0)), 0);
  GlanceTrajectory traj = forward_episode(tape, model, image, labels, opt, rng);
  return traj.fixations.front().front();
}

Tensor targeted_pgd_forced(const Model& model, const Tensor& image, int target,
                           const std::vector<Fixation>& fixations, const ProbMapConfig& cfg) {
  check(image.dim(0) == 1, "targeted_pgd_forced: single image expected");
  check(!fixations.empty(), "targeted_pgd_forced: at least one fixation");
  check(target >= 0 && target < model.cfg.classes, "targeted_pgd_forced: target out of range");
  std::vector<std::vector<Fixation>> forced;
  forced.reserve(fixations.size());
  for (const auto& f : fixations) forced.push_back({f});
  const std::vector<int> targets{target};

  auto grad_fn = [&](const Tensor& x, int) {
    Tensor xi = x;
    xi.set_requires_grad(true);
    xi.zero_grad();
    Tape tape;
    EpisodeOptions opt;
    opt.glances = static_cast<int>(fixations.size());
    opt.fixation_noise_std = 0.0f;
    opt.sample_policy = false;
    opt.record_policy = false;
    opt.forced_fixations = &forced;
    Rng rng(0);
    GlanceTrajectory traj = forward_episode(tape, model, xi, targets, opt, rng);
    Tensor loss;
    for (const Tensor& z : traj.step_logits) {
      Tensor ce = ad::softmax_cross_entropy(tape, z, targets);
      loss = loss.defined() ? ad::add(tape, loss, ce) : ce;
    }
    loss = ad::mul_scalar(tape, loss, -1.0f);  // ascent then serves the attacker
    tape.backward(loss);
    Tensor g = Tensor::zeros(x.shape());
    auto gv = xi.grad_view();
    std::copy(gv.begin(), gv.end(), g.data());
    tape.reset();
    xi.set_requires_grad(false);
    return g;
  };
  const float step = cfg.step_size > 0.0f ? cfg.step_size : cfg.epsilon / 20.0f;
  return pgd_core(image, cfg.epsilon, step, cfg.steps, grad_fn);
}

ProbMap probe_grid(const Model& model, const Tensor& adv, int target, const ProbMapConfig& cfg) {
  check(adv.dim(0) == 1, "probe_grid: single image expected");
  const int g = cfg.grid_px;
  const int cells = g * g;
  ProbMap map;
  map.grid_px = g;
  map.values.assign(static_cast<std::size_t>(cells), 0.0f);
  map.image_id = hex64(fnv1a(adv.data(), adv.numel() * sizeof(float)));

  int at = 0;
  while (at < cells) {
    const int bs = std::min(cfg.cell_batch, cells - at);
    Tensor batch = replicate(adv, bs);
    std::vector<std::vector<Fixation>> forced(1);
    forced[0].reserve(static_cast<std::size_t>(bs));
    for (int i = 0; i < bs; ++i) {
      const int cell = at + i;
      forced[0].push_back(grid_cell_center(cell / g, cell % g, g));
    }
    Tape tape;
    Tape::Pause pause(tape);
    EpisodeOptions opt;
    opt.glances = 1;
    opt.fixation_noise_std = 0.0f;
    opt.sample_policy = false;
    opt.record_policy = false;
    opt.forced_fixations = &forced;
    Rng rng(0);
    std::vector<int> labels(static_cast<std::size_t>(bs), target);
    GlanceTrajectory traj = forward_episode(tape, model, batch, labels, opt, rng);
    const auto& probs = traj.step_probs.front();
    const int k = traj.classes;
    for (int i = 0; i < bs; ++i)
      map.values[static_cast<std::size_t>(at + i)] =
          probs[static_cast<std::size_t>(i) * k + target];
    at += bs;
  }
  return map;
}

ProbMapPair probability_map(const Model& model, const Tensor& image, int target,
                            const ProbMapConfig& cfg) {
  check(model.has_dorsal(), "probability_map: needs a fixating variant");
  ProbMapPair out;
  const Fixation first = first_fixation(model, image);
  // Lower-left corner cell, (30, 1) on the default 32x32 grid.
  const Fixation corner = grid_cell_center(cfg.grid_px - 2, 1, cfg.grid_px);

  out.adv_one = targeted_pgd_forced(model, image, target, {first}, cfg);
  out.adv_two = targeted_pgd_forced(model, image, target, {first, corner}, cfg);
  out.one_fix = probe_grid(model, out.adv_one, target, cfg);
  out.one_fix.attack_fixations = {first};
  out.two_fix = probe_grid(model, out.adv_two, target, cfg);
  out.two_fix.attack_fixations = {first, corner};
  return out;
}

int affected_area(const ProbMap& map, float threshold) {
  int n = 0;
  for (float v : map.values)
    if (v > threshold) ++n;
  return n;
}

}  // namespace saccade
