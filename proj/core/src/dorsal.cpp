// SPDX-License-Identifier: Apache-2.0

#include "saccade/dorsal.hpp"

#include <algorithm>
#include <cmath>

namespace saccade {

std::vector<Tensor> DorsalStream::features(Tape& tape, const Tensor& lowres) const {
  return cnn.forward_all(tape, lowres);
}

SaliencyMap DorsalStream::saliency(Tape& tape, const Tensor& lowres) const {
  auto maps = features(tape, lowres);
  std::vector<Tensor> resized;
  resized.reserve(maps.size());
  for (const auto& m : maps) {
    if (m.dim(2) == saliency_px && m.dim(3) == saliency_px)
      resized.push_back(m);
    else
      resized.push_back(ad::resize_bilinear(tape, m, saliency_px, saliency_px));
  }
  Tensor cat = ad::concat_channels(tape, resized);
  return {ad::conv2d(tape, cat, head.w, head.b), saliency_px};
}

void DorsalStream::collect(const std::string& prefix, ParamList& out) const {
  cnn.collect(prefix + ".cnn", out);
  out.emplace_back(prefix + ".head.w", head.w);
  out.emplace_back(prefix + ".head.b", head.b);
}

DorsalStream make_dorsal(int in_c, const std::vector<int>& channels, int saliency_px, Rng& rng) {
  check(saliency_px >= 2, "make_dorsal: saliency grid too small");
  DorsalStream d;
  d.cnn = make_stack(in_c, channels, {1, 3, 5}, rng);
  int total = 0;
  for (int c : channels) total += c;
  d.head = make_conv(total, 1, rng);
  d.saliency_px = saliency_px;
  return d;
}

Tensor ior_mask(const std::vector<Fixation>& history, float sigma_cells, int cells_px) {
  check(sigma_cells > 0.0f, "ior_mask: sigma must be positive");
  const int S = cells_px;
  Tensor mask = Tensor::zeros({S, S});
  std::vector<float> suppression(static_cast<std::size_t>(S) * S, 0.0f);
  for (const Fixation& f : history) {
    // cell-grid position of the fixation (cell centers at integer coords)
    const float gx = f.u * static_cast<float>(S) - 0.5f;
    const float gy = f.v * static_cast<float>(S) - 0.5f;
    float peak = 0.0f;
    std::vector<float> g(static_cast<std::size_t>(S) * S);
    for (int i = 0; i < S; ++i) {
      for (int j = 0; j < S; ++j) {
        const float dx = static_cast<float>(j) - gx;
        const float dy = static_cast<float>(i) - gy;
        const float v = std::exp(-0.5f * (dx * dx + dy * dy) / (sigma_cells * sigma_cells));
        g[static_cast<std::size_t>(i) * S + j] = v;
        peak = std::max(peak, v);
      }
    }
    const float inv = 1.0f / peak;
    for (std::size_t i = 0; i < suppression.size(); ++i) suppression[i] += g[i] * inv;
  }
  float* pm = mask.data();
  for (std::size_t i = 0; i < suppression.size(); ++i)
    pm[i] = std::max(0.0f, 1.0f - suppression[i]);
  return mask;
}

namespace {

Fixation cell_center(int cell, int S) {
  const int cy = cell / S, cx = cell % S;
  return {(static_cast<float>(cx) + 0.5f) / static_cast<float>(S),
          (static_cast<float>(cy) + 0.5f) / static_cast<float>(S)};
}

// saliency * ior as a [B, S*S] tensor on the tape.
Tensor masked_scores(Tape& tape, const SaliencyMap& sal,
                     const std::vector<std::vector<Fixation>>& history, float ior_sigma_cells) {
  const int B = sal.grid.dim(0), S = sal.cells_px;
  check(static_cast<int>(history.size()) == B, "next_fixation: one history per batch row");
  Tensor flat = ad::reshape_copy(tape, sal.grid, {B, S * S});
  Tensor mask = Tensor::zeros({B, S * S});
  for (int b = 0; b < B; ++b) {
    Tensor m = ior_mask(history[b], ior_sigma_cells, S);
    std::copy(m.data(), m.data() + m.numel(), mask.data() + static_cast<std::size_t>(b) * S * S);
  }
  return ad::mul(tape, flat, mask);
}

}  // namespace

PolicyStep next_fixation(Tape& tape, const SaliencyMap& sal,
                         const std::vector<std::vector<Fixation>>& history, float ior_sigma_cells,
                         Rng& rng) {
  const int B = sal.grid.dim(0), S = sal.cells_px;
  Tensor scores = masked_scores(tape, sal, history, ior_sigma_cells);
  auto probs = ad::softmax_rows(scores);
  PolicyStep step;
  step.cells.reserve(B);
  step.fixations.reserve(B);
  for (int b = 0; b < B; ++b) {
    std::span<const float> row(probs.data() + static_cast<std::size_t>(b) * S * S,
                               static_cast<std::size_t>(S) * S);
    const int cell = static_cast<int>(rng.categorical(row));
    step.cells.push_back(cell);
    step.fixations.push_back(cell_center(cell, S));
  }
  step.log_probs = ad::log_softmax_pick(tape, scores, step.cells);
  return step;
}

PolicyStep greedy_fixation(const SaliencyMap& sal,
                           const std::vector<std::vector<Fixation>>& history,
                           float ior_sigma_cells) {
  const int B = sal.grid.dim(0), S = sal.cells_px;
  Tape scratch;  // nothing recorded: scratch tape stays empty without requires_grad inputs
  Tape::Pause pause(scratch);
  Tensor scores = masked_scores(scratch, sal, history, ior_sigma_cells);
  PolicyStep step;
  step.log_probs = Tensor();
  for (int b = 0; b < B; ++b) {
    const float* row = scores.data() + static_cast<std::size_t>(b) * S * S;
    const int cell = static_cast<int>(std::max_element(row, row + S * S) - row);
    step.cells.push_back(cell);
    step.fixations.push_back(cell_center(cell, S));
  }
  return step;
}

float step_reward(std::span<const float> p_prev, std::span<const float> p_curr, int label) {
  check(p_prev.size() == p_curr.size(), "step_reward: distribution sizes disagree");
  check(label >= 0 && label < static_cast<int>(p_prev.size()), "step_reward: label out of range");
  auto validate = [](std::span<const float> p) {
    float sum = 0.0f;
    for (float v : p) {
      check(v >= -1e-6f, "step_reward: probabilities must be non-negative");
      sum += v;
    }
    check(std::fabs(sum - 1.0f) < 1e-3f, "step_reward: probabilities must sum to 1");
  };
  validate(p_prev);
  validate(p_curr);
  const float lo = 1e-12f;
  return std::log(std::max(p_curr[label], lo)) - std::log(std::max(p_prev[label], lo));
}

Returns discounted_return(const std::vector<float>& rewards, float gamma) {
  check(gamma > 0.0f && gamma < 1.0f, "discounted_return: gamma must be in (0,1)");
  Returns r;
  r.to_go.assign(rewards.size(), 0.0f);
  float acc = 0.0f;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[static_cast<std::size_t>(t)] + gamma * acc;
    r.to_go[static_cast<std::size_t>(t)] = acc;
  }
  r.total = r.to_go.empty() ? 0.0f : r.to_go.front();
  return r;
}

Tensor reinforce_loss(Tape& tape, const std::vector<Tensor>& step_log_probs,
                      const std::vector<std::vector<float>>& step_rewards, float gamma) {
  check(step_log_probs.size() == step_rewards.size(),
        "reinforce_loss: one reward vector per recorded step");
  const std::size_t T = step_log_probs.size();
  if (T == 0) return Tensor::scalar(0.0f);
  const int B = step_log_probs[0].dim(0);

  // per-element reward-to-go
  std::vector<std::vector<float>> to_go(T, std::vector<float>(B, 0.0f));
  for (int b = 0; b < B; ++b) {
    float acc = 0.0f;
    for (int t = static_cast<int>(T) - 1; t >= 0; --t) {
      check(static_cast<int>(step_rewards[t].size()) == B, "reinforce_loss: reward batch mismatch");
      acc = step_rewards[static_cast<std::size_t>(t)][b] + gamma * acc;
      to_go[static_cast<std::size_t>(t)][b] = acc;
    }
  }

  Tensor loss = Tensor::scalar(0.0f);
  bool first = true;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor w = Tensor::zeros({B});
    for (int b = 0; b < B; ++b) w.data()[b] = -to_go[t][b] / static_cast<float>(B);
    Tensor term = ad::sum_all(tape, ad::mul(tape, step_log_probs[t], w));
    loss = first ? term : ad::add(tape, loss, term);
    first = false;
  }
  return loss;
}

}  // namespace saccade
