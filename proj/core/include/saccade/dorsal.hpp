// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "saccade/cnn.hpp"
#include "saccade/retina.hpp"

namespace saccade {

// Raw (pre-softmax) saliency scores over an S x S grid of candidate
// fixation cells.
struct SaliencyMap {
  Tensor grid;  // [B,1,S,S]
  int cells_px = 0;
};

// The "where" pathway: a conv stack over a low-resolution whole-image view,
// whose per-layer feature maps are resized, concatenated and projected to a
// single-channel saliency map.
struct DorsalStream {
  ConvStack cnn;
  ConvLayer head;
  int saliency_px = 16;

  std::vector<Tensor> features(Tape& tape, const Tensor& lowres) const;
  SaliencyMap saliency(Tape& tape, const Tensor& lowres) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

DorsalStream make_dorsal(int in_c, const std::vector<int>& channels, int saliency_px, Rng& rng);

// ReLU(1 - sum of peak-normalized Gaussians centered at past fixations),
// on the S x S cell grid. All values in [0,1]; exactly 0 at fixated cells.
Tensor ior_mask(const std::vector<Fixation>& history, float sigma_cells, int cells_px);

// One policy step over a batch: softmax(saliency * ior), categorical sample
// per row. log_probs ([B]) stays on the tape for the policy gradient.
struct PolicyStep {
  std::vector<Fixation> fixations;  // sampled cell centers, in [0,1]^2
  std::vector<int> cells;           // flat cell indices
  Tensor log_probs;                 // [B]
};

PolicyStep next_fixation(Tape& tape, const SaliencyMap& sal,
                         const std::vector<std::vector<Fixation>>& history, float ior_sigma_cells,
                         Rng& rng);

// Greedy variant used at evaluation time: argmax cell instead of sampling;
// nothing recorded on the tape.
PolicyStep greedy_fixation(const SaliencyMap& sal, const std::vector<std::vector<Fixation>>& history,
                           float ior_sigma_cells);

// r_t = CE(p_prev) - CE(p_curr): positive when this glance improved the
// prediction. Both arguments are probability vectors.
float step_reward(std::span<const float> p_prev, std::span<const float> p_curr, int label);

struct Returns {
  float total = 0.0f;               // sum of gamma^(t-1) r_t
  std::vector<float> to_go;         // G_t = sum_{tau>=t} gamma^(tau-t) r_tau
};

Returns discounted_return(const std::vector<float>& rewards, float gamma);

// -mean_b sum_t G_t[b] * log_prob_t[b], with G constant w.r.t. the tape.
Tensor reinforce_loss(Tape& tape, const std::vector<Tensor>& step_log_probs,
                      const std::vector<std::vector<float>>& step_rewards, float gamma);

}  // namespace saccade
