// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "saccade/cnn.hpp"

namespace saccade {

// Recurrent recognition state; owned by the episode, reset to zeros at
// episode start (and per probe for one-glance readouts).
struct VentralState {
  Tensor hidden;  // [B,H]
  int step = 0;
};

VentralState fresh_state(int batch, int hidden);

// The "what" pathway: shared-weight conv stack per patch, global average
// pool to a feature vector (summed across patches for the double-crop
// front-end), GRU accumulation, linear classifier.
struct VentralStream {
  ConvStack cnn;
  ad::GruParams gru;
  Tensor cls_w;  // [H,K]
  Tensor cls_b;  // [K]
  int feature_dim = 0;
  int hidden = 0;
  int classes = 0;

  // [B,F]; multiple patches run through the same weights, features summed.
  Tensor features(Tape& tape, const std::vector<Tensor>& patches) const;
  VentralState accumulate(Tape& tape, const VentralState& state, const Tensor& feats) const;
  Tensor logits(Tape& tape, const VentralState& state) const;  // [B,K] pre-softmax

  void collect(const std::string& prefix, ParamList& out) const;
};

VentralStream make_ventral(int in_c, const std::vector<int>& channels, int gru_hidden, int classes,
                           Rng& rng);

// Sum over steps of batch-mean cross entropy on pre-softmax logits.
Tensor recognition_loss(Tape& tape, const std::vector<Tensor>& step_logits,
                        const std::vector<int>& labels);

}  // namespace saccade
