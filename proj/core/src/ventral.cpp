// SPDX-License-Identifier: Apache-2.0

#include "saccade/ventral.hpp"

namespace saccade {

VentralState fresh_state(int batch, int hidden) {
  return {Tensor::zeros({batch, hidden}), 0};
}

Tensor VentralStream::features(Tape& tape, const std::vector<Tensor>& patches) const {
  check(!patches.empty(), "ventral features: need at least one patch");
  Tensor sum;
  for (const auto& p : patches) {
    Tensor f = ad::global_avg_pool(tape, cnn.forward(tape, p));
    sum = sum.defined() ? ad::add(tape, sum, f) : f;
  }
  return sum;
}

VentralState VentralStream::accumulate(Tape& tape, const VentralState& state,
                                       const Tensor& feats) const {
  return {ad::gru_cell(tape, state.hidden, feats, gru), state.step + 1};
}

Tensor VentralStream::logits(Tape& tape, const VentralState& state) const {
  return ad::dense(tape, state.hidden, cls_w, cls_b);
}

void VentralStream::collect(const std::string& prefix, ParamList& out) const {
  cnn.collect(prefix + ".cnn", out);
  if (gru.wz.defined()) collect_gru(gru, prefix + ".gru", out);
  out.emplace_back(prefix + ".cls.w", cls_w);
  out.emplace_back(prefix + ".cls.b", cls_b);
}

VentralStream make_ventral(int in_c, const std::vector<int>& channels, int gru_hidden, int classes,
                           Rng& rng) {
  check(gru_hidden > 0 && classes >= 2, "make_ventral: need hidden width and at least 2 classes");
  VentralStream v;
  v.cnn = make_stack(in_c, channels, {1, 3, 5}, rng);
  v.feature_dim = channels.back();
  v.hidden = gru_hidden;
  v.classes = classes;
  v.gru = make_gru(v.feature_dim, gru_hidden, rng);
  v.cls_w = make_dense_w(gru_hidden, classes, rng);
  v.cls_b = Tensor::zeros({classes}, true);
  return v;
}

Tensor recognition_loss(Tape& tape, const std::vector<Tensor>& step_logits,
                        const std::vector<int>& labels) {
  check(!step_logits.empty(), "recognition_loss: need at least one step");
  Tensor loss;
  for (const auto& z : step_logits) {
    Tensor ce = ad::softmax_cross_entropy(tape, z, labels);
    loss = loss.defined() ? ad::add(tape, loss, ce) : ce;
  }
  return loss;
}

}  // namespace saccade
