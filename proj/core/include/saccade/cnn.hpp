// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "saccade/checkpoint.hpp"
#include "saccade/ops.hpp"
#include "saccade/rng.hpp"

namespace saccade {

struct ConvLayer {
  Tensor w;  // [K,C,3,3]
  Tensor b;  // [K]
};

// Fan-in-scaled uniform init, zero bias. Deterministic given the rng state.
ConvLayer make_conv(int in_c, int out_c, Rng& rng);
Tensor make_dense_w(int in_d, int out_d, Rng& rng);
ad::GruParams make_gru(int in_d, int hidden, Rng& rng);

// Plain conv/ReLU pile with maxpools after the listed layer indices
// (0-based). The standard recognition stack is 8 convs with pools after
// layers 1, 3 and 5.
struct ConvStack {
  std::vector<ConvLayer> layers;
  std::vector<int> pool_after;

  // Feature map after each conv+ReLU (pooling applied between stages).
  std::vector<Tensor> forward_all(Tape& tape, Tensor x) const;
  Tensor forward(Tape& tape, Tensor x) const;

  void collect(const std::string& prefix, ParamList& out) const;
};

ConvStack make_stack(int in_c, const std::vector<int>& channels, const std::vector<int>& pool_after,
                     Rng& rng);

void collect_gru(const ad::GruParams& p, const std::string& prefix, ParamList& out);

// Copies saved values into the registered parameters, matching by name.
// Throws on missing names or shape mismatches.
void load_params(const ParamList& dst, const ParamList& saved);

}  // namespace saccade
