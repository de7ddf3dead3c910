// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives over Tensor, recorded on a Tape. Exactly the
// set the recognition pipeline and the attack harness need; no general
// broadcasting beyond what these signatures state.

#pragma once

#include <array>
#include <vector>

#include "saccade/tape.hpp"
#include "saccade/tensor.hpp"

namespace saccade::ad {

// ---- elementwise -----------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_scalar(Tape& tape, const Tensor& a, float s);
Tensor mul_scalar(Tape& tape, const Tensor& a, float s);
Tensor relu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor tanh_op(Tape& tape, const Tensor& a);

// ---- linear algebra --------------------------------------------------------

// [B,D] x [D,K] -> [B,K]
Tensor matmul(Tape& tape, const Tensor& x, const Tensor& w);
// [B,K] + [K] -> [B,K]
Tensor bias_add(Tape& tape, const Tensor& x, const Tensor& b);
// matmul + bias_add
Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

// ---- convolutional stack ---------------------------------------------------

// 3x3 kernels, stride 1, zero padding 1: [B,C,H,W] x [K,C,3,3] + [K] -> [B,K,H,W]
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);
// 2x2 window, stride 2; ties route the gradient to the first element in
// row-major order: [B,C,H,W] -> [B,C,H/2,W/2]
Tensor maxpool2(Tape& tape, const Tensor& x);
// [B,C,H,W] -> [B,C]
Tensor global_avg_pool(Tape& tape, const Tensor& x);
// channel concatenation of equally sized maps
Tensor concat_channels(Tape& tape, const std::vector<Tensor>& xs);

// ---- recurrence ------------------------------------------------------------

// Gated recurrent unit parameters; input width D, hidden width H.
struct GruParams {
  Tensor wz, uz, bz;  // update gate: [D,H], [H,H], [H]
  Tensor wr, ur, br;  // reset gate
  Tensor wc, uc, bc;  // candidate
};

// One GRU step: z*c + (1-z)*h, so a saturated update gate hands the state
// over to the candidate. Composite of the primitives above, so it chains
// through time on the tape.
Tensor gru_cell(Tape& tape, const Tensor& state, const Tensor& input, const GruParams& p);

// ---- sampling --------------------------------------------------------------

// Bilinear gather at continuous source coordinates (pixel units, clamp to
// edge): image [B,C,H,W], sx/sy [h,w] shared or [B,h,w] per batch element
// -> [B,C,h,w]. Differentiable in the image and in both coordinate fields.
Tensor grid_sample(Tape& tape, const Tensor& image, const Tensor& sx, const Tensor& sy);

// Uniform bilinear resize to oh x ow (half-pixel centers), via grid_sample.
Tensor resize_bilinear(Tape& tape, const Tensor& image, int oh, int ow);

// Depthwise separable 7-tap blur with symmetric (reflect) padding.
Tensor blur_sep(Tape& tape, const Tensor& x, const std::vector<float>& taps);

// sum_i imgs[i] * masks[i] where masks are [H,W] (shared) or [B,H,W]
// (per element) constants broadcast over channels. Gradients flow to the
// images only.
Tensor masked_blend(Tape& tape, const std::vector<Tensor>& imgs, const std::vector<Tensor>& masks);

// ---- losses and reductions -------------------------------------------------

// Mean over the batch of -log softmax(logits)[label]: [B,K] -> scalar.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// Row-wise log softmax probability of one picked index: [B,M] -> [B].
Tensor log_softmax_pick(Tape& tape, const Tensor& scores, const std::vector<int>& picks);

Tensor sum_all(Tape& tape, const Tensor& a);

// Copy into a new shape with identical element count; gradient passes
// through element-wise.
Tensor reshape_copy(Tape& tape, const Tensor& a, Shape shape);

// Forward-only row softmax, detached from the tape.
std::vector<float> softmax_rows(const Tensor& logits);

}  // namespace saccade::ad

namespace saccade {
using ad::GruParams;
}  // namespace saccade
