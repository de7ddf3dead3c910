// SPDX-License-Identifier: Apache-2.0
//
// Double-precision reference forwards and a central finite-difference
// harness. The references are naive loops, independent of the production
// kernels, so an agreement failure localizes to the library.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "saccade/tape.hpp"
#include "saccade/tensor.hpp"

namespace oracle {

using saccade::Shape;
using saccade::Tape;
using saccade::Tensor;

struct DTensor {
  Shape shape;
  std::vector<double> v;

  static DTensor zeros(Shape s);
  static DTensor from(const Tensor& t);
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const { return v.size(); }
};

Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f,
                     bool requires_grad = true);

// ---- reference forwards ------------------------------------------------------

DTensor dadd(const DTensor& a, const DTensor& b);
DTensor dsub(const DTensor& a, const DTensor& b);
DTensor dmul(const DTensor& a, const DTensor& b);
DTensor dadd_scalar(const DTensor& a, double s);
DTensor dmul_scalar(const DTensor& a, double s);
DTensor drelu(const DTensor& a);
DTensor dsigmoid(const DTensor& a);
DTensor dtanh(const DTensor& a);
DTensor dmatmul(const DTensor& x, const DTensor& w);
DTensor dbias_add(const DTensor& x, const DTensor& b);
DTensor dconv2d(const DTensor& x, const DTensor& w, const DTensor& b);
DTensor dmaxpool2(const DTensor& x);
DTensor dgap(const DTensor& x);
DTensor dconcat_channels(const std::vector<DTensor>& xs);
DTensor dgru_cell(const DTensor& h, const DTensor& x, const DTensor& wz, const DTensor& uz,
                  const DTensor& bz, const DTensor& wr, const DTensor& ur, const DTensor& br,
                  const DTensor& wc, const DTensor& uc, const DTensor& bc);
// sx/sy are [h,w] shared or [B,h,w] per element, as in the production sampler
DTensor dgrid_sample(const DTensor& img, const DTensor& sx, const DTensor& sy);
DTensor dresize_bilinear(const DTensor& img, int oh, int ow);
DTensor dblur_sep(const DTensor& x, const std::vector<double>& taps);
DTensor dmasked_blend(const std::vector<DTensor>& imgs, const std::vector<DTensor>& masks);
double dsoftmax_ce(const DTensor& logits, const std::vector<int>& labels);
DTensor dlog_softmax_pick(const DTensor& scores, const std::vector<int>& picks);
double dsum(const DTensor& a);
double dweighted_sum(const DTensor& a, const DTensor& w);

// ---- finite-difference harness ----------------------------------------------

struct GradCheck {
  double max_err = 0.0;    // max over probes of |fd - grad| / max(tol_floor, |fd|+|grad|)
  std::size_t probes = 0;  // accepted probes (kink-crossing probes are redrawn)
  std::size_t skipped = 0;
};

// `build` assembles the float graph and returns the scalar loss; `ref`
// evaluates the same function in double on perturbed copies of the inputs.
// Each probe perturbs one element of one input; probes whose h and h/2
// difference quotients disagree sit on a kink and are redrawn.
GradCheck fd_check(const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& build,
                   const std::function<double(const std::vector<DTensor>&)>& ref,
                   const std::vector<Tensor>& inputs, int probes_per_input, double h = 1e-4,
                   std::uint64_t seed = 7, double tol_floor = 1e-3);

}  // namespace oracle
