// SPDX-License-Identifier: Apache-2.0
#include "grad_cases.hpp"

#include "saccade/ops.hpp"
#include "saccade/retina.hpp"

namespace oracle {

using namespace saccade::ad;
using saccade::FoveationParams;
using saccade::foveate;
using saccade::gaussian_taps;
using saccade::region_masks;
using saccade::retinal_sample;
using saccade::SampleGrid;
using saccade::warp_grid;

namespace {

std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

// Weighted scalar readout so every output element carries a distinct
// gradient; the weights are constants shared by both sides.
GradCase weighted_case(std::string name, Shape out_shape, std::uint64_t wseed,
                       std::function<Tensor(Tape&, const std::vector<Tensor>&)> op,
                       std::function<DTensor(const std::vector<DTensor>&)> dop,
                       std::vector<Tensor> inputs) {
  Tensor rw = random_tensor(std::move(out_shape), wseed, -1.0f, 1.0f, false);
  DTensor drw = DTensor::from(rw);
  GradCase c;
  c.name = std::move(name);
  c.build = [rw, op = std::move(op)](Tape& t, const std::vector<Tensor>& in) {
    return sum_all(t, mul(t, op(t, in), rw));
  };
  c.ref = [drw, dop = std::move(dop)](const std::vector<DTensor>& in) {
    return dweighted_sum(dop(in), drw);
  };
  c.inputs = std::move(inputs);
  return c;
}

GruParams gru_from(const std::vector<Tensor>& in, std::size_t at) {
  GruParams p;
  p.wz = in[at + 0], p.uz = in[at + 1], p.bz = in[at + 2];
  p.wr = in[at + 3], p.ur = in[at + 4], p.br = in[at + 5];
  p.wc = in[at + 6], p.uc = in[at + 7], p.bc = in[at + 8];
  return p;
}

DTensor dgru_from(const std::vector<DTensor>& in, std::size_t at, const DTensor& h,
                  const DTensor& x) {
  return dgru_cell(h, x, in[at + 0], in[at + 1], in[at + 2], in[at + 3], in[at + 4], in[at + 5],
                   in[at + 6], in[at + 7], in[at + 8]);
}

std::vector<Tensor> gru_param_tensors(int d, int h, std::uint64_t seed) {
  std::vector<Tensor> p;
  for (int g = 0; g < 3; ++g) {
    p.push_back(random_tensor({d, h}, seed + 10 * static_cast<std::uint64_t>(g)));
    p.push_back(random_tensor({h, h}, seed + 10 * static_cast<std::uint64_t>(g) + 1));
    p.push_back(random_tensor({h}, seed + 10 * static_cast<std::uint64_t>(g) + 2));
  }
  return p;
}

}  // namespace

std::vector<GradCase> primitive_grad_cases() {
  std::vector<GradCase> cases;

  cases.push_back(weighted_case(
      "elementwise add/sub/mul and scalar variants", {2, 3, 4}, 900,
      [](Tape& t, const std::vector<Tensor>& in) {
        Tensor s = add(t, mul(t, in[0], in[1]), mul_scalar(t, sub(t, in[0], in[1]), 0.7f));
        return add_scalar(t, s, 0.25f);
      },
      [](const std::vector<DTensor>& in) {
        return dadd_scalar(dadd(dmul(in[0], in[1]), dmul_scalar(dsub(in[0], in[1]), 0.7)), 0.25);
      },
      {random_tensor({2, 3, 4}, 1), random_tensor({2, 3, 4}, 2)}));

  cases.push_back(weighted_case(
      "relu", {2, 3, 4}, 901,
      [](Tape& t, const std::vector<Tensor>& in) { return relu(t, in[0]); },
      [](const std::vector<DTensor>& in) { return drelu(in[0]); }, {random_tensor({2, 3, 4}, 3)}));

  cases.push_back(weighted_case(
      "sigmoid", {2, 5}, 902,
      [](Tape& t, const std::vector<Tensor>& in) { return sigmoid(t, in[0]); },
      [](const std::vector<DTensor>& in) { return dsigmoid(in[0]); },
      {random_tensor({2, 5}, 4, -2.0f, 2.0f)}));

  cases.push_back(weighted_case(
      "tanh", {2, 5}, 903, [](Tape& t, const std::vector<Tensor>& in) { return tanh_op(t, in[0]); },
      [](const std::vector<DTensor>& in) { return dtanh(in[0]); },
      {random_tensor({2, 5}, 5, -2.0f, 2.0f)}));

  cases.push_back(weighted_case(
      "matmul", {3, 2}, 904,
      [](Tape& t, const std::vector<Tensor>& in) { return matmul(t, in[0], in[1]); },
      [](const std::vector<DTensor>& in) { return dmatmul(in[0], in[1]); },
      {random_tensor({3, 4}, 6), random_tensor({4, 2}, 7)}));

  cases.push_back(weighted_case(
      "bias_add", {3, 4}, 905,
      [](Tape& t, const std::vector<Tensor>& in) { return bias_add(t, in[0], in[1]); },
      [](const std::vector<DTensor>& in) { return dbias_add(in[0], in[1]); },
      {random_tensor({3, 4}, 8), random_tensor({4}, 9)}));

  cases.push_back(weighted_case(
      "dense", {3, 2}, 906,
      [](Tape& t, const std::vector<Tensor>& in) { return dense(t, in[0], in[1], in[2]); },
      [](const std::vector<DTensor>& in) { return dbias_add(dmatmul(in[0], in[1]), in[2]); },
      {random_tensor({3, 4}, 10), random_tensor({4, 2}, 11), random_tensor({2}, 12)}));

  cases.push_back(weighted_case(
      "conv2d", {2, 4, 6, 6}, 907,
      [](Tape& t, const std::vector<Tensor>& in) { return conv2d(t, in[0], in[1], in[2]); },
      [](const std::vector<DTensor>& in) { return dconv2d(in[0], in[1], in[2]); },
      {random_tensor({2, 3, 6, 6}, 13), random_tensor({4, 3, 3, 3}, 14),
       random_tensor({4}, 15)}));

  cases.push_back(weighted_case(
      "maxpool2", {2, 3, 3, 3}, 908,
      [](Tape& t, const std::vector<Tensor>& in) { return maxpool2(t, in[0]); },
      [](const std::vector<DTensor>& in) { return dmaxpool2(in[0]); },
      {random_tensor({2, 3, 6, 6}, 16)}));

  cases.push_back(weighted_case(
      "global_avg_pool", {2, 3}, 909,
      [](Tape& t, const std::vector<Tensor>& in) { return global_avg_pool(t, in[0]); },
      [](const std::vector<DTensor>& in) { return dgap(in[0]); },
      {random_tensor({2, 3, 4, 4}, 17)}));

  cases.push_back(weighted_case(
      "concat_channels", {2, 5, 4, 4}, 910,
      [](Tape& t, const std::vector<Tensor>& in) {
        return concat_channels(t, {in[0], in[1]});
      },
      [](const std::vector<DTensor>& in) { return dconcat_channels({in[0], in[1]}); },
      {random_tensor({2, 2, 4, 4}, 18), random_tensor({2, 3, 4, 4}, 19)}));

  {
    std::vector<Tensor> inputs{random_tensor({3, 5}, 20), random_tensor({3, 4}, 21)};
    auto params = gru_param_tensors(4, 5, 22);
    inputs.insert(inputs.end(), params.begin(), params.end());
    cases.push_back(weighted_case(
        "gru_cell", {3, 5}, 911,
        [](Tape& t, const std::vector<Tensor>& in) {
          return gru_cell(t, in[0], in[1], gru_from(in, 2));
        },
        [](const std::vector<DTensor>& in) { return dgru_from(in, 2, in[0], in[1]); },
        std::move(inputs)));
  }

  {
    // three chained steps, gradient through time
    std::vector<Tensor> inputs{random_tensor({2, 5}, 23), random_tensor({2, 4}, 24),
                               random_tensor({2, 4}, 25), random_tensor({2, 4}, 26)};
    auto params = gru_param_tensors(4, 5, 27);
    inputs.insert(inputs.end(), params.begin(), params.end());
    GradCase c = weighted_case(
        "gru_cell chained over three steps", {2, 5}, 912,
        [](Tape& t, const std::vector<Tensor>& in) {
          GruParams p = gru_from(in, 4);
          Tensor h = gru_cell(t, in[0], in[1], p);
          h = gru_cell(t, h, in[2], p);
          return gru_cell(t, h, in[3], p);
        },
        [](const std::vector<DTensor>& in) {
          DTensor h = dgru_from(in, 4, in[0], in[1]);
          h = dgru_from(in, 4, h, in[2]);
          return dgru_from(in, 4, h, in[3]);
        },
        std::move(inputs));
    c.tol = 1e-3;  // composed op
    cases.push_back(std::move(c));
  }

  cases.push_back(weighted_case(
      "grid_sample, shared grid, image and coordinate gradients", {2, 2, 3, 3}, 913,
      [](Tape& t, const std::vector<Tensor>& in) { return grid_sample(t, in[0], in[1], in[2]); },
      [](const std::vector<DTensor>& in) { return dgrid_sample(in[0], in[1], in[2]); },
      {random_tensor({2, 2, 5, 5}, 28, 0.0f, 1.0f),
       random_tensor({3, 3}, 29, -0.5f, 5.2f),
       random_tensor({3, 3}, 30, -0.5f, 5.2f)}));

  cases.push_back(weighted_case(
      "grid_sample, per-element grids", {2, 2, 3, 3}, 914,
      [](Tape& t, const std::vector<Tensor>& in) { return grid_sample(t, in[0], in[1], in[2]); },
      [](const std::vector<DTensor>& in) { return dgrid_sample(in[0], in[1], in[2]); },
      {random_tensor({2, 2, 5, 5}, 31, 0.0f, 1.0f),
       random_tensor({2, 3, 3}, 32, 0.2f, 4.5f),
       random_tensor({2, 3, 3}, 33, 0.2f, 4.5f)}));

  cases.push_back(weighted_case(
      "resize_bilinear", {1, 2, 3, 4}, 915,
      [](Tape& t, const std::vector<Tensor>& in) { return resize_bilinear(t, in[0], 3, 4); },
      [](const std::vector<DTensor>& in) { return dresize_bilinear(in[0], 3, 4); },
      {random_tensor({1, 2, 5, 7}, 34, 0.0f, 1.0f)}));

  {
    std::vector<float> taps = gaussian_taps(1.2f, 5);
    std::vector<double> dtaps = to_double(taps);
    cases.push_back(weighted_case(
        "separable blur with reflect padding", {1, 2, 6, 6}, 916,
        [taps](Tape& t, const std::vector<Tensor>& in) { return blur_sep(t, in[0], taps); },
        [dtaps](const std::vector<DTensor>& in) { return dblur_sep(in[0], dtaps); },
        {random_tensor({1, 2, 6, 6}, 35, 0.0f, 1.0f)}));
  }

  {
    Tensor m0 = random_tensor({4, 4}, 36, 0.0f, 1.0f, false);
    Tensor m1 = random_tensor({4, 4}, 37, 0.0f, 1.0f, false);
    DTensor dm0 = DTensor::from(m0), dm1 = DTensor::from(m1);
    cases.push_back(weighted_case(
        "masked_blend, shared masks", {2, 2, 4, 4}, 917,
        [m0, m1](Tape& t, const std::vector<Tensor>& in) {
          return masked_blend(t, {in[0], in[1]}, {m0, m1});
        },
        [dm0, dm1](const std::vector<DTensor>& in) {
          return dmasked_blend({in[0], in[1]}, {dm0, dm1});
        },
        {random_tensor({2, 2, 4, 4}, 38), random_tensor({2, 2, 4, 4}, 39)}));
  }

  {
    Tensor m0 = random_tensor({2, 4, 4}, 40, 0.0f, 1.0f, false);
    Tensor m1 = random_tensor({2, 4, 4}, 41, 0.0f, 1.0f, false);
    DTensor dm0 = DTensor::from(m0), dm1 = DTensor::from(m1);
    cases.push_back(weighted_case(
        "masked_blend, per-element masks", {2, 2, 4, 4}, 918,
        [m0, m1](Tape& t, const std::vector<Tensor>& in) {
          return masked_blend(t, {in[0], in[1]}, {m0, m1});
        },
        [dm0, dm1](const std::vector<DTensor>& in) {
          return dmasked_blend({in[0], in[1]}, {dm0, dm1});
        },
        {random_tensor({2, 2, 4, 4}, 42), random_tensor({2, 2, 4, 4}, 43)}));
  }

  {
    std::vector<int> labels{1, 3};
    GradCase c;
    c.name = "softmax cross entropy";
    c.build = [labels](Tape& t, const std::vector<Tensor>& in) {
      return softmax_cross_entropy(t, in[0], labels);
    };
    c.ref = [labels](const std::vector<DTensor>& in) { return dsoftmax_ce(in[0], labels); };
    c.inputs = {random_tensor({2, 5}, 44, -2.0f, 2.0f)};
    c.tol = 1e-5;
    cases.push_back(std::move(c));
  }

  {
    std::vector<int> picks{0, 5, 2};
    cases.push_back(weighted_case(
        "log softmax of a picked index", {3}, 919,
        [picks](Tape& t, const std::vector<Tensor>& in) {
          return log_softmax_pick(t, in[0], picks);
        },
        [picks](const std::vector<DTensor>& in) { return dlog_softmax_pick(in[0], picks); },
        {random_tensor({3, 6}, 45, -2.0f, 2.0f)}));
  }

  {
    GradCase c;
    c.name = "sum_all";
    c.build = [](Tape& t, const std::vector<Tensor>& in) { return sum_all(t, in[0]); };
    c.ref = [](const std::vector<DTensor>& in) { return dsum(in[0]); };
    c.inputs = {random_tensor({2, 3, 4}, 46)};
    cases.push_back(std::move(c));
  }

  cases.push_back(weighted_case(
      "reshape_copy", {6, 4}, 920,
      [](Tape& t, const std::vector<Tensor>& in) { return reshape_copy(t, in[0], {6, 4}); },
      [](const std::vector<DTensor>& in) {
        DTensor out = in[0];
        out.shape = {6, 4};
        return out;
      },
      {random_tensor({2, 3, 4}, 47)}));

  return cases;
}

GradCase composed_pipeline_case() {
  const int full_px = 16, ret_px = 8, classes = 5;
  const saccade::Fixation fix{0.55f, 0.45f};
  FoveationParams fp;  // defaults scale the mask widths with the image extent

  SampleGrid grid = warp_grid(full_px, ret_px, 8.0f, fix);
  auto masks = region_masks(full_px, fix, fp);
  std::array<std::vector<double>, 3> dtaps;
  for (int k = 0; k < 3; ++k)
    dtaps[static_cast<std::size_t>(k)] =
        to_double(gaussian_taps(fp.blur_sigmas[static_cast<std::size_t>(k)], fp.blur_kernel_size));
  std::array<DTensor, 4> dmasks{DTensor::from(masks[0]), DTensor::from(masks[1]),
                                DTensor::from(masks[2]), DTensor::from(masks[3])};
  DTensor dsx = DTensor::from(grid.source_x), dsy = DTensor::from(grid.source_y);
  std::vector<int> labels{2};

  GradCase c;
  c.name = "composed foveation, warp, sampling and recognition stack";
  c.build = [fix, fp, grid, labels](Tape& t, const std::vector<Tensor>& in) {
    Tensor fov = foveate(t, in[0], fix, fp);
    saccade::RetinalImage ret = retinal_sample(t, fov, grid);
    Tensor conv = relu(t, conv2d(t, ret.pixels, in[1], in[2]));
    Tensor pooled = global_avg_pool(t, maxpool2(t, conv));
    Tensor logits = bias_add(t, matmul(t, pooled, in[3]), in[4]);
    return softmax_cross_entropy(t, logits, labels);
  };
  c.ref = [dtaps, dmasks, dsx, dsy, fp, labels](const std::vector<DTensor>& in) {
    const DTensor& img = in[0];
    DTensor fov = dmasked_blend({img, dblur_sep(img, dtaps[0]), dblur_sep(img, dtaps[1]),
                                 dblur_sep(img, dtaps[2])},
                                {dmasks[0], dmasks[1], dmasks[2], dmasks[3]});
    DTensor ret = dgrid_sample(fov, dsx, dsy);
    DTensor conv = drelu(dconv2d(ret, in[1], in[2]));
    DTensor pooled = dgap(dmaxpool2(conv));
    DTensor logits = dbias_add(dmatmul(pooled, in[3]), in[4]);
    return dsoftmax_ce(logits, labels);
  };
  c.inputs = {random_tensor({1, 3, full_px, full_px}, 50, 0.0f, 1.0f),
              random_tensor({6, 3, 3, 3}, 51, -0.4f, 0.4f), random_tensor({6}, 52, -0.1f, 0.1f),
              random_tensor({6, classes}, 53, -0.5f, 0.5f),
              random_tensor({classes}, 54, -0.1f, 0.1f)};
  c.tol = 1e-3;
  return c;
}

GradCheck run_case(const GradCase& c) {
  return fd_check(c.build, c.ref, c.inputs, c.probes_per_input, c.h, 7, 1e-3);
}

}  // namespace oracle
