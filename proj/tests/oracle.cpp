// SPDX-License-Identifier: Apache-2.0
#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "saccade/rng.hpp"

namespace oracle {

using saccade::check;
using saccade::Rng;

DTensor DTensor::zeros(Shape s) {
  DTensor t;
  t.shape = std::move(s);
  t.v.assign(saccade::shape_numel(t.shape), 0.0);
  return t;
}

DTensor DTensor::from(const Tensor& t) {
  DTensor d;
  d.shape = t.shape();
  d.v.assign(t.values().begin(), t.values().end());
  return d;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, float lo, float hi, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

namespace {

DTensor elementwise(const DTensor& a, const DTensor& b, double (*f)(double, double)) {
  check(a.shape == b.shape, "oracle: shape mismatch");
  DTensor out = DTensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.numel(); ++i) out.v[i] = f(a.v[i], b.v[i]);
  return out;
}

DTensor map(const DTensor& a, double (*f)(double)) {
  DTensor out = DTensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.numel(); ++i) out.v[i] = f(a.v[i]);
  return out;
}

int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

DTensor dadd(const DTensor& a, const DTensor& b) {
  return elementwise(a, b, [](double x, double y) { return x + y; });
}
DTensor dsub(const DTensor& a, const DTensor& b) {
  return elementwise(a, b, [](double x, double y) { return x - y; });
}
DTensor dmul(const DTensor& a, const DTensor& b) {
  return elementwise(a, b, [](double x, double y) { return x * y; });
}
DTensor dadd_scalar(const DTensor& a, double s) {
  DTensor out = a;
  for (double& v : out.v) v += s;
  return out;
}
DTensor dmul_scalar(const DTensor& a, double s) {
  DTensor out = a;
  for (double& v : out.v) v *= s;
  return out;
}
DTensor drelu(const DTensor& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
DTensor dsigmoid(const DTensor& a) {
  return map(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}
DTensor dtanh(const DTensor& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

DTensor dmatmul(const DTensor& x, const DTensor& w) {
  check(x.shape.size() == 2 && w.shape.size() == 2 && x.dim(1) == w.dim(0),
        "oracle matmul: bad shapes");
  const int b = x.dim(0);
  const int d = x.dim(1);
  const int k = w.dim(1);
  DTensor out = DTensor::zeros({b, k});
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < k; ++j) {
      double acc = 0.0;
      for (int l = 0; l < d; ++l)
        acc += x.v[static_cast<std::size_t>(i) * d + l] * w.v[static_cast<std::size_t>(l) * k + j];
      out.v[static_cast<std::size_t>(i) * k + j] = acc;
    }
  return out;
}

DTensor dbias_add(const DTensor& x, const DTensor& b) {
  check(x.shape.size() == 2 && b.shape.size() == 1 && x.dim(1) == b.dim(0),
        "oracle bias_add: bad shapes");
  DTensor out = x;
  const int k = x.dim(1);
  for (int i = 0; i < x.dim(0); ++i)
    for (int j = 0; j < k; ++j) out.v[static_cast<std::size_t>(i) * k + j] += b.v[static_cast<std::size_t>(j)];
  return out;
}

DTensor dconv2d(const DTensor& x, const DTensor& w, const DTensor& b) {
  const int bn = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int k = w.dim(0);
  check(w.dim(1) == c && w.dim(2) == 3 && w.dim(3) == 3, "oracle conv: bad kernel");
  DTensor out = DTensor::zeros({bn, k, h, wd});
  for (int n = 0; n < bn; ++n)
    for (int o = 0; o < k; ++o)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          double acc = b.v[static_cast<std::size_t>(o)];
          for (int ci = 0; ci < c; ++ci)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int sy = y + dy, sx = xx + dx;
                if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                const double xv =
                    x.v[((static_cast<std::size_t>(n) * c + ci) * h + sy) * wd + sx];
                const double wv =
                    w.v[((static_cast<std::size_t>(o) * c + ci) * 3 + (dy + 1)) * 3 + (dx + 1)];
                acc += xv * wv;
              }
          out.v[((static_cast<std::size_t>(n) * k + o) * h + y) * wd + xx] = acc;
        }
  return out;
}

DTensor dmaxpool2(const DTensor& x) {
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check(h % 2 == 0 && w % 2 == 0, "oracle maxpool: odd extent");
  DTensor out = DTensor::zeros({b, c, h / 2, w / 2});
  for (int n = 0; n < b; ++n)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < h / 2; ++y)
        for (int xx = 0; xx < w / 2; ++xx) {
          double m = -1e300;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              m = std::max(m, x.v[((static_cast<std::size_t>(n) * c + ci) * h + 2 * y + dy) * w +
                                  2 * xx + dx]);
          out.v[((static_cast<std::size_t>(n) * c + ci) * (h / 2) + y) * (w / 2) + xx] = m;
        }
  return out;
}

DTensor dgap(const DTensor& x) {
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  DTensor out = DTensor::zeros({b, c});
  for (int n = 0; n < b; ++n)
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (int i = 0; i < h * w; ++i)
        acc += x.v[(static_cast<std::size_t>(n) * c + ci) * h * w + i];
      out.v[static_cast<std::size_t>(n) * c + ci] = acc / (h * w);
    }
  return out;
}

DTensor dconcat_channels(const std::vector<DTensor>& xs) {
  check(!xs.empty(), "oracle concat: empty");
  const int b = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
  int c = 0;
  for (const auto& x : xs) c += x.dim(1);
  DTensor out = DTensor::zeros({b, c, h, w});
  for (int n = 0; n < b; ++n) {
    int at = 0;
    for (const auto& x : xs) {
      const int xc = x.dim(1);
      std::copy_n(x.v.begin() + static_cast<std::ptrdiff_t>(n) * xc * h * w,
                  static_cast<std::size_t>(xc) * h * w,
                  out.v.begin() + (static_cast<std::ptrdiff_t>(n) * c + at) * h * w);
      at += xc;
    }
  }
  return out;
}

DTensor dgru_cell(const DTensor& h, const DTensor& x, const DTensor& wz, const DTensor& uz,
                  const DTensor& bz, const DTensor& wr, const DTensor& ur, const DTensor& br,
                  const DTensor& wc, const DTensor& uc, const DTensor& bc) {
  DTensor z = dsigmoid(dbias_add(dadd(dmatmul(x, wz), dmatmul(h, uz)), bz));
  DTensor r = dsigmoid(dbias_add(dadd(dmatmul(x, wr), dmatmul(h, ur)), br));
  DTensor c = dtanh(dbias_add(dadd(dmatmul(x, wc), dmatmul(dmul(r, h), uc)), bc));
  DTensor one_minus_z = dmul_scalar(dadd_scalar(dmul_scalar(z, -1.0), 1.0), 1.0);
  return dadd(dmul(z, c), dmul(one_minus_z, h));
}

DTensor dgrid_sample(const DTensor& img, const DTensor& sx, const DTensor& sy) {
  const int b = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const bool per_elem = sx.shape.size() == 3;
  const int oh = per_elem ? sx.dim(1) : sx.dim(0);
  const int ow = per_elem ? sx.dim(2) : sx.dim(1);
  DTensor out = DTensor::zeros({b, c, oh, ow});
  const std::size_t oplane = static_cast<std::size_t>(oh) * ow;
  for (int n = 0; n < b; ++n) {
    const std::size_t goff = per_elem ? static_cast<std::size_t>(n) * oplane : 0;
    for (std::size_t p = 0; p < oplane; ++p) {
      const double xr = std::clamp(sx.v[goff + p], 0.0, static_cast<double>(w - 1));
      const double yr = std::clamp(sy.v[goff + p], 0.0, static_cast<double>(h - 1));
      const int x0 = std::min(static_cast<int>(std::floor(xr)), w - 2 >= 0 ? w - 2 : 0);
      const int y0 = std::min(static_cast<int>(std::floor(yr)), h - 2 >= 0 ? h - 2 : 0);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double tx = xr - x0;
      const double ty = yr - y0;
      for (int ci = 0; ci < c; ++ci) {
        const std::size_t base = (static_cast<std::size_t>(n) * c + ci) * h * w;
        const double v00 = img.v[base + static_cast<std::size_t>(y0) * w + x0];
        const double v01 = img.v[base + static_cast<std::size_t>(y0) * w + x1];
        const double v10 = img.v[base + static_cast<std::size_t>(y1) * w + x0];
        const double v11 = img.v[base + static_cast<std::size_t>(y1) * w + x1];
        out.v[(static_cast<std::size_t>(n) * c + ci) * oplane + p] =
            (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
      }
    }
  }
  return out;
}

DTensor dresize_bilinear(const DTensor& img, int oh, int ow) {
  const int h = img.dim(2), w = img.dim(3);
  DTensor sx = DTensor::zeros({oh, ow});
  DTensor sy = DTensor::zeros({oh, ow});
  const double scale_y = static_cast<double>(h) / oh;
  const double scale_x = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      sx.v[static_cast<std::size_t>(y) * ow + x] = (x + 0.5) * scale_x - 0.5;
      sy.v[static_cast<std::size_t>(y) * ow + x] = (y + 0.5) * scale_y - 0.5;
    }
  return dgrid_sample(img, sx, sy);
}

DTensor dblur_sep(const DTensor& x, const std::vector<double>& taps) {
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int r = static_cast<int>(taps.size()) / 2;
  DTensor mid = DTensor::zeros(x.shape);
  for (int n = 0; n < b * c; ++n)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += taps[static_cast<std::size_t>(t + r)] *
                 x.v[(static_cast<std::size_t>(n) * h + y) * w + mirror(xx + t, w)];
        mid.v[(static_cast<std::size_t>(n) * h + y) * w + xx] = acc;
      }
  DTensor out = DTensor::zeros(x.shape);
  for (int n = 0; n < b * c; ++n)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += taps[static_cast<std::size_t>(t + r)] *
                 mid.v[(static_cast<std::size_t>(n) * h + mirror(y + t, h)) * w + xx];
        out.v[(static_cast<std::size_t>(n) * h + y) * w + xx] = acc;
      }
  return out;
}

DTensor dmasked_blend(const std::vector<DTensor>& imgs, const std::vector<DTensor>& masks) {
  check(imgs.size() == masks.size() && !imgs.empty(), "oracle blend: arity");
  const int b = imgs[0].dim(0), c = imgs[0].dim(1), h = imgs[0].dim(2), w = imgs[0].dim(3);
  DTensor out = DTensor::zeros(imgs[0].shape);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t m = 0; m < imgs.size(); ++m) {
    const bool per_elem = masks[m].shape.size() == 3;
    for (int n = 0; n < b; ++n) {
      const std::size_t moff = per_elem ? static_cast<std::size_t>(n) * plane : 0;
      for (int ci = 0; ci < c; ++ci)
        for (std::size_t p = 0; p < plane; ++p)
          out.v[(static_cast<std::size_t>(n) * c + ci) * plane + p] +=
              imgs[m].v[(static_cast<std::size_t>(n) * c + ci) * plane + p] *
              masks[m].v[moff + p];
    }
  }
  return out;
}

double dsoftmax_ce(const DTensor& logits, const std::vector<int>& labels) {
  const int b = logits.dim(0), k = logits.dim(1);
  double total = 0.0;
  for (int n = 0; n < b; ++n) {
    const double* row = logits.v.data() + static_cast<std::size_t>(n) * k;
    const double m = *std::max_element(row, row + k);
    double lse = 0.0;
    for (int j = 0; j < k; ++j) lse += std::exp(row[j] - m);
    lse = m + std::log(lse);
    total += lse - row[labels[static_cast<std::size_t>(n)]];
  }
  return total / b;
}

DTensor dlog_softmax_pick(const DTensor& scores, const std::vector<int>& picks) {
  const int b = scores.dim(0), k = scores.dim(1);
  DTensor out = DTensor::zeros({b});
  for (int n = 0; n < b; ++n) {
    const double* row = scores.v.data() + static_cast<std::size_t>(n) * k;
    const double m = *std::max_element(row, row + k);
    double lse = 0.0;
    for (int j = 0; j < k; ++j) lse += std::exp(row[j] - m);
    lse = m + std::log(lse);
    out.v[static_cast<std::size_t>(n)] = row[picks[static_cast<std::size_t>(n)]] - lse;
  }
  return out;
}

double dsum(const DTensor& a) {
  double acc = 0.0;
  for (double v : a.v) acc += v;
  return acc;
}

double dweighted_sum(const DTensor& a, const DTensor& w) {
  check(a.numel() == w.numel(), "oracle weighted_sum: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.v[i] * w.v[i];
  return acc;
}

GradCheck fd_check(const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& build,
                   const std::function<double(const std::vector<DTensor>&)>& ref,
                   const std::vector<Tensor>& inputs, int probes_per_input, double h,
                   std::uint64_t seed, double tol_floor) {
  // analytic gradients
  Tape tape;
  Tensor loss = build(tape, inputs);
  check(loss.numel() == 1, "fd_check: loss must be scalar");
  for (const Tensor& in : inputs) {
    Tensor t = in;
    t.zero_grad();
  }
  tape.backward(loss);

  // the double reference must agree with the float forward
  std::vector<DTensor> dinputs;
  dinputs.reserve(inputs.size());
  for (const Tensor& in : inputs) dinputs.push_back(DTensor::from(in));
  const double f0 = ref(dinputs);
  check(std::abs(f0 - static_cast<double>(loss.item())) <
            1e-3 * std::max(1.0, std::abs(f0)),
        "fd_check: reference forward disagrees with the library forward");

  GradCheck result;
  Rng rng(seed);
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    const Tensor& in = inputs[which];
    if (!in.requires_grad()) continue;
    auto grad = in.grad_view();
    check(!grad.empty(), "fd_check: input did not receive a gradient");
    int accepted = 0;
    int guard = 0;
    while (accepted < probes_per_input && guard < probes_per_input * 20) {
      ++guard;
      const std::size_t i = static_cast<std::size_t>(rng.below(in.numel()));
      auto probe = [&](double step) {
        std::vector<DTensor> d = dinputs;
        d[which].v[i] += step;
        return ref(d);
      };
      const double fd = (probe(h) - probe(-h)) / (2.0 * h);
      const double fd_half = (probe(h / 2) - probe(-h / 2)) / h;
      // a kink between the two stencils makes both quotients meaningless
      if (std::abs(fd - fd_half) > 0.2 * std::max({std::abs(fd), std::abs(fd_half), tol_floor})) {
        ++result.skipped;
        continue;
      }
      const double g = static_cast<double>(grad[i]);
      const double err = std::abs(fd - g) / std::max(tol_floor, std::abs(fd) + std::abs(g));
      result.max_err = std::max(result.max_err, err);
      ++accepted;
      ++result.probes;
    }
    check(accepted == probes_per_input, "fd_check: too many kink probes, widen the input range");
  }
  tape.reset();
  return result;
}

}  // namespace oracle
