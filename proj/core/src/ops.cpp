// SPDX-License-Identifier: Apache-2.0

#include "saccade/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace saccade::ad {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

bool track(const Tape& tape, std::initializer_list<Tensor> inputs) {
  if (!tape.recording()) return false;
  for (const auto& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

// Accumulates src into dst.grad if dst wants gradient.
void accum(Tensor t, std::span<const float> g) {
  if (!t.requires_grad()) return;
  auto dst = t.grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

// Symmetric (reflecting, edge-inclusive) index for blur padding.
inline int mirror(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - 1 - i;
  return i;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a, b}));
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  if (out.requires_grad()) {
    tape.record(
        [a, b, out]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          accum(a, og);
          accum(b, og);
        },
        {a, b, out});
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a, b}));
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  if (out.requires_grad()) {
    tape.record(
        [a, b, out]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          accum(a, og);
          if (b.requires_grad()) {
            auto gb = b.grad();
            for (std::size_t i = 0; i < og.size(); ++i) gb[i] -= og[i];
          }
        },
        {a, b, out});
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a, b}));
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  if (out.requires_grad()) {
    tape.record(
        [a, b, out]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          if (a.requires_grad()) {
            auto ga = a.grad();
            const float* pb2 = b.data();
            for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * pb2[i];
          }
          if (b.requires_grad()) {
            auto gb = b.grad();
            const float* pa2 = a.data();
            for (std::size_t i = 0; i < og.size(); ++i) gb[i] += og[i] * pa2[i];
          }
        },
        {a, b, out});
  }
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& a, float s) {
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a}));
  const float* pa = a.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + s;
  if (out.requires_grad()) {
    tape.record(
        [a, out]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          accum(a, og);
        },
        {a, out});
  }
  return out;
}

Tensor mul_scalar(Tape& tape, const Tensor& a, float s) {
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a}));
  const float* pa = a.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * s;
  if (out.requires_grad()) {
    tape.record(
        [a, out, s]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !a.requires_grad()) return;
          auto ga = a.grad();
          for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * s;
        },
        {a, out});
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a}));
  const float* pa = a.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] > 0.0f ? pa[i] : 0.0f;
  if (out.requires_grad()) {
    tape.record(
        [a, out]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !a.requires_grad()) return;
          auto ga = a.grad();
          const float* pa2 = a.data();
          for (std::size_t i = 0; i < og.size(); ++i) {
            if (pa2[i] > 0.0f) ga[i] += og[i];  // subgradient at 0 is 0
          }
        },
        {a, out});
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a}));
  const float* pa = a.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = 1.0f / (1.0f + std::exp(-pa[i]));
  if (out.requires_grad()) {
    tape.record(
        [a, out]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !a.requires_grad()) return;
          auto ga = a.grad();
          const float* s = out.data();
          for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * s[i] * (1.0f - s[i]);
        },
        {a, out});
  }
  return out;
}

Tensor tanh_op(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape(), track(tape, {a}));
  const float* pa = a.data();
  float* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = std::tanh(pa[i]);
  if (out.requires_grad()) {
    tape.record(
        [a, out]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !a.requires_grad()) return;
          auto ga = a.grad();
          const float* t = out.data();
          for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * (1.0f - t[i] * t[i]);
        },
        {a, out});
  }
  return out;
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& x, const Tensor& w) {
  check(x.rank() == 2 && w.rank() == 2, "matmul: expects rank-2 inputs");
  check(x.dim(1) == w.dim(0), "matmul: inner dimensions disagree, " + shape_str(x.shape()) +
                                  " x " + shape_str(w.shape()));
  const int B = x.dim(0), D = x.dim(1), K = w.dim(1);
  Tensor out = Tensor::zeros({B, K}, track(tape, {x, w}));
  MapConstMat mx(x.data(), B, D), mw(w.data(), D, K);
  MapMat mo(out.data(), B, K);
  mo.noalias() = mx * mw;
  if (out.requires_grad()) {
    tape.record(
        [x, w, out, B, D, K]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          MapConstMat mg(og.data(), B, K);
          if (x.requires_grad()) {
            MapConstMat mw2(w.data(), D, K);
            MapMat gx(x.grad().data(), B, D);
            gx.noalias() += mg * mw2.transpose();
          }
          if (w.requires_grad()) {
            MapConstMat mx2(x.data(), B, D);
            MapMat gw(w.grad().data(), D, K);
            gw.noalias() += mx2.transpose() * mg;
          }
        },
        {x, w, out});
  }
  return out;
}

Tensor bias_add(Tape& tape, const Tensor& x, const Tensor& b) {
  check(x.rank() == 2 && b.rank() == 1, "bias_add: expects [B,K] + [K]");
  check(x.dim(1) == b.dim(0), "bias_add: width mismatch");
  const int B = x.dim(0), K = x.dim(1);
  Tensor out = Tensor::zeros({B, K}, track(tape, {x, b}));
  const float* px = x.data();
  const float* pb = b.data();
  float* po = out.data();
  for (int i = 0; i < B; ++i)
    for (int k = 0; k < K; ++k) po[i * K + k] = px[i * K + k] + pb[k];
  if (out.requires_grad()) {
    tape.record(
        [x, b, out, B, K]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          accum(x, og);
          if (b.requires_grad()) {
            auto gb = b.grad();
            for (int i = 0; i < B; ++i)
              for (int k = 0; k < K; ++k) gb[k] += og[i * K + k];
          }
        },
        {x, b, out});
  }
  return out;
}

Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  return bias_add(tape, matmul(tape, x, w), b);
}

// ---- recurrence ------------------------------------------------------------

Tensor gru_cell(Tape& tape, const Tensor& state, const Tensor& input, const GruParams& p) {
  check(state.rank() == 2 && input.rank() == 2, "gru_cell: expects [B,H] state and [B,D] input");
  check(state.dim(0) == input.dim(0), "gru_cell: batch mismatch");
  check(p.wz.dim(0) == input.dim(1) && p.uz.dim(0) == state.dim(1),
        "gru_cell: parameter shapes inconsistent with input/state widths");
  Tensor z = sigmoid(tape, add(tape, dense(tape, input, p.wz, p.bz), matmul(tape, state, p.uz)));
  Tensor r = sigmoid(tape, add(tape, dense(tape, input, p.wr, p.br), matmul(tape, state, p.ur)));
  Tensor c = tanh_op(
      tape, add(tape, dense(tape, input, p.wc, p.bc), matmul(tape, mul(tape, r, state), p.uc)));
  Tensor keep = add_scalar(tape, mul_scalar(tape, z, -1.0f), 1.0f);  // 1 - z
  return add(tape, mul(tape, z, c), mul(tape, keep, state));
}

// ---- convolution -----------------------------------------------------------

namespace {

// cols is [C*9, B*H*W] row-major; row r=(c,ky,kx), column j=(b,h,w).
void im2col_3x3(const float* x, int B, int C, int H, int W, float* cols) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t bhw = static_cast<std::size_t>(B) * plane;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* row = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * bhw;
        const int dy = ky - 1, dx = kx - 1;
        for (int b = 0; b < B; ++b) {
          const float* src_plane = x + (static_cast<std::size_t>(b) * C + c) * plane;
          float* dst_plane = row + static_cast<std::size_t>(b) * plane;
          for (int h = 0; h < H; ++h) {
            float* dst = dst_plane + static_cast<std::size_t>(h) * W;
            const int y = h + dy;
            if (y < 0 || y >= H) {
              std::memset(dst, 0, sizeof(float) * static_cast<std::size_t>(W));
              continue;
            }
            const float* src = src_plane + static_cast<std::size_t>(y) * W;
            if (dx == 0) {
              std::memcpy(dst, src, sizeof(float) * static_cast<std::size_t>(W));
            } else if (dx == 1) {
              std::memcpy(dst, src + 1, sizeof(float) * static_cast<std::size_t>(W - 1));
              dst[W - 1] = 0.0f;
            } else {
              dst[0] = 0.0f;
              std::memcpy(dst + 1, src, sizeof(float) * static_cast<std::size_t>(W - 1));
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col_3x3: scatter-add cols back into the image.
void col2im_3x3(const float* cols, int B, int C, int H, int W, float* gx) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t bhw = static_cast<std::size_t>(B) * plane;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* row = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * bhw;
        const int dy = ky - 1, dx = kx - 1;
        for (int b = 0; b < B; ++b) {
          float* dst_plane = gx + (static_cast<std::size_t>(b) * C + c) * plane;
          const float* src_plane = row + static_cast<std::size_t>(b) * plane;
          for (int h = 0; h < H; ++h) {
            const int y = h + dy;
            if (y < 0 || y >= H) continue;
            float* dst = dst_plane + static_cast<std::size_t>(y) * W;
            const float* src = src_plane + static_cast<std::size_t>(h) * W;
            const int lo = std::max(0, -dx), hi = W - std::max(0, dx);
            for (int w = lo; w < hi; ++w) dst[w + dx] += src[w];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  check(x.rank() == 4, "conv2d: input must be [B,C,H,W]");
  check(w.rank() == 4 && w.dim(2) == 3 && w.dim(3) == 3, "conv2d: weight must be [K,C,3,3]");
  check(w.dim(1) == x.dim(1), "conv2d: channel mismatch, input " + shape_str(x.shape()) +
                                  " weight " + shape_str(w.shape()));
  check(b.rank() == 1 && b.dim(0) == w.dim(0), "conv2d: bias must be [K]");
  check(x.dim(2) >= 3 && x.dim(3) >= 3, "conv2d: spatial extent must be at least 3x3");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), K = w.dim(0);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t bhw = static_cast<std::size_t>(B) * plane;

  std::vector<float> cols(static_cast<std::size_t>(C) * 9 * bhw);
  im2col_3x3(x.data(), B, C, H, W, cols.data());

  std::vector<float> res(static_cast<std::size_t>(K) * bhw);
  {
    MapConstMat mw(w.data(), K, C * 9), mc(cols.data(), C * 9, static_cast<int>(bhw));
    MapMat mr(res.data(), K, static_cast<int>(bhw));
    mr.noalias() = mw * mc;
  }

  Tensor out = Tensor::zeros({B, K, H, W}, track(tape, {x, w, b}));
  float* po = out.data();
  const float* pb = b.data();
  for (int bi = 0; bi < B; ++bi) {
    for (int k = 0; k < K; ++k) {
      const float* src = res.data() + static_cast<std::size_t>(k) * bhw + bi * plane;
      float* dst = po + (static_cast<std::size_t>(bi) * K + k) * plane;
      const float beta = pb[k];
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + beta;
    }
  }

  if (out.requires_grad()) {
    tape.record(
        [x, w, b, out, B, C, H, W, K, plane, bhw]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          // Gather [B,K,H,W] -> [K, B*H*W]
          std::vector<float> g(static_cast<std::size_t>(K) * bhw);
          for (int bi = 0; bi < B; ++bi)
            for (int k = 0; k < K; ++k)
              std::memcpy(g.data() + static_cast<std::size_t>(k) * bhw + bi * plane,
                          og.data() + (static_cast<std::size_t>(bi) * K + k) * plane,
                          sizeof(float) * plane);
          MapConstMat mg(g.data(), K, static_cast<int>(bhw));
          if (b.requires_grad()) {
            auto gb = b.grad();
            for (int k = 0; k < K; ++k) gb[k] += mg.row(k).sum();
          }
          if (w.requires_grad() || x.requires_grad()) {
            std::vector<float> cols2(static_cast<std::size_t>(C) * 9 * bhw);
            im2col_3x3(x.data(), B, C, H, W, cols2.data());
            MapConstMat mc(cols2.data(), C * 9, static_cast<int>(bhw));
            if (w.requires_grad()) {
              MapMat gw(w.grad().data(), K, C * 9);
              gw.noalias() += mg * mc.transpose();
            }
            if (x.requires_grad()) {
              std::vector<float> dcols(static_cast<std::size_t>(C) * 9 * bhw);
              MapConstMat mw2(w.data(), K, C * 9);
              MapMat md(dcols.data(), C * 9, static_cast<int>(bhw));
              md.noalias() = mw2.transpose() * mg;
              col2im_3x3(dcols.data(), B, C, H, W, x.grad().data());
            }
          }
        },
        {x, w, b, out});
  }
  return out;
}

Tensor maxpool2(Tape& tape, const Tensor& x) {
  check(x.rank() == 4, "maxpool2: input must be [B,C,H,W]");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check(H % 2 == 0 && W % 2 == 0, "maxpool2: spatial extent must be even, got " +
                                      shape_str(x.shape()));
  const int oh = H / 2, ow = W / 2;
  Tensor out = Tensor::zeros({B, C, oh, ow}, track(tape, {x}));
  auto argmax = std::make_shared<std::vector<std::int32_t>>(out.numel());
  const float* px = x.data();
  float* po = out.data();
  std::size_t o = 0;
  for (int bc = 0; bc < B * C; ++bc) {
    const float* pl = px + static_cast<std::size_t>(bc) * H * W;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j, ++o) {
        const int y = 2 * i, xw = 2 * j;
        // first-in-row-major wins ties
        int best = y * W + xw;
        float bv = pl[best];
        const int cand[3] = {y * W + xw + 1, (y + 1) * W + xw, (y + 1) * W + xw + 1};
        for (int idx : cand) {
          if (pl[idx] > bv) {
            bv = pl[idx];
            best = idx;
          }
        }
        po[o] = bv;
        (*argmax)[o] = static_cast<std::int32_t>(bc) * H * W + best;
      }
    }
  }
  if (out.requires_grad()) {
    tape.record(
        [x, out, argmax]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !x.requires_grad()) return;
          auto gx = x.grad();
          for (std::size_t i = 0; i < og.size(); ++i) gx[(*argmax)[i]] += og[i];
        },
        {x, out});
  }
  return out;
}

Tensor global_avg_pool(Tape& tape, const Tensor& x) {
  check(x.rank() == 4, "global_avg_pool: input must be [B,C,H,W]");
  const int B = x.dim(0), C = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor out = Tensor::zeros({B, C}, track(tape, {x}));
  const float* px = x.data();
  float* po = out.data();
  const float inv = 1.0f / static_cast<float>(plane);
  for (int bc = 0; bc < B * C; ++bc) {
    const float* pl = px + static_cast<std::size_t>(bc) * plane;
    float s = 0.0f;
    for (std::size_t i = 0; i < plane; ++i) s += pl[i];
    po[bc] = s * inv;
  }
  if (out.requires_grad()) {
    tape.record(
        [x, out, plane, inv]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !x.requires_grad()) return;
          auto gx = x.grad();
          for (std::size_t bc = 0; bc < og.size(); ++bc) {
            const float g = og[bc] * inv;
            float* pl = gx.data() + bc * plane;
            for (std::size_t i = 0; i < plane; ++i) pl[i] += g;
          }
        },
        {x, out});
  }
  return out;
}

Tensor concat_channels(Tape& tape, const std::vector<Tensor>& xs) {
  check(!xs.empty(), "concat_channels: empty input list");
  const int B = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
  int total_c = 0;
  bool rg = false;
  for (const auto& t : xs) {
    check(t.rank() == 4 && t.dim(0) == B && t.dim(2) == H && t.dim(3) == W,
          "concat_channels: inputs must agree on batch and spatial extents");
    total_c += t.dim(1);
    rg = rg || t.requires_grad();
  }
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Tensor out = Tensor::zeros({B, total_c, H, W}, tape.recording() && rg);
  float* po = out.data();
  for (int b = 0; b < B; ++b) {
    std::size_t coff = 0;
    for (const auto& t : xs) {
      const std::size_t chunk = static_cast<std::size_t>(t.dim(1)) * plane;
      std::memcpy(po + (static_cast<std::size_t>(b) * total_c) * plane + coff,
                  t.data() + static_cast<std::size_t>(b) * chunk, sizeof(float) * chunk);
      coff += chunk;
    }
  }
  if (out.requires_grad()) {
    auto parts = xs;
    tape.record(
        [parts, out, B, total_c, plane]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          for (int b = 0; b < B; ++b) {
            std::size_t coff = 0;
            for (auto& t : parts) {
              const std::size_t chunk = static_cast<std::size_t>(t.dim(1)) * plane;
              if (t.requires_grad()) {
                auto gt = t.grad();
                const float* src = og.data() + (static_cast<std::size_t>(b) * total_c) * plane + coff;
                float* dst = gt.data() + static_cast<std::size_t>(b) * chunk;
                for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
              }
              coff += chunk;
            }
          }
        },
        {out});
  }
  return out;
}

// ---- sampling --------------------------------------------------------------

namespace {

struct Corner {
  int x0, x1, y0, y1;
  float tx, ty;
  bool x_active, y_active;
};

inline Corner corner_at(float xr, float yr, int H, int W) {
  Corner c;
  const float xc = std::clamp(xr, 0.0f, static_cast<float>(W - 1));
  const float yc = std::clamp(yr, 0.0f, static_cast<float>(H - 1));
  c.x0 = W > 1 ? std::min(static_cast<int>(xc), W - 2) : 0;
  c.y0 = H > 1 ? std::min(static_cast<int>(yc), H - 2) : 0;
  c.tx = xc - static_cast<float>(c.x0);
  c.ty = yc - static_cast<float>(c.y0);
  c.x1 = std::min(c.x0 + 1, W - 1);
  c.y1 = std::min(c.y0 + 1, H - 1);
  // clamped coordinates sit on a plateau: no gradient to the coordinate
  c.x_active = xr > 0.0f && xr < static_cast<float>(W - 1);
  c.y_active = yr > 0.0f && yr < static_cast<float>(H - 1);
  return c;
}

}  // namespace

Tensor grid_sample(Tape& tape, const Tensor& image, const Tensor& sx, const Tensor& sy) {
  check(image.rank() == 4, "grid_sample: image must be [B,C,H,W]");
  check(sx.rank() == sy.rank() && (sx.rank() == 2 || sx.rank() == 3),
        "grid_sample: coordinate fields must be [h,w] or [B,h,w]");
  check_same_shape(sx, sy, "grid_sample");
  const int B = image.dim(0), C = image.dim(1), H = image.dim(2), W = image.dim(3);
  const bool per_elem = sx.rank() == 3;
  if (per_elem) check(sx.dim(0) == B, "grid_sample: per-element grid batch mismatch");
  const int oh = sx.dim(per_elem ? 1 : 0), ow = sx.dim(per_elem ? 2 : 1);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t oplane = static_cast<std::size_t>(oh) * ow;

  Tensor out = Tensor::zeros({B, C, oh, ow}, track(tape, {image, sx, sy}));
  const float* pi = image.data();
  float* po = out.data();

  for (int b = 0; b < B; ++b) {
    const std::size_t goff = per_elem ? static_cast<std::size_t>(b) * oplane : 0;
    const float* px = sx.data() + goff;
    const float* py = sy.data() + goff;
    for (std::size_t p = 0; p < oplane; ++p) {
      const Corner c = corner_at(px[p], py[p], H, W);
      const float w00 = (1 - c.ty) * (1 - c.tx), w01 = (1 - c.ty) * c.tx;
      const float w10 = c.ty * (1 - c.tx), w11 = c.ty * c.tx;
      for (int ch = 0; ch < C; ++ch) {
        const float* pl = pi + (static_cast<std::size_t>(b) * C + ch) * plane;
        po[(static_cast<std::size_t>(b) * C + ch) * oplane + p] =
            w00 * pl[c.y0 * W + c.x0] + w01 * pl[c.y0 * W + c.x1] + w10 * pl[c.y1 * W + c.x0] +
            w11 * pl[c.y1 * W + c.x1];
      }
    }
  }

  if (out.requires_grad()) {
    tape.record(
        [image, sx, sy, out, B, C, H, W, plane, oplane, per_elem]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          const float* pi2 = image.data();
          float* gi = image.requires_grad() ? image.grad().data() : nullptr;
          float* gx = sx.requires_grad() ? sx.grad().data() : nullptr;
          float* gy = sy.requires_grad() ? sy.grad().data() : nullptr;
          for (int b = 0; b < B; ++b) {
            const std::size_t goff = per_elem ? static_cast<std::size_t>(b) * oplane : 0;
            const float* px2 = sx.data() + goff;
            const float* py2 = sy.data() + goff;
            for (std::size_t p = 0; p < oplane; ++p) {
              const Corner c = corner_at(px2[p], py2[p], H, W);
              float dx_acc = 0.0f, dy_acc = 0.0f;
              for (int ch = 0; ch < C; ++ch) {
                const float g = og[(static_cast<std::size_t>(b) * C + ch) * oplane + p];
                if (g == 0.0f) continue;
                const float* pl = pi2 + (static_cast<std::size_t>(b) * C + ch) * plane;
                if (gi) {
                  float* gl = gi + (static_cast<std::size_t>(b) * C + ch) * plane;
                  gl[c.y0 * W + c.x0] += g * (1 - c.ty) * (1 - c.tx);
                  gl[c.y0 * W + c.x1] += g * (1 - c.ty) * c.tx;
                  gl[c.y1 * W + c.x0] += g * c.ty * (1 - c.tx);
                  gl[c.y1 * W + c.x1] += g * c.ty * c.tx;
                }
                if (gx && c.x_active)
                  dx_acc += g * ((1 - c.ty) * (pl[c.y0 * W + c.x1] - pl[c.y0 * W + c.x0]) +
                                 c.ty * (pl[c.y1 * W + c.x1] - pl[c.y1 * W + c.x0]));
                if (gy && c.y_active)
                  dy_acc += g * ((1 - c.tx) * (pl[c.y1 * W + c.x0] - pl[c.y0 * W + c.x0]) +
                                 c.tx * (pl[c.y1 * W + c.x1] - pl[c.y0 * W + c.x1]));
              }
              if (gx) gx[goff + p] += dx_acc;
              if (gy) gy[goff + p] += dy_acc;
            }
          }
        },
        {image, sx, sy, out});
  }
  return out;
}

Tensor resize_bilinear(Tape& tape, const Tensor& image, int oh, int ow) {
  check(oh > 0 && ow > 0, "resize_bilinear: output extent must be positive");
  const int H = image.dim(2), W = image.dim(3);
  Tensor sx = Tensor::zeros({oh, ow});
  Tensor sy = Tensor::zeros({oh, ow});
  const float fx = static_cast<float>(W) / static_cast<float>(ow);
  const float fy = static_cast<float>(H) / static_cast<float>(oh);
  float* px = sx.data();
  float* py = sy.data();
  for (int i = 0; i < oh; ++i) {
    const float y = (static_cast<float>(i) + 0.5f) * fy - 0.5f;
    for (int j = 0; j < ow; ++j) {
      px[i * ow + j] = (static_cast<float>(j) + 0.5f) * fx - 0.5f;
      py[i * ow + j] = y;
    }
  }
  return grid_sample(tape, image, sx, sy);
}

Tensor blur_sep(Tape& tape, const Tensor& x, const std::vector<float>& taps) {
  check(x.rank() == 4, "blur_sep: input must be [B,C,H,W]");
  check(taps.size() % 2 == 1, "blur_sep: tap count must be odd");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int r = static_cast<int>(taps.size()) / 2;
  const std::size_t plane = static_cast<std::size_t>(H) * W;

  auto run = [&](const float* src, float* dst) {
    std::vector<float> tmp(plane);
    for (int bc = 0; bc < B * C; ++bc) {
      const float* sp = src + static_cast<std::size_t>(bc) * plane;
      float* dp = dst + static_cast<std::size_t>(bc) * plane;
      // horizontal
      for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
          float s = 0.0f;
          for (int t = -r; t <= r; ++t) s += taps[t + r] * sp[i * W + mirror(j + t, W)];
          tmp[i * W + j] = s;
        }
      }
      // vertical
      for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
          float s = 0.0f;
          for (int t = -r; t <= r; ++t) s += taps[t + r] * tmp[mirror(i + t, H) * W + j];
          dp[i * W + j] = s;
        }
      }
    }
  };

  Tensor out = Tensor::zeros(x.shape(), track(tape, {x}));
  run(x.data(), out.data());

  if (out.requires_grad()) {
    auto k = taps;
    tape.record(
        [x, out, k, B, C, H, W, r, plane]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !x.requires_grad()) return;
          auto gx = x.grad();
          std::vector<float> tmp(plane);
          for (int bc = 0; bc < B * C; ++bc) {
            const float* gp = og.data() + static_cast<std::size_t>(bc) * plane;
            float* dp = gx.data() + static_cast<std::size_t>(bc) * plane;
            std::fill(tmp.begin(), tmp.end(), 0.0f);
            // adjoint of the vertical pass
            for (int i = 0; i < H; ++i)
              for (int j = 0; j < W; ++j) {
                const float g = gp[i * W + j];
                if (g == 0.0f) continue;
                for (int t = -r; t <= r; ++t) tmp[mirror(i + t, H) * W + j] += k[t + r] * g;
              }
            // adjoint of the horizontal pass
            for (int i = 0; i < H; ++i)
              for (int j = 0; j < W; ++j) {
                const float g = tmp[i * W + j];
                if (g == 0.0f) continue;
                for (int t = -r; t <= r; ++t) dp[i * W + mirror(j + t, W)] += k[t + r] * g;
              }
          }
        },
        {x, out});
  }
  return out;
}

Tensor masked_blend(Tape& tape, const std::vector<Tensor>& imgs, const std::vector<Tensor>& masks) {
  check(!imgs.empty() && imgs.size() == masks.size(), "masked_blend: need one mask per image");
  const Shape shape = imgs[0].shape();
  const int B = shape[0], C = shape[1], H = shape[2], W = shape[3];
  bool rg = false;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    check(imgs[i].shape() == shape, "masked_blend: image shapes disagree");
    const auto& m = masks[i];
    const bool shared = m.rank() == 2 && m.dim(0) == H && m.dim(1) == W;
    const bool per_elem = m.rank() == 3 && m.dim(0) == B && m.dim(1) == H && m.dim(2) == W;
    check(shared || per_elem, "masked_blend: mask must be [H,W] or [B,H,W]");
    check(!m.requires_grad(), "masked_blend: masks are constants");
    rg = rg || imgs[i].requires_grad();
  }
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Tensor out = Tensor::zeros(shape, tape.recording() && rg);
  float* po = out.data();
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const float* pa = imgs[i].data();
    const bool per_elem = masks[i].rank() == 3;
    for (int b = 0; b < B; ++b) {
      const float* pm = masks[i].data() + (per_elem ? static_cast<std::size_t>(b) * plane : 0);
      for (int ch = 0; ch < C; ++ch) {
        const std::size_t off = (static_cast<std::size_t>(b) * C + ch) * plane;
        for (std::size_t p = 0; p < plane; ++p) po[off + p] += pa[off + p] * pm[p];
      }
    }
  }
  if (out.requires_grad()) {
    auto layers = imgs;
    auto ms = masks;
    tape.record(
        [layers, ms, out, B, C, plane]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!layers[i].requires_grad()) continue;
            auto gl = layers[i].grad();
            const bool per_elem = ms[i].rank() == 3;
            for (int b = 0; b < B; ++b) {
              const float* pm = ms[i].data() + (per_elem ? static_cast<std::size_t>(b) * plane : 0);
              for (int ch = 0; ch < C; ++ch) {
                const std::size_t off = (static_cast<std::size_t>(b) * C + ch) * plane;
                for (std::size_t p = 0; p < plane; ++p) gl[off + p] += og[off + p] * pm[p];
              }
            }
          }
        },
        {out});
  }
  return out;
}

// ---- losses ----------------------------------------------------------------

namespace {

// Row softmax into `probs`, returns per-row logsumexp pieces via callback.
void row_softmax(const float* z, int B, int K, float* probs) {
  for (int b = 0; b < B; ++b) {
    const float* row = z + static_cast<std::size_t>(b) * K;
    float* prow = probs + static_cast<std::size_t>(b) * K;
    float m = row[0];
    for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
    float se = 0.0f;
    for (int k = 0; k < K; ++k) {
      prow[k] = std::exp(row[k] - m);
      se += prow[k];
    }
    const float inv = 1.0f / se;
    for (int k = 0; k < K; ++k) prow[k] *= inv;
  }
}

}  // namespace

std::vector<float> softmax_rows(const Tensor& logits) {
  check(logits.rank() == 2, "softmax_rows: expects [B,K]");
  std::vector<float> probs(logits.numel());
  row_softmax(logits.data(), logits.dim(0), logits.dim(1), probs.data());
  return probs;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
  check(logits.rank() == 2, "softmax_cross_entropy: expects [B,K]");
  const int B = logits.dim(0), K = logits.dim(1);
  check(static_cast<int>(labels.size()) == B, "softmax_cross_entropy: one label per row");
  for (int l : labels) check(l >= 0 && l < K, "softmax_cross_entropy: label out of range");

  auto probs = std::make_shared<std::vector<float>>(logits.numel());
  row_softmax(logits.data(), B, K, probs->data());
  const float* z = logits.data();
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    const float* row = z + static_cast<std::size_t>(b) * K;
    float m = row[0];
    for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
    float se = 0.0f;
    for (int k = 0; k < K; ++k) se += std::exp(row[k] - m);
    total += std::log(se) - (row[labels[b]] - m);
  }
  Tensor out = Tensor::scalar(static_cast<float>(total / B), track(tape, {logits}));
  if (out.requires_grad()) {
    auto lab = labels;
    tape.record(
        [logits, out, probs, lab, B, K]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !logits.requires_grad()) return;
          const float g = og[0] / static_cast<float>(B);
          auto gl = logits.grad();
          for (int b = 0; b < B; ++b) {
            const float* prow = probs->data() + static_cast<std::size_t>(b) * K;
            float* grow = gl.data() + static_cast<std::size_t>(b) * K;
            for (int k = 0; k < K; ++k) grow[k] += g * prow[k];
            grow[lab[b]] -= g;
          }
        },
        {logits, out});
  }
  return out;
}

Tensor log_softmax_pick(Tape& tape, const Tensor& scores, const std::vector<int>& picks) {
  check(scores.rank() == 2, "log_softmax_pick: expects [B,M]");
  const int B = scores.dim(0), M = scores.dim(1);
  check(static_cast<int>(picks.size()) == B, "log_softmax_pick: one pick per row");
  for (int p : picks) check(p >= 0 && p < M, "log_softmax_pick: pick out of range");

  auto probs = std::make_shared<std::vector<float>>(scores.numel());
  row_softmax(scores.data(), B, M, probs->data());
  Tensor out = Tensor::zeros({B}, track(tape, {scores}));
  float* po = out.data();
  for (int b = 0; b < B; ++b)
    po[b] = std::log(std::max((*probs)[static_cast<std::size_t>(b) * M + picks[b]], 1e-30f));
  if (out.requires_grad()) {
    auto pk = picks;
    tape.record(
        [scores, out, probs, pk, B, M]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !scores.requires_grad()) return;
          auto gs = scores.grad();
          for (int b = 0; b < B; ++b) {
            const float g = og[b];
            if (g == 0.0f) continue;
            const float* prow = probs->data() + static_cast<std::size_t>(b) * M;
            float* grow = gs.data() + static_cast<std::size_t>(b) * M;
            for (int m = 0; m < M; ++m) grow[m] -= g * prow[m];
            grow[pk[b]] += g;
          }
        },
        {scores, out});
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  double s = 0.0;
  const float* pa = a.data();
  for (std::size_t i = 0; i < a.numel(); ++i) s += pa[i];
  Tensor out = Tensor::scalar(static_cast<float>(s), track(tape, {a}));
  if (out.requires_grad()) {
    tape.record(
        [a, out]() mutable {
          auto og = out.grad_view();
          if (og.empty() || !a.requires_grad()) return;
          auto ga = a.grad();
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[0];
        },
        {a, out});
  }
  return out;
}

Tensor reshape_copy(Tape& tape, const Tensor& a, Shape shape) {
  check(shape_numel(shape) == a.numel(), "reshape_copy: element count mismatch, " +
                                             shape_str(a.shape()) + " -> " + shape_str(shape));
  Tensor out = Tensor::zeros(shape, track(tape, {a}));
  std::memcpy(out.data(), a.data(), sizeof(float) * a.numel());
  if (out.requires_grad()) {
    tape.record(
        [a, out]() mutable {
          auto og = out.grad_view();
          if (og.empty()) return;
          accum(a, og);
        },
        {a, out});
  }
  return out;
}

}  // namespace saccade::ad
