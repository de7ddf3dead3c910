// SPDX-License-Identifier: Apache-2.0

#include "saccade/retina.hpp"

#include <algorithm>
#include <cmath>

namespace saccade {

Fixation clamp_fixation(Fixation f) {
  return {std::clamp(f.u, 0.0f, 1.0f), std::clamp(f.v, 0.0f, 1.0f)};
}

void FoveationParams::validate() const {
  check(blur_kernel_size >= 3 && blur_kernel_size % 2 == 1,
        "foveation: blur kernel size must be odd and at least 3");
  check(blur_sigmas[0] < blur_sigmas[1] && blur_sigmas[1] < blur_sigmas[2],
        "foveation: blur sigmas must be strictly increasing");
  check(mask_sigma_fracs[0] < mask_sigma_fracs[1] && mask_sigma_fracs[1] < mask_sigma_fracs[2],
        "foveation: mask sigmas must be strictly increasing");
  for (float s : blur_sigmas) check(s > 0.0f, "foveation: blur sigma must be positive");
  for (float s : mask_sigma_fracs) check(s > 0.0f, "foveation: mask sigma must be positive");
}

std::vector<float> gaussian_taps(float sigma, int ksize) {
  check(sigma > 0.0f && ksize % 2 == 1, "gaussian_taps: need sigma > 0 and odd size");
  const int r = ksize / 2;
  std::vector<float> taps(ksize);
  double sum = 0.0;
  for (int t = -r; t <= r; ++t) {
    const double v = std::exp(-0.5 * (static_cast<double>(t) * t) / (sigma * sigma));
    taps[t + r] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : taps) v = static_cast<float>(v / sum);
  return taps;
}

std::array<Tensor, 4> region_masks(int n_px, Fixation f, const FoveationParams& p) {
  check(n_px >= 8, "region_masks: image extent must be at least 8");
  p.validate();
  const float fx = f.u * static_cast<float>(n_px - 1);
  const float fy = f.v * static_cast<float>(n_px - 1);

  // Peak-normalized Gaussians T1 < T2 < T3 as cumulative "sharp zone" weights.
  std::array<Tensor, 3> t;
  for (int k = 0; k < 3; ++k) {
    t[k] = Tensor::zeros({n_px, n_px});
    const float sigma = p.mask_sigma_fracs[k] * static_cast<float>(n_px);
    float* pt = t[k].data();
    float peak = 0.0f;
    for (int i = 0; i < n_px; ++i) {
      for (int j = 0; j < n_px; ++j) {
        const float dx = static_cast<float>(j) - fx;
        const float dy = static_cast<float>(i) - fy;
        const float v = std::exp(-0.5f * (dx * dx + dy * dy) / (sigma * sigma));
        pt[i * n_px + j] = v;
        peak = std::max(peak, v);
      }
    }
    const float inv = 1.0f / peak;
    for (int i = 0; i < n_px * n_px; ++i) pt[i] *= inv;
  }

  // Telescoping differences sum to 1 at every pixel regardless of the peaks.
  std::array<Tensor, 4> m;
  for (auto& mm : m) mm = Tensor::zeros({n_px, n_px});
  const float* t1 = t[0].data();
  const float* t2 = t[1].data();
  const float* t3 = t[2].data();
  for (int i = 0; i < n_px * n_px; ++i) {
    m[0].data()[i] = t1[i];
    m[1].data()[i] = t2[i] - t1[i];
    m[2].data()[i] = t3[i] - t2[i];
    m[3].data()[i] = 1.0f - t3[i];
  }
  return m;
}

Tensor foveate(Tape& tape, const Tensor& image, Fixation f, const FoveationParams& p) {
  check(image.rank() == 4, "foveate: image must be [B,C,N,N]");
  check(image.dim(2) == image.dim(3), "foveate: image must be square");
  const int N = image.dim(2);
  auto masks = region_masks(N, f, p);

  std::vector<Tensor> layers;
  layers.reserve(4);
  layers.push_back(image);
  for (float sigma : p.blur_sigmas)
    layers.push_back(ad::blur_sep(tape, image, gaussian_taps(sigma, p.blur_kernel_size)));

  return ad::masked_blend(tape, layers, {masks[0], masks[1], masks[2], masks[3]});
}

float warp_radius(float rho, int full_px, int ret_px, float b) {
  check(b > 0.0f, "warp_radius: b must be positive");
  check(ret_px < full_px, "warp_radius: retinal extent must be smaller than the image");
  const double N = full_px, n = ret_px;
  return static_cast<float>(N * std::sinh(rho * 2.0 * b / N) / (2.0 * std::sinh(b * n / N)));
}

SampleGrid warp_grid(int full_px, int ret_px, float b, Fixation f) {
  check(b > 0.0f, "warp_grid: b must be positive");
  check(ret_px < full_px, "warp_grid: retinal extent must be smaller than the image");
  f = clamp_fixation(f);
  const int n = ret_px;
  const double fx_ret = f.u * (n - 1);
  const double fy_ret = f.v * (n - 1);
  const double fx_img = f.u * (full_px - 1);
  const double fy_img = f.v * (full_px - 1);
  const double scale = 2.0 * b / full_px;
  const double denom = 2.0 * std::sinh(b * static_cast<double>(n) / full_px);

  SampleGrid grid;
  grid.h = n;
  grid.w = n;
  grid.b = b;
  grid.fixation = f;
  grid.source_x = Tensor::zeros({n, n});
  grid.source_y = Tensor::zeros({n, n});
  float* sx = grid.source_x.data();
  float* sy = grid.source_y.data();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = j - fx_ret;
      const double dy = i - fy_ret;
      const double rho = std::sqrt(dx * dx + dy * dy);
      if (rho == 0.0) {
        sx[i * n + j] = static_cast<float>(fx_img);
        sy[i * n + j] = static_cast<float>(fy_img);
        continue;
      }
      const double e = full_px * std::sinh(rho * scale) / denom;
      sx[i * n + j] = static_cast<float>(fx_img + e * dx / rho);
      sy[i * n + j] = static_cast<float>(fy_img + e * dy / rho);
    }
  }
  return grid;
}

RetinalImage retinal_sample(Tape& tape, const Tensor& foveated, const SampleGrid& grid) {
  check(grid.h > 0 && grid.w > 0, "retinal_sample: empty grid");
  RetinalImage out;
  out.pixels = ad::grid_sample(tape, foveated, grid.source_x, grid.source_y);
  out.grid = grid;
  return out;
}

namespace {

std::pair<Tensor, Tensor> window_grid(const Tensor& image, Fixation f, int out_px, float spacing) {
  const int N = image.dim(3);
  f = clamp_fixation(f);
  const float fx = f.u * static_cast<float>(N - 1);
  const float fy = f.v * static_cast<float>(image.dim(2) - 1);
  Tensor sx = Tensor::zeros({out_px, out_px});
  Tensor sy = Tensor::zeros({out_px, out_px});
  const float half = static_cast<float>(out_px - 1) / 2.0f;
  for (int i = 0; i < out_px; ++i) {
    const float y = fy + (static_cast<float>(i) - half) * spacing;
    for (int j = 0; j < out_px; ++j) {
      sx.data()[i * out_px + j] = fx + (static_cast<float>(j) - half) * spacing;
      sy.data()[i * out_px + j] = y;
    }
  }
  return {sx, sy};
}

}  // namespace

Tensor crop_single(Tape& tape, const Tensor& image, Fixation f, int out_px) {
  check(image.rank() == 4, "crop_single: image must be [B,C,H,W]");
  check(out_px > 0, "crop_single: output extent must be positive");
  auto [sx, sy] = window_grid(image, f, out_px, 1.0f);
  return ad::grid_sample(tape, image, sx, sy);
}

std::pair<Tensor, Tensor> crop_double(Tape& tape, const Tensor& image, Fixation f, int out_px) {
  check(image.rank() == 4, "crop_double: image must be [B,C,H,W]");
  check(out_px > 0, "crop_double: output extent must be positive");
  auto [sx1, sy1] = window_grid(image, f, out_px, 1.0f);
  auto [sx2, sy2] = window_grid(image, f, out_px, 2.0f);
  return {ad::grid_sample(tape, image, sx1, sy1), ad::grid_sample(tape, image, sx2, sy2)};
}

Tensor foveate_batched(Tape& tape, const Tensor& image, const std::vector<Fixation>& fs,
                       const FoveationParams& p) {
  check(image.rank() == 4 && image.dim(2) == image.dim(3), "foveate: image must be [B,C,N,N]");
  check(static_cast<int>(fs.size()) == image.dim(0), "foveate: one fixation per batch element");
  const int B = image.dim(0), N = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(N) * N;

  std::array<Tensor, 4> stacked;
  for (auto& t : stacked) t = Tensor::zeros({B, N, N});
  for (int b = 0; b < B; ++b) {
    auto masks = region_masks(N, fs[static_cast<std::size_t>(b)], p);
    for (int k = 0; k < 4; ++k)
      std::copy(masks[k].data(), masks[k].data() + plane,
                stacked[k].data() + static_cast<std::size_t>(b) * plane);
  }

  std::vector<Tensor> layers;
  layers.reserve(4);
  layers.push_back(image);
  for (float sigma : p.blur_sigmas)
    layers.push_back(ad::blur_sep(tape, image, gaussian_taps(sigma, p.blur_kernel_size)));
  return ad::masked_blend(tape, layers, {stacked[0], stacked[1], stacked[2], stacked[3]});
}

std::pair<Tensor, Tensor> warp_grid_batched(int full_px, int ret_px, float b,
                                            const std::vector<Fixation>& fs) {
  check(!fs.empty(), "warp_grid_batched: empty fixation list");
  const int B = static_cast<int>(fs.size()), n = ret_px;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  Tensor sx = Tensor::zeros({B, n, n});
  Tensor sy = Tensor::zeros({B, n, n});
  for (int i = 0; i < B; ++i) {
    SampleGrid g = warp_grid(full_px, ret_px, b, fs[static_cast<std::size_t>(i)]);
    std::copy(g.source_x.data(), g.source_x.data() + plane,
              sx.data() + static_cast<std::size_t>(i) * plane);
    std::copy(g.source_y.data(), g.source_y.data() + plane,
              sy.data() + static_cast<std::size_t>(i) * plane);
  }
  return {sx, sy};
}

std::pair<Tensor, Tensor> window_grid_batched(int full_px, int out_px, float spacing,
                                              const std::vector<Fixation>& fs) {
  check(!fs.empty(), "window_grid_batched: empty fixation list");
  const int B = static_cast<int>(fs.size());
  const std::size_t plane = static_cast<std::size_t>(out_px) * out_px;
  Tensor sx = Tensor::zeros({B, out_px, out_px});
  Tensor sy = Tensor::zeros({B, out_px, out_px});
  const float half = static_cast<float>(out_px - 1) / 2.0f;
  for (int i = 0; i < B; ++i) {
    const Fixation f = clamp_fixation(fs[static_cast<std::size_t>(i)]);
    const float fx = f.u * static_cast<float>(full_px - 1);
    const float fy = f.v * static_cast<float>(full_px - 1);
    float* px = sx.data() + static_cast<std::size_t>(i) * plane;
    float* py = sy.data() + static_cast<std::size_t>(i) * plane;
    for (int r = 0; r < out_px; ++r) {
      const float y = fy + (static_cast<float>(r) - half) * spacing;
      for (int c = 0; c < out_px; ++c) {
        px[r * out_px + c] = fx + (static_cast<float>(c) - half) * spacing;
        py[r * out_px + c] = y;
      }
    }
  }
  return {sx, sy};
}

float fovea_extent(float b, int full_px, int ret_px, float acuity_ratio) {
  check(acuity_ratio > 0.0f && acuity_ratio <= 1.0f, "fovea_extent: acuity ratio must be in (0,1]");
  check(b > 0.0f, "fovea_extent: b must be positive");
  // density(rho) = 1/g'(rho) with g'(rho) = b*cosh(2*b*rho/N)/sinh(b*n/N);
  // density >= ratio * density(0)  <=>  cosh(2*b*rho/N) <= 1/ratio.
  const double N = full_px;
  const double rho_star = N / (2.0 * b) * std::acosh(1.0 / static_cast<double>(acuity_ratio));
  const double denom = 2.0 * std::sinh(static_cast<double>(b) * ret_px / N);
  const double e_star = N * std::sinh(rho_star * 2.0 * b / N) / denom;
  return static_cast<float>(std::min(e_star, N / 2.0));
}

}  // namespace saccade
