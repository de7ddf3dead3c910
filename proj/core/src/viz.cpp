// SPDX-License-Identifier: Apache-2.0
#include "saccade/viz.hpp"

#include <algorithm>
#include <cmath>

namespace saccade {

namespace {

constexpr std::uint8_t kFixColors[4][3] = {
    {220, 30, 30},   // red
    {30, 60, 220},   // blue
    {30, 160, 60},   // green
    {10, 10, 10},    // black
};

// Dark-blue to red to yellow ramp for heat images.
void heat_color(float v, std::uint8_t* rgb) {
  v = std::clamp(v, 0.0f, 1.0f);
  float r, g, b;
  if (v < 0.5f) {
    const float t = v * 2.0f;
    r = t;
    g = 0.1f * t;
    b = 0.55f * (1.0f - t) + 0.05f;
  } else {
    const float t = (v - 0.5f) * 2.0f;
    r = 1.0f;
    g = 0.1f + 0.85f * t;
    b = 0.05f;
  }
  rgb[0] = static_cast<std::uint8_t>(std::lround(r * 255.0f));
  rgb[1] = static_cast<std::uint8_t>(std::lround(g * 255.0f));
  rgb[2] = static_cast<std::uint8_t>(std::lround(b * 255.0f));
}

ImageU8 upscale_nn(const ImageU8& in, int scale) {
  ImageU8 out;
  out.w = in.w * scale;
  out.h = in.h * scale;
  out.rgb.resize(static_cast<std::size_t>(out.w) * out.h * 3);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      const std::size_t src = (static_cast<std::size_t>(y / scale) * in.w + x / scale) * 3;
      const std::size_t dst = (static_cast<std::size_t>(y) * out.w + x) * 3;
      out.rgb[dst] = in.rgb[src];
      out.rgb[dst + 1] = in.rgb[src + 1];
      out.rgb[dst + 2] = in.rgb[src + 2];
    }
  return out;
}

}  // namespace

ImageU8 gray_image(const std::vector<float>& v, int h, int w) {
  check(v.size() == static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
        "gray_image: size mismatch");
  ImageU8 out;
  out.w = w;
  out.h = h;
  out.rgb.resize(v.size() * 3);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float c = std::clamp(v[i], 0.0f, 1.0f);
    const auto b = static_cast<std::uint8_t>(std::lround(c * 255.0f));
    out.rgb[i * 3] = b;
    out.rgb[i * 3 + 1] = b;
    out.rgb[i * 3 + 2] = b;
  }
  return out;
}

ImageU8 hcat(const std::vector<ImageU8>& panels, int pad) {
  check(!panels.empty(), "hcat: no panels");
  int h = 0;
  int w = 0;
  for (const auto& p : panels) {
    h = std::max(h, p.h);
    w += p.w;
  }
  w += pad * static_cast<int>(panels.size() - 1);
  ImageU8 out;
  out.w = w;
  out.h = h;
  out.rgb.assign(static_cast<std::size_t>(w) * h * 3, 230);
  int x0 = 0;
  for (const auto& p : panels) {
    for (int y = 0; y < p.h; ++y) {
      const std::size_t src = static_cast<std::size_t>(y) * p.w * 3;
      const std::size_t dst = (static_cast<std::size_t>(y) * w + x0) * 3;
      std::copy_n(p.rgb.data() + src, static_cast<std::size_t>(p.w) * 3, out.rgb.data() + dst);
    }
    x0 += p.w + pad;
  }
  return out;
}

void draw_disc(ImageU8& img, float cx, float cy, float radius, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + radius)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float dx = static_cast<float>(x) - cx;
      const float dy = static_cast<float>(y) - cy;
      if (dx * dx + dy * dy > radius * radius) continue;
      const std::size_t at = (static_cast<std::size_t>(y) * img.w + x) * 3;
      img.rgb[at] = r;
      img.rgb[at + 1] = g;
      img.rgb[at + 2] = b;
    }
}

void render_fixation_overlay(const Tensor& image, const std::vector<Fixation>& fixations,
                             const std::string& path) {
  ImageU8 img = tensor_to_u8(image, 0);
  const float radius = std::max(2.0f, static_cast<float>(img.w) / 40.0f);
  for (std::size_t i = 0; i < fixations.size(); ++i) {
    const auto& c = kFixColors[i % 4];
    draw_disc(img, fixations[i].u * static_cast<float>(img.w - 1),
              fixations[i].v * static_cast<float>(img.h - 1), radius, c[0], c[1], c[2]);
  }
  write_png(path, img);
}

void render_foveation(const Tensor& image, Fixation f, const FoveationParams& p,
                      const std::string& path) {
  Tape tape;
  Tape::Pause pause(tape);
  std::vector<ImageU8> panels;
  panels.push_back(tensor_to_u8(image, 0));
  for (float sigma : p.blur_sigmas) {
    Tensor level = ad::blur_sep(tape, image, gaussian_taps(sigma, p.blur_kernel_size));
    panels.push_back(tensor_to_u8(level, 0));
  }
  Tensor fov = foveate(tape, image, f, p);
  panels.push_back(tensor_to_u8(fov, 0));
  write_png(path, hcat(panels));
}

void render_masks(int n_px, Fixation f, const FoveationParams& p, const std::string& path) {
  auto masks = region_masks(n_px, f, p);
  std::vector<ImageU8> panels;
  for (const auto& m : masks) {
    std::vector<float> v(m.values().begin(), m.values().end());
    panels.push_back(gray_image(v, n_px, n_px));
  }
  write_png(path, hcat(panels));
}

void render_grid_scatter(int full_px, int ret_px, float b, Fixation f, const std::string& path) {
  SampleGrid grid = warp_grid(full_px, ret_px, b, f);
  ImageU8 img;
  img.w = full_px;
  img.h = full_px;
  img.rgb.assign(static_cast<std::size_t>(full_px) * full_px * 3, 255);
  const float* sx = grid.source_x.data();
  const float* sy = grid.source_y.data();
  const std::size_t n = grid.source_x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const int x = static_cast<int>(std::lround(sx[i]));
    const int y = static_cast<int>(std::lround(sy[i]));
    if (x < 0 || x >= full_px || y < 0 || y >= full_px) continue;
    const std::size_t at = (static_cast<std::size_t>(y) * full_px + x) * 3;
    img.rgb[at] = 40;
    img.rgb[at + 1] = 40;
    img.rgb[at + 2] = 40;
  }
  write_png(path, img);
}

void render_retinal(const Tensor& image, int ret_px, float b, Fixation f,
                    const FoveationParams& p, const std::string& path) {
  Tape tape;
  Tape::Pause pause(tape);
  const int full_px = image.dim(2);
  Tensor fov = foveate(tape, image, f, p);
  SampleGrid grid = warp_grid(full_px, ret_px, b, f);
  RetinalImage ret = retinal_sample(tape, fov, grid);
  ImageU8 small = tensor_to_u8(ret.pixels, 0);
  write_png(path, resize_image(small, full_px, full_px));
}

std::vector<std::string> render_b_sweep(const Tensor& image, int ret_px,
                                        const std::vector<float>& bs, Fixation f,
                                        const FoveationParams& p, const std::string& prefix) {
  std::vector<std::string> files;
  for (float b : bs) {
    const std::string path = prefix + "_b" + std::to_string(static_cast<int>(std::lround(b))) +
                             ".png";
    render_retinal(image, ret_px, b, f, p, path);
    files.push_back(path);
  }
  return files;
}

void render_probmap(const ProbMap& map, int scale, const std::string& path) {
  ImageU8 cells;
  cells.w = map.grid_px;
  cells.h = map.grid_px;
  cells.rgb.resize(static_cast<std::size_t>(map.grid_px) * map.grid_px * 3);
  for (std::size_t i = 0; i < map.values.size(); ++i)
    heat_color(map.values[i], cells.rgb.data() + i * 3);
  write_png(path, upscale_nn(cells, std::max(1, scale)));
}

}  // namespace saccade
