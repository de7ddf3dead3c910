// SPDX-License-Identifier: Apache-2.0

#include "saccade/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "saccade/image_io.hpp"
#include "saccade/rng.hpp"

namespace saccade {

namespace {

constexpr std::array<const char*, 8> kShapeNames = {"circle", "square",  "triangle", "cross",
                                                    "ring",   "diamond", "hexagon",  "star"};

struct Vec2 {
  float x, y;
};

float sd_box(Vec2 p, float hx, float hy) {
  const float dx = std::fabs(p.x) - hx;
  const float dy = std::fabs(p.y) - hy;
  const float ox = std::max(dx, 0.0f), oy = std::max(dy, 0.0f);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(dx, dy), 0.0f);
}

float sd_ngon(Vec2 p, float r, int sides, float phase) {
  // intersection of half planes; adequate for antialiased edges
  float d = -1e9f;
  for (int i = 0; i < sides; ++i) {
    const float a = phase + 2.0f * static_cast<float>(M_PI) * static_cast<float>(i) /
                                static_cast<float>(sides);
    d = std::max(d, p.x * std::cos(a) + p.y * std::sin(a) - r);
  }
  return d;
}

float shape_sdf(int type, Vec2 p, float r) {
  switch (type) {
    case 0:  // circle
      return std::sqrt(p.x * p.x + p.y * p.y) - r;
    case 1:  // square
      return sd_box(p, r * 0.85f, r * 0.85f);
    case 2:  // triangle
      return sd_ngon(p, r * 0.62f, 3, static_cast<float>(M_PI) / 2.0f);
    case 3:  // cross
      return std::min(sd_box(p, r, r * 0.34f), sd_box(p, r * 0.34f, r));
    case 4:  // ring
      return std::fabs(std::sqrt(p.x * p.x + p.y * p.y) - r * 0.76f) - r * 0.26f;
    case 5:  // diamond
      return (std::fabs(p.x) + std::fabs(p.y)) - r * 1.15f;
    case 6:  // hexagon
      return sd_ngon(p, r * 0.82f, 6, 0.0f);
    case 7: {  // four-point star: two nested diamonds
      const float d1 = std::fabs(p.x) + std::fabs(p.y) - r * 1.2f;
      const Vec2 q{(p.x - p.y) * 0.7071f, (p.x + p.y) * 0.7071f};
      const float d2 = std::fabs(q.x) + std::fabs(q.y) - r * 0.62f;
      return std::min(d1, d2);
    }
    default: throw std::logic_error("shape_sdf: bad type");
  }
}

struct Color {
  float r, g, b;
};

Color random_color(Rng& rng, float lo, float hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

DataItem render_item(std::uint64_t item_seed, int label, int N) {
  Rng rng(item_seed);
  const float fn = static_cast<float>(N);

  // background: low-contrast gradient plus soft blobs
  const Color bg0 = random_color(rng, 0.30f, 0.70f);
  const Color bg1 = random_color(rng, 0.30f, 0.70f);
  const float gdir = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
  const float gx = std::cos(gdir), gy = std::sin(gdir);

  struct Blob {
    float cx, cy, sigma;
    Color col;
  };
  std::vector<Blob> blobs(7);
  for (auto& bl : blobs) {
    bl.cx = static_cast<float>(rng.uniform(0.0, 1.0)) * fn;
    bl.cy = static_cast<float>(rng.uniform(0.0, 1.0)) * fn;
    bl.sigma = static_cast<float>(rng.uniform(0.05, 0.20)) * fn;
    bl.col = random_color(rng, 0.25f, 0.75f);
  }

  // foreground shape: bright/dark stripe texture, random pose
  const float cx = static_cast<float>(rng.uniform(0.28, 0.72)) * fn;
  const float cy = static_cast<float>(rng.uniform(0.28, 0.72)) * fn;
  const float radius = static_cast<float>(rng.uniform(0.12, 0.20)) * fn;
  const float theta = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
  const float ct = std::cos(theta), st = std::sin(theta);
  const Color fg_a = random_color(rng, 0.55f, 0.95f);
  const Color fg_b = random_color(rng, 0.05f, 0.45f);
  const float stripe_freq = static_cast<float>(rng.uniform(2.5, 5.0)) / radius;
  const float stripe_phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));

  DataItem item;
  item.label = label;
  item.pixels.resize(static_cast<std::size_t>(3) * N * N);

  const std::size_t plane = static_cast<std::size_t>(N) * N;
  for (int y = 0; y < N; ++y) {
    for (int x = 0; x < N; ++x) {
      const float u = (static_cast<float>(x) - fn / 2.0f) / fn;
      const float v = (static_cast<float>(y) - fn / 2.0f) / fn;
      const float g = 0.5f + (u * gx + v * gy);
      Color c{bg0.r + (bg1.r - bg0.r) * g, bg0.g + (bg1.g - bg0.g) * g,
              bg0.b + (bg1.b - bg0.b) * g};
      for (const auto& bl : blobs) {
        const float dx = static_cast<float>(x) - bl.cx;
        const float dy = static_cast<float>(y) - bl.cy;
        const float a = 0.35f * std::exp(-0.5f * (dx * dx + dy * dy) / (bl.sigma * bl.sigma));
        c.r += (bl.col.r - c.r) * a;
        c.g += (bl.col.g - c.g) * a;
        c.b += (bl.col.b - c.b) * a;
      }
      // shape in its rotated frame
      const float rx = static_cast<float>(x) - cx, ry = static_cast<float>(y) - cy;
      const Vec2 p{rx * ct + ry * st, -rx * st + ry * ct};
      const float d = shape_sdf(item.label % 8, p, radius);
      const float alpha = std::clamp(0.5f - d / 1.5f, 0.0f, 1.0f);
      if (alpha > 0.0f) {
        const float stripe =
            0.5f + 0.5f * std::sin(stripe_freq * p.x * 2.0f * static_cast<float>(M_PI) * 0.25f +
                                   stripe_phase);
        const Color fg{fg_a.r + (fg_b.r - fg_a.r) * stripe, fg_a.g + (fg_b.g - fg_a.g) * stripe,
                       fg_a.b + (fg_b.b - fg_a.b) * stripe};
        c.r += (fg.r - c.r) * alpha;
        c.g += (fg.g - c.g) * alpha;
        c.b += (fg.b - c.b) * alpha;
      }
      const float grain = static_cast<float>(rng.uniform(-0.02, 0.02));
      const std::size_t idx = static_cast<std::size_t>(y) * N + x;
      auto q = [&](float val) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(val + grain, 0.0f, 1.0f) * 255.0f));
      };
      item.pixels[idx] = q(c.r);
      item.pixels[plane + idx] = q(c.g);
      item.pixels[2 * plane + idx] = q(c.b);
    }
  }
  return item;
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = kFnvOffset;
  const std::int32_t geom[3] = {image_px, channels, classes};
  fnv_bytes(h, geom, sizeof(geom));
  for (const auto& item : items) {
    const std::int32_t label = item.label;
    fnv_bytes(h, &label, sizeof(label));
    fnv_bytes(h, item.pixels.data(), item.pixels.size());
  }
  return h;
}

Tensor Dataset::batch(std::span<const int> indices) const {
  check(!indices.empty(), "batch: empty index list");
  const int B = static_cast<int>(indices.size());
  Tensor out = Tensor::zeros({B, channels, image_px, image_px});
  const std::size_t stride = static_cast<std::size_t>(channels) * image_px * image_px;
  float* po = out.data();
  for (int b = 0; b < B; ++b) {
    const auto& item = items.at(static_cast<std::size_t>(indices[static_cast<std::size_t>(b)]));
    check(item.pixels.size() == stride, "batch: item pixel size mismatch");
    float* dst = po + static_cast<std::size_t>(b) * stride;
    for (std::size_t i = 0; i < stride; ++i)
      dst[i] = static_cast<float>(item.pixels[i]) / 255.0f;
  }
  return out;
}

Dataset gen_shapes(std::uint64_t seed, int classes, int count, int image_px) {
  check(classes >= 2 && classes <= 8, "gen_shapes: supports 2..8 classes");
  check(count >= 1 && image_px >= 32, "gen_shapes: bad count or extent");
  Dataset ds;
  ds.split = "gen";
  ds.image_px = image_px;
  ds.channels = 3;
  ds.classes = classes;
  for (int k = 0; k < classes; ++k) ds.class_names.emplace_back(kShapeNames[static_cast<std::size_t>(k)]);
  RngPool pool(seed);
  ds.items.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // label cycles for an exactly uniform histogram; appearance is per-item
    DataItem item = render_item(pool.stream_seed("item", static_cast<std::uint64_t>(i)),
                                i % classes, image_px);
    item.source = "gen:" + std::to_string(i);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

Dataset load_folder(const std::string& path, int image_px, LoadReport* report) {
  namespace fs = std::filesystem;
  check(image_px >= 16, "load_folder: bad target extent");
  if (!fs::is_directory(path)) throw std::runtime_error("load_folder: not a directory: " + path);

  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw std::runtime_error("load_folder: no class directories in " + path);

  Dataset ds;
  ds.split = "folder";
  ds.image_px = image_px;
  ds.channels = 3;
  ds.classes = static_cast<int>(class_dirs.size());
  ds.class_names = class_dirs;
  LoadReport local;
  LoadReport& rep = report ? *report : local;

  for (int k = 0; k < ds.classes; ++k) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(path) / class_dirs[static_cast<std::size_t>(k)]))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    int loaded_here = 0;
    for (const auto& file : files) {
      ImageU8 img;
      if (!read_image(file, img)) {
        ++rep.skipped;
        rep.skipped_paths.push_back(file);
        continue;
      }
      ImageU8 scaled = resize_image(img, image_px, image_px);
      DataItem item;
      item.label = k;
      item.source = file;
      item.pixels = planar_from_interleaved(scaled);
      ds.items.push_back(std::move(item));
      ++rep.loaded;
      ++loaded_here;
    }
    if (loaded_here == 0)
      throw std::runtime_error("load_folder: class has no readable image: " +
                               class_dirs[static_cast<std::size_t>(k)]);
  }
  return ds;
}

}  // namespace saccade
