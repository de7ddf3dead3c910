// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "saccade/tensor.hpp"

namespace saccade {

struct DataItem {
  std::vector<std::uint8_t> pixels;  // planar CHW, values 0..255
  int label = 0;
  std::string source;
};

struct Dataset {
  std::string split;
  int image_px = 128;
  int channels = 3;
  int classes = 0;
  std::vector<std::string> class_names;
  std::vector<DataItem> items;

  int size() const { return static_cast<int>(items.size()); }

  // Order-sensitive FNV-1a over geometry, labels and pixel bytes.
  std::uint64_t content_hash() const;

  // [B,C,N,N] float tensor in [0,1] for the given item indices.
  Tensor batch(std::span<const int> indices) const;
  Tensor image(int index) const { int i = index; return batch(std::span<const int>(&i, 1)); }
};

// Synthetic shape-classification set: one textured shape per image over a
// cluttered background. Appearance is random per item; only geometry carries
// the class, so recognition has to find and read the shape. Deterministic
// per (seed, image index); labels cycle so the histogram is exactly uniform.
Dataset gen_shapes(std::uint64_t seed, int classes, int count, int image_px);

struct LoadReport {
  int loaded = 0;
  int skipped = 0;
  std::vector<std::string> skipped_paths;
};

// Directory-per-class tree of PNG/JPEG files, resized to image_px and
// scaled to [0,1]. Unreadable files are skipped (recorded in the report);
// a class directory with no readable image is an error.
Dataset load_folder(const std::string& path, int image_px, LoadReport* report = nullptr);

}  // namespace saccade
