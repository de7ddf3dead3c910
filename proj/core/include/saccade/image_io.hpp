// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saccade/tensor.hpp"

namespace saccade {

// Interleaved 8-bit RGB, row-major.
struct ImageU8 {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> rgb;  // size w*h*3
};

// Decodes PNG/JPEG. Returns false if the file is missing or corrupt.
bool read_image(const std::string& path, ImageU8& out);

void write_png(const std::string& path, const ImageU8& img);

ImageU8 resize_image(const ImageU8& in, int w, int h);

// HWC interleaved -> CHW planar bytes.
std::vector<std::uint8_t> planar_from_interleaved(const ImageU8& img);

// One batch element of a [B,3,H,W] tensor, values clamped to [0,1] and
// quantized to 8 bits.
ImageU8 tensor_to_u8(const Tensor& img, int batch_index);

// Lossless float32 sidecar (same container as checkpoints, single entry
// named "image"). The PNG next to it is for looking at, this is the ground
// truth.
void write_f32_image(const std::string& path, const Tensor& img);
Tensor read_f32_image(const std::string& path);

}  // namespace saccade
