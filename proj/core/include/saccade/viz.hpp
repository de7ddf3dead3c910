// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "saccade/image_io.hpp"
#include "saccade/probmap.hpp"
#include "saccade/retina.hpp"

namespace saccade {

// Grayscale [0,1] values to an 8-bit RGB image.
ImageU8 gray_image(const std::vector<float>& v, int h, int w);

// Side-by-side composition with a light gutter between panels.
ImageU8 hcat(const std::vector<ImageU8>& panels, int pad = 4);

// Filled disc; the center lands within one pixel of (cx, cy).
void draw_disc(ImageU8& img, float cx, float cy, float radius, std::uint8_t r, std::uint8_t g,
               std::uint8_t b);

// Fixations as colored dots in visit order: red, blue, green, black, then
// cycling. Centers at (u*(w-1), v*(h-1)).
void render_fixation_overlay(const Tensor& image, const std::vector<Fixation>& fixations,
                             const std::string& path);

// Original, each blur level, and the blended result in one strip.
void render_foveation(const Tensor& image, Fixation f, const FoveationParams& p,
                      const std::string& path);

// The four region masks as grayscale panels.
void render_masks(int n_px, Fixation f, const FoveationParams& p, const std::string& path);

// Warp-grid source positions scattered on a white canvas.
void render_grid_scatter(int full_px, int ret_px, float b, Fixation f, const std::string& path);

// The retinal sample itself, upscaled for inspection.
void render_retinal(const Tensor& image, int ret_px, float b, Fixation f,
                    const FoveationParams& p, const std::string& path);

// One panel per warp strength; returns the files written ("<prefix>_b<b>.png").
std::vector<std::string> render_b_sweep(const Tensor& image, int ret_px,
                                        const std::vector<float>& bs, Fixation f,
                                        const FoveationParams& p, const std::string& prefix);

// Probability map as a heat image, nearest-neighbor upscaled so each cell is
// a flat block.
void render_probmap(const ProbMap& map, int scale, const std::string& path);

}  // namespace saccade
