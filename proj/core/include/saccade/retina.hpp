// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <utility>
#include <vector>

#include "saccade/ops.hpp"
#include "saccade/tape.hpp"
#include "saccade/tensor.hpp"

namespace saccade {

// Normalized gaze position; (0,0) is the top-left corner, (1,1) bottom-right.
// u runs along x (columns), v along y (rows).
struct Fixation {
  float u = 0.5f;
  float v = 0.5f;
};

Fixation clamp_fixation(Fixation f);

// Blur pyramid + mask geometry. Mask widths are fractions of the image width
// so the same config serves any resolution.
struct FoveationParams {
  std::array<float, 3> blur_sigmas{1.0f, 3.0f, 5.0f};
  int blur_kernel_size = 7;
  std::array<float, 3> mask_sigma_fracs{40.0f / 224.0f, 70.0f / 224.0f, 90.0f / 224.0f};
  void validate() const;  // sigmas strictly increasing, odd kernel
};

// Normalized Gaussian taps of odd length `ksize`.
std::vector<float> gaussian_taps(float sigma, int ksize);

// Four region masks [N,N]. Each ring mask is a difference of Gaussians that
// are peak-normalized to 1 over the grid, so the masks sum to 1 exactly and
// the innermost mask is 1 at the fixation pixel.
std::array<Tensor, 4> region_masks(int n_px, Fixation f, const FoveationParams& p);

// Blur pyramid blended through the region masks: sharp at the fixation,
// progressively blurrier outward. Differentiable w.r.t. the image.
Tensor foveate(Tape& tape, const Tensor& image, Fixation f, const FoveationParams& p);

// Continuous source positions (in foveated-image pixel units) for each
// retinal pixel. Not clamped; the sampler clamps to the image edge.
struct SampleGrid {
  int h = 0;
  int w = 0;
  Tensor source_x;  // [h,w]
  Tensor source_y;  // [h,w]
  float b = 0.0f;
  Fixation fixation;
};

// Radial warp e = g(rho) = N*sinh(rho*2b/N) / (2*sinh(b*n/N)).
// g(0)=0 and g(n/2)=N/2; spacing grows with rho, so samples are densest at
// the fixation.
float warp_radius(float rho, int full_px, int ret_px, float b);

// Builds the angle-preserving radial grid. The fixation is anchored at
// (u*(n-1), v*(n-1)) in retinal pixels and (u*(N-1), v*(N-1)) in image pixels.
SampleGrid warp_grid(int full_px, int ret_px, float b, Fixation f);

struct RetinalImage {
  Tensor pixels;  // [B,C,n,n]
  SampleGrid grid;
};

RetinalImage retinal_sample(Tape& tape, const Tensor& foveated, const SampleGrid& grid);

// Axis-aligned n-px window centered at the fixation, unit sample spacing,
// bilinear with clamp-to-edge.
Tensor crop_single(Tape& tape, const Tensor& image, Fixation f, int out_px);

// Same-center pair: native-scale window plus a double-extent window sampled
// at spacing 2 (equivalent to bilinear-downsampling a 2n window to n).
std::pair<Tensor, Tensor> crop_double(Tape& tape, const Tensor& image, Fixation f, int out_px);

// Eccentricity (in image px) where local sampling density 1/g'(rho) first
// falls below acuity_ratio times the density at the fixation; capped at N/2.
// Strictly decreasing in b until the cap binds.
float fovea_extent(float b, int full_px, int ret_px, float acuity_ratio = 0.5f);

// ---- batched variants: one fixation per batch element -----------------------

// Blur pyramid is fixation-independent and shared; the blend masks are
// per element ([B,N,N]).
Tensor foveate_batched(Tape& tape, const Tensor& image, const std::vector<Fixation>& fs,
                       const FoveationParams& p);

// Stacked warp grids as [B,n,n] source_x / source_y.
std::pair<Tensor, Tensor> warp_grid_batched(int full_px, int ret_px, float b,
                                            const std::vector<Fixation>& fs);

// Stacked axis-aligned windows at the given sample spacing.
std::pair<Tensor, Tensor> window_grid_batched(int full_px, int out_px, float spacing,
                                              const std::vector<Fixation>& fs);

}  // namespace saccade
