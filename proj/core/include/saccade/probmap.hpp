// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "saccade/attack.hpp"
#include "saccade/model.hpp"

namespace saccade {

// Target-class probability read out over a regular fixation grid laid on an
// adversarial image: one glance per cell, recurrent state reset before each.
struct ProbMap {
  int grid_px = 32;
  std::vector<float> values;  // grid_px*grid_px row-major, row 0 at the top
  std::string image_id;       // content hash of the adversarial image bytes
  std::vector<Fixation> attack_fixations;
};

struct ProbMapConfig {
  int grid_px = 32;
  float epsilon = 1e-2f;
  int steps = 100;
  float step_size = 0.0f;  // 0 selects epsilon/20
  int cell_batch = 128;    // cells evaluated per forward chunk
  std::uint64_t seed = 11;
};

// Center of grid cell (row, col) as a normalized fixation.
Fixation grid_cell_center(int row, int col, int grid_px);

// First fixation the trained policy would choose (greedy, no noise).
Fixation first_fixation(const Model& model, const Tensor& image);

// Targeted PGD against episodes pinned to the given fixations (one glance per
// fixation, in order). Deterministic; dorsal stream never runs.
Tensor targeted_pgd_forced(const Model& model, const Tensor& image, int target,
                           const std::vector<Fixation>& fixations, const ProbMapConfig& cfg);

// One-glance read-out of the target probability at every grid cell.
ProbMap probe_grid(const Model& model, const Tensor& adv, int target, const ProbMapConfig& cfg);

struct ProbMapPair {
  ProbMap one_fix;   // attack pinned to the policy's first fixation
  ProbMap two_fix;   // plus the lower-left corner cell (30, 1)
  Tensor adv_one;    // [1,C,N,N]
  Tensor adv_two;
};

// The full experiment for one image: craft both adversarial images, then
// probe each over the grid. Requires a fixating variant (not ff_cnn).
ProbMapPair probability_map(const Model& model, const Tensor& image, int target,
                            const ProbMapConfig& cfg);

// Cells whose target probability exceeds the threshold.
int affected_area(const ProbMap& map, float threshold = 0.5f);

}  // namespace saccade
