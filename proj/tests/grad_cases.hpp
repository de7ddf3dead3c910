// SPDX-License-Identifier: Apache-2.0
//
// Named gradient-check cases shared by the unit tests and the acceptance
// runner: one case per differentiable primitive plus the composed
// foveate -> warp -> sample -> recognition pipeline.

#pragma once

#include <string>
#include <vector>

#include "oracle.hpp"

namespace oracle {

struct GradCase {
  std::string name;
  std::function<Tensor(Tape&, const std::vector<Tensor>&)> build;
  std::function<double(const std::vector<DTensor>&)> ref;
  std::vector<Tensor> inputs;
  int probes_per_input = 50;
  double h = 1e-3;
  double tol = 1e-4;
};

// Every primitive, each probing all differentiable inputs.
std::vector<GradCase> primitive_grad_cases();

// Foveation, radial warp, bilinear sampling and a small recognition stack
// chained into one scalar loss; probes the image and the parameters.
GradCase composed_pipeline_case();

GradCheck run_case(const GradCase& c);

}  // namespace oracle
