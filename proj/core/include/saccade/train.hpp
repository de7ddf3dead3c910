// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "saccade/dataset.hpp"
#include "saccade/model.hpp"

namespace saccade {

// Plain SGD with momentum over a fixed parameter list. Velocity buffers are
// positional, so the list must not change between steps.
class SgdMomentum {
 public:
  SgdMomentum(ParamList params, float lr, float momentum);
  void step();
  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

 private:
  ParamList params_;
  std::vector<std::vector<float>> velocity_;
  float lr_;
  float momentum_;
};

struct TrainConfig {
  int stage1_epochs = 4;   // random fixations, ventral parameters only
  int stage2_epochs = 2;   // policy fixations, joint objective
  float lr_stage1 = 0.05f;
  float lr_stage2 = 0.01f;
  float momentum = 0.9f;
  int batch = 25;
  float reinforce_weight = 1.0f;
  std::uint64_t seed = 1;
  std::string checkpoint_dir;  // when set: a checkpoint per epoch + final
  int log_every = 20;          // steps between log rows (also logs last step)
};

struct TrainLogRow {
  int step = 0;
  int stage = 0;
  float loss = 0.0f;
  float reward = 0.0f;    // mean discounted return over the batch
  float accuracy = 0.0f;  // final-step batch accuracy
};

std::vector<TrainLogRow> train(Model& model, const Dataset& train_set, const TrainConfig& tc);

// Greedy fixations, no noise; accuracy of argmax p_t for each step 1..T.
std::vector<double> evaluate(const Model& model, const Dataset& val_set, int glances,
                             int batch = 50);

}  // namespace saccade
