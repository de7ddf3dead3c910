// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saccade/dorsal.hpp"
#include "saccade/ventral.hpp"

namespace saccade {

// The four front-end variants: full retinal transform, single crop, double
// crop, and a plain feedforward CNN over the whole image (no recurrence,
// no fixations).
enum class Variant { retina, crop_s, crop_d, ff_cnn };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
  Variant variant = Variant::retina;
  int image_px = 128;   // full image extent N
  int patch_px = 64;    // retinal / crop extent n
  float warp_b = 12.0f;
  int dorsal_px = 64;   // low-res whole-image view fed to the dorsal stream
  int saliency_px = 16; // fixation cell grid extent S
  float ior_sigma_cells = 2.0f;
  int image_channels = 3;
  int classes = 5;
  int glances_train = 4;
  int gru_hidden = 128;
  float gamma = 0.8f;                 // reward discount
  float fixation_noise_std = 0.1f;    // evaluation/attack-time jitter
  std::vector<int> ventral_channels{16, 16, 32, 32, 64, 64, 128, 128};
  std::vector<int> dorsal_channels{8, 8, 16, 16, 32, 32, 64, 64};
  FoveationParams foveation;
  std::uint64_t init_seed = 1;

  void validate() const;
};

struct Model {
  ModelConfig cfg;
  VentralStream ventral;
  DorsalStream dorsal;  // empty for ff_cnn

  bool has_dorsal() const { return cfg.variant != Variant::ff_cnn; }
  bool recurrent() const { return cfg.variant != Variant::ff_cnn; }

  ParamList params() const;
  ParamList ventral_params() const;  // the stage-1 trainable set

  // Deep copy with independent buffers; used by per-image attack workers.
  Model clone() const;
};

Model build_model(const ModelConfig& cfg);
void save_model(const Model& m, const std::string& path);
void load_model(Model& m, const std::string& path);

struct EpisodeOptions {
  int glances = 4;
  float fixation_noise_std = 0.0f;
  bool sample_policy = true;   // false: greedy argmax fixation
  bool record_policy = true;   // false: dorsal pass runs off the tape
  // When set, fixations come from here ([glances][batch]) and the dorsal
  // stream never runs (stage-1 training, probes, composition tests).
  const std::vector<std::vector<Fixation>>* forced_fixations = nullptr;
};

struct GlanceTrajectory {
  std::vector<std::vector<Fixation>> fixations;  // [T][B] executed (post-noise)
  std::vector<Tensor> step_logits;               // T x [B,K], on the tape
  std::vector<std::vector<float>> step_probs;    // T x (B*K), detached
  std::vector<Tensor> log_probs;                 // T x [B] policy log-probs
  std::vector<std::vector<float>> rewards;       // T x [B]
  int classes = 0;

  std::vector<int> predictions(int step) const;  // argmax p_t per element
};

// Runs one batched episode. `labels` drives the per-step rewards; pass the
// true labels during training, anything consistent otherwise.
GlanceTrajectory forward_episode(Tape& tape, const Model& model, const Tensor& images,
                                 const std::vector<int>& labels, const EpisodeOptions& opt,
                                 Rng& rng);

}  // namespace saccade
