// SPDX-License-Identifier: Apache-2.0

#include "saccade/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "saccade/checkpoint.hpp"

namespace saccade {

Variant parse_variant(const std::string& name) {
  if (name == "retina") return Variant::retina;
  if (name == "crop_s") return Variant::crop_s;
  if (name == "crop_d") return Variant::crop_d;
  if (name == "ff_cnn") return Variant::ff_cnn;
  throw std::invalid_argument("unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::retina: return "retina";
    case Variant::crop_s: return "crop_s";
    case Variant::crop_d: return "crop_d";
    case Variant::ff_cnn: return "ff_cnn";
  }
  return "?";
}

void ModelConfig::validate() const {
  check(image_px >= 16 && image_px % 8 == 0, "config: image extent must be a multiple of 8");
  check(classes >= 2, "config: need at least 2 classes");
  check(glances_train >= 1, "config: need at least one glance");
  check(!ventral_channels.empty(), "config: empty ventral stack");
  if (variant != Variant::ff_cnn) {
    check(patch_px >= 16 && patch_px % 8 == 0 && patch_px <= image_px,
          "config: patch extent must be a multiple of 8 and fit in the image");
    check(dorsal_px >= 16 && dorsal_px % 8 == 0, "config: dorsal extent must be a multiple of 8");
    check(saliency_px >= 2, "config: saliency grid too small");
    check(ior_sigma_cells > 0.0f, "config: IOR sigma must be positive");
    check(gamma > 0.0f && gamma < 1.0f, "config: gamma must be in (0,1)");
    check(!dorsal_channels.empty(), "config: empty dorsal stack");
    check(gru_hidden > 0, "config: recurrent variants need a hidden state");
  }
  if (variant == Variant::retina) {
    check(warp_b > 0.0f, "config: retina variant needs b > 0");
    check(patch_px < image_px, "config: retinal extent must be smaller than the image");
    foveation.validate();
  }
}

ParamList Model::params() const {
  ParamList out = ventral_params();
  if (has_dorsal()) dorsal.collect("dorsal", out);
  return out;
}

ParamList Model::ventral_params() const {
  ParamList out;
  ventral.collect("ventral", out);
  return out;
}

Model Model::clone() const {
  Model m = build_model(cfg);
  load_params(m.params(), params());
  return m;
}

Model build_model(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  RngPool pool(cfg.init_seed);
  Rng init = pool.stream("init");
  if (cfg.variant == Variant::ff_cnn) {
    // plain stack + classifier on the pooled features; no GRU, no dorsal
    m.ventral.cnn = make_stack(cfg.image_channels, cfg.ventral_channels, {1, 3, 5}, init);
    m.ventral.feature_dim = cfg.ventral_channels.back();
    m.ventral.hidden = 0;
    m.ventral.classes = cfg.classes;
    m.ventral.cls_w = make_dense_w(m.ventral.feature_dim, cfg.classes, init);
    m.ventral.cls_b = Tensor::zeros({cfg.classes}, true);
  } else {
    m.ventral = make_ventral(cfg.image_channels, cfg.ventral_channels, cfg.gru_hidden,
                             cfg.classes, init);
    m.dorsal = make_dorsal(cfg.image_channels, cfg.dorsal_channels, cfg.saliency_px, init);
  }
  return m;
}

void save_model(const Model& m, const std::string& path) { save_checkpoint(path, m.params()); }

void load_model(Model& m, const std::string& path) { load_params(m.params(), load_checkpoint(path)); }

std::vector<int> GlanceTrajectory::predictions(int step) const {
  const auto& probs = step_probs.at(static_cast<std::size_t>(step));
  const int B = static_cast<int>(probs.size()) / classes;
  std::vector<int> pred(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const float* row = probs.data() + static_cast<std::size_t>(b) * classes;
    pred[static_cast<std::size_t>(b)] =
        static_cast<int>(std::max_element(row, row + classes) - row);
  }
  return pred;
}

namespace {

// Variant front-end: executed fixations -> patch list for the ventral stack.
std::vector<Tensor> sample_patches(Tape& tape, const Model& m, const Tensor& images,
                                   const std::vector<Fixation>& fs) {
  const ModelConfig& cfg = m.cfg;
  switch (cfg.variant) {
    case Variant::retina: {
      Tensor fov = foveate_batched(tape, images, fs, cfg.foveation);
      auto [sx, sy] = warp_grid_batched(cfg.image_px, cfg.patch_px, cfg.warp_b, fs);
      return {ad::grid_sample(tape, fov, sx, sy)};
    }
    case Variant::crop_s: {
      auto [sx, sy] = window_grid_batched(cfg.image_px, cfg.patch_px, 1.0f, fs);
      return {ad::grid_sample(tape, images, sx, sy)};
    }
    case Variant::crop_d: {
      auto [sx1, sy1] = window_grid_batched(cfg.image_px, cfg.patch_px, 1.0f, fs);
      auto [sx2, sy2] = window_grid_batched(cfg.image_px, cfg.patch_px, 2.0f, fs);
      return {ad::grid_sample(tape, images, sx1, sy1), ad::grid_sample(tape, images, sx2, sy2)};
    }
    case Variant::ff_cnn: return {images};
  }
  throw std::logic_error("sample_patches: unreachable");
}

}  // namespace

GlanceTrajectory forward_episode(Tape& tape, const Model& model, const Tensor& images,
                                 const std::vector<int>& labels, const EpisodeOptions& opt,
                                 Rng& rng) {
  check(images.rank() == 4, "forward_episode: images must be [B,C,N,N]");
  check(images.dim(2) == model.cfg.image_px && images.dim(3) == model.cfg.image_px,
        "forward_episode: image extent does not match the model config");
  const int B = images.dim(0);
  const int K = model.cfg.classes;
  const int T = model.recurrent() ? opt.glances : 1;
  check(T >= 1, "forward_episode: need at least one glance");
  if (!labels.empty())
    check(static_cast<int>(labels.size()) == B, "forward_episode: one label per image");
  if (opt.forced_fixations)
    check(static_cast<int>(opt.forced_fixations->size()) >= T,
          "forward_episode: not enough forced fixations");

  GlanceTrajectory traj;
  traj.classes = K;

  // Saliency depends only on the image, so one dorsal pass serves the whole
  // episode; IOR re-masks it per step.
  SaliencyMap sal;
  const bool use_policy = model.has_dorsal() && opt.forced_fixations == nullptr;
  if (use_policy) {
    if (opt.record_policy) {
      Tensor lowres = ad::resize_bilinear(tape, images, model.cfg.dorsal_px, model.cfg.dorsal_px);
      sal = model.dorsal.saliency(tape, lowres);
    } else {
      Tape::Pause pause(tape);
      Tensor lowres = ad::resize_bilinear(tape, images, model.cfg.dorsal_px, model.cfg.dorsal_px);
      sal = model.dorsal.saliency(tape, lowres);
    }
  }

  std::vector<std::vector<Fixation>> history(static_cast<std::size_t>(B));
  VentralState state = model.recurrent() ? fresh_state(B, model.cfg.gru_hidden) : VentralState{};
  std::vector<float> p_prev(static_cast<std::size_t>(B) * K, 1.0f / static_cast<float>(K));

  for (int t = 0; t < T; ++t) {
    std::vector<Fixation> executed;
    if (model.cfg.variant != Variant::ff_cnn) {
      std::vector<Fixation> chosen;
      if (opt.forced_fixations) {
        chosen = (*opt.forced_fixations)[static_cast<std::size_t>(t)];
        check(static_cast<int>(chosen.size()) == B, "forward_episode: forced fixation batch size");
      } else {
        PolicyStep step;
        if (opt.sample_policy) {
          step = next_fixation(tape, sal, history, model.cfg.ior_sigma_cells, rng);
          if (opt.record_policy) traj.log_probs.push_back(step.log_probs);
        } else {
          step = greedy_fixation(sal, history, model.cfg.ior_sigma_cells);
        }
        chosen = step.fixations;
        for (int b = 0; b < B; ++b)
          history[static_cast<std::size_t>(b)].push_back(chosen[static_cast<std::size_t>(b)]);
      }
      executed = chosen;
      if (opt.fixation_noise_std > 0.0f) {
        for (auto& f : executed) {
          f.u += static_cast<float>(rng.normal()) * opt.fixation_noise_std;
          f.v += static_cast<float>(rng.normal()) * opt.fixation_noise_std;
          f = clamp_fixation(f);
        }
      }
      traj.fixations.push_back(executed);
    }

    auto patches = sample_patches(tape, model, images, executed);
    Tensor feats = model.ventral.features(tape, patches);
    Tensor logits;
    if (model.recurrent()) {
      state = model.ventral.accumulate(tape, state, feats);
      logits = model.ventral.logits(tape, state);
    } else {
      logits = ad::dense(tape, feats, model.ventral.cls_w, model.ventral.cls_b);
    }
    traj.step_logits.push_back(logits);
    traj.step_probs.push_back(ad::softmax_rows(logits));

    if (!labels.empty()) {
      const auto& p_curr = traj.step_probs.back();
      std::vector<float> r(static_cast<std::size_t>(B));
      for (int b = 0; b < B; ++b) {
        std::span<const float> prev(p_prev.data() + static_cast<std::size_t>(b) * K,
                                    static_cast<std::size_t>(K));
        std::span<const float> curr(p_curr.data() + static_cast<std::size_t>(b) * K,
                                    static_cast<std::size_t>(K));
        r[static_cast<std::size_t>(b)] = step_reward(prev, curr, labels[static_cast<std::size_t>(b)]);
      }
      traj.rewards.push_back(std::move(r));
      p_prev = p_curr;
    }
  }
  return traj;
}

}  // namespace saccade
