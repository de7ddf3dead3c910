// SPDX-License-Identifier: Apache-2.0

#include "saccade/train.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

namespace saccade {

SgdMomentum::SgdMomentum(ParamList params, float lr, float momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  velocity_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    velocity_[i].assign(params_[i].second.numel(), 0.0f);
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    auto g = p.grad_view();
    if (g.empty()) continue;  // parameter untouched by this episode
    float* v = velocity_[i].data();
    float* w = p.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      v[k] = momentum_ * v[k] + g[k];
      w[k] -= lr_ * v[k];
    }
  }
}

namespace {

float batch_accuracy(const GlanceTrajectory& traj, const std::vector<int>& labels) {
  const auto pred = traj.predictions(static_cast<int>(traj.step_probs.size()) - 1);
  int hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++hits;
  return static_cast<float>(hits) / static_cast<float>(labels.size());
}

float mean_return(const GlanceTrajectory& traj, float gamma) {
  if (traj.rewards.empty()) return 0.0f;
  const std::size_t B = traj.rewards[0].size();
  float acc = 0.0f;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<float> r(traj.rewards.size());
    for (std::size_t t = 0; t < traj.rewards.size(); ++t) r[t] = traj.rewards[t][b];
    acc += discounted_return(r, gamma).total;
  }
  return acc / static_cast<float>(B);
}

std::vector<int> batch_labels(const Dataset& ds, std::span<const int> idx) {
  std::vector<int> labels(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    labels[i] = ds.items[static_cast<std::size_t>(idx[i])].label;
  return labels;
}

}  // namespace

std::vector<TrainLogRow> train(Model& model, const Dataset& train_set, const TrainConfig& tc) {
  check(train_set.size() > 0, "train: empty dataset");
  check(tc.batch >= 1, "train: batch must be positive");
  const int T = model.cfg.glances_train;
  RngPool pool(tc.seed);
  Rng shuffle_rng = pool.stream("shuffle");
  Rng fix_rng = pool.stream("fixations");
  Rng policy_rng = pool.stream("policy");

  std::vector<TrainLogRow> log;
  std::vector<int> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);

  SgdMomentum opt_stage1(model.ventral_params(), tc.lr_stage1, tc.momentum);
  SgdMomentum opt_stage2(model.params(), tc.lr_stage2, tc.momentum);

  int global_step = 0;
  auto run_epoch = [&](int stage, int epoch_index) {
    // deterministic Fisher-Yates reshuffle per epoch
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.below(i));
      std::swap(order[i - 1], order[j]);
    }
    const int steps = (train_set.size() + tc.batch - 1) / tc.batch;
    for (int s = 0; s < steps; ++s) {
      const int lo = s * tc.batch;
      const int hi = std::min(train_set.size(), lo + tc.batch);
      std::span<const int> idx(order.data() + lo, static_cast<std::size_t>(hi - lo));
      Tensor images = train_set.batch(idx);
      std::vector<int> labels = batch_labels(train_set, idx);

      Tape tape;
      GlanceTrajectory traj;
      Tensor loss;
      if (stage == 1) {
        std::vector<std::vector<Fixation>> forced(static_cast<std::size_t>(T));
        for (auto& per_step : forced) {
          per_step.resize(labels.size());
          for (auto& f : per_step)
            f = {static_cast<float>(fix_rng.uniform()), static_cast<float>(fix_rng.uniform())};
        }
        EpisodeOptions opt;
        opt.glances = T;
        opt.forced_fixations = &forced;
        traj = forward_episode(tape, model, images, labels, opt, fix_rng);
        loss = recognition_loss(tape, traj.step_logits, labels);
      } else {
        EpisodeOptions opt;
        opt.glances = T;
        opt.sample_policy = true;
        opt.record_policy = true;
        traj = forward_episode(tape, model, images, labels, opt, policy_rng);
        loss = recognition_loss(tape, traj.step_logits, labels);
        if (!traj.log_probs.empty()) {
          Tensor pg = reinforce_loss(tape, traj.log_probs, traj.rewards, model.cfg.gamma);
          loss = ad::add(tape, loss, ad::mul_scalar(tape, pg, tc.reinforce_weight));
        }
      }
      tape.backward(loss);
      if (stage == 1)
        opt_stage1.step();
      else
        opt_stage2.step();
      tape.reset();

      ++global_step;
      if (global_step % tc.log_every == 0 || s == steps - 1) {
        log.push_back({global_step, stage, loss.item(), mean_return(traj, model.cfg.gamma),
                       batch_accuracy(traj, labels)});
      }
    }
    if (!tc.checkpoint_dir.empty()) {
      std::filesystem::create_directories(tc.checkpoint_dir);
      save_model(model, tc.checkpoint_dir + "/stage" + std::to_string(stage) + "_epoch" +
                            std::to_string(epoch_index + 1) + ".ckpt");
    }
  };

  for (int e = 0; e < tc.stage1_epochs; ++e) run_epoch(1, e);
  for (int e = 0; e < tc.stage2_epochs; ++e) run_epoch(2, e);
  if (!tc.checkpoint_dir.empty()) {
    std::filesystem::create_directories(tc.checkpoint_dir);
    save_model(model, tc.checkpoint_dir + "/model.ckpt");
  }
  return log;
}

std::vector<double> evaluate(const Model& model, const Dataset& val_set, int glances, int batch) {
  check(val_set.size() > 0, "evaluate: empty dataset");
  const int T = model.recurrent() ? glances : 1;
  std::vector<int> hits(static_cast<std::size_t>(T), 0);
  Rng unused(0);
  for (int lo = 0; lo < val_set.size(); lo += batch) {
    const int hi = std::min(val_set.size(), lo + batch);
    std::vector<int> idx(static_cast<std::size_t>(hi - lo));
    std::iota(idx.begin(), idx.end(), lo);
    Tensor images = val_set.batch(idx);
    std::vector<int> labels = batch_labels(val_set, idx);

    Tape tape;
    Tape::Pause pause(tape);  // evaluation never needs gradients
    EpisodeOptions opt;
    opt.glances = T;
    opt.sample_policy = false;
    opt.record_policy = false;
    opt.fixation_noise_std = 0.0f;
    auto traj = forward_episode(tape, model, images, labels, opt, unused);
    for (int t = 0; t < T; ++t) {
      const auto pred = traj.predictions(t);
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (pred[i] == labels[i]) ++hits[static_cast<std::size_t>(t)];
    }
  }
  std::vector<double> acc(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    acc[static_cast<std::size_t>(t)] =
        static_cast<double>(hits[static_cast<std::size_t>(t)]) / val_set.size();
  return acc;
}

}  // namespace saccade
