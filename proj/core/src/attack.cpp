// SPDX-License-Identifier: Apache-2.0
#include "saccade/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "saccade/ops.hpp"

namespace saccade {

namespace {

int batch_of(const Tensor& images) {
  check(images.defined() && images.rank() == 4, "attack: images must be [B,C,H,W]");
  return images.dim(0);
}

float sign_of(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

// Per-element episode loss sums, forward only: L_b = sum_t -log p_t[b,class_b],
// negated when targeted.
std::vector<double> per_element_losses(const Model& model, const Tensor& images,
                                       const std::vector<int>& classes, bool targeted, int glances,
                                       float noise_std, Rng& rng) {
  const int b = batch_of(images);
  Tape tape;
  Tape::Pause pause(tape);
  EpisodeOptions opt;
  opt.glances = glances;
  opt.fixation_noise_std = noise_std;
  opt.sample_policy = true;
  opt.record_policy = false;
  GlanceTrajectory traj = forward_episode(tape, model, images, classes, opt, rng);
  const int k = traj.classes;
  std::vector<double> loss(static_cast<std::size_t>(b), 0.0);
  for (const auto& probs : traj.step_probs) {
    check(probs.size() == static_cast<std::size_t>(b) * static_cast<std::size_t>(k),
          "attack: step probability block has wrong size");
    for (int i = 0; i < b; ++i) {
      const float p = probs[static_cast<std::size_t>(i) * k + classes[static_cast<std::size_t>(i)]];
      loss[static_cast<std::size_t>(i)] -= std::log(std::max(p, 1e-12f));
    }
  }
  if (targeted)
    for (auto& v : loss) v = -v;
  return loss;
}

}  // namespace

AttackKind parse_attack(const std::string& name) {
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "pgd") return AttackKind::pgd;
  if (name == "spsa") return AttackKind::spsa;
  throw std::runtime_error("unknown attack: " + name);
}

std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::spsa: return "spsa";
  }
  return "?";
}

Tensor attack_loss(Tape& tape, const Model& model, const Tensor& images,
                   const std::vector<int>& classes, bool targeted, int glances, float noise_std,
                   Rng& rng) {
  check(static_cast<int>(classes.size()) == batch_of(images),
        "attack_loss: one class per image required");
  EpisodeOptions opt;
  opt.glances = glances;
  opt.fixation_noise_std = noise_std;
  opt.sample_policy = true;
  opt.record_policy = false;
  GlanceTrajectory traj = forward_episode(tape, model, images, classes, opt, rng);
  Tensor total;
  for (const Tensor& logits : traj.step_logits) {
    Tensor ce = softmax_cross_entropy(tape, logits, classes);
    total = total.defined() ? add(tape, total, ce) : ce;
  }
  return targeted ? mul_scalar(tape, total, -1.0f) : total;
}

Tensor eot_gradient(const Model& model, const Tensor& images, const std::vector<int>& classes,
                    const AttackConfig& cfg, Rng& rng, double* mean_loss, long* forward_evals) {
  check(cfg.eot_samples >= 1, "eot_gradient: needs at least one sample");
  const int b = batch_of(images);
  Tensor x = images;  // shared handle; flag restored below
  const bool had_grad_flag = x.requires_grad();
  x.set_requires_grad(true);
  Tensor grad_mean = Tensor::zeros(images.shape());
  double loss_sum = 0.0;
  for (int k = 0; k < cfg.eot_samples; ++k) {
    Tape tape;
    x.zero_grad();
    Tensor loss = attack_loss(tape, model, x, classes, cfg.targeted, cfg.glances,
                              cfg.fixation_noise_std, rng);
    tape.backward(loss);
    loss_sum += loss.item();
    auto gx = x.grad_view();
    float* acc = grad_mean.data();
    for (std::size_t i = 0; i < grad_mean.numel(); ++i) acc[i] += gx[i];
    tape.reset();
  }
  const float inv = 1.0f / static_cast<float>(cfg.eot_samples);
  for (float& v : grad_mean.values()) v *= inv;
  x.set_requires_grad(had_grad_flag);
  if (mean_loss) *mean_loss = loss_sum / cfg.eot_samples;
  if (forward_evals) *forward_evals += static_cast<long>(cfg.eot_samples) * b;
  return grad_mean;
}

Tensor pgd_core(const Tensor& x0, float eps, float step, int iters,
                const std::function<Tensor(const Tensor&, int)>& grad_fn, float clamp_lo,
                float clamp_hi, const std::function<void(int, const Tensor&)>& per_iter) {
  check(eps >= 0.0f && step >= 0.0f && iters >= 0, "pgd_core: negative budget");
  Tensor x = x0.detached_copy();
  const float* base = x0.data();
  for (int it = 0; it < iters; ++it) {
    Tensor g = grad_fn(x, it);
    check(g.shape() == x.shape(), "pgd_core: gradient shape mismatch");
    float* xv = x.data();
    const float* gv = g.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      float v = xv[i] + step * sign_of(gv[i]);
      v = std::clamp(v, base[i] - eps, base[i] + eps);
      xv[i] = std::clamp(v, clamp_lo, clamp_hi);
    }
    if (per_iter) per_iter(it, x);
  }
  return x;
}

Tensor fgsm(const Model& model, const Tensor& images, const std::vector<int>& classes,
            const AttackConfig& cfg, long* forward_evals) {
  Rng rng(cfg.seed);
  Tensor g = eot_gradient(model, images, classes, cfg, rng, nullptr, forward_evals);
  Tensor adv = images.detached_copy();
  float* xv = adv.data();
  const float* gv = g.data();
  for (std::size_t i = 0; i < adv.numel(); ++i)
    xv[i] = std::clamp(xv[i] + cfg.epsilon * sign_of(gv[i]), 0.0f, 1.0f);
  return adv;
}

Tensor pgd(const Model& model, const Tensor& images, const std::vector<int>& classes,
           const AttackConfig& cfg, long* forward_evals) {
  Rng rng(cfg.seed);
  auto grad_fn = [&](const Tensor& x, int) {
    return eot_gradient(model, x, classes, cfg, rng, nullptr, forward_evals);
  };
  return pgd_core(images, cfg.epsilon, cfg.effective_step(), cfg.steps, grad_fn);
}

Tensor spsa(const Model& model, const Tensor& image, int class_index, const AttackConfig& cfg,
            long* forward_evals) {
  check(batch_of(image) == 1, "spsa: single image expected");
  check(cfg.spsa_batch >= 2 && cfg.spsa_batch % 2 == 0, "spsa: batch must be even and >= 2");
  Rng rng(cfg.seed);
  const std::size_t n = image.numel();
  const int pairs = cfg.spsa_batch / 2;
  const int pair_chunk = std::min(pairs, 16);
  const float step = cfg.effective_step();

  Tensor x = image.detached_copy();
  const float* base = image.data();
  Shape chunk_shape = image.shape();
  std::vector<float> ghat(n);
  std::vector<float> probes;  // pair_chunk Rademacher draws, flattened

  for (int it = 0; it < cfg.spsa_iters; ++it) {
    std::fill(ghat.begin(), ghat.end(), 0.0f);
    int done = 0;
    while (done < pairs) {
      const int p = std::min(pair_chunk, pairs - done);
      chunk_shape[0] = 2 * p;
      Tensor batch = Tensor::zeros(chunk_shape);
      probes.assign(static_cast<std::size_t>(p) * n, 0.0f);
      float* bv = batch.data();
      const float* xv = x.data();
      for (int j = 0; j < p; ++j) {
        float* v = probes.data() + static_cast<std::size_t>(j) * n;
        float* plus = bv + static_cast<std::size_t>(2 * j) * n;
        float* minus = bv + static_cast<std::size_t>(2 * j + 1) * n;
        for (std::size_t i = 0; i < n; ++i) {
          v[i] = rng.sign();
          plus[i] = xv[i] + cfg.spsa_delta * v[i];
          minus[i] = xv[i] - cfg.spsa_delta * v[i];
        }
      }
      std::vector<int> classes(static_cast<std::size_t>(2 * p), class_index);
      std::vector<double> loss = per_element_losses(model, batch, classes, cfg.targeted,
                                                    cfg.glances, cfg.fixation_noise_std, rng);
      for (int j = 0; j < p; ++j) {
        const float coeff =
            static_cast<float>((loss[static_cast<std::size_t>(2 * j)] -
                                loss[static_cast<std::size_t>(2 * j + 1)]) /
                               (2.0 * cfg.spsa_delta));
        const float* v = probes.data() + static_cast<std::size_t>(j) * n;
        for (std::size_t i = 0; i < n; ++i) ghat[i] += coeff * v[i];
      }
      done += p;
      if (forward_evals) *forward_evals += 2L * p;
    }
    float* xv = x.data();
    const float inv = 1.0f / static_cast<float>(pairs);
    for (std::size_t i = 0; i < n; ++i) {
      float v = xv[i] + step * sign_of(ghat[i] * inv);
      v = std::clamp(v, base[i] - cfg.epsilon, base[i] + cfg.epsilon);
      xv[i] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return x;
}

Tensor run_attack(const Model& model, const Tensor& images, const std::vector<int>& classes,
                  const AttackConfig& cfg, long* forward_evals) {
  const int b = batch_of(images);
  check(static_cast<int>(classes.size()) == b, "run_attack: one class per image required");
  switch (cfg.kind) {
    case AttackKind::fgsm: return fgsm(model, images, classes, cfg, forward_evals);
    case AttackKind::pgd: return pgd(model, images, classes, cfg, forward_evals);
    case AttackKind::spsa: break;
  }
  // SPSA runs per image with an image-indexed stream so results do not depend
  // on how callers shard the set.
  RngPool pool(cfg.seed);
  Tensor out = images.detached_copy();
  const std::size_t plane = images.numel() / static_cast<std::size_t>(b);
  Shape one = images.shape();
  one[0] = 1;
  for (int i = 0; i < b; ++i) {
    Tensor img = Tensor::zeros(one);
    std::memcpy(img.data(), images.data() + static_cast<std::size_t>(i) * plane,
                plane * sizeof(float));
    AttackConfig per = cfg;
    per.seed = pool.stream_seed("image", static_cast<std::uint64_t>(i));
    Tensor adv = spsa(model, img, classes[static_cast<std::size_t>(i)], per, forward_evals);
    std::memcpy(out.data() + static_cast<std::size_t>(i) * plane, adv.data(),
                plane * sizeof(float));
  }
  return out;
}

AttackReport asr(const Model& model, const Tensor& clean, const Tensor& adv,
                 const std::vector<int>& labels, const std::vector<int>& targets,
                 const AsrOptions& opt) {
  const int b = batch_of(clean);
  check(adv.shape() == clean.shape(), "asr: clean/adversarial shape mismatch");
  check(static_cast<int>(labels.size()) == b, "asr: one label per image required");
  const bool targeted = !targets.empty();
  if (targeted) check(static_cast<int>(targets.size()) == b, "asr: one target per image required");

  const int t_steps = model.recurrent() ? opt.glances_eval : 1;
  RngPool pool(opt.eval_seed);

  auto predict = [&](const Tensor& images, const char* stream) {
    // [T][B] predictions from one stochastic evaluation run over the set.
    std::vector<std::vector<int>> preds(static_cast<std::size_t>(t_steps));
    for (auto& p : preds) p.reserve(static_cast<std::size_t>(b));
    Rng rng(pool.stream_seed(stream));
    const std::size_t plane = clean.numel() / static_cast<std::size_t>(b);
    int at = 0;
    while (at < b) {
      const int bs = std::min(opt.batch, b - at);
      Shape s = clean.shape();
      s[0] = bs;
      Tensor chunk = Tensor::zeros(s);
      std::memcpy(chunk.data(), images.data() + static_cast<std::size_t>(at) * plane,
                  static_cast<std::size_t>(bs) * plane * sizeof(float));
      std::vector<int> chunk_labels(labels.begin() + at, labels.begin() + at + bs);
      Tape tape;
      Tape::Pause pause(tape);
      EpisodeOptions eo;
      eo.glances = t_steps;
      eo.fixation_noise_std = opt.noise_std;
      eo.sample_policy = true;
      eo.record_policy = false;
      GlanceTrajectory traj = forward_episode(tape, model, chunk, chunk_labels, eo, rng);
      for (int t = 0; t < t_steps; ++t) {
        std::vector<int> p = traj.predictions(t);
        preds[static_cast<std::size_t>(t)].insert(preds[static_cast<std::size_t>(t)].end(),
                                                  p.begin(), p.end());
      }
      at += bs;
    }
    return preds;
  };

  auto clean_preds = predict(clean, "clean");
  auto adv_preds = predict(adv, "adv");

  AttackReport rep;
  rep.images = b;
  rep.denominator.assign(static_cast<std::size_t>(t_steps), 0);
  rep.successes.assign(static_cast<std::size_t>(t_steps), 0);
  rep.asr.assign(static_cast<std::size_t>(t_steps), 0.0);
  if (targeted) {
    for (int i = 0; i < b; ++i)
      if (targets[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)])
        ++rep.excluded;
  }
  for (int t = 0; t < t_steps; ++t) {
    const auto& cp = clean_preds[static_cast<std::size_t>(t)];
    const auto& ap = adv_preds[static_cast<std::size_t>(t)];
    int denom = 0;
    int succ = 0;
    for (int i = 0; i < b; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (targeted) {
        if (targets[ui] == labels[ui]) continue;
        ++denom;
        if (ap[ui] == targets[ui]) ++succ;
      } else {
        if (cp[ui] != labels[ui]) continue;
        ++denom;
        if (ap[ui] != labels[ui]) ++succ;
      }
    }
    rep.denominator[static_cast<std::size_t>(t)] = denom;
    rep.successes[static_cast<std::size_t>(t)] = succ;
    rep.asr[static_cast<std::size_t>(t)] = denom > 0 ? static_cast<double>(succ) / denom : 0.0;
  }
  return rep;
}

}  // namespace saccade
