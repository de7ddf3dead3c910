// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "saccade/model.hpp"

namespace saccade {

enum class AttackKind { fgsm, pgd, spsa };

AttackKind parse_attack(const std::string& name);
std::string attack_name(AttackKind k);

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  float epsilon = 5e-3f;     // L-inf budget in pixel units
  int steps = 100;           // PGD iterations
  float step_size = 0.0f;    // 0 selects epsilon/20
  bool targeted = false;
  int glances = 12;          // glances the attacker optimizes over
  int eot_samples = 2;       // gradient draws averaged per step
  float fixation_noise_std = 0.1f;
  int spsa_batch = 128;      // forward evaluations per SPSA iteration (even)
  int spsa_iters = 100;
  float spsa_delta = 0.01f;
  std::uint64_t seed = 7;

  float effective_step() const { return step_size > 0.0f ? step_size : epsilon / 20.0f; }
};

// One stochastic episode of `glances` glances; sum over steps of batch-mean
// cross entropy against `classes` (true labels untargeted, targets when
// targeted — then negated, so a signed ascent step always serves the
// attacker). Differentiable back to `images`.
Tensor attack_loss(Tape& tape, const Model& model, const Tensor& images,
                   const std::vector<int>& classes, bool targeted, int glances, float noise_std,
                   Rng& rng);

// Mean of attack_loss gradients w.r.t. the images over cfg.eot_samples
// independent fixation/noise draws. Optionally reports the mean loss.
Tensor eot_gradient(const Model& model, const Tensor& images, const std::vector<int>& classes,
                    const AttackConfig& cfg, Rng& rng, double* mean_loss = nullptr,
                    long* forward_evals = nullptr);

// Signed-step iteration x <- clamp(project(x + step*sign(grad_fn(x)))),
// projecting onto the L-inf ball of radius eps around x0. Generic over the
// gradient source so toy objectives can drive it.
Tensor pgd_core(const Tensor& x0, float eps, float step, int iters,
                const std::function<Tensor(const Tensor&, int)>& grad_fn, float clamp_lo = 0.0f,
                float clamp_hi = 1.0f,
                const std::function<void(int, const Tensor&)>& per_iter = nullptr);

// Single signed EOT-gradient step of size epsilon.
Tensor fgsm(const Model& model, const Tensor& images, const std::vector<int>& classes,
            const AttackConfig& cfg, long* forward_evals = nullptr);

// Iterated signed EOT-gradient steps with projection; no random start.
Tensor pgd(const Model& model, const Tensor& images, const std::vector<int>& classes,
           const AttackConfig& cfg, long* forward_evals = nullptr);

// Gradient-free: antithetic Rademacher perturbation pairs estimate the
// gradient from forward evaluations only. One image at a time ([1,C,H,W]).
Tensor spsa(const Model& model, const Tensor& image, int class_index, const AttackConfig& cfg,
            long* forward_evals = nullptr);

// Dispatches on cfg.kind. `classes` are labels (untargeted) or targets.
Tensor run_attack(const Model& model, const Tensor& images, const std::vector<int>& classes,
                  const AttackConfig& cfg, long* forward_evals = nullptr);

struct AsrOptions {
  int glances_eval = 24;
  float noise_std = 0.1f;
  std::uint64_t eval_seed = 99;
  int batch = 50;
};

struct AttackReport {
  int images = 0;
  int excluded = 0;                 // targeted pairs with target == label
  std::vector<int> denominator;     // per step
  std::vector<int> successes;       // per step
  std::vector<double> asr;          // per step, successes/denominator
  long forward_evals = 0;
};

// Stochastic evaluation episodes (noise on, fresh streams per image and per
// clean/adversarial run). Untargeted success at step t: clean-correct at t
// and adversarial-wrong at t (denominator = clean-correct count). Targeted
// success: adversarial prediction equals the target (denominator = all
// non-degenerate images).
AttackReport asr(const Model& model, const Tensor& clean, const Tensor& adv,
                 const std::vector<int>& labels, const std::vector<int>& targets,
                 const AsrOptions& opt);

}  // namespace saccade
