// SPDX-License-Identifier: Apache-2.0
//
// Command-line front door: dataset generation, training, evaluation, attack
// sweeps, probability maps, figure rendering, and a gradient self-check.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "saccade/attack.hpp"
#include "saccade/csv.hpp"
#include "saccade/dataset.hpp"
#include "saccade/image_io.hpp"
#include "saccade/manifest.hpp"
#include "saccade/model.hpp"
#include "saccade/probmap.hpp"
#include "saccade/train.hpp"
#include "saccade/viz.hpp"

namespace fs = std::filesystem;
using namespace saccade;

namespace {

// ---- config file: key=value with [section] headers ---------------------------

using ConfigMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  ConfigMap out;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config: bad section at " + path + ":" + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key=value at " + path + ":" +
                               std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: empty key at " + path + ":" + std::to_string(lineno));
    out[section.empty() ? key : section + "." + key] = val;
  }
  return out;
}

void apply_override(ConfigMap& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::runtime_error("--set expects section.key=value, got: " + kv);
  cfg[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
}

std::string cfg_str(const ConfigMap& c, const std::string& key, const std::string& dflt) {
  const auto it = c.find(key);
  return it == c.end() ? dflt : it->second;
}

double cfg_num(const ConfigMap& c, const std::string& key, double dflt) {
  const auto it = c.find(key);
  if (it == c.end()) return dflt;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: " + key + " is not a number: " + it->second);
  }
}

int cfg_int(const ConfigMap& c, const std::string& key, int dflt) {
  return static_cast<int>(cfg_num(c, key, dflt));
}

bool cfg_bool(const ConfigMap& c, const std::string& key, bool dflt) {
  const auto it = c.find(key);
  if (it == c.end()) return dflt;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config: " + key + " must be true/false");
}

std::vector<float> cfg_list(const ConfigMap& c, const std::string& key,
                            const std::vector<float>& dflt) {
  const auto it = c.find(key);
  if (it == c.end()) return dflt;
  std::vector<float> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stof(tok));
  }
  if (out.empty()) throw std::runtime_error("config: " + key + " is an empty list");
  return out;
}

std::vector<int> cfg_list_int(const ConfigMap& c, const std::string& key,
                              const std::vector<int>& dflt) {
  std::vector<float> d(dflt.begin(), dflt.end());
  std::vector<float> f = cfg_list(c, key, d);
  std::vector<int> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = static_cast<int>(f[i]);
  return out;
}

// ---- shared run context -------------------------------------------------------

struct RunContext {
  ConfigMap cfg;
  std::uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
  RngPool pool{1};
  Manifest manifest;

  std::string out_path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }
  void note_output(const std::string& path) { manifest.outputs.push_back(path); }
};

RunContext make_context(const std::string& command, const std::string& config_path,
                        std::uint64_t seed, bool seed_set, const std::string& out_dir_flag,
                        int threads, const std::vector<std::string>& sets) {
  RunContext ctx;
  if (!config_path.empty()) ctx.cfg = load_config(config_path);
  for (const auto& kv : sets) apply_override(ctx.cfg, kv);
  ctx.seed = seed_set ? seed : static_cast<std::uint64_t>(cfg_num(ctx.cfg, "run.seed", 1));
  std::string out = out_dir_flag;
  if (out.empty()) {
    if (const char* env = std::getenv("SACCADE_OUT_DIR")) out = env;
  }
  if (out.empty()) out = cfg_str(ctx.cfg, "run.out_dir", "out");
  ctx.out_dir = out;
  ctx.threads = threads > 0 ? threads : 1;
  ctx.pool = RngPool(ctx.seed);
  fs::create_directories(ctx.out_dir);
  ctx.manifest.command = command;
  ctx.manifest.config = ctx.cfg;
  ctx.manifest.seed = ctx.seed;
  return ctx;
}

void finish(RunContext& ctx) {
  const std::string path = ctx.out_path(ctx.manifest.command + "_manifest.json");
  write_manifest(ctx.manifest, path);
  std::cout << "manifest: " << path << " (content id " << ctx.manifest.content_id << ")\n";
}

// ---- typed views over the config ---------------------------------------------

ModelConfig model_config_from(const RunContext& ctx, const std::string& variant_flag) {
  const ConfigMap& c = ctx.cfg;
  ModelConfig m;
  const std::string v = variant_flag.empty() ? cfg_str(c, "model.variant", "retina") : variant_flag;
  m.variant = parse_variant(v);
  m.image_px = cfg_int(c, "model.image_px", 128);
  m.patch_px = cfg_int(c, "model.patch_px", 64);
  m.warp_b = static_cast<float>(cfg_num(c, "model.warp_b", 12.0));
  m.dorsal_px = cfg_int(c, "model.dorsal_px", 64);
  m.saliency_px = cfg_int(c, "model.saliency_px", 16);
  m.ior_sigma_cells = static_cast<float>(cfg_num(c, "model.ior_sigma_cells", 2.0));
  m.image_channels = 3;
  m.classes = cfg_int(c, "data.classes", 5);
  m.glances_train = cfg_int(c, "model.glances_train", 4);
  m.gru_hidden = cfg_int(c, "model.gru_hidden", 128);
  m.gamma = static_cast<float>(cfg_num(c, "model.gamma", 0.8));
  m.fixation_noise_std = static_cast<float>(cfg_num(c, "model.fixation_noise_std", 0.1));
  m.ventral_channels = cfg_list_int(c, "model.ventral_channels", m.ventral_channels);
  m.dorsal_channels = cfg_list_int(c, "model.dorsal_channels", m.dorsal_channels);
  auto sig = cfg_list(c, "model.blur_sigmas", {1.0f, 3.0f, 5.0f});
  auto frac = cfg_list(c, "model.mask_sigma_fracs",
                       {40.0f / 224.0f, 70.0f / 224.0f, 90.0f / 224.0f});
  check(sig.size() == 3 && frac.size() == 3, "config: blur_sigmas and mask_sigma_fracs take 3 values");
  std::copy(sig.begin(), sig.end(), m.foveation.blur_sigmas.begin());
  std::copy(frac.begin(), frac.end(), m.foveation.mask_sigma_fracs.begin());
  m.foveation.blur_kernel_size = cfg_int(c, "model.blur_kernel_size", 7);
  m.init_seed = ctx.pool.stream_seed("init");
  m.validate();
  return m;
}

TrainConfig train_config_from(const RunContext& ctx) {
  const ConfigMap& c = ctx.cfg;
  TrainConfig t;
  t.stage1_epochs = cfg_int(c, "train.stage1_epochs", 4);
  t.stage2_epochs = cfg_int(c, "train.stage2_epochs", 2);
  t.lr_stage1 = static_cast<float>(cfg_num(c, "train.lr_stage1", 0.05));
  t.lr_stage2 = static_cast<float>(cfg_num(c, "train.lr_stage2", 0.01));
  t.momentum = static_cast<float>(cfg_num(c, "train.momentum", 0.9));
  t.batch = cfg_int(c, "train.batch", 25);
  t.reinforce_weight = static_cast<float>(cfg_num(c, "train.reinforce_weight", 1.0));
  t.seed = ctx.pool.stream_seed("train");
  t.log_every = cfg_int(c, "train.log_every", 20);
  return t;
}

AttackConfig attack_config_from(const RunContext& ctx) {
  const ConfigMap& c = ctx.cfg;
  AttackConfig a;
  a.kind = parse_attack(cfg_str(c, "attack.kind", "pgd"));
  a.epsilon = static_cast<float>(cfg_num(c, "attack.epsilon", 5e-3));
  a.steps = cfg_int(c, "attack.steps", 100);
  a.step_size = static_cast<float>(cfg_num(c, "attack.step_size", 0.0));
  a.targeted = cfg_bool(c, "attack.targeted", false);
  a.glances = cfg_int(c, "attack.glances", 12);
  a.eot_samples = cfg_int(c, "attack.eot_samples", 2);
  a.fixation_noise_std = static_cast<float>(cfg_num(c, "attack.fixation_noise_std", 0.1));
  a.spsa_batch = cfg_int(c, "attack.spsa_batch", 128);
  a.spsa_iters = cfg_int(c, "attack.spsa_iters", 100);
  a.spsa_delta = static_cast<float>(cfg_num(c, "attack.spsa_delta", 0.01));
  a.seed = ctx.pool.stream_seed("attack");
  return a;
}

// ---- dataset plumbing ---------------------------------------------------------

Dataset dataset_from(const RunContext& ctx, bool val_split) {
  const std::string folder = cfg_str(ctx.cfg, "data.folder", "");
  const int image_px = cfg_int(ctx.cfg, "data.image_px", cfg_int(ctx.cfg, "model.image_px", 128));
  if (!folder.empty()) {
    const fs::path split = fs::path(folder) / (val_split ? "val" : "train");
    LoadReport report;
    Dataset ds = load_folder(split.string(), image_px, &report);
    if (report.skipped > 0)
      std::cerr << "warning: skipped " << report.skipped << " unreadable files under "
                << split << "\n";
    return ds;
  }
  const int classes = cfg_int(ctx.cfg, "data.classes", 5);
  const int count = val_split ? cfg_int(ctx.cfg, "data.val_count", 300)
                              : cfg_int(ctx.cfg, "data.train_count", 1500);
  Dataset ds = gen_shapes(ctx.pool.stream_seed("data", val_split ? 1 : 0), classes, count,
                          image_px);
  ds.split = val_split ? "val" : "train";
  return ds;
}

// interleaved view of one stored item, for PNG export
ImageU8 item_to_u8(const Dataset& ds, int index) {
  const DataItem& it = ds.items[static_cast<std::size_t>(index)];
  ImageU8 img;
  img.w = ds.image_px;
  img.h = ds.image_px;
  img.rgb.resize(static_cast<std::size_t>(ds.image_px) * ds.image_px * 3);
  const std::size_t plane = static_cast<std::size_t>(ds.image_px) * ds.image_px;
  for (std::size_t p = 0; p < plane; ++p)
    for (int ch = 0; ch < 3; ++ch)
      img.rgb[p * 3 + static_cast<std::size_t>(ch)] = it.pixels[static_cast<std::size_t>(ch) * plane + p];
  return img;
}

// one-row slice [1,C,H,W]
Tensor slice_image(const Tensor& batch, int index) {
  Shape s = batch.shape();
  const std::size_t plane = batch.numel() / static_cast<std::size_t>(s[0]);
  s[0] = 1;
  Tensor out = Tensor::zeros(s);
  std::memcpy(out.data(), batch.data() + static_cast<std::size_t>(index) * plane,
              plane * sizeof(float));
  return out;
}

std::vector<int> labels_of(const Dataset& ds, int count) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(ds.items[static_cast<std::size_t>(i)].label);
  return out;
}

std::vector<int> random_targets(const std::vector<int>& labels, int classes, Rng& rng) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
    if (t >= labels[i]) ++t;  // uniform over classes != label
    out[i] = t;
  }
  return out;
}

// ---- chunked work pool ---------------------------------------------------------

void parallel_chunks(int n_chunks, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n_chunks));
  if (threads == 1) {
    for (int i = 0; i < n_chunks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < n_chunks; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Attacks a whole set in fixed-size chunks; chunk composition (and therefore
// every rng stream) is independent of the thread count.
constexpr int kAttackChunk = 25;

Tensor attack_set(const Model& model, const Tensor& clean, const std::vector<int>& classes,
                  const AttackConfig& cfg, int threads, long* forward_evals) {
  const int b = clean.dim(0);
  const int n_chunks = (b + kAttackChunk - 1) / kAttackChunk;
  Tensor adv = clean.detached_copy();
  const std::size_t plane = clean.numel() / static_cast<std::size_t>(b);
  RngPool pool(cfg.seed);
  std::atomic<long> evals{0};
  parallel_chunks(n_chunks, threads, [&](int chunk) {
    const int at = chunk * kAttackChunk;
    const int bs = std::min(kAttackChunk, b - at);
    Shape s = clean.shape();
    s[0] = bs;
    Tensor part = Tensor::zeros(s);
    std::memcpy(part.data(), clean.data() + static_cast<std::size_t>(at) * plane,
                static_cast<std::size_t>(bs) * plane * sizeof(float));
    std::vector<int> cls(classes.begin() + at, classes.begin() + at + bs);
    Model worker = model.clone();
    AttackConfig per = cfg;
    per.seed = pool.stream_seed("chunk", static_cast<std::uint64_t>(chunk));
    long local = 0;
    Tensor out = run_attack(worker, part, cls, per, &local);
    std::memcpy(adv.data() + static_cast<std::size_t>(at) * plane, out.data(),
                static_cast<std::size_t>(bs) * plane * sizeof(float));
    evals += local;
  });
  if (forward_evals) *forward_evals += evals.load();
  return adv;
}

// Mean per-step ASR over several evaluation seeds; also returns the per-seed
// reports for CSV emission.
std::vector<AttackReport> asr_over_seeds(const RunContext& ctx, const Model& model,
                                         const Tensor& clean, const Tensor& adv,
                                         const std::vector<int>& labels,
                                         const std::vector<int>& targets, int glances_eval,
                                         float noise_std, int seeds) {
  std::vector<AttackReport> reports;
  for (int s = 0; s < seeds; ++s) {
    AsrOptions opt;
    opt.glances_eval = glances_eval;
    opt.noise_std = noise_std;
    opt.eval_seed = ctx.pool.stream_seed("eval", static_cast<std::uint64_t>(s));
    reports.push_back(asr(model, clean, adv, labels, targets, opt));
  }
  return reports;
}

// ---- subcommands ----------------------------------------------------------------

int cmd_gen_data(RunContext& ctx) {
  for (int split = 0; split < 2; ++split) {
    Dataset ds = dataset_from(ctx, split == 1);
    const fs::path root = fs::path(ctx.out_dir) / "data" / ds.split;
    for (const auto& name : ds.class_names) fs::create_directories(root / name);
    for (int i = 0; i < ds.size(); ++i) {
      const auto& item = ds.items[static_cast<std::size_t>(i)];
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%05d.png", i);
      write_png((root / ds.class_names[static_cast<std::size_t>(item.label)] / buf).string(),
                item_to_u8(ds, i));
    }
    std::cout << ds.split << ": " << ds.size() << " images, " << ds.classes
              << " classes, content hash " << hex64(ds.content_hash()) << "\n";
    if (split == 0) ctx.manifest.dataset_hash = hex64(ds.content_hash());
  }
  ctx.note_output((fs::path(ctx.out_dir) / "data").string());
  finish(ctx);
  return 0;
}

int cmd_train(RunContext& ctx, const std::string& variant_flag) {
  ModelConfig mc = model_config_from(ctx, variant_flag);
  Dataset train_set = dataset_from(ctx, false);
  Dataset val_set = dataset_from(ctx, true);
  check(train_set.classes == mc.classes, "train: dataset classes do not match the model");
  ctx.manifest.dataset_hash = hex64(train_set.content_hash());

  Model model = build_model(mc);
  TrainConfig tc = train_config_from(ctx);
  const fs::path ckpt_dir = fs::path(ctx.out_dir) / ("ckpt_" + variant_name(mc.variant));
  fs::create_directories(ckpt_dir);
  tc.checkpoint_dir = ckpt_dir.string();

  std::cout << "training " << variant_name(mc.variant) << " on " << train_set.size()
            << " images (" << mc.classes << " classes)\n";
  const auto log = train(model, train_set, tc);

  const std::string log_path = ctx.out_path("training_log_" + variant_name(mc.variant) + ".csv");
  {
    CsvWriter csv(log_path, "train_log.v1", {"step", "stage", "loss", "reward", "accuracy"});
    for (const auto& row : log)
      csv.row({std::to_string(row.step), std::to_string(row.stage), csv_num(row.loss),
               csv_num(row.reward), csv_num(row.accuracy)});
  }
  ctx.note_output(log_path);
  ctx.note_output((ckpt_dir / "model.ckpt").string());
  ctx.manifest.checkpoint_hash = hash_file_hex((ckpt_dir / "model.ckpt").string());

  const int glances = cfg_int(ctx.cfg, "eval.glances", std::max(4, mc.glances_train));
  const auto acc = evaluate(model, val_set, glances);
  for (std::size_t t = 0; t < acc.size(); ++t)
    std::cout << "val accuracy, step " << (t + 1) << ": " << acc[t] << "\n";
  finish(ctx);
  return 0;
}

int cmd_eval(RunContext& ctx, const std::string& variant_flag, const std::string& ckpt) {
  ModelConfig mc = model_config_from(ctx, variant_flag);
  Model model = build_model(mc);
  load_model(model, ckpt);
  ctx.manifest.checkpoint_hash = hash_file_hex(ckpt);
  Dataset val_set = dataset_from(ctx, true);
  ctx.manifest.dataset_hash = hex64(val_set.content_hash());
  const int glances = cfg_int(ctx.cfg, "eval.glances", 4);
  const auto acc = evaluate(model, val_set, glances);
  const std::string path = ctx.out_path("eval_" + variant_name(mc.variant) + ".csv");
  {
    CsvWriter csv(path, "eval.v1", {"model", "glances", "step", "accuracy"});
    for (std::size_t t = 0; t < acc.size(); ++t) {
      csv.row({variant_name(mc.variant), std::to_string(glances), std::to_string(t + 1),
               csv_num(acc[t])});
      std::cout << "step " << (t + 1) << ": accuracy " << acc[t] << "\n";
    }
  }
  ctx.note_output(path);
  finish(ctx);
  return 0;
}

int cmd_attack(RunContext& ctx, const std::string& variant_flag, const std::string& ckpt,
               int images, int save_images) {
  ModelConfig mc = model_config_from(ctx, variant_flag);
  Model model = build_model(mc);
  load_model(model, ckpt);
  ctx.manifest.checkpoint_hash = hash_file_hex(ckpt);

  Dataset val_set = dataset_from(ctx, true);
  ctx.manifest.dataset_hash = hex64(val_set.content_hash());
  const int m = std::min(images > 0 ? images : cfg_int(ctx.cfg, "attack.images", 50),
                         val_set.size());
  std::vector<int> indices(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) indices[static_cast<std::size_t>(i)] = i;
  Tensor clean = val_set.batch(indices);
  std::vector<int> labels = labels_of(val_set, m);

  AttackConfig ac = attack_config_from(ctx);
  std::vector<int> targets;
  std::vector<int> attack_classes = labels;
  if (ac.targeted) {
    Rng trng = ctx.pool.stream("targets");
    targets = random_targets(labels, mc.classes, trng);
    attack_classes = targets;
  }

  long evals = 0;
  Tensor adv = attack_set(model, clean, attack_classes, ac, ctx.threads, &evals);

  // L-inf and range guarantee, checked before anything is written.
  const float* cv = clean.data();
  const float* av = adv.data();
  for (std::size_t i = 0; i < adv.numel(); ++i) {
    check(std::abs(av[i] - cv[i]) <= ac.epsilon + 1e-7f, "attack: L-inf budget violated");
    check(av[i] >= 0.0f && av[i] <= 1.0f, "attack: range violated");
  }

  const int seeds = cfg_int(ctx.cfg, "eval.seeds", 1);
  const int glances_eval = cfg_int(ctx.cfg, "eval.glances", 24);
  auto reports = asr_over_seeds(ctx, model, clean, adv, labels, targets, glances_eval,
                                mc.fixation_noise_std, seeds);

  const std::string path = ctx.out_path("asr_" + attack_name(ac.kind) + "_" +
                                        variant_name(mc.variant) + ".csv");
  {
    CsvWriter csv(path, "asr.v1",
                  {"model", "attack", "mode", "epsilon", "attack_steps", "eval_seed", "step",
                   "asr", "successes", "denominator"});
    for (int s = 0; s < seeds; ++s) {
      const auto& r = reports[static_cast<std::size_t>(s)];
      for (std::size_t t = 0; t < r.asr.size(); ++t)
        csv.row({variant_name(mc.variant), attack_name(ac.kind),
                 ac.targeted ? "targeted" : "untargeted", csv_num(ac.epsilon),
                 std::to_string(ac.steps), std::to_string(s), std::to_string(t + 1),
                 csv_num(r.asr[t]), std::to_string(r.successes[t]),
                 std::to_string(r.denominator[t])});
    }
  }
  ctx.note_output(path);

  const int save = std::min(save_images, m);
  for (int i = 0; i < save; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "adv_%04d", i);
    Tensor one = slice_image(adv, i);
    write_f32_image(ctx.out_path(std::string(buf) + ".f32"), one);
    write_png(ctx.out_path(std::string(buf) + ".png"), tensor_to_u8(one, 0));
    ctx.note_output(ctx.out_path(std::string(buf) + ".f32"));
  }

  const int t12 = std::min(glances_eval, ac.glances) - 1;
  double mean_asr = 0.0;
  for (const auto& r : reports) mean_asr += r.asr[static_cast<std::size_t>(t12)];
  mean_asr /= seeds;
  std::cout << attack_name(ac.kind) << " " << (ac.targeted ? "targeted" : "untargeted")
            << " eps=" << ac.epsilon << ": ASR at step " << (t12 + 1) << " = " << mean_asr
            << " (" << m << " images, " << evals << " forward evals)\n";
  finish(ctx);
  return 0;
}

int cmd_table2(RunContext& ctx, const std::vector<std::string>& ckpt_specs, int images) {
  std::map<std::string, std::string> ckpts;
  for (const auto& spec : ckpt_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--ckpt expects variant=path, got: " + spec);
    ckpts[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  check(!ckpts.empty(), "table2: at least one --ckpt variant=path required");

  Dataset val_set = dataset_from(ctx, true);
  ctx.manifest.dataset_hash = hex64(val_set.content_hash());
  const int m = std::min(images > 0 ? images : cfg_int(ctx.cfg, "table2.images", 100),
                         val_set.size());
  std::vector<int> indices(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) indices[static_cast<std::size_t>(i)] = i;
  Tensor clean = val_set.batch(indices);
  std::vector<int> labels = labels_of(val_set, m);

  const auto eps_untargeted =
      cfg_list(ctx.cfg, "table2.untargeted_epsilons", {2e-3f, 3e-3f, 5e-3f, 7e-3f});
  const auto eps_targeted =
      cfg_list(ctx.cfg, "table2.targeted_epsilons", {3e-3f, 5e-3f, 7e-3f, 1e-2f});
  const int glances_eval = std::max(24, cfg_int(ctx.cfg, "eval.glances", 24));
  const int seeds = cfg_int(ctx.cfg, "eval.seeds", 1);

  const std::string table_path = ctx.out_path("table2.csv");
  const std::string steps_path = ctx.out_path("asr_steps.csv");
  CsvWriter table(table_path, "table2.v1",
                  {"model", "mode", "epsilon", "asr_step12", "successes", "denominator"});
  std::vector<std::string> step_cols{"model", "mode", "epsilon"};
  for (int t = 1; t <= 24; ++t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "step%02d", t);
    step_cols.emplace_back(buf);
  }
  CsvWriter steps_csv(steps_path, "asr_steps.v1", step_cols);

  for (const auto& [vname, path] : ckpts) {
    ModelConfig mc = model_config_from(ctx, vname);
    Model model = build_model(mc);
    load_model(model, path);
    ctx.manifest.checkpoint_hash = hash_file_hex(path);  // last one wins; all runs logged in CSV

    for (int mode = 0; mode < 2; ++mode) {
      const bool targeted = mode == 1;
      if (targeted && !model.recurrent()) continue;  // targets need the glance dynamics
      const auto& grid = targeted ? eps_targeted : eps_untargeted;
      std::vector<int> targets;
      std::vector<int> attack_classes = labels;
      if (targeted) {
        Rng trng = ctx.pool.stream("targets");
        targets = random_targets(labels, mc.classes, trng);
        attack_classes = targets;
      }
      for (float eps : grid) {
        AttackConfig ac = attack_config_from(ctx);
        ac.kind = AttackKind::pgd;
        ac.targeted = targeted;
        ac.epsilon = eps;
        ac.step_size = 0.0f;
        Tensor adv = attack_set(model, clean, attack_classes, ac, ctx.threads, nullptr);
        auto reports = asr_over_seeds(ctx, model, clean, adv, labels, targets, glances_eval,
                                      mc.fixation_noise_std, seeds);
        std::vector<double> mean(static_cast<std::size_t>(glances_eval), 0.0);
        int succ12 = 0;
        int den12 = 0;
        for (const auto& r : reports) {
          for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += r.asr[t] / seeds;
          succ12 += r.successes[11];
          den12 += r.denominator[11];
        }
        table.row({vname, targeted ? "targeted" : "untargeted", csv_num(eps), csv_num(mean[11]),
                   std::to_string(succ12), std::to_string(den12)});
        std::vector<std::string> row{vname, targeted ? "targeted" : "untargeted", csv_num(eps)};
        for (int t = 0; t < 24; ++t)
          row.push_back(t < glances_eval ? csv_num(mean[static_cast<std::size_t>(t)]) : "");
        steps_csv.row(row);
        std::cout << vname << " " << (targeted ? "targeted" : "untargeted") << " eps=" << eps
                  << " ASR@12=" << mean[11] << "\n";
      }
    }
  }
  table.close();
  steps_csv.close();
  ctx.note_output(table_path);
  ctx.note_output(steps_path);
  finish(ctx);
  return 0;
}

int cmd_probmap(RunContext& ctx, const std::string& variant_flag, const std::string& ckpt,
                int images, int render_first) {
  ModelConfig mc = model_config_from(ctx, variant_flag);
  check(mc.variant != Variant::ff_cnn, "probmap: needs a fixating variant");
  Model model = build_model(mc);
  load_model(model, ckpt);
  ctx.manifest.checkpoint_hash = hash_file_hex(ckpt);
  Dataset val_set = dataset_from(ctx, true);
  ctx.manifest.dataset_hash = hex64(val_set.content_hash());

  ProbMapConfig pc;
  pc.grid_px = cfg_int(ctx.cfg, "probmap.grid_px", 32);
  pc.epsilon = static_cast<float>(cfg_num(ctx.cfg, "probmap.epsilon", 1e-2));
  pc.steps = cfg_int(ctx.cfg, "probmap.steps", 100);
  pc.cell_batch = cfg_int(ctx.cfg, "probmap.cell_batch", 128);
  pc.seed = ctx.pool.stream_seed("attack");

  const int m = std::min(images > 0 ? images : cfg_int(ctx.cfg, "probmap.images", 20),
                         val_set.size());
  Rng trng = ctx.pool.stream("targets");
  const std::string path = ctx.out_path("probmap_" + variant_name(mc.variant) + ".csv");
  CsvWriter csv(path, "probmap.v1",
                {"image", "model", "target", "affected_one", "affected_two", "peak_one",
                 "peak_two"});
  double mean_one = 0.0;
  double mean_two = 0.0;
  for (int i = 0; i < m; ++i) {
    const int label = val_set.items[static_cast<std::size_t>(i)].label;
    int target = static_cast<int>(trng.below(static_cast<std::uint64_t>(mc.classes - 1)));
    if (target >= label) ++target;
    ProbMapPair pair = probability_map(model, val_set.image(i), target, pc);
    const int a1 = affected_area(pair.one_fix);
    const int a2 = affected_area(pair.two_fix);
    mean_one += a1;
    mean_two += a2;
    const float p1 = *std::max_element(pair.one_fix.values.begin(), pair.one_fix.values.end());
    const float p2 = *std::max_element(pair.two_fix.values.begin(), pair.two_fix.values.end());
    csv.row({std::to_string(i), variant_name(mc.variant), std::to_string(target),
             std::to_string(a1), std::to_string(a2), csv_num(p1), csv_num(p2)});
    if (i < render_first) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "probmap_%s_%03d", variant_name(mc.variant).c_str(), i);
      render_probmap(pair.one_fix, 8, ctx.out_path(std::string(buf) + "_one.png"));
      render_probmap(pair.two_fix, 8, ctx.out_path(std::string(buf) + "_two.png"));
      write_f32_image(ctx.out_path(std::string(buf) + "_adv_one.f32"), pair.adv_one);
      write_f32_image(ctx.out_path(std::string(buf) + "_adv_two.f32"), pair.adv_two);
    }
  }
  csv.close();
  ctx.note_output(path);
  std::cout << variant_name(mc.variant) << ": mean affected cells one-fix " << mean_one / m
            << ", two-fix " << mean_two / m << " (of " << pc.grid_px * pc.grid_px << ")\n";
  finish(ctx);
  return 0;
}

int cmd_visualize(RunContext& ctx, const std::string& variant_flag, const std::string& ckpt) {
  ModelConfig mc = model_config_from(ctx, variant_flag);
  Dataset val_set = dataset_from(ctx, true);
  Tensor image = val_set.image(0);
  const Fixation center{0.5f, 0.5f};

  render_foveation(image, center, mc.foveation, ctx.out_path("foveation.png"));
  render_masks(mc.image_px, center, mc.foveation, ctx.out_path("masks.png"));
  render_grid_scatter(mc.image_px, mc.patch_px, mc.warp_b, center, ctx.out_path("grid.png"));
  render_retinal(image, mc.patch_px, mc.warp_b, center, mc.foveation,
                 ctx.out_path("retinal.png"));
  auto sweep = render_b_sweep(image, mc.patch_px, {8.0f, 12.0f, 16.0f}, center, mc.foveation,
                              ctx.out_path("retina"));
  for (const auto& f : sweep) ctx.note_output(f);

  if (mc.variant != Variant::ff_cnn) {
    Model model = build_model(mc);
    if (!ckpt.empty()) {
      load_model(model, ckpt);
      ctx.manifest.checkpoint_hash = hash_file_hex(ckpt);
    }
    Tape tape;
    Tape::Pause pause(tape);
    EpisodeOptions opt;
    opt.glances = 4;
    opt.fixation_noise_std = 0.0f;
    opt.sample_policy = false;
    opt.record_policy = false;
    Rng rng(0);
    std::vector<int> lab{val_set.items[0].label};
    GlanceTrajectory traj = forward_episode(tape, model, image, lab, opt, rng);
    std::vector<Fixation> fixations;
    for (const auto& step : traj.fixations) fixations.push_back(step[0]);
    render_fixation_overlay(image, fixations, ctx.out_path("fixations.png"));
    ctx.note_output(ctx.out_path("fixations.png"));
  }
  for (const char* f : {"foveation.png", "masks.png", "grid.png", "retinal.png"})
    ctx.note_output(ctx.out_path(f));
  std::cout << "wrote visualizations to " << ctx.out_dir << "\n";
  finish(ctx);
  return 0;
}

int cmd_grad_check(RunContext& ctx, const std::string& variant_flag) {
  ModelConfig mc = model_config_from(ctx, variant_flag);
  Model model = build_model(mc);
  Dataset ds = gen_shapes(ctx.pool.stream_seed("data"), mc.classes, 2, mc.image_px);
  Tensor image = ds.image(0);
  const std::vector<int> labels{ds.items[0].label};
  const int glances = std::min(2, mc.glances_train);
  const std::uint64_t ep_seed = ctx.pool.stream_seed("policy");

  auto loss_at = [&](Tensor& x) {
    Tape tape;
    Tape::Pause pause(tape);
    Rng rng(ep_seed);
    EpisodeOptions opt;
    opt.glances = glances;
    opt.fixation_noise_std = mc.fixation_noise_std;
    opt.sample_policy = true;
    opt.record_policy = false;
    GlanceTrajectory traj = forward_episode(tape, model, x, labels, opt, rng);
    double total = 0.0;
    for (const auto& probs : traj.step_probs)
      total -= std::log(std::max(probs[static_cast<std::size_t>(labels[0])], 1e-12f));
    return total;
  };

  // analytic gradient with the same frozen episode noise
  Tensor x = image;
  x.set_requires_grad(true);
  x.zero_grad();
  Tape tape;
  Rng rng(ep_seed);
  Tensor loss = attack_loss(tape, model, x, labels, false, glances, mc.fixation_noise_std, rng);
  tape.backward(loss);
  std::vector<float> grad(x.grad_view().begin(), x.grad_view().end());
  tape.reset();
  x.set_requires_grad(false);

  // probe the strongest coordinates, where finite differences are best posed
  const std::size_t pool_size = std::min<std::size_t>(64, grad.size());
  std::vector<std::size_t> order(grad.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(pool_size), order.end(),
                    [&](std::size_t a, std::size_t b) { return std::abs(grad[a]) > std::abs(grad[b]); });

  auto loss_shifted = [&](std::size_t i, float h) {
    Tensor xs = image.detached_copy();
    xs.data()[i] += h;
    return loss_at(xs);
  };

  // relu and max-pool kinks inside a stencil bias the quotient; a probe only
  // counts when halving h leaves the central difference nearly unchanged and
  // the one-sided differences agree (a kink at the center fools the central
  // quotient but splits the one-sided ones)
  const float h = 2e-3f;
  Tensor x0 = image.detached_copy();
  const double f0 = loss_at(x0);
  std::vector<double> errs;
  int skipped = 0;
  for (std::size_t k = 0; k < pool_size && errs.size() < 8; ++k) {
    const std::size_t i = order[k];
    const double fp = loss_shifted(i, h), fm = loss_shifted(i, -h);
    const double fp2 = loss_shifted(i, h / 2), fm2 = loss_shifted(i, -h / 2);
    const double c1 = (fp - fm) / (2.0 * h);
    const double c2 = (fp2 - fm2) / static_cast<double>(h);
    const double fwd = (fp2 - f0) / (h / 2.0), bwd = (f0 - fm2) / (h / 2.0);
    const double scale = std::max({std::abs(c1), std::abs(c2), 1e-8});
    if (std::abs(c1 - c2) > 0.02 * scale || std::abs(fwd - bwd) > 0.05 * scale) {
      ++skipped;
      continue;
    }
    const double fd = (4.0 * c2 - c1) / 3.0;  // cancels the h^2 truncation term
    const double rel = std::abs(fd - grad[i]) / std::max(1e-8, std::abs(fd));
    errs.push_back(rel);
    std::cout << "pixel " << i << ": analytic " << grad[i] << ", finite-diff " << fd
              << ", rel err " << rel << "\n";
  }
  std::cout << "probes: " << errs.size() << " clean, " << skipped << " skipped near kinks\n";
  // micro-kinks from the relu stack put a ~2% floor on single-precision
  // whole-episode finite differences; a wrong backward shows up as >50%.
  // the per-primitive checks in the test suite run a float64 reference.
  double worst = 0.0, median = 0.0;
  if (!errs.empty()) {
    worst = *std::max_element(errs.begin(), errs.end());
    std::vector<double> sorted = errs;
    std::sort(sorted.begin(), sorted.end());
    median = sorted[sorted.size() / 2];
  }
  const bool ok = errs.size() >= 4 && worst < 5e-2 && median < 1e-2;
  std::cout << "median rel err " << median << ", max rel err " << worst << (ok ? " (ok)" : " (FAIL)")
            << "\n";
  finish(ctx);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retina-inspired recurrent recognition: data, training, attacks, figures"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key=value config file with [sections]");
  auto* seed_opt = app.add_option("--seed", seed, "root seed for all random streams");
  app.add_option("--out-dir", out_dir,
                 "output directory (default: $SACCADE_OUT_DIR, then ./out)");
  app.add_option("--threads", threads, "worker threads for attack sweeps");
  app.add_option("--set", sets, "override any config key: section.key=value")->take_all();

  std::string variant;
  std::string ckpt;
  int images = 0;
  int save_images = 8;
  int render_first = 4;
  std::vector<std::string> ckpt_specs;

  auto* c_gen = app.add_subcommand("gen-data", "write the synthetic dataset as PNG folders");
  auto* c_train = app.add_subcommand("train", "two-stage training run");
  c_train->add_option("--variant", variant, "retina|crop_s|crop_d|ff_cnn");
  auto* c_eval = app.add_subcommand("eval", "per-step validation accuracy of a checkpoint");
  c_eval->add_option("--variant", variant);
  c_eval->add_option("--ckpt", ckpt)->required();
  auto* c_attack = app.add_subcommand("attack", "run one attack and report per-step ASR");
  c_attack->add_option("--variant", variant);
  c_attack->add_option("--ckpt", ckpt)->required();
  c_attack->add_option("--images", images, "how many validation images to attack");
  c_attack->add_option("--save-images", save_images, "adversarial images to persist");
  auto* c_table2 = app.add_subcommand("table2", "full PGD sweep across models and budgets");
  c_table2->add_option("--ckpt", ckpt_specs, "variant=path, repeatable")->required();
  c_table2->add_option("--images", images);
  auto* c_probmap = app.add_subcommand("probmap", "targeted-attack probability maps");
  c_probmap->add_option("--variant", variant);
  c_probmap->add_option("--ckpt", ckpt)->required();
  c_probmap->add_option("--images", images);
  c_probmap->add_option("--render-first", render_first);
  auto* c_viz = app.add_subcommand("visualize", "foveation, masks, grids, fixation overlays");
  c_viz->add_option("--variant", variant);
  c_viz->add_option("--ckpt", ckpt);
  auto* c_grad = app.add_subcommand("grad-check",
                                    "episode gradient vs finite differences, frozen noise");
  c_grad->add_option("--variant", variant);

  CLI11_PARSE(app, argc, argv);

  try {
    auto ctx = [&](const char* name) {
      return make_context(name, config_path, seed, seed_opt->count() > 0, out_dir, threads, sets);
    };
    if (c_gen->parsed()) {
      auto c = ctx("gen-data");
      return cmd_gen_data(c);
    }
    if (c_train->parsed()) {
      auto c = ctx("train");
      return cmd_train(c, variant);
    }
    if (c_eval->parsed()) {
      auto c = ctx("eval");
      return cmd_eval(c, variant, ckpt);
    }
    if (c_attack->parsed()) {
      auto c = ctx("attack");
      return cmd_attack(c, variant, ckpt, images, save_images);
    }
    if (c_table2->parsed()) {
      auto c = ctx("table2");
      return cmd_table2(c, ckpt_specs, images);
    }
    if (c_probmap->parsed()) {
      auto c = ctx("probmap");
      return cmd_probmap(c, variant, ckpt, images, render_first);
    }
    if (c_viz->parsed()) {
      auto c = ctx("visualize");
      return cmd_visualize(c, variant, ckpt);
    }
    if (c_grad->parsed()) {
      auto c = ctx("grad-check");
      return cmd_grad_check(c, variant);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
