#include "voxssl/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "voxssl/checkpoint.hpp"
#include "voxssl/errors.hpp"
#include "voxssl/ops.hpp"
#include "voxssl/rng.hpp"

namespace voxssl {

namespace {
// stream tags for the run's derived randomness
constexpr std::uint64_t kPoolTag = 0x504f4f4cull;    // data pool
constexpr std::uint64_t kInitTag = 0x494e4954ull;    // parameter init
constexpr std::uint64_t kBatchTag = 0x42415443ull;   // per-step pair choice
constexpr std::uint64_t kBundleTag = 0x42554e44ull;  // per-slot view seeds
}  // namespace

void TrainerConfig::validate() const {
  const PatchGrid grid = [&] {
    try {
      return PatchGrid(crop_extents, patch_extents);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("trainer: ") + e.what());
    }
  }();
  if (grid.token_count() != model.n_tokens) {
    throw ConfigError("trainer: crop/patch grid yields " + std::to_string(grid.token_count()) +
                      " tokens but the model expects " + std::to_string(model.n_tokens));
  }
  if (grid.patch_voxels() != model.patch_voxels) {
    throw ConfigError("trainer: patch has " + std::to_string(grid.patch_voxels()) +
                      " voxels but the model expects " + std::to_string(model.patch_voxels));
  }
  model.validate();
  for (std::size_t a = 0; a < 3; ++a) {
    if (crop_extents[a] > phantom.extents[a]) {
      throw ConfigError("trainer: crop exceeds phantom extents on axis " + std::to_string(a));
    }
  }
  if (pool_size == 0) throw ConfigError("trainer: pool_size must be positive");
  if (batch_size == 0) throw ConfigError("trainer: batch_size must be positive");
  if (total_steps == 0) throw ConfigError("trainer: total_steps must be positive");
  if (warmup_steps >= total_steps) {
    throw ConfigError("trainer: warmup_steps must be below total_steps");
  }
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw ConfigError("trainer: mask_ratio must lie in [0, 1)");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("trainer: clip_norm must be positive");
  if (!(ema_base >= 0.0) || !(ema_base <= 1.0)) {
    throw ConfigError("trainer: ema_base must lie in [0, 1]");
  }
  if (!(min_lr >= 0.0) || !(adamw.lr > 0.0) || min_lr > adamw.lr) {
    throw ConfigError("trainer: need 0 <= min_lr <= peak lr, peak lr > 0");
  }
  if (loss.infonce && batch_size < 2) {
    throw ConfigError("trainer: the batchwise contrastive variant needs batch_size >= 2");
  }
}

Trainer::Trainer(TrainerConfig cfg) : cfg_(std::move(cfg)), opt_(cfg_.adamw) {
  cfg_.validate();
  pool_.reserve(cfg_.pool_size);
  for (std::size_t i = 0; i < cfg_.pool_size; ++i) {
    const std::uint64_t anatomy = Rng::mix({cfg_.seed, kPoolTag, i, 0});
    const std::uint64_t deform_q = Rng::mix({cfg_.seed, kPoolTag, i, 1});
    const std::uint64_t deform_k = Rng::mix({cfg_.seed, kPoolTag, i, 2});
    pool_.push_back(sample_aligned_crops(cfg_.phantom, anatomy, {deform_q, deform_k},
                                         cfg_.crop_extents, cfg_.jitter));
  }
  params_ = init_params(cfg_.model, Rng::mix({cfg_.seed, kInitTag}));
  if (!cfg_.resume_from.empty()) resume(cfg_.resume_from);
}

std::vector<ViewBundle> Trainer::make_step_batch(std::uint64_t step) const {
  const PatchGrid grid(cfg_.crop_extents, cfg_.patch_extents);
  std::vector<ViewBundle> batch;
  batch.reserve(cfg_.batch_size);
  Rng pick = Rng::derive(cfg_.seed, {kBatchTag, step});
  for (std::size_t slot = 0; slot < cfg_.batch_size; ++slot) {
    const std::size_t idx = static_cast<std::size_t>(
        pick.uniform_int(0, static_cast<std::int64_t>(pool_.size()) - 1));
    batch.push_back(make_view_bundle(pool_[idx], grid, cfg_.mask_ratio,
                                     Rng::mix({cfg_.seed, kBundleTag, step, slot})));
  }
  return batch;
}

StepStats Trainer::train_step() {
  const std::uint64_t step = step_;
  const std::vector<ViewBundle> batch = make_step_batch(step);

  ModelSession session = ModelSession::trainable(cfg_.model, params_);
  const LossBreakdown loss = compute_batch_loss(session, batch, cfg_.loss);
  backward(loss.total);

  std::map<std::string, Tensor> grads;
  for (const auto& [name, value] : params_) {
    (void)value;
    if (!is_target_param(name)) grads.emplace(name, session.leaf(name).grad());
  }

  // the target branch tracks the online values from before this step's update
  const double ema_m = ema_schedule(step, cfg_.total_steps, cfg_.ema_base);
  ema_update(params_, ema_m);

  const double grad_norm = clip_global_norm(grads, cfg_.clip_norm);
  const double lr = lr_schedule(step, cfg_.warmup_steps, cfg_.total_steps, cfg_.adamw.lr,
                                cfg_.min_lr);
  opt_.step(params_, grads, lr / cfg_.adamw.lr);

  StepStats s;
  s.step = step;
  s.recon = loss.recon.item();
  s.inter = loss.inter.item();
  s.intra = loss.intra.item();
  s.total = loss.total.item();
  s.lr = lr;
  s.ema_m = ema_m;
  s.grad_norm = grad_norm;
  step_ = step + 1;
  return s;
}

std::string csv_row(const StepStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", s.step,
                s.recon, s.inter, s.intra, s.total, s.lr, s.ema_m, s.grad_norm);
  return buf;
}

std::vector<StepStats> Trainer::run() {
  namespace fs = std::filesystem;
  const bool artifacts = !cfg_.out_dir.empty();
  std::ofstream csv;
  if (artifacts) {
    fs::create_directories(cfg_.out_dir);
    const fs::path csv_path = fs::path(cfg_.out_dir) / "losses.csv";
    // rewrite the prefix already covered (empty on a fresh start) so the file
    // is identical to an uninterrupted run's
    csv.open(csv_path, std::ios::trunc);
    if (!csv) throw ArtifactError("trainer: cannot open " + csv_path.string());
    csv << "step,recon,inter,intra,total,lr,ema_m,grad_norm\n";
    for (const StepStats& s : history_) csv << csv_row(s) << "\n";
    csv.flush();
  }

  std::vector<StepStats> produced;
  produced.reserve(cfg_.total_steps - step_);
  while (step_ < cfg_.total_steps) {
    const StepStats s = train_step();
    history_.push_back(s);
    produced.push_back(s);
    if (artifacts) {
      csv << csv_row(s) << "\n";
      csv.flush();
      const bool cadence = cfg_.checkpoint_every != 0 && step_ % cfg_.checkpoint_every == 0;
      if (cadence || step_ == cfg_.total_steps) {
        save_checkpoint(std::filesystem::path(cfg_.out_dir) /
                        ("checkpoint-" + std::to_string(step_) + ".bin"));
      }
    }
  }
  return produced;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.step = step_;
  ckpt.config_text = cfg_.config_text;
  ckpt.params = params_;
  ckpt.opt_m = opt_.moment1();
  ckpt.opt_v = opt_.moment2();
  ckpt.opt_t = opt_.steps();
  write_checkpoint(path, ckpt);
}

void Trainer::resume(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.config_text != cfg_.config_text) {
    throw ArtifactError("trainer: checkpoint was produced by a different configuration; refusing "
                        "to resume from " + path.string());
  }
  if (ckpt.step > cfg_.total_steps) {
    throw ArtifactError("trainer: checkpoint is beyond total_steps");
  }
  for (const auto& [name, t] : params_) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end() || !it->second.same_shape(t)) {
      throw ArtifactError("trainer: checkpoint is missing parameter " + name);
    }
  }
  params_ = ckpt.params;
  opt_.restore(ckpt.opt_m, ckpt.opt_v, ckpt.opt_t);
  step_ = ckpt.step;
  // the losses.csv prefix for the completed steps is taken from the existing
  // file; a %.17g row parses back to the exact double and reprints to the
  // identical text, so a resumed file matches an uninterrupted run's
  history_.clear();
  if (!cfg_.out_dir.empty()) {
    const std::filesystem::path csv_path = std::filesystem::path(cfg_.out_dir) / "losses.csv";
    std::ifstream in(csv_path);
    if (in) {
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        StepStats s;
        if (std::sscanf(line.c_str(), "%" SCNu64 ",%lg,%lg,%lg,%lg,%lg,%lg,%lg", &s.step, &s.recon,
                        &s.inter, &s.intra, &s.total, &s.lr, &s.ema_m, &s.grad_norm) == 8 &&
            s.step < step_) {
          history_.push_back(s);
        }
      }
    }
    if (history_.size() != step_) {
      throw ArtifactError("trainer: losses.csv does not cover the checkpointed steps (have " +
                          std::to_string(history_.size()) + " rows, need " +
                          std::to_string(step_) + ")");
    }
  }
}

std::map<std::string, double> term_gradient_norms(const ModelConfig& model_cfg,
                                                  const LossOptions& opt, const ParamMap& params,
                                                  const std::vector<ViewBundle>& batch) {
  std::map<std::string, double> out;
  const auto norm_of = [&](const Var& term, ModelSession& session) {
    backward(term);
    double sq = 0.0;
    for (const auto& [name, value] : params) {
      (void)value;
      if (is_target_param(name)) continue;
      const Tensor grad = session.leaf(name).grad();
      for (double g : grad.vec()) sq += g * g;
    }
    return std::sqrt(sq);
  };
  {
    ModelSession s = ModelSession::trainable(model_cfg, params);
    out["recon"] = norm_of(compute_batch_loss(s, batch, opt).recon, s);
  }
  {
    ModelSession s = ModelSession::trainable(model_cfg, params);
    out["inter"] = norm_of(compute_batch_loss(s, batch, opt).inter, s);
  }
  {
    ModelSession s = ModelSession::trainable(model_cfg, params);
    out["intra"] = norm_of(compute_batch_loss(s, batch, opt).intra, s);
  }
  return out;
}

}  // namespace voxssl
