#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "voxssl/losses.hpp"
#include "voxssl/model.hpp"
#include "voxssl/optim.hpp"
#include "voxssl/phantom.hpp"

namespace voxssl {

/// Complete description of one pretraining run. Everything downstream of the
/// seed is deterministic: data pool, per-step batches, masks, augmentations,
/// initialization and optimization.
struct TrainerConfig {
  PhantomConfig phantom;
  std::array<std::size_t, 3> crop_extents{32, 32, 16};
  std::array<std::size_t, 3> patch_extents{8, 8, 16};
  std::size_t pool_size = 32;  ///< aligned crop pairs in the data pool
  std::size_t jitter = 2;      ///< landmark jitter when sampling pairs
  double mask_ratio = 0.75;

  ModelConfig model;
  LossOptions loss;

  AdamWConfig adamw;  ///< adamw.lr is the peak rate
  double min_lr = 1e-5;
  std::uint64_t warmup_steps = 100;
  std::uint64_t total_steps = 2000;
  std::size_t batch_size = 4;
  double clip_norm = 3.0;
  double ema_base = 0.996;  ///< target momentum at step 0 (ramps toward 1)

  std::uint64_t checkpoint_every = 500;  ///< 0 = only the final checkpoint
  std::uint64_t seed = 0;
  std::string out_dir;      ///< artifact directory; empty = no files written
  std::string resume_from;  ///< checkpoint path; empty = fresh start
  std::string config_text;  ///< resolved snapshot embedded in checkpoints

  /// Cross-field consistency (crop/patch/model agreement, schedules, batch).
  /// Throws ConfigError.
  void validate() const;
};

/// Per-step record; exactly the columns of losses.csv.
struct StepStats {
  std::uint64_t step = 0;
  double recon = 0, inter = 0, intra = 0, total = 0;
  double lr = 0, ema_m = 0, grad_norm = 0;
};

/// Drives a full run: owns parameters, optimizer state and the data pool.
class Trainer {
 public:
  explicit Trainer(TrainerConfig cfg);

  const TrainerConfig& config() const { return cfg_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }
  std::uint64_t step() const { return step_; }
  const std::vector<CropPair>& pool() const { return pool_; }

  /// The batch the given step trains on (pure function of config and step).
  std::vector<ViewBundle> make_step_batch(std::uint64_t step) const;

  /// Executes one training step: forward, backward, target update with the
  /// pre-step online values, gradient clipping, optimizer step. Advances the
  /// step counter and returns the record.
  StepStats train_step();

  /// Runs from the current step to total_steps, writing losses.csv rows and
  /// periodic checkpoints when out_dir is set. Returns every record produced
  /// by this call.
  std::vector<StepStats> run();

  /// Writes a checkpoint capturing the current state.
  void save_checkpoint(const std::filesystem::path& path) const;

 private:
  void resume(const std::filesystem::path& path);

  TrainerConfig cfg_;
  ParamMap params_;
  AdamW opt_;
  std::uint64_t step_ = 0;
  std::vector<CropPair> pool_;
  std::vector<StepStats> history_;  ///< rows already covered by losses.csv
};

/// Formats one losses.csv row (no newline): step plus the seven metric
/// columns at full precision.
std::string csv_row(const StepStats& s);

/// l2 gradient norm of each loss term alone at the given parameters; keys
/// "recon", "inter", "intra". Three separate backward passes; diagnostics
/// only, never part of training.
std::map<std::string, double> term_gradient_norms(const ModelConfig& model_cfg,
                                                  const LossOptions& opt, const ParamMap& params,
                                                  const std::vector<ViewBundle>& batch);

}  // namespace voxssl
