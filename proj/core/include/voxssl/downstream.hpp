#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxssl/gradcheck.hpp"
#include "voxssl/model.hpp"
#include "voxssl/optim.hpp"
#include "voxssl/patches.hpp"
#include "voxssl/phantom.hpp"
#include "voxssl/trainer.hpp"

namespace voxssl {

/// Labeled example for supervised evaluation: a centered window of a freshly
/// synthesized phantom (anatomy and deformation derived from `seed`).
/// Intensity and labels are preserved; organ centroids are recomputed for the
/// window. Throws std::invalid_argument when the window exceeds the phantom
/// extents.
Volume labeled_crop(const PhantomConfig& cfg, const std::array<std::size_t, 3>& crop_extents,
                    std::uint64_t seed);

/// Parameters of the dense segmentation head: two cell-splitting refinement
/// stages (each a linear map from one cell vector to its eight sub-cell
/// vectors, with GELU) and a per-cell linear classifier. Names live under
/// "seg.". Weight initialization is fan-balanced; biases start at zero.
ParamMap init_seg_head(const ModelConfig& cfg, std::size_t n_classes, std::uint64_t seed);

/// Per-token class targets on the 4x4x4 cell grid inside each patch: the
/// majority voxel label of each cell, ties broken toward the smaller label.
/// Cells are indexed in nested coarse-to-fine order: octant first, sub-octant
/// second, each octant index built as (cx * 2 + cy) * 2 + cz. Requires labels
/// and patch extents divisible by 4.
std::vector<std::size_t> microcell_targets(const Volume& vol, const PatchGrid& grid);

/// Broadcast of per-cell labels (nested order, 64 per token) back to a voxel
/// label field of the grid's volume extents.
std::vector<std::uint8_t> microcells_to_voxels(const std::vector<std::size_t>& cells,
                                               const PatchGrid& grid);

/// Head forward pass: token features (N x D) to per-cell class logits
/// ((N * 64) x n_classes), rows in the nested cell order of
/// microcell_targets.
Var seg_head_logits(ModelSession& session, const Var& features, std::size_t n_classes);

/// Mean foreground overlap: the average over labels 1..n_classes-1 of the
/// per-label overlap score. A label absent from both volumes counts as
/// perfect agreement for that label.
double mean_foreground_dice(const std::vector<std::uint8_t>& pred,
                            const std::vector<std::uint8_t>& truth, std::size_t n_classes);

/// Supervised segmentation training on labeled crops.
struct FinetuneConfig {
  PhantomConfig phantom;
  std::array<std::size_t, 3> crop_extents{32, 32, 16};
  std::array<std::size_t, 3> patch_extents{8, 8, 16};
  ModelConfig model;
  std::size_t n_classes = 5;  ///< background + organ labels
  std::size_t train_volumes = 6;
  std::size_t eval_volumes = 4;
  std::uint64_t steps = 150;
  std::size_t batch_size = 2;
  AdamWConfig adamw;  ///< adamw.lr is the peak rate
  double min_lr = 1e-4;
  std::uint64_t warmup_steps = 10;
  double clip_norm = 3.0;
  std::uint64_t seed = 0;

  /// Cross-field consistency; throws ConfigError.
  void validate() const;
};

struct FinetuneResult {
  double mean_dice = 0.0;          ///< foreground mean over held-out volumes
  double mean_surface_dice = 0.0;  ///< tolerance-1 boundary agreement, same mean
  std::vector<double> per_volume_dice;
  std::vector<double> train_losses;  ///< one batch loss per step
  ParamMap params;                   ///< trained encoder and head
};

/// Trains encoder plus segmentation head jointly with per-cell cross-entropy
/// and scores held-out volumes. `pretrained` supplies the encoder weights
/// (its "enc." tree); nullptr starts the encoder from random initialization.
/// Head initialization, data, and batching depend only on the config, so two
/// arms with the same config differ in nothing but the encoder start.
FinetuneResult finetune_seg(const FinetuneConfig& cfg, const ParamMap* pretrained);

/// Predicted voxel labels for one volume under trained parameters.
std::vector<std::uint8_t> predict_labels(const FinetuneConfig& cfg, const ParamMap& params,
                                         const Volume& vol);

/// Volume-level anomaly detection by linear probing: half of the volumes
/// (alternating) receive a synthetic bright compact blob; the frozen
/// encoder's mean-pooled features feed a logistic score fit by full-batch
/// gradient descent on the training split.
struct ProbeConfig {
  PhantomConfig phantom;
  std::array<std::size_t, 3> crop_extents{32, 32, 16};
  std::array<std::size_t, 3> patch_extents{8, 8, 16};
  ModelConfig model;
  std::size_t train_volumes = 24;
  std::size_t eval_volumes = 24;
  std::uint64_t gd_steps = 400;
  double gd_lr = 0.5;
  std::uint64_t seed = 0;

  void validate() const;  ///< ConfigError
};

/// Held-out ranking quality of the probe (0.5 = chance, 1 = perfect).
/// `encoder` supplies frozen "enc." weights; nullptr uses a random encoder.
double classification_probe_auc(const ProbeConfig& cfg, const ParamMap* encoder);

/// One cell of the loss-switch ablation grid.
struct AblationCell {
  bool use_inter = true;
  bool use_align = true;
  bool infonce = false;
  double mean_dsc = 0.0;
  double std_dsc = 0.0;
  std::size_t seeds = 0;
};

struct AblationConfig {
  TrainerConfig pretrain;   ///< template run; loss switches replaced per cell
  FinetuneConfig finetune;  ///< template; seed shifted per repetition
  std::size_t n_seeds = 3;
};

/// Pretrains and fine-tunes every combination of the three loss switches
/// (eight cells), n_seeds repetitions each, reporting the mean and population
/// standard deviation of the held-out overlap score. The pretraining template
/// needs batch_size >= 2 so the batchwise-contrastive cells validate.
std::vector<AblationCell> ablation_matrix(const AblationConfig& cfg);

/// CSV rendering with header use_inter,use_align,contrastive,mean_dsc,
/// std_dsc,seeds; the contrastive column reads "cosine" or "infonce".
std::string ablation_csv(const std::vector<AblationCell>& cells);

}  // namespace voxssl
