#pragma once

#include <cstddef>
#include <string>

#include "voxssl/downstream.hpp"
#include "voxssl/trainer.hpp"

namespace voxssl {

/// Everything one run needs: the pretraining setup plus the supervised
/// fine-tune, probe and ablation knobs that reuse its phantom, geometry and
/// architecture. The shared sections (phantom, crop/patch extents, model,
/// optimizer betas/eps) live once in `trainer` and are mirrored into
/// `finetune` and `probe` whenever a config is parsed or a preset is built,
/// as are the model token geometry fields derived from the extents.
struct RunConfig {
  TrainerConfig trainer;
  FinetuneConfig finetune;
  ProbeConfig probe;
  std::size_t ablate_seeds = 3;
};

/// Recomputes the derived/shared fields described on RunConfig. Called by
/// parse_config and preset; call it again after mutating extents or shared
/// sections by hand. Throws ConfigError when the patch grid does not tile
/// the crop.
void finalize_config(RunConfig& cfg);

/// Parses the flat key=value format:
///   - one `key = value` pair per line, '#' starts a comment, blanks ignored
///   - every key must be known (unknown keys are errors, never skipped)
///   - a key may appear at most once
///   - unset keys keep the desk-scale defaults
/// Throws ConfigError with the offending line on any violation.
RunConfig parse_config(const std::string& text);

/// Renders every key in sorted order at full precision. The result parses
/// back to an identical configuration and an identical rendering, and is
/// what pretraining embeds in checkpoints and writes as config.resolved.
std::string serialize_config(const RunConfig& cfg);

/// Named baseline configurations: "desk" (the defaults: 32x32x16 crops of
/// 64x64x32 phantoms, 16 tokens of 8x8x16 voxels) and "full-scale"
/// (192x192x64 crops, 16x16x16 patches, 576 tokens, long schedule). Throws
/// ConfigError for unknown names.
RunConfig preset(const std::string& name);

}  // namespace voxssl
