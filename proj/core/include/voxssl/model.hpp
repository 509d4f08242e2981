#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "voxssl/autodiff.hpp"
#include "voxssl/gradcheck.hpp"
#include "voxssl/patches.hpp"

namespace voxssl {

/// Architecture hyperparameters for the full pretraining model: a visible-token
/// transformer encoder, a narrower reconstruction decoder, an exponential-
/// moving-average target encoder, projection heads, and the cross-attention
/// alignment block.
struct ModelConfig {
  std::size_t patch_voxels = 1024;  ///< voxels per token
  std::size_t n_tokens = 16;        ///< tokens per crop
  std::size_t embed_dim = 64;       ///< encoder width D
  std::size_t depth = 2;            ///< encoder blocks
  std::size_t heads = 4;            ///< encoder attention heads
  std::size_t mlp_ratio = 4;        ///< feed-forward expansion
  std::size_t decoder_dim = 32;     ///< decoder width
  std::size_t decoder_depth = 2;
  std::size_t decoder_heads = 4;
  std::size_t head_hidden = 64;     ///< projection-head hidden width
  std::size_t head_out = 32;        ///< projection-head output width
  std::size_t align_dim = 64;       ///< alignment-space width C

  /// Throws ConfigError on inconsistent dimensions (e.g. heads not dividing
  /// the width they attend over).
  void validate() const;
};

/// Creates every learnable tensor, keyed by a dotted name. Online parameters
/// live under "enc.", "dec.", "casa." and "head_s."; the target branch is an
/// exact initial copy under "tgt.enc." and "head_t.". Weights are N(0, 0.02),
/// biases zero, normalization gains one. Deterministic in (cfg, seed), and
/// independent of creation order (each tensor draws from a stream derived
/// from its own name).
ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed);

/// True for parameters of the target branch ("tgt.enc." / "head_t.").
bool is_target_param(const std::string& name);

/// (target, online) name pairs coupled by the moving average.
std::vector<std::pair<std::string, std::string>> ema_pairs(const ParamMap& params);

/// In-place moving-average step: target += (1 - momentum) * (online - target),
/// elementwise, for every coupled pair. Call with the pre-update online values.
void ema_update(ParamMap& params, double momentum);

struct DecodeResult {
  Var features;    ///< N x D token features for alignment and pooling
  Var prediction;  ///< N x patch_voxels voxel reconstruction
};

struct AlignResult {
  Var aligned;    ///< R x align_dim aligned features, one row per query
  Var attention;  ///< R x N attention weights (rows sum to 1)
};

/// One forward-pass scope: caches a leaf Var per parameter name so repeated
/// uses share a node (gradients accumulate automatically). Leaves present in
/// the adopted map are used as-is; names resolved through `constants` become
/// non-gradient leaves on first use.
class ModelSession {
 public:
  /// Adopts externally created leaves (e.g. from a gradient checker); any
  /// parameter not present falls back to `constants` when given.
  ModelSession(const ModelConfig& cfg, VarMap leaves, const ParamMap* constants = nullptr);

  /// Fresh leaves for every parameter, all requiring gradients (including the
  /// target branch, whose gradients must come out identically zero).
  static ModelSession trainable(const ModelConfig& cfg, const ParamMap& params);

  const ModelConfig& config() const { return cfg_; }
  VarMap& leaves() { return leaves_; }
  Var leaf(const std::string& name);

  /// Runs the encoder under `prefix` ("enc." or "tgt.enc.") over the listed
  /// token rows only. Masked-out rows of `tokens` are never read. Output is
  /// |visible| x D, final layer norm applied.
  Var encode_visible(const Tensor& tokens, const std::vector<std::size_t>& visible,
                     const std::string& prefix = "enc.");

  /// Full-sequence encoding (every token visible).
  Var encode_full(const Tensor& tokens, const std::string& prefix);

  /// Decodes visible-token features back to the full sequence: a learned mask
  /// token fills the missing rows, decoder position embeddings are added, and
  /// the decoder stack produces both token features (projected back to D) and
  /// the voxel reconstruction.
  DecodeResult decode(const Var& visible_features, const MaskSpec& mask);

  /// Three-layer projection head under `prefix` ("head_s." or "head_t.") with
  /// row-wise l2-normalized output. Accepts a single feature vector or a
  /// matrix of row features.
  Var head(const Var& x, const std::string& prefix);

  /// Cross-attention alignment: queries (R x D) attend over `source` (N x D);
  /// q = LN(queries) Wq, k = LN(source) Wk, values = LN(source) Wv, attention
  /// = softmax(q k^T / sqrt(align_dim)), output = linear(attention . values).
  /// The same weights serve student- and teacher-sourced calls.
  AlignResult align(const Var& queries, const Var& source);

 private:
  Var transformer(Var x, const std::string& prefix, std::size_t depth, std::size_t heads);

  ModelConfig cfg_;
  VarMap leaves_;
  const ParamMap* constants_ = nullptr;
};

}  // namespace voxssl
