#pragma once

#include <cstdint>
#include <vector>

#include "voxssl/autodiff.hpp"
#include "voxssl/model.hpp"
#include "voxssl/patches.hpp"
#include "voxssl/phantom.hpp"

namespace voxssl {

/// The four stochastic views of one aligned crop pair, plus the pristine
/// reconstruction targets. The masked views (u from crop Q, r from crop K)
/// feed the online encoder, which reads their visible rows only; the strongly
/// augmented views (w from Q, v from K) feed the target encoder in full.
/// Targets are kept separate from the encoder inputs so that hiding a token
/// from the encoder can never leak its voxels into any loss term.
struct ViewBundle {
  Tensor view_u_tokens;  ///< masked view of crop Q, N x V
  Tensor view_r_tokens;  ///< masked view of crop K
  Tensor view_w_tokens;  ///< strong view of crop Q
  Tensor view_v_tokens;  ///< strong view of crop K
  MaskSpec mask_u, mask_r;
  Tensor targets_q;  ///< per-token standardized voxels of crop Q, N x V
  Tensor targets_k;
};

/// Builds the four views deterministically from (pair, mask_ratio, seed):
/// token masks and the two strong augmentations each draw from their own
/// derived stream.
ViewBundle make_view_bundle(const CropPair& pair, const PatchGrid& grid, double mask_ratio,
                            std::uint64_t seed);

struct LossOptions {
  bool use_inter = true;  ///< cross-crop global consistency term
  bool use_align = true;  ///< cross-attention alignment for the dense term
                          ///< (off: pooled-feature consistency instead)
  bool infonce = false;   ///< contrast globals against the batch instead of
                          ///< the paired cosine
  double temperature = 0.2;  ///< InfoNCE softmax temperature
  double w_recon = 1.0;
  double w_inter = 1.0;
  double w_intra = 1.0;
};

/// Batch-mean loss terms. `total` is the weighted sum and the only node meant
/// for backward(); the per-term scalars share its subgraphs.
struct LossBreakdown {
  Var total;
  Var recon;
  Var inter;
  Var intra;
};

/// Mean squared error over the masked token rows only: predictions and
/// standardized targets are compared on `masked` rows, averaged over every
/// masked voxel. Empty masks contribute zero.
Var masked_reconstruction(const Var& prediction, const Tensor& targets,
                          const std::vector<std::size_t>& masked);

/// The gradient-stopped training targets of one batch, captured at the
/// current parameters: teacher globals and the dense alignment targets per
/// bundle. Passing a snapshot into compute_batch_loss pins these values, so
/// a finite-difference probe of the loss sees exactly the objective the
/// optimizer descends (the stop-gradient paths stay fixed); values and
/// gradients are unchanged at the capture point.
struct FrozenTargets {
  struct PerBundle {
    Tensor cls_w, cls_v;      ///< teacher head outputs, 1 x head_out
    Tensor dense_q, dense_k;  ///< dense targets for the u / r views
  };
  std::vector<PerBundle> bundles;
};

FrozenTargets snapshot_targets(ModelSession& session, const std::vector<ViewBundle>& batch,
                               const LossOptions& opt);

/// Batchwise contrastive loss: each anchor row must identify its partner row
/// among all partners. Rows are l2-normalized, partners are gradient-stopped,
/// similarities are scaled by 1/temperature. Requires at least two rows.
Var infonce_pair_loss(const Var& anchors, const Var& partners, double temperature);

/// Runs the full four-view forward for every bundle and assembles the three
/// training terms (reconstruction, cross-crop global consistency, dense
/// alignment consistency), averaged over the batch. Throws NumericError if
/// the total is not finite. With `frozen` given, the gradient-stopped targets
/// come from the snapshot instead of being recomputed.
LossBreakdown compute_batch_loss(ModelSession& session, const std::vector<ViewBundle>& batch,
                                 const LossOptions& opt, const FrozenTargets* frozen = nullptr);

}  // namespace voxssl
