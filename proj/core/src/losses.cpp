#include "voxssl/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "voxssl/augment.hpp"
#include "voxssl/errors.hpp"
#include "voxssl/ops.hpp"
#include "voxssl/rng.hpp"

namespace voxssl {

namespace {
// stream tags for the four views of one bundle
constexpr std::uint64_t kMaskU = 0x5530ull;
constexpr std::uint64_t kMaskR = 0x5230ull;
constexpr std::uint64_t kStrongW = 0x5730ull;
constexpr std::uint64_t kStrongV = 0x5630ull;
}  // namespace

ViewBundle make_view_bundle(const CropPair& pair, const PatchGrid& grid, double mask_ratio,
                            std::uint64_t seed) {
  if (pair.q.extents != grid.vol_extents || pair.k.extents != grid.vol_extents) {
    throw std::invalid_argument("make_view_bundle: crop extents do not match the patch grid");
  }
  ViewBundle b;
  const Tensor tokens_q = patchify(pair.q, grid);
  const Tensor tokens_k = patchify(pair.k, grid);
  b.targets_q = normalize_targets(tokens_q);
  b.targets_k = normalize_targets(tokens_k);
  b.view_u_tokens = tokens_q;
  b.view_r_tokens = tokens_k;
  b.mask_u = mask_random(grid, mask_ratio, Rng::mix({seed, kMaskU}));
  b.mask_r = mask_random(grid, mask_ratio, Rng::mix({seed, kMaskR}));
  const AugmentationSpec spec_w =
      sample_strong_augmentation(pair.q.extents, Rng::mix({seed, kStrongW}));
  const AugmentationSpec spec_v =
      sample_strong_augmentation(pair.k.extents, Rng::mix({seed, kStrongV}));
  b.view_w_tokens = patchify(augment_strong(pair.q, spec_w), grid);
  b.view_v_tokens = patchify(augment_strong(pair.k, spec_v), grid);
  return b;
}

Var masked_reconstruction(const Var& prediction, const Tensor& targets,
                          const std::vector<std::size_t>& masked) {
  if (masked.empty()) return Var::leaf(Tensor::scalar(0.0), false, "recon0");
  if (prediction.shape() != targets.shape()) {
    throw std::invalid_argument("masked_reconstruction: prediction/target shape mismatch");
  }
  const Var pred_m = gather_rows(prediction, masked);
  Tensor tgt_m({masked.size(), targets.cols()});
  for (std::size_t i = 0; i < masked.size(); ++i) {
    const double* src = targets.data() + masked[i] * targets.cols();
    std::copy(src, src + targets.cols(), tgt_m.data() + i * targets.cols());
  }
  const Var diff = sub(pred_m, Var::leaf(std::move(tgt_m), false, "targets"));
  return mean_all(mul(diff, diff));
}

Var infonce_pair_loss(const Var& anchors, const Var& partners, double temperature) {
  if (anchors.shape().size() != 2 || partners.shape().size() != 2 ||
      anchors.shape() != partners.shape()) {
    throw std::invalid_argument("infonce_pair_loss: anchors/partners must be equal-shape matrices");
  }
  const std::size_t n = anchors.shape()[0];
  if (n < 2) {
    throw std::invalid_argument("infonce_pair_loss: needs at least two pairs to contrast");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("infonce_pair_loss: temperature must be positive");
  }
  const Var a = l2_normalize(anchors, 1e-12);
  const Var p = l2_normalize(partners.detach(), 1e-12);
  const Var logits = scale(matmul(a, transpose(p)), 1.0 / temperature);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i;
  return softmax_cross_entropy(logits, labels);
}

FrozenTargets snapshot_targets(ModelSession& session, const std::vector<ViewBundle>& batch,
                               const LossOptions& opt) {
  FrozenTargets out;
  out.bundles.reserve(batch.size());
  for (const ViewBundle& b : batch) {
    FrozenTargets::PerBundle fb;
    const Var tgt_w = session.encode_full(b.view_w_tokens, "tgt.enc.");
    const Var tgt_v = session.encode_full(b.view_v_tokens, "tgt.enc.");
    fb.cls_w = session.head(mean_axis0(tgt_w), "head_t.").value();
    fb.cls_v = session.head(mean_axis0(tgt_v), "head_t.").value();
    if (opt.use_align) {
      const Var enc_u = session.encode_visible(b.view_u_tokens, b.mask_u.visible, "enc.");
      const Var enc_r = session.encode_visible(b.view_r_tokens, b.mask_r.visible, "enc.");
      fb.dense_q = session.align(enc_u, tgt_w).aligned.value();
      fb.dense_k = session.align(enc_r, tgt_v).aligned.value();
    } else {
      fb.dense_q = mean_axis0(tgt_w).value();
      fb.dense_k = mean_axis0(tgt_v).value();
    }
    out.bundles.push_back(std::move(fb));
  }
  return out;
}

LossBreakdown compute_batch_loss(ModelSession& session, const std::vector<ViewBundle>& batch,
                                 const LossOptions& opt, const FrozenTargets* frozen) {
  if (batch.empty()) throw std::invalid_argument("compute_batch_loss: empty batch");
  if (opt.infonce && batch.size() < 2) {
    throw std::invalid_argument("compute_batch_loss: batchwise contrast needs batch size >= 2");
  }
  if (frozen != nullptr && frozen->bundles.size() != batch.size()) {
    throw std::invalid_argument("compute_batch_loss: snapshot does not match the batch");
  }

  const Var zero = Var::leaf(Tensor::scalar(0.0), false, "zero");
  Var recon = zero, inter = zero, intra = zero;
  // per-view globals collected for the batchwise contrastive variant
  std::vector<Var> glob_u, glob_r, glob_w, glob_v;

  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const ViewBundle& b = batch[bi];
    const FrozenTargets::PerBundle* fb = frozen ? &frozen->bundles[bi] : nullptr;

    // online branch: masked views, visible tokens only, then full decoding
    const Var enc_u = session.encode_visible(b.view_u_tokens, b.mask_u.visible, "enc.");
    const Var enc_r = session.encode_visible(b.view_r_tokens, b.mask_r.visible, "enc.");
    const DecodeResult dec_u = session.decode(enc_u, b.mask_u);
    const DecodeResult dec_r = session.decode(enc_r, b.mask_r);

    // target branch: strong views, full sequence (skipped entirely when the
    // snapshot already carries everything teacher-derived)
    const bool need_teacher = fb == nullptr;
    const Var tgt_w =
        need_teacher ? session.encode_full(b.view_w_tokens, "tgt.enc.") : zero;
    const Var tgt_v =
        need_teacher ? session.encode_full(b.view_v_tokens, "tgt.enc.") : zero;

    recon = add(recon, add(masked_reconstruction(dec_u.prediction, b.targets_q, b.mask_u.masked),
                           masked_reconstruction(dec_r.prediction, b.targets_k, b.mask_r.masked)));

    if (opt.use_inter) {
      const Var cls_u = session.head(mean_axis0(dec_u.features), "head_s.");
      const Var cls_r = session.head(mean_axis0(dec_r.features), "head_s.");
      const Var cls_w = fb ? Var::leaf(fb->cls_w, false, "cls_w")
                           : session.head(mean_axis0(tgt_w), "head_t.");
      const Var cls_v = fb ? Var::leaf(fb->cls_v, false, "cls_v")
                           : session.head(mean_axis0(tgt_v), "head_t.");
      if (opt.infonce) {
        glob_u.push_back(cls_u);
        glob_r.push_back(cls_r);
        glob_w.push_back(cls_w);
        glob_v.push_back(cls_v);
      } else {
        // each masked-view global must match the other crop's target global
        inter = add(inter, add(cosine_row_loss(cls_u, cls_v), cosine_row_loss(cls_r, cls_w)));
      }
    }

    if (opt.use_align) {
      // visible-token features query both the decoded student tokens and the
      // target tokens; the teacher-sourced output is the training target
      const Var s_u = session.align(enc_u, dec_u.features).aligned;
      const Var s_r = session.align(enc_r, dec_r.features).aligned;
      const Var t_w =
          fb ? Var::leaf(fb->dense_q, false, "t_w") : session.align(enc_u, tgt_w).aligned;
      const Var t_v =
          fb ? Var::leaf(fb->dense_k, false, "t_v") : session.align(enc_r, tgt_v).aligned;
      intra = add(intra, add(cosine_row_loss(s_u, t_w), cosine_row_loss(s_r, t_v)));
    } else {
      // ablated dense term: pooled student features track pooled targets
      const Var t_w = fb ? Var::leaf(fb->dense_q, false, "t_w") : mean_axis0(tgt_w);
      const Var t_v = fb ? Var::leaf(fb->dense_k, false, "t_v") : mean_axis0(tgt_v);
      intra = add(intra, add(cosine_row_loss(mean_axis0(dec_u.features), t_w),
                             cosine_row_loss(mean_axis0(dec_r.features), t_v)));
    }
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  recon = scale(recon, inv_b);
  intra = scale(intra, inv_b);
  if (opt.use_inter && opt.infonce) {
    // one softmax over the batch per direction; already a mean over pairs
    inter = add(infonce_pair_loss(concat(glob_u, 0), concat(glob_v, 0), opt.temperature),
                infonce_pair_loss(concat(glob_r, 0), concat(glob_w, 0), opt.temperature));
  } else {
    inter = scale(inter, inv_b);
  }

  LossBreakdown out;
  out.recon = recon;
  out.inter = inter;
  out.intra = intra;
  out.total = add(scale(recon, opt.w_recon),
                  add(scale(inter, opt.w_inter), scale(intra, opt.w_intra)));
  if (!std::isfinite(out.total.item())) {
    throw NumericError("compute_batch_loss: total loss is not finite");
  }
  return out;
}

}  // namespace voxssl
