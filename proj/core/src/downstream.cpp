#include "voxssl/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "voxssl/autodiff.hpp"
#include "voxssl/errors.hpp"
#include "voxssl/metrics.hpp"
#include "voxssl/ops.hpp"
#include "voxssl/rng.hpp"
#include "voxssl/volume.hpp"

namespace voxssl {
namespace {

// Stream tags (ASCII mnemonics) keeping every randomness purpose on its own
// derived stream.
constexpr std::uint64_t kAnatomyTag = 0x414e4154;   // "ANAT"
constexpr std::uint64_t kDeformTag = 0x4445464f;    // "DEFO"
constexpr std::uint64_t kTrainTag = 0x54524149;     // "TRAI"
constexpr std::uint64_t kEvalTag = 0x4556414c;      // "EVAL"
constexpr std::uint64_t kEncInitTag = 0x454e4349;   // "ENCI"
constexpr std::uint64_t kHeadInitTag = 0x48454144;  // "HEAD"
constexpr std::uint64_t kBatchTag = 0x46544254;     // "FTBT"
constexpr std::uint64_t kBlobTag = 0x424c4f42;      // "BLOB"

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Fan-balanced normal initialization, one stream per parameter name.
Tensor balanced_weight(std::uint64_t seed, const std::string& name,
                       std::vector<std::size_t> shape) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(shape.front() + shape.back()));
  Rng rng = Rng::derive(seed, {fnv1a(name)});
  return Tensor::randn(std::move(shape), rng, stddev);
}

// Within-patch cell coordinates of a nested cell index: octant bits first
// (x, y, z), then sub-octant bits.
std::array<std::size_t, 3> cell_coords(std::size_t idx) {
  const std::size_t c1 = idx / 8;
  const std::size_t c2 = idx % 8;
  return {((c1 >> 2) & 1) * 2 + ((c2 >> 2) & 1), ((c1 >> 1) & 1) * 2 + ((c2 >> 1) & 1),
          (c1 & 1) * 2 + (c2 & 1)};
}

void require_cell_divisible(const PatchGrid& grid, const char* who) {
  for (std::size_t a = 0; a < 3; ++a)
    if (grid.patch_extents[a] % 4 != 0)
      throw std::invalid_argument(std::string(who) + ": patch extents must be divisible by 4");
}

// Shared grid/model agreement checks for the supervised configs.
void check_grid_and_model(const std::array<std::size_t, 3>& crop_extents,
                          const std::array<std::size_t, 3>& patch_extents,
                          const ModelConfig& model, const PhantomConfig& phantom,
                          const char* who) {
  const PatchGrid grid = [&] {
    try {
      return PatchGrid(crop_extents, patch_extents);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(who) + ": " + e.what());
    }
  }();
  model.validate();
  const std::size_t n_tokens = grid.counts[0] * grid.counts[1] * grid.counts[2];
  const std::size_t patch_voxels = patch_extents[0] * patch_extents[1] * patch_extents[2];
  if (model.n_tokens != n_tokens)
    throw ConfigError(std::string(who) + ": model.n_tokens must equal the grid token count");
  if (model.patch_voxels != patch_voxels)
    throw ConfigError(std::string(who) + ": model.patch_voxels must equal the patch volume");
  for (std::size_t a = 0; a < 3; ++a)
    if (crop_extents[a] > phantom.extents[a])
      throw ConfigError(std::string(who) + ": crop extents exceed the phantom extents");
}

// Encoder subtree of a fresh full parameter set.
ParamMap encoder_params(const ModelConfig& model, std::uint64_t seed) {
  ParamMap full = init_params(model, seed);
  ParamMap enc;
  for (auto& [name, tensor] : full)
    if (name.starts_with("enc.")) enc.emplace(name, std::move(tensor));
  return enc;
}

// Replaces every entry of `params` with the equally named, equally shaped
// tensor from `source`.
void overlay_encoder(ParamMap& params, const ParamMap& source) {
  for (auto& [name, tensor] : params) {
    const auto it = source.find(name);
    if (it == source.end())
      throw ArtifactError("downstream: supplied parameters are missing " + name);
    if (it->second.shape() != tensor.shape())
      throw ArtifactError("downstream: supplied parameter has a wrong shape for " + name);
    tensor = it->second;
  }
}

// Smallest index of the largest entry in [row, row + n).
std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

// Adds one bright Gaussian blob (the synthetic anomaly) in place. Draw order:
// three center fractions, three radius fractions, one amplitude.
void add_anomaly_blob(Volume& v, Rng& rng) {
  std::array<double, 3> center{}, radius{};
  for (std::size_t a = 0; a < 3; ++a)
    center[a] = rng.uniform(0.25, 0.75) * static_cast<double>(v.extents[a]);
  for (std::size_t a = 0; a < 3; ++a)
    radius[a] = rng.uniform(0.10, 0.18) * static_cast<double>(v.extents[a]);
  const double amp = rng.uniform(0.30, 0.45);
  std::size_t i = 0;
  for (std::size_t x = 0; x < v.extents[0]; ++x)
    for (std::size_t y = 0; y < v.extents[1]; ++y)
      for (std::size_t z = 0; z < v.extents[2]; ++z, ++i) {
        const double dx = (static_cast<double>(x) + 0.5 - center[0]) / radius[0];
        const double dy = (static_cast<double>(y) + 0.5 - center[1]) / radius[1];
        const double dz = (static_cast<double>(z) + 0.5 - center[2]) / radius[2];
        const double bump = amp * std::exp(-(dx * dx + dy * dy + dz * dz));
        v.intensity[i] = std::clamp(v.intensity[i] + bump, 0.0, 1.0);
      }
}

}  // namespace

Volume labeled_crop(const PhantomConfig& cfg, const std::array<std::size_t, 3>& crop_extents,
                    std::uint64_t seed) {
  for (std::size_t a = 0; a < 3; ++a)
    if (crop_extents[a] > cfg.extents[a])
      throw std::invalid_argument("labeled_crop: window exceeds the phantom extents");
  const Volume full =
      generate_phantom(cfg, Rng::mix({seed, kAnatomyTag}), Rng::mix({seed, kDeformTag}));
  std::array<std::int64_t, 3> origin{};
  for (std::size_t a = 0; a < 3; ++a)
    origin[a] = static_cast<std::int64_t>((cfg.extents[a] - crop_extents[a]) / 2);
  return crop_volume(full, origin, crop_extents);
}

ParamMap init_seg_head(const ModelConfig& cfg, std::size_t n_classes, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("init_seg_head: need at least two classes");
  const std::size_t d = cfg.embed_dim;
  ParamMap p;
  p.emplace("seg.up1.w", balanced_weight(seed, "seg.up1.w", {d, 8 * d}));
  p.emplace("seg.up1.b", Tensor::zeros({8 * d}));
  p.emplace("seg.up2.w", balanced_weight(seed, "seg.up2.w", {d, 8 * d}));
  p.emplace("seg.up2.b", Tensor::zeros({8 * d}));
  p.emplace("seg.out.w", balanced_weight(seed, "seg.out.w", {d, n_classes}));
  p.emplace("seg.out.b", Tensor::zeros({n_classes}));
  return p;
}

std::vector<std::size_t> microcell_targets(const Volume& vol, const PatchGrid& grid) {
  if (!vol.has_labels()) throw std::invalid_argument("microcell_targets: volume has no labels");
  if (vol.extents != grid.vol_extents)
    throw std::invalid_argument("microcell_targets: volume extents do not match the grid");
  require_cell_divisible(grid, "microcell_targets");
  const std::array<std::size_t, 3> cell{grid.patch_extents[0] / 4, grid.patch_extents[1] / 4,
                                        grid.patch_extents[2] / 4};
  const std::size_t n_tokens = grid.counts[0] * grid.counts[1] * grid.counts[2];
  std::vector<std::size_t> out(n_tokens * 64, 0);
  std::size_t token = 0;
  for (std::size_t px = 0; px < grid.counts[0]; ++px)
    for (std::size_t py = 0; py < grid.counts[1]; ++py)
      for (std::size_t pz = 0; pz < grid.counts[2]; ++pz, ++token)
        for (std::size_t c = 0; c < 64; ++c) {
          const std::array<std::size_t, 3> cc = cell_coords(c);
          const std::size_t x0 = px * grid.patch_extents[0] + cc[0] * cell[0];
          const std::size_t y0 = py * grid.patch_extents[1] + cc[1] * cell[1];
          const std::size_t z0 = pz * grid.patch_extents[2] + cc[2] * cell[2];
          std::array<std::size_t, 256> counts{};
          for (std::size_t dx = 0; dx < cell[0]; ++dx)
            for (std::size_t dy = 0; dy < cell[1]; ++dy)
              for (std::size_t dz = 0; dz < cell[2]; ++dz)
                ++counts[vol.labels[vol.index(x0 + dx, y0 + dy, z0 + dz)]];
          std::size_t best = 0;
          for (std::size_t l = 1; l < counts.size(); ++l)
            if (counts[l] > counts[best]) best = l;
          out[token * 64 + c] = best;
        }
  return out;
}

std::vector<std::uint8_t> microcells_to_voxels(const std::vector<std::size_t>& cells,
                                               const PatchGrid& grid) {
  require_cell_divisible(grid, "microcells_to_voxels");
  const std::array<std::size_t, 3> cell{grid.patch_extents[0] / 4, grid.patch_extents[1] / 4,
                                        grid.patch_extents[2] / 4};
  const std::size_t n_tokens = grid.counts[0] * grid.counts[1] * grid.counts[2];
  if (cells.size() != n_tokens * 64)
    throw std::invalid_argument("microcells_to_voxels: need 64 cells per token");
  const std::array<std::size_t, 3>& ve = grid.vol_extents;
  std::vector<std::uint8_t> out(ve[0] * ve[1] * ve[2], 0);
  std::size_t token = 0;
  for (std::size_t px = 0; px < grid.counts[0]; ++px)
    for (std::size_t py = 0; py < grid.counts[1]; ++py)
      for (std::size_t pz = 0; pz < grid.counts[2]; ++pz, ++token)
        for (std::size_t c = 0; c < 64; ++c) {
          const std::size_t label = cells[token * 64 + c];
          if (label > 255)
            throw std::invalid_argument("microcells_to_voxels: label does not fit in a byte");
          const std::array<std::size_t, 3> cc = cell_coords(c);
          const std::size_t x0 = px * grid.patch_extents[0] + cc[0] * cell[0];
          const std::size_t y0 = py * grid.patch_extents[1] + cc[1] * cell[1];
          const std::size_t z0 = pz * grid.patch_extents[2] + cc[2] * cell[2];
          for (std::size_t dx = 0; dx < cell[0]; ++dx)
            for (std::size_t dy = 0; dy < cell[1]; ++dy)
              for (std::size_t dz = 0; dz < cell[2]; ++dz)
                out[((x0 + dx) * ve[1] + y0 + dy) * ve[2] + z0 + dz] =
                    static_cast<std::uint8_t>(label);
        }
  return out;
}

Var seg_head_logits(ModelSession& session, const Var& features, std::size_t n_classes) {
  if (features.shape().size() != 2)
    throw std::invalid_argument("seg_head_logits: features must be a matrix");
  const std::size_t n = features.shape()[0];
  const std::size_t d = features.shape()[1];
  if (session.leaf("seg.out.w").shape()[1] != n_classes)
    throw std::invalid_argument("seg_head_logits: head was built for a different class count");
  // Each refinement linear emits the eight sub-cell vectors of one cell as
  // one concatenated row; the reshape splits them into their own rows.
  Var h = gelu(add_rowvec(matmul(features, session.leaf("seg.up1.w")), session.leaf("seg.up1.b")));
  h = reshape(h, {n * 8, d});
  h = gelu(add_rowvec(matmul(h, session.leaf("seg.up2.w")), session.leaf("seg.up2.b")));
  h = reshape(h, {n * 64, d});
  return add_rowvec(matmul(h, session.leaf("seg.out.w")), session.leaf("seg.out.b"));
}

double mean_foreground_dice(const std::vector<std::uint8_t>& pred,
                            const std::vector<std::uint8_t>& truth, std::size_t n_classes) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("mean_foreground_dice: size mismatch");
  if (n_classes < 2) throw std::invalid_argument("mean_foreground_dice: need at least two classes");
  double sum = 0.0;
  for (std::size_t l = 1; l < n_classes; ++l)
    sum += dice_overlap(label_mask(pred, static_cast<std::uint8_t>(l)),
                        label_mask(truth, static_cast<std::uint8_t>(l)));
  return sum / static_cast<double>(n_classes - 1);
}

void FinetuneConfig::validate() const {
  check_grid_and_model(crop_extents, patch_extents, model, phantom, "finetune");
  const PatchGrid grid(crop_extents, patch_extents);
  try {
    require_cell_divisible(grid, "finetune");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (n_classes < 2) throw ConfigError("finetune: need at least two classes");
  if (n_classes > 256) throw ConfigError("finetune: labels must fit in a byte");
  if (n_classes < phantom.n_organs + 1)
    throw ConfigError("finetune: n_classes must cover background plus every organ label");
  if (train_volumes == 0) throw ConfigError("finetune: train_volumes must be positive");
  if (eval_volumes == 0) throw ConfigError("finetune: eval_volumes must be positive");
  if (steps == 0) throw ConfigError("finetune: steps must be positive");
  if (batch_size == 0) throw ConfigError("finetune: batch_size must be positive");
  if (warmup_steps >= steps) throw ConfigError("finetune: warmup_steps must be below steps");
  if (!(adamw.lr > 0.0)) throw ConfigError("finetune: learning rate must be positive");
  if (!(min_lr >= 0.0) || min_lr > adamw.lr)
    throw ConfigError("finetune: min_lr must lie in [0, lr]");
  if (!(clip_norm > 0.0)) throw ConfigError("finetune: clip_norm must be positive");
}

FinetuneResult finetune_seg(const FinetuneConfig& cfg, const ParamMap* pretrained) {
  cfg.validate();
  const PatchGrid grid(cfg.crop_extents, cfg.patch_extents);

  std::vector<Tensor> train_tokens;
  std::vector<std::vector<std::size_t>> train_targets;
  train_tokens.reserve(cfg.train_volumes);
  train_targets.reserve(cfg.train_volumes);
  for (std::size_t i = 0; i < cfg.train_volumes; ++i) {
    const Volume v = labeled_crop(cfg.phantom, cfg.crop_extents, Rng::mix({cfg.seed, kTrainTag, i}));
    train_tokens.push_back(patchify(v, grid));
    train_targets.push_back(microcell_targets(v, grid));
  }

  ParamMap params = encoder_params(cfg.model, Rng::mix({cfg.seed, kEncInitTag}));
  if (pretrained) overlay_encoder(params, *pretrained);
  // The head starts identically whether or not pretrained weights arrived, so
  // paired arms differ only in the encoder start.
  ParamMap head = init_seg_head(cfg.model, cfg.n_classes, Rng::mix({cfg.seed, kHeadInitTag}));
  for (auto& [name, tensor] : head) params.emplace(name, std::move(tensor));

  AdamW opt(cfg.adamw);
  FinetuneResult res;
  res.train_losses.reserve(cfg.steps);
  for (std::uint64_t step = 0; step < cfg.steps; ++step) {
    Rng pick = Rng::derive(cfg.seed, {kBatchTag, step});
    ModelSession session = ModelSession::trainable(cfg.model, params);
    Var loss;
    for (std::size_t slot = 0; slot < cfg.batch_size; ++slot) {
      const auto idx = static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<std::int64_t>(cfg.train_volumes) - 1));
      const Var logits =
          seg_head_logits(session, session.encode_full(train_tokens[idx], "enc."), cfg.n_classes);
      const Var ce = softmax_cross_entropy(logits, train_targets[idx]);
      loss = slot == 0 ? ce : add(loss, ce);
    }
    loss = scale(loss, 1.0 / static_cast<double>(cfg.batch_size));
    backward(loss);
    std::map<std::string, Tensor> grads;
    for (const auto& [name, tensor] : params) {
      (void)tensor;
      grads.emplace(name, session.leaf(name).grad());
    }
    clip_global_norm(grads, cfg.clip_norm);
    const double lr = lr_schedule(step, cfg.warmup_steps, cfg.steps, cfg.adamw.lr, cfg.min_lr);
    opt.step(params, grads, lr / cfg.adamw.lr);
    res.train_losses.push_back(loss.item());
  }

  double dice_sum = 0.0;
  double surface_sum = 0.0;
  res.per_volume_dice.reserve(cfg.eval_volumes);
  for (std::size_t i = 0; i < cfg.eval_volumes; ++i) {
    const Volume v = labeled_crop(cfg.phantom, cfg.crop_extents, Rng::mix({cfg.seed, kEvalTag, i}));
    const std::vector<std::uint8_t> pred = predict_labels(cfg, params, v);
    const double d = mean_foreground_dice(pred, v.labels, cfg.n_classes);
    res.per_volume_dice.push_back(d);
    dice_sum += d;
    double sd = 0.0;
    for (std::size_t l = 1; l < cfg.n_classes; ++l)
      sd += surface_dice(label_mask(pred, static_cast<std::uint8_t>(l)),
                         label_mask(v.labels, static_cast<std::uint8_t>(l)), v.extents, 1.0);
    surface_sum += sd / static_cast<double>(cfg.n_classes - 1);
  }
  res.mean_dice = dice_sum / static_cast<double>(cfg.eval_volumes);
  res.mean_surface_dice = surface_sum / static_cast<double>(cfg.eval_volumes);
  res.params = std::move(params);
  return res;
}

std::vector<std::uint8_t> predict_labels(const FinetuneConfig& cfg, const ParamMap& params,
                                         const Volume& vol) {
  const PatchGrid grid(cfg.crop_extents, cfg.patch_extents);
  if (vol.extents != cfg.crop_extents)
    throw std::invalid_argument("predict_labels: volume extents do not match the configured crop");
  ModelSession session = ModelSession::trainable(cfg.model, params);
  const Var logits =
      seg_head_logits(session, session.encode_full(patchify(vol, grid), "enc."), cfg.n_classes);
  const Tensor& lv = logits.value();
  const std::size_t rows = lv.shape()[0];
  const std::size_t k = lv.shape()[1];
  std::vector<std::size_t> cells(rows);
  for (std::size_t r = 0; r < rows; ++r) cells[r] = argmax_row(lv.vec().data() + r * k, k);
  return microcells_to_voxels(cells, grid);
}

void ProbeConfig::validate() const {
  check_grid_and_model(crop_extents, patch_extents, model, phantom, "probe");
  if (train_volumes < 2) throw ConfigError("probe: train_volumes must cover both classes");
  if (eval_volumes < 2) throw ConfigError("probe: eval_volumes must cover both classes");
  if (gd_steps == 0) throw ConfigError("probe: gd_steps must be positive");
  if (!(gd_lr > 0.0)) throw ConfigError("probe: gd_lr must be positive");
}

double classification_probe_auc(const ProbeConfig& cfg, const ParamMap* encoder) {
  cfg.validate();
  const PatchGrid grid(cfg.crop_extents, cfg.patch_extents);
  ParamMap enc = encoder_params(cfg.model, Rng::mix({cfg.seed, kEncInitTag}));
  if (encoder) overlay_encoder(enc, *encoder);

  const auto pooled_features = [&](const Volume& v) {
    ModelSession session = ModelSession::trainable(cfg.model, enc);
    const Var mean = mean_axis0(session.encode_full(patchify(v, grid), "enc."));
    return mean.value();
  };
  // Alternating labels keep both splits exactly class-balanced.
  const auto make_example = [&](std::uint64_t tag, std::size_t i, int& label) {
    Volume v = labeled_crop(cfg.phantom, cfg.crop_extents, Rng::mix({cfg.seed, tag, i}));
    label = i % 2 == 0 ? 1 : 0;
    if (label == 1) {
      Rng rng = Rng::derive(cfg.seed, {kBlobTag, tag, i});
      add_anomaly_blob(v, rng);
    }
    return pooled_features(v);
  };

  const std::size_t d = cfg.model.embed_dim;
  std::vector<Tensor> xs;
  std::vector<int> ys;
  xs.reserve(cfg.train_volumes);
  ys.reserve(cfg.train_volumes);
  for (std::size_t i = 0; i < cfg.train_volumes; ++i) {
    int label = 0;
    xs.push_back(make_example(kTrainTag, i, label));
    ys.push_back(label);
  }

  // Full-batch logistic regression from zero weights with a small l2 pull;
  // everything is deterministic, so no autodiff machinery is needed.
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(cfg.train_volumes);
  for (std::uint64_t step = 0; step < cfg.gd_steps; ++step) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * xs[i].at(j);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double g = p - static_cast<double>(ys[i]);
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * xs[i].at(j);
      gb += g;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= cfg.gd_lr * (gw[j] * inv_n + 1e-4 * w[j]);
    b -= cfg.gd_lr * gb * inv_n;
  }

  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(cfg.eval_volumes);
  labels.reserve(cfg.eval_volumes);
  for (std::size_t i = 0; i < cfg.eval_volumes; ++i) {
    int label = 0;
    const Tensor x = make_example(kEvalTag, i, label);
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x.at(j);
    scores.push_back(z);
    labels.push_back(label);
  }
  return auc_score(scores, labels);
}

std::vector<AblationCell> ablation_matrix(const AblationConfig& cfg) {
  if (cfg.n_seeds == 0) throw ConfigError("ablation: n_seeds must be positive");
  std::vector<AblationCell> out;
  out.reserve(8);
  for (int inter = 0; inter <= 1; ++inter)
    for (int align = 0; align <= 1; ++align)
      for (int nce = 0; nce <= 1; ++nce) {
        AblationCell cell;
        cell.use_inter = inter != 0;
        cell.use_align = align != 0;
        cell.infonce = nce != 0;
        cell.seeds = cfg.n_seeds;
        std::vector<double> dscs;
        dscs.reserve(cfg.n_seeds);
        for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
          TrainerConfig pre = cfg.pretrain;
          pre.loss.use_inter = cell.use_inter;
          pre.loss.use_align = cell.use_align;
          pre.loss.infonce = cell.infonce;
          pre.seed = cfg.pretrain.seed + s;
          pre.out_dir.clear();
          pre.resume_from.clear();
          Trainer trainer(pre);
          trainer.run();
          FinetuneConfig ft = cfg.finetune;
          ft.seed = cfg.finetune.seed + s;
          dscs.push_back(finetune_seg(ft, &trainer.params()).mean_dice);
        }
        double mean = 0.0;
        for (double v : dscs) mean += v;
        mean /= static_cast<double>(dscs.size());
        double var = 0.0;
        for (double v : dscs) var += (v - mean) * (v - mean);
        var /= static_cast<double>(dscs.size());
        cell.mean_dsc = mean;
        cell.std_dsc = std::sqrt(var);
        out.push_back(cell);
      }
  return out;
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
  std::string out = "use_inter,use_align,contrastive,mean_dsc,std_dsc,seeds\n";
  char buf[192];
  for (const AblationCell& c : cells) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.17g,%.17g,%zu\n", c.use_inter ? 1 : 0,
                  c.use_align ? 1 : 0, c.infonce ? "infonce" : "cosine", c.mean_dsc, c.std_dsc,
                  c.seeds);
    out += buf;
  }
  return out;
}

}  // namespace voxssl
