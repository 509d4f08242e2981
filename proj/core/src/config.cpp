#include "voxssl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "voxssl/errors.hpp"
#include "voxssl/patches.hpp"

namespace voxssl {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& raw) {
  throw ConfigError("config: bad value for " + key + ": '" + raw + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  if (raw.empty() || raw[0] == '-' || raw[0] == '+') bad_value(key, raw);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
  if (errno != 0 || end != raw.c_str() + raw.size()) bad_value(key, raw);
  return static_cast<std::uint64_t>(v);
}

std::size_t parse_size(const std::string& key, const std::string& raw) {
  return static_cast<std::size_t>(parse_u64(key, raw));
}

double parse_double(const std::string& key, const std::string& raw) {
  if (raw.empty()) bad_value(key, raw);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (errno != 0 || end != raw.c_str() + raw.size()) bad_value(key, raw);
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  bad_value(key, raw);
}

std::array<std::size_t, 3> parse_extents(const std::string& key, const std::string& raw) {
  std::array<std::size_t, 3> out{};
  std::size_t start = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    const std::size_t comma = raw.find(',', start);
    const bool last = a == 2;
    if (last != (comma == std::string::npos)) bad_value(key, raw);
    const std::string part = trim(raw.substr(start, last ? std::string::npos : comma - start));
    out[a] = parse_size(key, part);
    if (!last) start = comma + 1;
  }
  return out;
}

std::string show_u64(std::uint64_t v) { return std::to_string(v); }

std::string show_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string show_bool(bool v) { return v ? "true" : "false"; }

std::string show_extents(const std::array<std::size_t, 3>& e) {
  return std::to_string(e[0]) + "," + std::to_string(e[1]) + "," + std::to_string(e[2]);
}

// Applies one key. Returns false for unknown keys so the caller can report
// the line; value errors throw directly.
bool apply_key(RunConfig& c, const std::string& key, const std::string& raw) {
  TrainerConfig& t = c.trainer;
  FinetuneConfig& f = c.finetune;
  ProbeConfig& p = c.probe;

  if (key == "phantom.extents") t.phantom.extents = parse_extents(key, raw);
  else if (key == "phantom.n_organs") t.phantom.n_organs = parse_size(key, raw);
  else if (key == "phantom.background_level") t.phantom.background_level = parse_double(key, raw);
  else if (key == "phantom.noise_amp") t.phantom.noise_amp = parse_double(key, raw);
  else if (key == "phantom.smooth_noise_amp") t.phantom.smooth_noise_amp = parse_double(key, raw);
  else if (key == "phantom.deform_center_frac")
    t.phantom.deform_center_frac = parse_double(key, raw);
  else if (key == "phantom.deform_radius_frac")
    t.phantom.deform_radius_frac = parse_double(key, raw);
  else if (key == "crop.extents") t.crop_extents = parse_extents(key, raw);
  else if (key == "patch.extents") t.patch_extents = parse_extents(key, raw);
  else if (key == "pool.size") t.pool_size = parse_size(key, raw);
  else if (key == "pool.jitter") t.jitter = parse_size(key, raw);
  else if (key == "mask.ratio") t.mask_ratio = parse_double(key, raw);
  else if (key == "model.embed_dim") t.model.embed_dim = parse_size(key, raw);
  else if (key == "model.depth") t.model.depth = parse_size(key, raw);
  else if (key == "model.heads") t.model.heads = parse_size(key, raw);
  else if (key == "model.mlp_ratio") t.model.mlp_ratio = parse_size(key, raw);
  else if (key == "model.decoder_dim") t.model.decoder_dim = parse_size(key, raw);
  else if (key == "model.decoder_depth") t.model.decoder_depth = parse_size(key, raw);
  else if (key == "model.decoder_heads") t.model.decoder_heads = parse_size(key, raw);
  else if (key == "model.head_hidden") t.model.head_hidden = parse_size(key, raw);
  else if (key == "model.head_out") t.model.head_out = parse_size(key, raw);
  else if (key == "model.align_dim") t.model.align_dim = parse_size(key, raw);
  else if (key == "loss.use_inter") t.loss.use_inter = parse_bool(key, raw);
  else if (key == "loss.use_align") t.loss.use_align = parse_bool(key, raw);
  else if (key == "loss.infonce") t.loss.infonce = parse_bool(key, raw);
  else if (key == "loss.temperature") t.loss.temperature = parse_double(key, raw);
  else if (key == "loss.w_recon") t.loss.w_recon = parse_double(key, raw);
  else if (key == "loss.w_inter") t.loss.w_inter = parse_double(key, raw);
  else if (key == "loss.w_intra") t.loss.w_intra = parse_double(key, raw);
  else if (key == "opt.lr") t.adamw.lr = parse_double(key, raw);
  else if (key == "opt.beta1") t.adamw.beta1 = parse_double(key, raw);
  else if (key == "opt.beta2") t.adamw.beta2 = parse_double(key, raw);
  else if (key == "opt.eps") t.adamw.eps = parse_double(key, raw);
  else if (key == "opt.weight_decay") t.adamw.weight_decay = parse_double(key, raw);
  else if (key == "opt.min_lr") t.min_lr = parse_double(key, raw);
  else if (key == "opt.warmup_steps") t.warmup_steps = parse_u64(key, raw);
  else if (key == "opt.clip_norm") t.clip_norm = parse_double(key, raw);
  else if (key == "train.total_steps") t.total_steps = parse_u64(key, raw);
  else if (key == "train.batch_size") t.batch_size = parse_size(key, raw);
  else if (key == "train.ema_base") t.ema_base = parse_double(key, raw);
  else if (key == "train.checkpoint_every") t.checkpoint_every = parse_u64(key, raw);
  else if (key == "train.seed") t.seed = parse_u64(key, raw);
  else if (key == "ft.steps") f.steps = parse_u64(key, raw);
  else if (key == "ft.batch_size") f.batch_size = parse_size(key, raw);
  else if (key == "ft.lr") f.adamw.lr = parse_double(key, raw);
  else if (key == "ft.weight_decay") f.adamw.weight_decay = parse_double(key, raw);
  else if (key == "ft.min_lr") f.min_lr = parse_double(key, raw);
  else if (key == "ft.warmup_steps") f.warmup_steps = parse_u64(key, raw);
  else if (key == "ft.clip_norm") f.clip_norm = parse_double(key, raw);
  else if (key == "ft.train_volumes") f.train_volumes = parse_size(key, raw);
  else if (key == "ft.eval_volumes") f.eval_volumes = parse_size(key, raw);
  else if (key == "ft.n_classes") f.n_classes = parse_size(key, raw);
  else if (key == "ft.seed") f.seed = parse_u64(key, raw);
  else if (key == "probe.train_volumes") p.train_volumes = parse_size(key, raw);
  else if (key == "probe.eval_volumes") p.eval_volumes = parse_size(key, raw);
  else if (key == "probe.gd_steps") p.gd_steps = parse_u64(key, raw);
  else if (key == "probe.gd_lr") p.gd_lr = parse_double(key, raw);
  else if (key == "probe.seed") p.seed = parse_u64(key, raw);
  else if (key == "ablate.n_seeds") c.ablate_seeds = parse_size(key, raw);
  else return false;
  return true;
}

}  // namespace

void finalize_config(RunConfig& cfg) {
  const PatchGrid grid = [&] {
    try {
      return PatchGrid(cfg.trainer.crop_extents, cfg.trainer.patch_extents);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }();
  cfg.trainer.model.patch_voxels =
      grid.patch_extents[0] * grid.patch_extents[1] * grid.patch_extents[2];
  cfg.trainer.model.n_tokens = grid.counts[0] * grid.counts[1] * grid.counts[2];

  cfg.finetune.phantom = cfg.trainer.phantom;
  cfg.finetune.crop_extents = cfg.trainer.crop_extents;
  cfg.finetune.patch_extents = cfg.trainer.patch_extents;
  cfg.finetune.model = cfg.trainer.model;
  cfg.finetune.adamw.beta1 = cfg.trainer.adamw.beta1;
  cfg.finetune.adamw.beta2 = cfg.trainer.adamw.beta2;
  cfg.finetune.adamw.eps = cfg.trainer.adamw.eps;

  cfg.probe.phantom = cfg.trainer.phantom;
  cfg.probe.crop_extents = cfg.trainer.crop_extents;
  cfg.probe.patch_extents = cfg.trainer.patch_extents;
  cfg.probe.model = cfg.trainer.model;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    start = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value on line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key on line " + std::to_string(line_no));
    if (!seen.insert(key).second)
      throw ConfigError("config: duplicate key '" + key + "' on line " + std::to_string(line_no));
    if (!apply_key(cfg, key, value))
      throw ConfigError("config: unknown key '" + key + "' on line " + std::to_string(line_no));
  }
  finalize_config(cfg);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  const TrainerConfig& t = cfg.trainer;
  const FinetuneConfig& f = cfg.finetune;
  const ProbeConfig& p = cfg.probe;
  std::vector<std::pair<std::string, std::string>> kv{
      {"phantom.extents", show_extents(t.phantom.extents)},
      {"phantom.n_organs", show_u64(t.phantom.n_organs)},
      {"phantom.background_level", show_double(t.phantom.background_level)},
      {"phantom.noise_amp", show_double(t.phantom.noise_amp)},
      {"phantom.smooth_noise_amp", show_double(t.phantom.smooth_noise_amp)},
      {"phantom.deform_center_frac", show_double(t.phantom.deform_center_frac)},
      {"phantom.deform_radius_frac", show_double(t.phantom.deform_radius_frac)},
      {"crop.extents", show_extents(t.crop_extents)},
      {"patch.extents", show_extents(t.patch_extents)},
      {"pool.size", show_u64(t.pool_size)},
      {"pool.jitter", show_u64(t.jitter)},
      {"mask.ratio", show_double(t.mask_ratio)},
      {"model.embed_dim", show_u64(t.model.embed_dim)},
      {"model.depth", show_u64(t.model.depth)},
      {"model.heads", show_u64(t.model.heads)},
      {"model.mlp_ratio", show_u64(t.model.mlp_ratio)},
      {"model.decoder_dim", show_u64(t.model.decoder_dim)},
      {"model.decoder_depth", show_u64(t.model.decoder_depth)},
      {"model.decoder_heads", show_u64(t.model.decoder_heads)},
      {"model.head_hidden", show_u64(t.model.head_hidden)},
      {"model.head_out", show_u64(t.model.head_out)},
      {"model.align_dim", show_u64(t.model.align_dim)},
      {"loss.use_inter", show_bool(t.loss.use_inter)},
      {"loss.use_align", show_bool(t.loss.use_align)},
      {"loss.infonce", show_bool(t.loss.infonce)},
      {"loss.temperature", show_double(t.loss.temperature)},
      {"loss.w_recon", show_double(t.loss.w_recon)},
      {"loss.w_inter", show_double(t.loss.w_inter)},
      {"loss.w_intra", show_double(t.loss.w_intra)},
      {"opt.lr", show_double(t.adamw.lr)},
      {"opt.beta1", show_double(t.adamw.beta1)},
      {"opt.beta2", show_double(t.adamw.beta2)},
      {"opt.eps", show_double(t.adamw.eps)},
      {"opt.weight_decay", show_double(t.adamw.weight_decay)},
      {"opt.min_lr", show_double(t.min_lr)},
      {"opt.warmup_steps", show_u64(t.warmup_steps)},
      {"opt.clip_norm", show_double(t.clip_norm)},
      {"train.total_steps", show_u64(t.total_steps)},
      {"train.batch_size", show_u64(t.batch_size)},
      {"train.ema_base", show_double(t.ema_base)},
      {"train.checkpoint_every", show_u64(t.checkpoint_every)},
      {"train.seed", show_u64(t.seed)},
      {"ft.steps", show_u64(f.steps)},
      {"ft.batch_size", show_u64(f.batch_size)},
      {"ft.lr", show_double(f.adamw.lr)},
      {"ft.weight_decay", show_double(f.adamw.weight_decay)},
      {"ft.min_lr", show_double(f.min_lr)},
      {"ft.warmup_steps", show_u64(f.warmup_steps)},
      {"ft.clip_norm", show_double(f.clip_norm)},
      {"ft.train_volumes", show_u64(f.train_volumes)},
      {"ft.eval_volumes", show_u64(f.eval_volumes)},
      {"ft.n_classes", show_u64(f.n_classes)},
      {"ft.seed", show_u64(f.seed)},
      {"probe.train_volumes", show_u64(p.train_volumes)},
      {"probe.eval_volumes", show_u64(p.eval_volumes)},
      {"probe.gd_steps", show_u64(p.gd_steps)},
      {"probe.gd_lr", show_double(p.gd_lr)},
      {"probe.seed", show_u64(p.seed)},
      {"ablate.n_seeds", show_u64(cfg.ablate_seeds)},
  };
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

RunConfig preset(const std::string& name) {
  if (name == "desk") {
    RunConfig cfg;
    finalize_config(cfg);
    return cfg;
  }
  if (name == "full-scale") {
    RunConfig cfg;
    TrainerConfig& t = cfg.trainer;
    t.phantom.extents = {256, 256, 96};
    t.phantom.n_organs = 6;
    t.crop_extents = {192, 192, 64};
    t.patch_extents = {16, 16, 16};
    t.pool_size = 16;
    t.jitter = 4;
    t.mask_ratio = 0.75;
    t.model.embed_dim = 384;
    t.model.depth = 12;
    t.model.heads = 6;
    t.model.mlp_ratio = 4;
    t.model.decoder_dim = 192;
    t.model.decoder_depth = 4;
    t.model.decoder_heads = 6;
    t.model.head_hidden = 384;
    t.model.head_out = 256;
    t.model.align_dim = 384;
    t.adamw.lr = 5e-5;
    t.min_lr = 1e-6;
    t.warmup_steps = 5000;
    t.total_steps = 100000;
    t.batch_size = 8;
    t.checkpoint_every = 5000;
    FinetuneConfig& f = cfg.finetune;
    f.steps = 2000;
    f.warmup_steps = 100;
    f.batch_size = 2;
    f.train_volumes = 24;
    f.eval_volumes = 8;
    f.n_classes = 7;
    f.adamw.lr = 1e-4;
    f.min_lr = 1e-6;
    ProbeConfig& p = cfg.probe;
    p.train_volumes = 64;
    p.eval_volumes = 64;
    p.gd_steps = 500;
    cfg.ablate_seeds = 5;
    finalize_config(cfg);
    return cfg;
  }
  throw ConfigError("config: unknown preset '" + name + "' (available: desk, full-scale)");
}

}  // namespace voxssl
