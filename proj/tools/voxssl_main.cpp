// voxssl — command line entry point for synthetic-volume self-supervised
// pretraining, supervised fine-tuning, evaluation and diagnostics.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voxssl/checkpoint.hpp"
#include "voxssl/config.hpp"
#include "voxssl/downstream.hpp"
#include "voxssl/errors.hpp"
#include "voxssl/gradcheck.hpp"
#include "voxssl/losses.hpp"
#include "voxssl/metrics.hpp"
#include "voxssl/model.hpp"
#include "voxssl/trainer.hpp"
#include "voxssl/volume.hpp"

namespace fs = std::filesystem;
using namespace voxssl;

namespace {

struct ConfigSource {
  std::string file;
  std::string preset_name;
  bool seed_given = false;
  std::uint64_t seed = 0;
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("--config", src.file, "configuration file (flat key=value lines)");
  cmd->add_option("--preset", src.preset_name, "named baseline: desk or full-scale");
  cmd->add_option("--seed", src.seed, "override every seed in the configuration")
      ->each([&src](const std::string&) { src.seed_given = true; });
}

RunConfig load_config(const ConfigSource& src) {
  if (!src.file.empty() && !src.preset_name.empty())
    throw ConfigError("pass either --config or --preset, not both");
  RunConfig cfg;
  if (!src.file.empty()) {
    std::ifstream in(src.file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + src.file + "'");
    std::ostringstream text;
    text << in.rdbuf();
    cfg = parse_config(text.str());
  } else if (!src.preset_name.empty()) {
    cfg = preset(src.preset_name);
  } else {
    throw ConfigError("a configuration is required: pass --config FILE or --preset NAME");
  }
  if (src.seed_given) {
    cfg.trainer.seed = src.seed;
    cfg.finetune.seed = src.seed;
    cfg.probe.seed = src.seed;
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ArtifactError("short write to '" + path.string() + "'");
}

int cmd_pretrain(const ConfigSource& src, const std::string& out_dir,
                 const std::string& resume_from) {
  RunConfig cfg = load_config(src);
  cfg.trainer.out_dir = out_dir;
  cfg.trainer.resume_from = resume_from;
  cfg.trainer.config_text = serialize_config(cfg);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "config.resolved", cfg.trainer.config_text);
  }
  Trainer trainer(cfg.trainer);
  const std::vector<StepStats> stats = trainer.run();
  const StepStats* last = stats.empty() ? nullptr : &stats.back();
  std::printf("pretrain complete: steps=%llu", static_cast<unsigned long long>(trainer.step()));
  if (last) std::printf(" final_total=%.17g final_recon=%.17g", last->total, last->recon);
  if (!out_dir.empty()) std::printf(" out=%s", out_dir.c_str());
  std::printf("\n");
  return 0;
}

int cmd_finetune(const ConfigSource& src, const std::string& pretrained_path,
                 const std::string& out_dir) {
  const RunConfig cfg = load_config(src);
  const ParamMap* pretrained = nullptr;
  Checkpoint ckpt;
  if (!pretrained_path.empty()) {
    ckpt = read_checkpoint(pretrained_path);
    pretrained = &ckpt.params;
  }
  const FinetuneResult res = finetune_seg(cfg.finetune, pretrained);
  std::printf("arm=%s\n", pretrained ? "pretrained" : "random");
  std::printf("mean_dice=%.17g\n", res.mean_dice);
  std::printf("mean_surface_dice=%.17g\n", res.mean_surface_dice);
  for (std::size_t i = 0; i < res.per_volume_dice.size(); ++i)
    std::printf("volume_dice_%zu=%.17g\n", i, res.per_volume_dice[i]);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::string csv = "volume,dice\n";
    char buf[64];
    for (std::size_t i = 0; i < res.per_volume_dice.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, res.per_volume_dice[i]);
      csv += buf;
    }
    std::snprintf(buf, sizeof buf, "mean,%.17g\n", res.mean_dice);
    csv += buf;
    write_text(fs::path(out_dir) / "finetune.csv", csv);
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path, double tolerance,
             std::size_t classes) {
  const Volume pred = read_volume(pred_path);
  const Volume truth = read_volume(truth_path);
  if (!pred.has_labels() || !truth.has_labels())
    throw ConfigError("eval: both volumes must carry labels");
  if (pred.extents != truth.extents) throw ConfigError("eval: volume extents differ");
  std::size_t n_classes = classes;
  if (n_classes == 0) {
    std::uint8_t top = 0;
    for (std::uint8_t l : pred.labels) top = std::max(top, l);
    for (std::uint8_t l : truth.labels) top = std::max(top, l);
    n_classes = static_cast<std::size_t>(top) + 1;
  }
  if (n_classes < 2) throw ConfigError("eval: need at least one foreground label");
  std::printf("label,dice,surface_dice\n");
  double dice_sum = 0.0, surf_sum = 0.0;
  for (std::size_t l = 1; l < n_classes; ++l) {
    const auto pm = label_mask(pred.labels, static_cast<std::uint8_t>(l));
    const auto tm = label_mask(truth.labels, static_cast<std::uint8_t>(l));
    const double d = dice_overlap(pm, tm);
    const double s = surface_dice(pm, tm, pred.extents, tolerance);
    dice_sum += d;
    surf_sum += s;
    std::printf("%zu,%.17g,%.17g\n", l, d, s);
  }
  const double n = static_cast<double>(n_classes - 1);
  std::printf("mean,%.17g,%.17g\n", dice_sum / n, surf_sum / n);
  return 0;
}

int cmd_ablate(const ConfigSource& src, std::size_t seeds_override, const std::string& out_dir) {
  const RunConfig cfg = load_config(src);
  AblationConfig ab;
  ab.pretrain = cfg.trainer;
  ab.finetune = cfg.finetune;
  ab.n_seeds = seeds_override != 0 ? seeds_override : cfg.ablate_seeds;
  const std::vector<AblationCell> cells = ablation_matrix(ab);
  const std::string csv = ablation_csv(cells);
  std::fputs(csv.c_str(), stdout);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "ablation.csv", csv);
  }
  return 0;
}

// Fixed micro architecture for the full-objective finite-difference sweep:
// small enough that every online parameter is checked in seconds.
TrainerConfig gradcheck_trainer(std::uint64_t seed) {
  TrainerConfig cfg;
  cfg.phantom.extents = {16, 16, 16};
  cfg.phantom.n_organs = 2;
  cfg.crop_extents = {8, 8, 8};
  cfg.patch_extents = {4, 4, 4};
  cfg.pool_size = 4;
  cfg.jitter = 1;
  cfg.mask_ratio = 0.5;
  cfg.model.patch_voxels = 64;
  cfg.model.n_tokens = 8;
  cfg.model.embed_dim = 8;
  cfg.model.depth = 1;
  cfg.model.heads = 2;
  cfg.model.mlp_ratio = 2;
  cfg.model.decoder_dim = 4;
  cfg.model.decoder_depth = 1;
  cfg.model.decoder_heads = 1;
  cfg.model.head_hidden = 8;
  cfg.model.head_out = 8;
  cfg.model.align_dim = 8;
  cfg.warmup_steps = 1;
  cfg.total_steps = 4;
  cfg.batch_size = 2;
  cfg.checkpoint_every = 0;
  cfg.seed = seed;
  return cfg;
}

int cmd_gradcheck(std::size_t n_seeds, double tol) {
  bool all_passed = true;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const TrainerConfig cfg = gradcheck_trainer(1000 + s);
    const Trainer trainer(cfg);
    const std::vector<ViewBundle> batch = trainer.make_step_batch(0);
    const ParamMap& all = trainer.params();
    ParamMap online;
    for (const auto& [name, tensor] : all)
      if (!is_target_param(name)) online.emplace(name, tensor);
    ModelSession snap_session = ModelSession::trainable(cfg.model, all);
    const FrozenTargets frozen = snapshot_targets(snap_session, batch, cfg.loss);
    const auto build = [&](VarMap& leaves) {
      ModelSession session(cfg.model, leaves, &all);
      return compute_batch_loss(session, batch, cfg.loss, &frozen).total;
    };
    const GradCheckReport report = grad_check(build, online, 1e-5, tol);
    std::printf("seed %llu: checked=%zu max_rel_err=%.3g %s\n",
                static_cast<unsigned long long>(cfg.seed), report.n_checked, report.max_rel_err,
                report.passed ? "pass" : "FAIL");
    all_passed = all_passed && report.passed;
  }
  return all_passed ? 0 : 1;
}

int cmd_synth(const std::string& out_path, std::uint64_t seed, std::uint64_t deform_seed,
              const std::vector<std::uint64_t>& extents_raw, std::size_t organs, bool as_f32) {
  PhantomConfig pc;
  if (!extents_raw.empty()) {
    if (extents_raw.size() != 3) throw ConfigError("synth: --extents needs three values");
    for (std::size_t a = 0; a < 3; ++a) pc.extents[a] = static_cast<std::size_t>(extents_raw[a]);
  }
  pc.n_organs = organs;
  Volume v;
  try {
    v = generate_phantom(pc, seed, deform_seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  const fs::path path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_volume(path, v, as_f32);
  std::printf("wrote %s extents=%zu,%zu,%zu organs=%zu dtype=%s\n", out_path.c_str(), v.extents[0],
              v.extents[1], v.extents[2], organs, as_f32 ? "f32" : "f64");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-volume self-supervised pretraining workbench"};
  app.require_subcommand(1);

  ConfigSource pre_src;
  std::string pre_out, pre_resume;
  CLI::App* pre = app.add_subcommand("pretrain", "run self-supervised pretraining");
  add_config_options(pre, pre_src);
  pre->add_option("--out", pre_out, "artifact directory (losses.csv, checkpoints)");
  pre->add_option("--resume", pre_resume, "checkpoint file to resume from");

  ConfigSource ft_src;
  std::string ft_ckpt, ft_out;
  CLI::App* ft = app.add_subcommand("finetune", "supervised segmentation fine-tune");
  add_config_options(ft, ft_src);
  ft->add_option("--pretrained", ft_ckpt, "pretraining checkpoint providing the encoder");
  ft->add_option("--out", ft_out, "directory for finetune.csv");

  std::string ev_pred, ev_truth;
  double ev_tol = 1.0;
  std::size_t ev_classes = 0;
  CLI::App* ev = app.add_subcommand("eval", "compare two labeled volumes");
  ev->add_option("--pred", ev_pred, "predicted labeled volume")->required();
  ev->add_option("--truth", ev_truth, "reference labeled volume")->required();
  ev->add_option("--tolerance", ev_tol, "boundary agreement tolerance in voxels");
  ev->add_option("--classes", ev_classes, "class count (default: derive from the labels)");

  ConfigSource ab_src;
  std::size_t ab_seeds = 0;
  std::string ab_out;
  CLI::App* ab = app.add_subcommand("ablate", "loss-switch ablation grid");
  add_config_options(ab, ab_src);
  ab->add_option("--seeds", ab_seeds, "repetitions per cell (default: ablate.n_seeds)");
  ab->add_option("--out", ab_out, "directory for ablation.csv");

  std::size_t gc_seeds = 1;
  double gc_tol = 1e-4;
  CLI::App* gc = app.add_subcommand("gradcheck",
                                    "finite-difference check of the training objective");
  gc->add_option("--seeds", gc_seeds, "number of independent micro configurations");
  gc->add_option("--tol", gc_tol, "relative error tolerance");

  std::string sy_out;
  std::uint64_t sy_seed = 0, sy_deform = 0;
  std::vector<std::uint64_t> sy_extents;
  std::size_t sy_organs = 4;
  bool sy_f32 = false;
  CLI::App* sy = app.add_subcommand("synth", "synthesize one labeled phantom volume");
  sy->add_option("--out", sy_out, "output volume file")->required();
  sy->add_option("--seed", sy_seed, "anatomy seed");
  sy->add_option("--deform", sy_deform, "deformation seed");
  sy->add_option("--extents", sy_extents, "volume extents, three values")->expected(0, 3);
  sy->add_option("--organs", sy_organs, "organ count");
  sy->add_flag("--f32", sy_f32, "store intensities as 32-bit floats");

  try {
    app.parse(argc, argv);
    if (pre->parsed()) return cmd_pretrain(pre_src, pre_out, pre_resume);
    if (ft->parsed()) return cmd_finetune(ft_src, ft_ckpt, ft_out);
    if (ev->parsed()) return cmd_eval(ev_pred, ev_truth, ev_tol, ev_classes);
    if (ab->parsed()) return cmd_ablate(ab_src, ab_seeds, ab_out);
    if (gc->parsed()) return cmd_gradcheck(gc_seeds, gc_tol);
    if (sy->parsed()) return cmd_synth(sy_out, sy_seed, sy_deform, sy_extents, sy_organs, sy_f32);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const ArtifactError& e) {
    std::fprintf(stderr, "artifact error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
