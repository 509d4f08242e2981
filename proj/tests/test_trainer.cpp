#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voxssl/checkpoint.hpp"
#include "voxssl/errors.hpp"
#include "voxssl/model.hpp"
#include "voxssl/optim.hpp"
#include "voxssl/trainer.hpp"

using namespace voxssl;
namespace fs = std::filesystem;

namespace {

ModelConfig micro_model() {
  ModelConfig cfg;
  cfg.patch_voxels = 64;
  cfg.n_tokens = 8;
  cfg.embed_dim = 8;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.mlp_ratio = 2;
  cfg.decoder_dim = 4;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 1;
  cfg.head_hidden = 8;
  cfg.head_out = 8;
  cfg.align_dim = 8;
  return cfg;
}

TrainerConfig micro_trainer(std::uint64_t seed, std::string out_dir = "") {
  TrainerConfig cfg;
  cfg.phantom.extents = {16, 16, 16};
  cfg.phantom.n_organs = 2;
  cfg.crop_extents = {8, 8, 8};
  cfg.patch_extents = {4, 4, 4};
  cfg.pool_size = 4;
  cfg.jitter = 1;
  cfg.mask_ratio = 0.5;
  cfg.model = micro_model();
  cfg.warmup_steps = 2;
  cfg.total_steps = 6;
  cfg.batch_size = 2;
  cfg.ema_base = 0.99;
  cfg.checkpoint_every = 0;
  cfg.seed = seed;
  cfg.out_dir = std::move(out_dir);
  cfg.config_text = "micro-trainer-v1";
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("voxssl_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  const std::string where = "cannot open " + p.string();
  REQUIRE_MESSAGE(bool(in), where);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::uint64_t bits(double d) { return std::bit_cast<std::uint64_t>(d); }

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (bits(a.at(i)) != bits(b.at(i))) return false;
  }
  return true;
}

void check_params_equal(const ParamMap& a, const ParamMap& b) {
  REQUIRE(a.size() == b.size());
  for (const auto& [name, ta] : a) {
    INFO("parameter " << name);
    REQUIRE(b.count(name) == 1);
    CHECK(tensors_equal(ta, b.at(name)));
  }
}

bool params_differ_somewhere(const ParamMap& a, const ParamMap& b) {
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end() || !tensors_equal(ta, it->second)) return true;
  }
  return false;
}

bool bundles_equal(const ViewBundle& a, const ViewBundle& b) {
  return tensors_equal(a.view_u_tokens, b.view_u_tokens) &&
         tensors_equal(a.view_r_tokens, b.view_r_tokens) &&
         tensors_equal(a.view_w_tokens, b.view_w_tokens) &&
         tensors_equal(a.view_v_tokens, b.view_v_tokens) &&
         a.mask_u.masked == b.mask_u.masked && a.mask_u.visible == b.mask_u.visible &&
         a.mask_r.masked == b.mask_r.masked && a.mask_r.visible == b.mask_r.visible &&
         tensors_equal(a.targets_q, b.targets_q) && tensors_equal(a.targets_k, b.targets_k);
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

TEST_CASE("the optimizer's first step matches a hand-computed update") {
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.95;
  cfg.eps = 1e-8;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  ParamMap params;
  params["p"] = Tensor({2}, {1.0, -2.0});
  std::map<std::string, Tensor> grads;
  grads.emplace("p", Tensor({2}, {1.0, 1.0}));
  opt.step(params, grads);

  // after one step with a unit gradient both bias-corrected moments are one,
  // so the update is lr / (1 + eps); mirror the arithmetic operation by
  // operation for a bitwise comparison
  const double m = cfg.beta1 * 0.0 + (1.0 - cfg.beta1) * 1.0;
  const double v = cfg.beta2 * 0.0 + (1.0 - cfg.beta2) * 1.0 * 1.0;
  const double m_hat = m / (1.0 - std::pow(cfg.beta1, 1.0));
  const double v_hat = v / (1.0 - std::pow(cfg.beta2, 1.0));
  const double delta = cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  CHECK(params.at("p").at(0) == 1.0 - delta);
  CHECK(params.at("p").at(1) == -2.0 - delta);
  CHECK(delta == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(opt.steps() == 1);
  CHECK(opt.moment1().at("p").at(0) == m);
  CHECK(opt.moment2().at("p").at(0) == v);
}

TEST_CASE("weight decay is decoupled and shrinks parameters even with zero gradients") {
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt(cfg);
  ParamMap params;
  params["w"] = Tensor({2}, {4.0, -8.0});
  std::map<std::string, Tensor> grads;
  grads.emplace("w", Tensor::zeros({2}));
  opt.step(params, grads);
  // both moments stay zero, so only the decay term moves the parameter
  CHECK(params.at("w").at(0) == 4.0 - cfg.lr * cfg.weight_decay * 4.0);
  CHECK(params.at("w").at(1) == -8.0 - cfg.lr * cfg.weight_decay * -8.0);
  CHECK(opt.moment1().at("w").at(0) == 0.0);
  CHECK(opt.moment2().at("w").at(1) == 0.0);
}

TEST_CASE("a zero learning-rate scale freezes parameters while moments advance") {
  AdamW opt{AdamWConfig{}};
  ParamMap params;
  params["p"] = Tensor({3}, {1.5, -2.5, 0.25});
  const ParamMap before = params;
  std::map<std::string, Tensor> grads;
  grads.emplace("p", Tensor({3}, {0.3, -0.7, 2.0}));
  opt.step(params, grads, 0.0);
  check_params_equal(params, before);
  CHECK(opt.steps() == 1);
  CHECK(opt.moment1().at("p").at(0) != 0.0);
  CHECK(opt.moment2().at("p").at(2) != 0.0);
}

TEST_CASE("moment buffers appear lazily and only for parameters with gradients") {
  AdamW opt{AdamWConfig{}};
  ParamMap params;
  params["a"] = Tensor({2}, {1.0, 2.0});
  params["b"] = Tensor({2}, {3.0, 4.0});
  const Tensor b_before = params.at("b");

  std::map<std::string, Tensor> only_a;
  only_a.emplace("a", Tensor({2}, {0.1, 0.2}));
  opt.step(params, only_a);
  CHECK(opt.moment1().count("a") == 1);
  CHECK(opt.moment1().count("b") == 0);
  CHECK(opt.moment2().count("b") == 0);
  CHECK(tensors_equal(params.at("b"), b_before));  // untouched without a gradient

  std::map<std::string, Tensor> both;
  both.emplace("a", Tensor({2}, {0.1, 0.2}));
  both.emplace("b", Tensor({2}, {0.3, 0.4}));
  opt.step(params, both);
  CHECK(opt.moment1().count("b") == 1);
  CHECK(opt.steps() == 2);
  CHECK(!tensors_equal(params.at("b"), b_before));
}

TEST_CASE("two optimizer steps match a hand-iterated trajectory") {
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.1;
  AdamW opt(cfg);
  ParamMap params;
  params["x"] = Tensor({1}, {0.7});

  double p = 0.7, m = 0.0, v = 0.0;
  const double gs[2] = {0.9, -0.4};
  for (int t = 1; t <= 2; ++t) {
    std::map<std::string, Tensor> grads;
    grads.emplace("x", Tensor({1}, {gs[t - 1]}));
    opt.step(params, grads);

    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gs[t - 1];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gs[t - 1] * gs[t - 1];
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    p -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.lr * cfg.weight_decay * p;
    CHECK(params.at("x").at(0) == p);
  }
  CHECK(opt.steps() == 2);
}

TEST_CASE("non-finite gradients are rejected and leave the state untouched") {
  AdamW opt{AdamWConfig{}};
  ParamMap params;
  params["p"] = Tensor({2}, {1.0, 2.0});
  const ParamMap before = params;

  std::map<std::string, Tensor> nan_grads;
  nan_grads.emplace("p", Tensor({2}, {0.5, std::nan("")}));
  CHECK_THROWS_AS(opt.step(params, nan_grads), NumericError);

  std::map<std::string, Tensor> inf_grads;
  inf_grads.emplace("p", Tensor({2}, {INFINITY, 0.5}));
  CHECK_THROWS_AS(opt.step(params, inf_grads), NumericError);

  check_params_equal(params, before);
  CHECK(opt.steps() == 0);
  CHECK(opt.moment1().empty());
}

TEST_CASE("unknown gradient names and shape mismatches are programming errors") {
  AdamW opt{AdamWConfig{}};
  ParamMap params;
  params["p"] = Tensor({2}, {1.0, 2.0});

  std::map<std::string, Tensor> unknown;
  unknown.emplace("q", Tensor({2}, {0.1, 0.1}));
  CHECK_THROWS_AS(opt.step(params, unknown), std::logic_error);

  std::map<std::string, Tensor> wrong_shape;
  wrong_shape.emplace("p", Tensor({3}, {0.1, 0.1, 0.1}));
  CHECK_THROWS_AS(opt.step(params, wrong_shape), std::logic_error);
}

TEST_CASE("restoring optimizer state continues the trajectory bitwise") {
  AdamWConfig cfg;
  cfg.lr = 0.01;
  AdamW a(cfg);
  ParamMap pa;
  pa["w"] = Tensor({4}, {0.1, -0.2, 0.3, -0.4});
  const auto grad_for = [](int t) {
    return Tensor({4}, {0.5 - 0.1 * t, -0.3 + 0.05 * t, 1.0 / (t + 1), -0.8});
  };
  for (int t = 1; t <= 2; ++t) {
    std::map<std::string, Tensor> grads;
    grads.emplace("w", grad_for(t));
    a.step(pa, grads);
  }

  ParamMap pb = pa;
  AdamW b(cfg);
  b.restore(a.moment1(), a.moment2(), a.steps());
  std::map<std::string, Tensor> g3;
  g3.emplace("w", grad_for(3));
  a.step(pa, g3);
  b.step(pb, g3);
  check_params_equal(pa, pb);
  CHECK(a.steps() == b.steps());
}

// ---------------------------------------------------------------------------
// Schedules and clipping
// ---------------------------------------------------------------------------

TEST_CASE("the learning-rate schedule warms up linearly, decays by cosine, then floors") {
  const double peak = 0.4, floor_rate = 0.1;
  CHECK(lr_schedule(0, 10, 110, peak, floor_rate) == 0.0);
  CHECK(lr_schedule(5, 10, 110, peak, floor_rate) == 0.2);
  CHECK(lr_schedule(10, 10, 110, peak, floor_rate) == doctest::Approx(peak).epsilon(1e-15));
  // halfway through the decay the rate sits midway between peak and floor
  CHECK(lr_schedule(60, 10, 110, peak, floor_rate) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lr_schedule(110, 10, 110, peak, floor_rate) == floor_rate);
  CHECK(lr_schedule(5000, 10, 110, peak, floor_rate) == floor_rate);

  for (std::uint64_t s = 1; s <= 10; ++s) {
    CHECK(lr_schedule(s, 10, 110, peak, floor_rate) >= lr_schedule(s - 1, 10, 110, peak, floor_rate));
  }
  for (std::uint64_t s = 11; s <= 110; ++s) {
    CHECK(lr_schedule(s, 10, 110, peak, floor_rate) <= lr_schedule(s - 1, 10, 110, peak, floor_rate));
  }

  // zero warmup starts straight at the peak
  CHECK(lr_schedule(0, 0, 50, peak, floor_rate) == doctest::Approx(peak).epsilon(1e-15));
  CHECK_THROWS_AS(lr_schedule(0, 0, 0, peak, floor_rate), std::invalid_argument);
  CHECK_THROWS_AS(lr_schedule(0, 5, 5, peak, floor_rate), std::invalid_argument);
}

TEST_CASE("the target-momentum schedule ramps from its base to one") {
  CHECK(ema_schedule(0, 100, 0.996) == doctest::Approx(0.996).epsilon(1e-15));
  CHECK(ema_schedule(50, 100, 0.996) == doctest::Approx(0.998).epsilon(1e-12));
  CHECK(ema_schedule(100, 100, 0.996) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ema_schedule(250, 100, 0.996) == doctest::Approx(1.0).epsilon(1e-15));  // clamped past total
  for (std::uint64_t s = 1; s <= 100; ++s) {
    CHECK(ema_schedule(s, 100, 0.996) >= ema_schedule(s - 1, 100, 0.996));
  }
  CHECK(ema_schedule(17, 100, 1.0) == 1.0);
  CHECK_THROWS_AS(ema_schedule(0, 0, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(ema_schedule(0, 10, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(ema_schedule(0, 10, 1.5), std::invalid_argument);
}

TEST_CASE("gradient clipping rescales at the joint norm and reports the pre-clip norm") {
  std::map<std::string, Tensor> grads;
  grads.emplace("a", Tensor({1}, {3.0}));
  grads.emplace("b", Tensor({1}, {4.0}));
  const auto copy = grads;

  CHECK(clip_global_norm(grads, 10.0) == 5.0);
  CHECK(tensors_equal(grads.at("a"), copy.at("a")));  // below the limit: untouched
  CHECK(tensors_equal(grads.at("b"), copy.at("b")));

  CHECK(clip_global_norm(grads, 2.5) == 5.0);  // returns the norm before rescaling
  CHECK(grads.at("a").at(0) == 1.5);
  CHECK(grads.at("b").at(0) == 2.0);
  CHECK(clip_global_norm(grads, 10.0) == 2.5);  // joint norm after the rescale

  CHECK_THROWS_AS(clip_global_norm(grads, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(clip_global_norm(grads, -1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

TEST_CASE("checkpoints round-trip every field bitwise") {
  const fs::path dir = fresh_dir("ckpt_roundtrip");
  fs::create_directories(dir);
  const fs::path path = dir / "state.bin";

  Checkpoint ckpt;
  ckpt.step = 1234567890123ull;
  ckpt.opt_t = 42;
  ckpt.config_text = "alpha = 1\nbeta = two\n";
  ckpt.params["w"] = Tensor({2, 3}, {0.0, -0.0, 1e-300, -1e300, 3.141592653589793, 5e-324});
  ckpt.params["b"] = Tensor({4}, {1.0, 2.0, 3.0, 4.0});
  ckpt.params["cube"] = Tensor({2, 2, 2}, {0.5, -0.5, 0.25, -0.25, 8.0, -8.0, 1e16, -1e-16});
  ckpt.opt_m["w"] = Tensor({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, std::nan("")});
  ckpt.opt_v["w"] = Tensor({2, 3}, {1e-12, 2e-12, 3e-12, 4e-12, 5e-12, 6e-12});

  write_checkpoint(path, ckpt);
  const Checkpoint back = read_checkpoint(path);

  CHECK(back.step == ckpt.step);
  CHECK(back.opt_t == ckpt.opt_t);
  CHECK(back.config_text == ckpt.config_text);
  check_params_equal(back.params, ckpt.params);
  REQUIRE(back.opt_m.count("w") == 1);
  REQUIRE(back.opt_v.count("w") == 1);
  CHECK(tensors_equal(back.opt_v.at("w"), ckpt.opt_v.at("w")));
  // NaN payloads survive as raw bits
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(bits(back.opt_m.at("w").at(i)) == bits(ckpt.opt_m.at("w").at(i)));
  }
  // the atomic write leaves no temporary behind
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);
}

TEST_CASE("tampered or truncated checkpoint files are rejected") {
  const fs::path dir = fresh_dir("ckpt_guards");
  fs::create_directories(dir);
  const fs::path good = dir / "good.bin";

  Checkpoint ckpt;
  ckpt.step = 7;
  ckpt.config_text = "gamma = 3\n";
  ckpt.params["w"] = Tensor({2}, {1.0, 2.0});
  write_checkpoint(good, ckpt);
  CHECK(read_checkpoint(good).step == 7);

  const std::string bytes = slurp(good);
  const fs::path bad = dir / "bad.bin";

  {  // wrong magic
    std::string t = bytes;
    t[0] = 'Z';
    spit(bad, t);
    CHECK_THROWS_AS(read_checkpoint(bad), ArtifactError);
  }
  {  // unsupported version
    std::string t = bytes;
    t[4] = static_cast<char>(9);
    spit(bad, t);
    CHECK_THROWS_AS(read_checkpoint(bad), ArtifactError);
  }
  {  // config text no longer matches its stored hash
    std::string t = bytes;
    t[40] ^= 0x01;  // first byte of the embedded text
    spit(bad, t);
    CHECK_THROWS_AS(read_checkpoint(bad), ArtifactError);
  }
  {  // truncated payload
    spit(bad, bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_checkpoint(bad), ArtifactError);
    spit(bad, bytes.substr(0, 10));
    CHECK_THROWS_AS(read_checkpoint(bad), ArtifactError);
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.bin"), ArtifactError);
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

TEST_CASE("trainer construction is deterministic in the seed") {
  const TrainerConfig cfg = micro_trainer(9);
  Trainer t1(cfg), t2(cfg);
  REQUIRE(t1.pool().size() == cfg.pool_size);
  for (std::size_t i = 0; i < cfg.pool_size; ++i) {
    CHECK(t1.pool()[i].q.intensity == t2.pool()[i].q.intensity);
    CHECK(t1.pool()[i].k.intensity == t2.pool()[i].k.intensity);
    CHECK(t1.pool()[i].q.labels == t2.pool()[i].q.labels);
  }
  check_params_equal(t1.params(), t2.params());
  CHECK(t1.step() == 0);

  Trainer t3(micro_trainer(10));
  CHECK(params_differ_somewhere(t1.params(), t3.params()));
  bool pool_differs = false;
  for (std::size_t i = 0; i < cfg.pool_size; ++i) {
    if (t1.pool()[i].q.intensity != t3.pool()[i].q.intensity) pool_differs = true;
  }
  CHECK(pool_differs);
}

TEST_CASE("per-step batches are pure functions of the configuration and step") {
  Trainer tr(micro_trainer(12));
  const auto b0a = tr.make_step_batch(0);
  const auto b0b = tr.make_step_batch(0);
  REQUIRE(b0a.size() == 2);
  for (std::size_t i = 0; i < b0a.size(); ++i) CHECK(bundles_equal(b0a[i], b0b[i]));

  const auto b1 = tr.make_step_batch(1);
  bool differs = false;
  for (std::size_t i = 0; i < b0a.size(); ++i) {
    if (!bundles_equal(b0a[i], b1[i])) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("the target update inside a training step uses pre-step online values") {
  Trainer tr(micro_trainer(13));
  const ParamMap before = tr.params();
  tr.train_step();
  const double m = ema_schedule(0, tr.config().total_steps, tr.config().ema_base);
  for (const auto& [tgt_name, online_name] : ema_pairs(before)) {
    INFO("pair " << tgt_name << " <- " << online_name);
    const Tensor& t0 = before.at(tgt_name);
    const Tensor& o0 = before.at(online_name);
    const Tensor& t1 = tr.params().at(tgt_name);
    REQUIRE(t1.same_shape(t0));
    bool all_match = true;
    for (std::size_t i = 0; i < t0.size(); ++i) {
      double expect = t0.at(i);
      expect += (1.0 - m) * (o0.at(i) - expect);
      if (bits(t1.at(i)) != bits(expect)) all_match = false;
    }
    CHECK(all_match);
  }
}

TEST_CASE("a training step reports finite losses and advances the counter") {
  TrainerConfig cfg = micro_trainer(14);
  Trainer tr(cfg);
  const StepStats s = tr.train_step();
  CHECK(s.step == 0);
  CHECK(tr.step() == 1);
  CHECK(std::isfinite(s.recon));
  CHECK(std::isfinite(s.inter));
  CHECK(std::isfinite(s.intra));
  CHECK(std::isfinite(s.total));
  CHECK(s.recon > 0.0);
  CHECK(s.grad_norm > 0.0);
  CHECK(s.total == doctest::Approx(s.recon + s.inter + s.intra).epsilon(1e-12));
  CHECK(s.lr == lr_schedule(0, cfg.warmup_steps, cfg.total_steps, cfg.adamw.lr, cfg.min_lr));
  CHECK(s.ema_m == ema_schedule(0, cfg.total_steps, cfg.ema_base));

  const StepStats s1 = tr.train_step();
  CHECK(s1.step == 1);
  CHECK(tr.step() == 2);
}

TEST_CASE("run writes losses.csv and checkpoints at the configured cadence") {
  const fs::path dir = fresh_dir("run_artifacts");
  TrainerConfig cfg = micro_trainer(11, dir.string());
  cfg.checkpoint_every = 2;
  Trainer tr(cfg);
  const auto produced = tr.run();
  REQUIRE(produced.size() == 6);
  CHECK(tr.step() == 6);
  for (std::size_t i = 0; i < produced.size(); ++i) CHECK(produced[i].step == i);

  const auto lines = lines_of(slurp(dir / "losses.csv"));
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "step,recon,inter,intra,total,lr,ema_m,grad_norm");
  for (std::size_t i = 0; i < produced.size(); ++i) CHECK(lines[1 + i] == csv_row(produced[i]));

  for (int s : {2, 4, 6}) {
    CHECK(fs::exists(dir / ("checkpoint-" + std::to_string(s) + ".bin")));
  }
  for (int s : {1, 3, 5}) {
    CHECK(!fs::exists(dir / ("checkpoint-" + std::to_string(s) + ".bin")));
  }

  const Checkpoint final_ckpt = read_checkpoint(dir / "checkpoint-6.bin");
  CHECK(final_ckpt.step == 6);
  CHECK(final_ckpt.opt_t == 6);
  CHECK(final_ckpt.config_text == cfg.config_text);
  check_params_equal(final_ckpt.params, tr.params());
}

TEST_CASE("identical configurations deliver byte-identical artifacts") {
  const fs::path d1 = fresh_dir("repro_a");
  const fs::path d2 = fresh_dir("repro_b");
  Trainer(micro_trainer(33, d1.string())).run();
  Trainer(micro_trainer(33, d2.string())).run();
  CHECK(slurp(d1 / "losses.csv") == slurp(d2 / "losses.csv"));
  CHECK(slurp(d1 / "checkpoint-6.bin") == slurp(d2 / "checkpoint-6.bin"));

  const fs::path d3 = fresh_dir("repro_c");
  Trainer(micro_trainer(34, d3.string())).run();
  CHECK(slurp(d1 / "losses.csv") != slurp(d3 / "losses.csv"));
}

TEST_CASE("a resumed run reproduces the uninterrupted run bitwise") {
  const fs::path straight_dir = fresh_dir("resume_straight");
  const fs::path split_dir = fresh_dir("resume_split");

  TrainerConfig cfg = micro_trainer(21, straight_dir.string());
  cfg.checkpoint_every = 3;
  Trainer(cfg).run();

  TrainerConfig cfg_split = cfg;
  cfg_split.out_dir = split_dir.string();
  Trainer(cfg_split).run();

  // continue the split run from its midpoint checkpoint with a fresh trainer
  TrainerConfig cfg_resume = cfg_split;
  cfg_resume.resume_from = (split_dir / "checkpoint-3.bin").string();
  Trainer resumed(cfg_resume);
  CHECK(resumed.step() == 3);
  const auto produced = resumed.run();
  REQUIRE(produced.size() == 3);
  CHECK(produced.front().step == 3);

  CHECK(slurp(straight_dir / "losses.csv") == slurp(split_dir / "losses.csv"));
  CHECK(slurp(straight_dir / "checkpoint-6.bin") == slurp(split_dir / "checkpoint-6.bin"));
  const Checkpoint reference = read_checkpoint(straight_dir / "checkpoint-6.bin");
  check_params_equal(reference.params, resumed.params());

  // already at the end: nothing more is produced and the file is untouched
  const std::string csv_before = slurp(split_dir / "losses.csv");
  CHECK(resumed.run().empty());
  CHECK(slurp(split_dir / "losses.csv") == csv_before);
}

TEST_CASE("resume refuses foreign configurations, stale directories, and overruns") {
  const fs::path dir = fresh_dir("resume_guards");
  TrainerConfig cfg = micro_trainer(22, dir.string());
  cfg.checkpoint_every = 3;
  Trainer(cfg).run();
  const std::string midpoint = (dir / "checkpoint-3.bin").string();

  TrainerConfig foreign = cfg;
  foreign.resume_from = midpoint;
  foreign.config_text = "something-else-entirely";
  CHECK_THROWS_AS(Trainer{foreign}, ArtifactError);

  TrainerConfig overrun = cfg;
  overrun.resume_from = midpoint;
  overrun.out_dir.clear();
  overrun.total_steps = 2;
  overrun.warmup_steps = 1;
  CHECK_THROWS_AS(Trainer{overrun}, ArtifactError);

  TrainerConfig uncovered = cfg;
  uncovered.resume_from = midpoint;
  uncovered.out_dir = fresh_dir("resume_uncovered").string();  // no losses.csv present
  CHECK_THROWS_AS(Trainer{uncovered}, ArtifactError);

  TrainerConfig missing = cfg;
  missing.resume_from = (dir / "missing.bin").string();
  CHECK_THROWS_AS(Trainer{missing}, ArtifactError);
}

TEST_CASE("invalid run configurations are rejected") {
  const TrainerConfig ok = micro_trainer(1);
  CHECK_NOTHROW(ok.validate());

  auto expect_reject = [&](auto mutate) {
    TrainerConfig bad = ok;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  };
  expect_reject([](TrainerConfig& c) { c.patch_extents = {3, 4, 4}; });   // indivisible
  expect_reject([](TrainerConfig& c) { c.model.n_tokens = 16; });         // grid disagreement
  expect_reject([](TrainerConfig& c) { c.model.patch_voxels = 32; });     // patch size disagreement
  expect_reject([](TrainerConfig& c) { c.batch_size = 0; });
  expect_reject([](TrainerConfig& c) { c.pool_size = 0; });
  expect_reject([](TrainerConfig& c) { c.total_steps = 0; });
  expect_reject([](TrainerConfig& c) { c.warmup_steps = c.total_steps; });
  expect_reject([](TrainerConfig& c) { c.mask_ratio = 1.0; });
  expect_reject([](TrainerConfig& c) { c.clip_norm = 0.0; });
  expect_reject([](TrainerConfig& c) { c.ema_base = 1.5; });
  expect_reject([](TrainerConfig& c) { c.min_lr = 1.0; });  // above the peak rate
  expect_reject([](TrainerConfig& c) {
    c.loss.infonce = true;
    c.batch_size = 1;
  });
  expect_reject([](TrainerConfig& c) {
    // consistent grid and model, but the crop exceeds the phantom
    c.crop_extents = {32, 16, 16};
    c.patch_extents = {16, 8, 8};
    c.model.patch_voxels = 1024;
  });
}

TEST_CASE("per-term gradient norms are finite and positive") {
  const TrainerConfig cfg = micro_trainer(31);
  Trainer tr(cfg);
  const auto batch = tr.make_step_batch(0);
  const auto norms = term_gradient_norms(cfg.model, cfg.loss, tr.params(), batch);
  REQUIRE(norms.count("recon") == 1);
  REQUIRE(norms.count("inter") == 1);
  REQUIRE(norms.count("intra") == 1);
  for (const auto& [term, n] : norms) {
    INFO("term " << term);
    CHECK(std::isfinite(n));
    CHECK(n > 0.0);
  }
}

TEST_CASE("a short run reduces the training loss") {
  TrainerConfig cfg = micro_trainer(5);
  cfg.total_steps = 60;
  cfg.warmup_steps = 6;
  cfg.adamw.lr = 3e-3;
  cfg.min_lr = 3e-4;
  Trainer tr(cfg);
  const auto rows = tr.run();
  REQUIRE(rows.size() == 60);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += rows[i].total;
    last += rows[rows.size() - 10 + i].total;
  }
  first /= 10.0;
  last /= 10.0;
  INFO("first-10 mean " << first << ", last-10 mean " << last);
  CHECK(last < first);
}

TEST_CASE("loss rows print at full precision and survive a text round-trip") {
  StepStats s;
  s.step = 3;
  s.recon = 0.5;
  s.inter = 0.25;
  s.intra = 0.125;
  s.total = 0.875;
  s.lr = 0.0009765625;  // 2^-10
  s.ema_m = 1.0;
  s.grad_norm = 2.0;
  CHECK(csv_row(s) == "3,0.5,0.25,0.125,0.875,0.0009765625,1,2");

  s.recon = 1.0 / 3.0;
  s.inter = std::acos(-1.0);
  s.intra = 1e-17;
  s.total = s.recon + s.inter + s.intra;
  s.lr = 2.2250738585072014e-308;
  s.grad_norm = 123456789.123456789;
  const std::string row = csv_row(s);
  StepStats r;
  REQUIRE(std::sscanf(row.c_str(), "%" SCNu64 ",%lg,%lg,%lg,%lg,%lg,%lg,%lg", &r.step, &r.recon,
                      &r.inter, &r.intra, &r.total, &r.lr, &r.ema_m, &r.grad_norm) == 8);
  CHECK(r.step == s.step);
  CHECK(bits(r.recon) == bits(s.recon));
  CHECK(bits(r.inter) == bits(s.inter));
  CHECK(bits(r.intra) == bits(s.intra));
  CHECK(bits(r.total) == bits(s.total));
  CHECK(bits(r.lr) == bits(s.lr));
  CHECK(bits(r.grad_norm) == bits(s.grad_norm));
  CHECK(csv_row(r) == row);
}
