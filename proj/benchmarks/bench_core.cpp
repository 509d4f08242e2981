// Microbenchmarks for the hot paths: synthesis, tokenization, the encoder
// and alignment forwards, a full optimization step, the distance-transform
// metrics, and checkpoint serialization. Run with --benchmark_filter=... to
// select a subset.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "voxssl/checkpoint.hpp"
#include "voxssl/losses.hpp"
#include "voxssl/metrics.hpp"
#include "voxssl/model.hpp"
#include "voxssl/patches.hpp"
#include "voxssl/phantom.hpp"
#include "voxssl/rng.hpp"
#include "voxssl/trainer.hpp"
#include "voxssl/volume.hpp"

namespace {

using namespace voxssl;

TrainerConfig desk_config() {
  TrainerConfig cfg;  // 64x64x32 phantoms, 32x32x16 crops, 16 tokens
  cfg.pool_size = 4;
  cfg.seed = 1;
  cfg.checkpoint_every = 0;
  return cfg;
}

void BM_PhantomGenerate(benchmark::State& state) {
  const PhantomConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_phantom(cfg, seed++, 0));
  }
}
BENCHMARK(BM_PhantomGenerate)->Unit(benchmark::kMillisecond);

void BM_AlignedCropPair(benchmark::State& state) {
  const TrainerConfig cfg = desk_config();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_aligned_crops(cfg.phantom, seed++, {1, 2},
                                                  cfg.crop_extents, cfg.jitter));
  }
}
BENCHMARK(BM_AlignedCropPair)->Unit(benchmark::kMillisecond);

void BM_Patchify(benchmark::State& state) {
  const TrainerConfig cfg = desk_config();
  const PatchGrid grid(cfg.crop_extents, cfg.patch_extents);
  const CropPair pair =
      sample_aligned_crops(cfg.phantom, 1, {1, 2}, cfg.crop_extents, cfg.jitter);
  for (auto _ : state) {
    benchmark::DoNotOptimize(patchify(pair.q, grid));
  }
}
BENCHMARK(BM_Patchify)->Unit(benchmark::kMicrosecond);

void BM_ViewBundle(benchmark::State& state) {
  const TrainerConfig cfg = desk_config();
  const PatchGrid grid(cfg.crop_extents, cfg.patch_extents);
  const CropPair pair =
      sample_aligned_crops(cfg.phantom, 1, {1, 2}, cfg.crop_extents, cfg.jitter);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_view_bundle(pair, grid, cfg.mask_ratio, seed++));
  }
}
BENCHMARK(BM_ViewBundle)->Unit(benchmark::kMicrosecond);

void BM_EncoderFull(benchmark::State& state) {
  const TrainerConfig cfg = desk_config();
  const PatchGrid grid(cfg.crop_extents, cfg.patch_extents);
  const CropPair pair =
      sample_aligned_crops(cfg.phantom, 1, {1, 2}, cfg.crop_extents, cfg.jitter);
  const Tensor tokens = patchify(pair.q, grid);
  const ParamMap params = init_params(cfg.model, 1);
  for (auto _ : state) {
    ModelSession session = ModelSession::trainable(cfg.model, params);
    benchmark::DoNotOptimize(session.encode_full(tokens, "enc.").value());
  }
}
BENCHMARK(BM_EncoderFull)->Unit(benchmark::kMillisecond);

void BM_AlignForward(benchmark::State& state) {
  const TrainerConfig cfg = desk_config();
  const ParamMap params = init_params(cfg.model, 1);
  Rng rng = Rng::derive(2, {3});
  Tensor queries({cfg.model.n_tokens, cfg.model.embed_dim});
  Tensor source({cfg.model.n_tokens, cfg.model.embed_dim});
  for (std::size_t i = 0; i < queries.size(); ++i) queries.at(i) = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < source.size(); ++i) source.at(i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    ModelSession session = ModelSession::trainable(cfg.model, params);
    benchmark::DoNotOptimize(
        session.align(Var::leaf(queries, false), Var::leaf(source, false)).aligned.value());
  }
}
BENCHMARK(BM_AlignForward)->Unit(benchmark::kMicrosecond);

void BM_BatchLossForward(benchmark::State& state) {
  TrainerConfig cfg = desk_config();
  const Trainer trainer(cfg);
  const std::vector<ViewBundle> batch = trainer.make_step_batch(0);
  for (auto _ : state) {
    ModelSession session = ModelSession::trainable(cfg.model, trainer.params());
    benchmark::DoNotOptimize(compute_batch_loss(session, batch, cfg.loss).total.value());
  }
}
BENCHMARK(BM_BatchLossForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  TrainerConfig cfg = desk_config();
  cfg.total_steps = 1u << 30;  // never finishes inside the benchmark
  Trainer trainer(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.train_step());
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_SquaredEdt(benchmark::State& state) {
  const std::array<std::size_t, 3> e{32, 32, 32};
  Rng rng = Rng::derive(5, {6});
  std::vector<std::uint8_t> seeds(e[0] * e[1] * e[2], 0);
  for (int i = 0; i < 200; ++i) seeds[rng.uniform_int(0, seeds.size() - 1)] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(squared_edt(seeds, e));
  }
}
BENCHMARK(BM_SquaredEdt)->Unit(benchmark::kMillisecond);

void BM_SurfaceDice(benchmark::State& state) {
  const std::array<std::size_t, 3> e{32, 32, 32};
  std::vector<std::uint8_t> a(e[0] * e[1] * e[2], 0), b = a;
  for (std::size_t x = 8; x < 24; ++x)
    for (std::size_t y = 8; y < 24; ++y)
      for (std::size_t z = 8; z < 24; ++z) {
        a[(x * e[1] + y) * e[2] + z] = 1;
        b[((x - 1) * e[1] + y) * e[2] + z] = 1;
      }
  for (auto _ : state) {
    benchmark::DoNotOptimize(surface_dice(a, b, e, 1.0));
  }
}
BENCHMARK(BM_SurfaceDice)->Unit(benchmark::kMillisecond);

void BM_CheckpointRoundTrip(benchmark::State& state) {
  const TrainerConfig cfg = desk_config();
  Checkpoint ckpt;
  ckpt.step = 123;
  ckpt.params = init_params(cfg.model, 1);
  for (const auto& [name, t] : ckpt.params) {
    ckpt.opt_m[name] = Tensor::zeros(t.shape());
    ckpt.opt_v[name] = Tensor::zeros(t.shape());
  }
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "voxssl-bench-ckpt.bin";
  for (auto _ : state) {
    write_checkpoint(path, ckpt);
    benchmark::DoNotOptimize(read_checkpoint(path));
  }
  std::filesystem::remove(path);
}
BENCHMARK(BM_CheckpointRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
