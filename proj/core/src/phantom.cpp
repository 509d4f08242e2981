#include "voxssl/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "voxssl/rng.hpp"

namespace voxssl {

namespace {

constexpr std::uint64_t kAnatomyTag = 0x414e41544f4d59ull;  // stream tags
constexpr std::uint64_t kDeformTag = 0x4445464f524dull;
constexpr std::uint64_t kNoiseTag = 0x4e4f495345ull;
constexpr std::uint64_t kCropTag = 0x43524f50ull;

struct Organ {
  std::array<double, 3> center;  // voxel coordinates
  std::array<double, 3> radius;
  double level;
};

struct SmoothMode {
  std::array<double, 3> k;
  double phase;
  double amp;
};

double normalized_sq_dist(const Organ& o, double x, double y, double z) {
  const double dx = (x - o.center[0]) / o.radius[0];
  const double dy = (y - o.center[1]) / o.radius[1];
  const double dz = (z - o.center[2]) / o.radius[2];
  return dx * dx + dy * dy + dz * dz;
}

// Organ layout for one subject; pure function of the anatomy seed.
std::vector<Organ> base_organs(const PhantomConfig& cfg, std::uint64_t anatomy_seed) {
  Rng rng = Rng::derive(anatomy_seed, {kAnatomyTag});
  const double ex = static_cast<double>(cfg.extents[0]);
  const double ey = static_cast<double>(cfg.extents[1]);
  const double ez = static_cast<double>(cfg.extents[2]);
  std::vector<Organ> organs;
  for (std::size_t i = 0; i < cfg.n_organs; ++i) {
    bool placed = false;
    // the required separation relaxes every 200 rejected draws so dense
    // layouts always terminate; the draw sequence stays seed-deterministic
    for (int attempt = 0; attempt < 800 && !placed; ++attempt) {
      const double sep = 0.75 * std::pow(0.85, attempt / 200);
      Organ o;
      o.center = {rng.uniform(0.28, 0.72) * ex, rng.uniform(0.28, 0.72) * ey,
                  rng.uniform(0.28, 0.72) * ez};
      o.radius = {rng.uniform(0.10, 0.19) * ex, rng.uniform(0.10, 0.19) * ey,
                  rng.uniform(0.10, 0.19) * ez};
      bool ok = true;
      for (const Organ& other : organs) {
        const double dx = o.center[0] - other.center[0];
        const double dy = o.center[1] - other.center[1];
        const double dz = o.center[2] - other.center[2];
        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
        const double rmax_a = std::max({o.radius[0], o.radius[1], o.radius[2]});
        const double rmax_b = std::max({other.radius[0], other.radius[1], other.radius[2]});
        if (dist < sep * (rmax_a + rmax_b)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        const double span = cfg.n_organs > 1 ? static_cast<double>(i) / (cfg.n_organs - 1.0) : 0.5;
        o.level = 0.35 + 0.5 * span + rng.uniform(-0.04, 0.04);
        organs.push_back(o);
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error("generate_phantom: organ " + std::to_string(i + 1) +
                               " cannot be placed without full overlap");
    }
  }
  return organs;
}

std::vector<Organ> deform_organs(const PhantomConfig& cfg, std::vector<Organ> organs,
                                 std::uint64_t anatomy_seed, std::uint64_t deform_seed) {
  Rng rng = Rng::derive(anatomy_seed, {kDeformTag, deform_seed});
  for (Organ& o : organs) {
    for (std::size_t a = 0; a < 3; ++a) {
      const double span = static_cast<double>(cfg.extents[a]);
      o.center[a] += rng.uniform(-cfg.deform_center_frac, cfg.deform_center_frac) * span;
      o.radius[a] *= 1.0 + rng.uniform(-cfg.deform_radius_frac, cfg.deform_radius_frac);
    }
    o.level += rng.uniform(-0.02, 0.02);
  }
  return organs;
}

}  // namespace

Volume generate_phantom(const PhantomConfig& cfg, std::uint64_t anatomy_seed,
                        std::uint64_t deform_seed) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (cfg.extents[a] < 16) {
      throw std::invalid_argument("generate_phantom: extents must be >= 16 per axis");
    }
  }
  if (cfg.n_organs < 1 || cfg.n_organs > 8) {
    throw std::invalid_argument("generate_phantom: n_organs must be in 1..8");
  }

  const std::vector<Organ> organs =
      deform_organs(cfg, base_organs(cfg, anatomy_seed), anatomy_seed, deform_seed);

  Rng noise = Rng::derive(anatomy_seed, {kNoiseTag, deform_seed});
  std::vector<SmoothMode> modes(6);
  for (auto& m : modes) {
    for (std::size_t a = 0; a < 3; ++a) {
      m.k[a] = static_cast<double>(noise.uniform_int(1, 3));
    }
    m.phase = noise.uniform(0.0, 2.0 * std::numbers::pi);
    m.amp = cfg.smooth_noise_amp * noise.uniform(0.4, 1.0);
  }

  Volume v;
  v.extents = cfg.extents;
  v.phantom_id = Rng::mix({anatomy_seed, deform_seed});
  v.intensity.resize(v.voxels());
  v.labels.assign(v.voxels(), 0);

  const double ex = static_cast<double>(cfg.extents[0]);
  const double ey = static_cast<double>(cfg.extents[1]);
  const double ez = static_cast<double>(cfg.extents[2]);
  for (std::size_t x = 0; x < cfg.extents[0]; ++x) {
    for (std::size_t y = 0; y < cfg.extents[1]; ++y) {
      for (std::size_t z = 0; z < cfg.extents[2]; ++z) {
        const double fx = static_cast<double>(x);
        const double fy = static_cast<double>(y);
        const double fz = static_cast<double>(z);
        double bg = cfg.background_level;
        for (const SmoothMode& m : modes) {
          bg += m.amp * std::cos(2.0 * std::numbers::pi *
                                     (m.k[0] * fx / ex + m.k[1] * fy / ey + m.k[2] * fz / ez) +
                                 m.phase);
        }
        // Nearest organ in normalized ellipsoid distance owns the voxel.
        double best_nd = 1e300;
        std::size_t best_organ = 0;
        for (std::size_t i = 0; i < organs.size(); ++i) {
          const double nd = normalized_sq_dist(organs[i], fx, fy, fz);
          if (nd < best_nd) {
            best_nd = nd;
            best_organ = i;
          }
        }
        double value = bg;
        if (!organs.empty() && best_nd < 1.44) {
          // Soft edge: full organ level inside nd <= 0.81, blend out to 1.44.
          const double t = std::clamp((1.44 - best_nd) / (1.44 - 0.81), 0.0, 1.0);
          const double w = t * t * (3.0 - 2.0 * t);
          value = w * organs[best_organ].level + (1.0 - w) * bg;
          if (best_nd <= 1.0) {
            v.labels[v.index(x, y, z)] = static_cast<std::uint8_t>(best_organ + 1);
          }
        }
        value += noise.uniform(-cfg.noise_amp, cfg.noise_amp);
        v.intensity[v.index(x, y, z)] = std::clamp(value, 0.0, 1.0);
      }
    }
  }

  v.organ_centroids = label_centroids(v, cfg.n_organs);
  for (std::size_t i = 0; i < cfg.n_organs; ++i) {
    if (v.organ_centroids[i][0] < 0.0) {
      throw std::runtime_error("generate_phantom: organ " + std::to_string(i + 1) +
                               " rasterized to zero voxels");
    }
  }
  return v;
}

Volume generate_phantom(std::uint64_t seed, const std::array<std::size_t, 3>& extents,
                        std::size_t n_organs) {
  PhantomConfig cfg;
  cfg.extents = extents;
  cfg.n_organs = n_organs;
  return generate_phantom(cfg, seed, 0);
}

CropPair sample_aligned_crops(const PhantomConfig& cfg, std::uint64_t anatomy_seed,
                              std::pair<std::uint64_t, std::uint64_t> deform_seeds,
                              const std::array<std::size_t, 3>& crop_extents,
                              std::size_t jitter) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (crop_extents[a] == 0 || crop_extents[a] > cfg.extents[a]) {
      throw std::invalid_argument("sample_aligned_crops: crop extents must fit the phantom");
    }
  }
  const Volume vq = generate_phantom(cfg, anatomy_seed, deform_seeds.first);
  const Volume vk = generate_phantom(cfg, anatomy_seed, deform_seeds.second);

  Rng sel = Rng::derive(anatomy_seed, {kCropTag, deform_seeds.first, deform_seeds.second});
  const auto order = sel.permutation(cfg.n_organs);
  Rng jit = Rng::derive(anatomy_seed, {kCropTag, kNoiseTag, deform_seeds.second});

  const std::int64_t jmax = static_cast<std::int64_t>(jitter);
  for (int round = 0; round < 20; ++round) {
    std::array<int, 3> jk{};
    for (std::size_t a = 0; a < 3; ++a) {
      jk[a] = jmax > 0 ? static_cast<int>(jit.uniform_int(-jmax, jmax)) : 0;
    }
    for (std::size_t organ : order) {
      const auto cq = vq.organ_centroids[organ];
      const auto ck = vk.organ_centroids[organ];
      std::array<std::int64_t, 3> oq{}, ok{};
      bool fits = true;
      for (std::size_t a = 0; a < 3; ++a) {
        const auto half = static_cast<std::int64_t>(crop_extents[a] / 2);
        oq[a] = static_cast<std::int64_t>(std::llround(cq[a])) - half;
        ok[a] = static_cast<std::int64_t>(std::llround(ck[a])) + jk[a] - half;
        const auto limq = static_cast<std::int64_t>(cfg.extents[a] - crop_extents[a]);
        if (oq[a] < 0 || oq[a] > limq || ok[a] < 0 || ok[a] > limq) fits = false;
      }
      if (!fits) continue;
      CropPair pair;
      pair.q = crop_volume(vq, oq, crop_extents);
      pair.k = crop_volume(vk, ok, crop_extents);
      pair.organ_label = organ + 1;
      for (std::size_t a = 0; a < 3; ++a) pair.correspondence_offset[a] = -jk[a];
      const auto has_organ = [&](const Volume& c) {
        for (std::uint8_t l : c.labels) {
          if (l == pair.organ_label) return true;
        }
        return false;
      };
      if (!has_organ(pair.q) || !has_organ(pair.k)) continue;
      return pair;
    }
  }
  throw std::runtime_error("sample_aligned_crops: no organ admits an in-bounds crop");
}

}  // namespace voxssl
