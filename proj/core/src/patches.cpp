#include "voxssl/patches.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "voxssl/rng.hpp"

namespace voxssl {

namespace {
constexpr std::uint64_t kMaskTag = 0x4d41534bull;
}

PatchGrid::PatchGrid(const std::array<std::size_t, 3>& vol, const std::array<std::size_t, 3>& patch)
    : vol_extents(vol), patch_extents(patch) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (patch[a] == 0 || vol[a] % patch[a] != 0) {
      throw std::invalid_argument("PatchGrid: patch extents must divide volume extents on axis " +
                                  std::to_string(a));
    }
    counts[a] = vol[a] / patch[a];
  }
}

MaskSpec mask_random(const PatchGrid& grid, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0) || !(ratio < 1.0)) {
    throw std::invalid_argument("mask_random: ratio must satisfy 0 <= ratio < 1");
  }
  const std::size_t n = grid.token_count();
  const auto n_masked =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
  Rng rng = Rng::derive(seed, {kMaskTag});
  const auto perm = rng.permutation(n);
  MaskSpec spec;
  spec.n_tokens = n;
  spec.masked.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_masked));
  spec.visible.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_masked), perm.end());
  std::sort(spec.masked.begin(), spec.masked.end());
  std::sort(spec.visible.begin(), spec.visible.end());
  return spec;
}

Tensor patchify(const Volume& v, const PatchGrid& grid) {
  if (v.extents != grid.vol_extents) {
    throw std::invalid_argument("patchify: volume extents do not match grid");
  }
  const std::size_t n = grid.token_count();
  const std::size_t vx = grid.patch_voxels();
  Tensor out({n, vx});
  const auto& pe = grid.patch_extents;
  std::size_t token = 0;
  for (std::size_t px = 0; px < grid.counts[0]; ++px) {
    for (std::size_t py = 0; py < grid.counts[1]; ++py) {
      for (std::size_t pz = 0; pz < grid.counts[2]; ++pz, ++token) {
        double* row = out.data() + token * vx;
        std::size_t i = 0;
        for (std::size_t x = 0; x < pe[0]; ++x) {
          for (std::size_t y = 0; y < pe[1]; ++y) {
            for (std::size_t z = 0; z < pe[2]; ++z, ++i) {
              row[i] = v.at(px * pe[0] + x, py * pe[1] + y, pz * pe[2] + z);
            }
          }
        }
      }
    }
  }
  return out;
}

Volume unpatchify(const Tensor& tokens, const PatchGrid& grid) {
  if (tokens.ndim() != 2 || tokens.rows() != grid.token_count() ||
      tokens.cols() != grid.patch_voxels()) {
    throw std::invalid_argument("unpatchify: token matrix does not match grid");
  }
  Volume v;
  v.extents = grid.vol_extents;
  v.intensity.resize(v.voxels());
  const auto& pe = grid.patch_extents;
  std::size_t token = 0;
  for (std::size_t px = 0; px < grid.counts[0]; ++px) {
    for (std::size_t py = 0; py < grid.counts[1]; ++py) {
      for (std::size_t pz = 0; pz < grid.counts[2]; ++pz, ++token) {
        const double* row = tokens.data() + token * grid.patch_voxels();
        std::size_t i = 0;
        for (std::size_t x = 0; x < pe[0]; ++x) {
          for (std::size_t y = 0; y < pe[1]; ++y) {
            for (std::size_t z = 0; z < pe[2]; ++z, ++i) {
              v.at(px * pe[0] + x, py * pe[1] + y, pz * pe[2] + z) = row[i];
            }
          }
        }
      }
    }
  }
  return v;
}

Tensor normalize_targets(const Tensor& tokens, double eps) {
  if (tokens.ndim() != 2) throw std::invalid_argument("normalize_targets: rank-2 required");
  const std::size_t n = tokens.rows(), vx = tokens.cols();
  Tensor out = tokens;
  for (std::size_t r = 0; r < n; ++r) {
    double* row = out.data() + r * vx;
    double mu = 0.0;
    for (std::size_t i = 0; i < vx; ++i) mu += row[i];
    mu /= static_cast<double>(vx);
    double var = 0.0;
    for (std::size_t i = 0; i < vx; ++i) {
      const double d = row[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(vx);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < vx; ++i) row[i] = (row[i] - mu) * inv;
  }
  return out;
}

}  // namespace voxssl
