#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "voxssl/tensor.hpp"
#include "voxssl/volume.hpp"

namespace voxssl {

/// Partition of a crop into non-overlapping patch tokens. Token p covers the
/// patch at grid cell (px, py, pz) with p = (px * Py + py) * Pz + pz (x-major,
/// z fastest), matching the voxel memory order; within a token the patch
/// voxels are flattened in the same local order.
struct PatchGrid {
  PatchGrid(const std::array<std::size_t, 3>& vol_extents,
            const std::array<std::size_t, 3>& patch_extents);

  std::array<std::size_t, 3> vol_extents;
  std::array<std::size_t, 3> patch_extents;
  std::array<std::size_t, 3> counts;  ///< patches per axis

  std::size_t token_count() const { return counts[0] * counts[1] * counts[2]; }
  std::size_t patch_voxels() const {
    return patch_extents[0] * patch_extents[1] * patch_extents[2];
  }
};

/// Disjoint masked/visible partition of token indices, both sorted ascending.
struct MaskSpec {
  std::size_t n_tokens = 0;
  std::vector<std::size_t> masked;
  std::vector<std::size_t> visible;
  std::size_t n_masked() const { return masked.size(); }
};

/// Uniform token masking: exactly round-half-up(ratio * N) tokens masked.
/// Requires 0 <= ratio < 1. Deterministic in (grid, ratio, seed).
MaskSpec mask_random(const PatchGrid& grid, double ratio, std::uint64_t seed);

/// Crop voxels rearranged to an N x V token matrix.
Tensor patchify(const Volume& v, const PatchGrid& grid);

/// Inverse of patchify (intensity only).
Volume unpatchify(const Tensor& tokens, const PatchGrid& grid);

/// Standardizes every token row to mean 0 / unit population variance with an
/// eps guard inside the square root: (x - mu) / sqrt(var + eps).
Tensor normalize_targets(const Tensor& tokens, double eps = 1e-6);

}  // namespace voxssl
