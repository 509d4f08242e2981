#pragma once

#include <array>
#include <cstdint>

#include "voxssl/volume.hpp"

namespace voxssl {

enum class AugmentationKind { masking, strong };

/// Full description of one stochastic view. `masking` views carry only the
/// mask ratio (token dropout happens in patch space); `strong` views combine
/// geometric and intensity transforms. A default-constructed strong spec is
/// the identity.
struct AugmentationSpec {
  AugmentationKind kind = AugmentationKind::strong;
  double mask_ratio = 0.0;           ///< masking views only
  std::array<bool, 3> flip{};        ///< mirror along axis 0/1/2
  /// Quarter-turn counts in the (0,1), (0,2) and (1,2) axis planes; odd
  /// counts require the two plane extents to be equal.
  std::array<int, 3> rot_quarter{};
  double resize_scale = 1.0;         ///< nearest-neighbor zoom about the center
  double intensity_scale = 1.0;
  double intensity_shift = 0.0;
  std::uint64_t seed = 0;
};

/// Draws a strong-view spec: independent axis flips, a quarter-turn in each
/// plane whose extents match, resize in [0.9, 1.1], intensity scale in
/// [0.9, 1.1] and shift in [-0.1, 0.1].
AugmentationSpec sample_strong_augmentation(const std::array<std::size_t, 3>& extents,
                                            std::uint64_t seed);

/// Applies a strong spec: flips, then plane rotations, then resize, then the
/// intensity map clamp(scale * I + shift, 0, 1). The label grid undergoes the
/// geometric transforms only. Output extents equal input extents. An identity
/// spec returns the input unchanged (bitwise).
Volume augment_strong(const Volume& v, const AugmentationSpec& spec);

}  // namespace voxssl
