#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "voxssl/volume.hpp"

namespace voxssl {

/// Procedural phantom family: L soft ellipsoidal "organs" with distinct
/// intensity bands over a noisy background. The anatomy seed fixes organ
/// layout (positions, radii, intensity bands); the deformation seed perturbs
/// that layout smoothly, modeling two acquisitions of the same subject.
struct PhantomConfig {
  std::array<std::size_t, 3> extents{64, 64, 32};
  std::size_t n_organs = 4;
  double background_level = 0.12;   ///< mean background intensity
  double noise_amp = 0.02;          ///< white noise amplitude
  double smooth_noise_amp = 0.05;   ///< low-frequency background modulation
  double deform_center_frac = 0.03; ///< max per-axis center shift, fraction of extent
  double deform_radius_frac = 0.08; ///< max relative radius change
};

/// Deterministic phantom synthesis: bitwise-identical output for identical
/// arguments. Organs keep their identity (label, intensity band) across
/// deformation seeds. Throws std::invalid_argument for extents < 16 per axis
/// or unplaceable organ counts, std::runtime_error when organs cannot be
/// placed without full overlap.
Volume generate_phantom(const PhantomConfig& cfg, std::uint64_t anatomy_seed,
                        std::uint64_t deform_seed);

/// Convenience overload: deformation seed 0, default appearance knobs.
Volume generate_phantom(std::uint64_t seed, const std::array<std::size_t, 3>& extents,
                        std::size_t n_organs);

/// Two crops of two deformed instances of one subject, centered on the same
/// organ. Q is centered exactly on the organ centroid of its instance; K is
/// additionally displaced by a per-axis integer jitter in [-jitter, jitter]
/// drawn from K's deformation seed (models landmark localization error).
struct CropPair {
  Volume q, k;
  std::size_t organ_label = 0;
  /// Hard per-axis displacement of the matched anatomy in K relative to its
  /// position in Q, in crop coordinates: the negated K jitter. Centroid
  /// rounding contributes at most one further voxel per axis; deformation
  /// displacement comes on top.
  std::array<int, 3> correspondence_offset{};
};

/// Builds the aligned pair. deform_seeds.first drives Q's instance,
/// .second drives K's. With equal deformation seeds and jitter 0 the two
/// crops are bitwise identical. Throws std::runtime_error if no organ admits
/// an in-bounds crop after bounded retries.
CropPair sample_aligned_crops(const PhantomConfig& cfg, std::uint64_t anatomy_seed,
                              std::pair<std::uint64_t, std::uint64_t> deform_seeds,
                              const std::array<std::size_t, 3>& crop_extents,
                              std::size_t jitter);

}  // namespace voxssl
