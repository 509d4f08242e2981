#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace voxssl {

/// Dense 3-D scalar volume with optional per-voxel integer labels.
/// Memory order is x-major with z fastest: index = (x * ey + y) * ez + z.
/// Intensities live in [0, 1]; label 0 is background, organs are 1..L.
struct Volume {
  std::array<std::size_t, 3> extents{};
  std::vector<double> intensity;
  std::vector<std::uint8_t> labels;  // empty when unlabeled
  std::uint64_t phantom_id = 0;
  /// Centroid (voxel coordinates) of each organ label 1..L present when the
  /// volume was synthesized or cropped; organ_centroids[l - 1] is label l.
  std::vector<std::array<double, 3>> organ_centroids;

  std::size_t voxels() const { return extents[0] * extents[1] * extents[2]; }
  bool has_labels() const { return !labels.empty(); }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (x * extents[1] + y) * extents[2] + z;
  }
  double& at(std::size_t x, std::size_t y, std::size_t z) { return intensity[index(x, y, z)]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return intensity[index(x, y, z)]; }
};

// On-disk format (all integers little-endian):
//   offset  size  field
//   0       4     magic "VXVL"
//   4       4     format version (u32) = 1
//   8       4     nx (u32)
//   12      4     ny (u32)
//   16      4     nz (u32)
//   20      1     scalar dtype tag: 0 = f32, 1 = f64
//   21      1     has_labels flag: 0 or 1
//   22      2     reserved, zero
//   24      ...   intensity scalars, x-major z-fastest, little-endian IEEE 754
//   ...     ...   one u8 label per voxel, same order, when has_labels = 1
// Centroids and phantom ids are derived metadata and are not persisted.

/// Writes `v` to `path` (atomically: temp file + rename). `as_f32` selects the
/// 32-bit scalar encoding; the default keeps full doubles.
void write_volume(const std::filesystem::path& path, const Volume& v, bool as_f32 = false);

/// Reads a volume written by write_volume. Throws ArtifactError on bad magic,
/// version, or truncation. Labeled volumes get centroids recomputed.
Volume read_volume(const std::filesystem::path& path);

/// Mean voxel coordinate of every label 1..n_labels; entries for absent labels
/// are {-1, -1, -1}.
std::vector<std::array<double, 3>> label_centroids(const Volume& v, std::size_t n_labels);

/// Copies the axis-aligned box [origin, origin + extents) into a new volume.
/// Throws std::out_of_range if the box leaves the source grid. Labels come
/// along when present; centroids are recomputed for the crop.
Volume crop_volume(const Volume& v, const std::array<std::int64_t, 3>& origin,
                   const std::array<std::size_t, 3>& extents);

}  // namespace voxssl
