#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace voxssl {

/// Binary mask (1/0) selecting the voxels of one label.
std::vector<std::uint8_t> label_mask(const std::vector<std::uint8_t>& labels, std::uint8_t label);

/// Overlap score 2|A∩B| / (|A| + |B|) of two binary masks (any nonzero voxel
/// counts as foreground). Two empty masks score 1.0. Throws
/// std::invalid_argument on a size mismatch.
double dice_overlap(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

/// Boundary voxels of a binary mask: foreground voxels that touch the volume
/// border or have a background voxel among their six axis neighbors. Volume
/// layout is x-major with z fastest, matching Volume.
std::vector<std::uint8_t> surface_mask(const std::vector<std::uint8_t>& mask,
                                       const std::array<std::size_t, 3>& extents);

/// Exact squared Euclidean distance (in voxel units, between voxel centers)
/// from every voxel to its nearest nonzero seed voxel, computed with the
/// separable lower-envelope transform. All entries are +infinity when there
/// are no seeds. Distances are exact integers stored as doubles.
std::vector<double> squared_edt(const std::vector<std::uint8_t>& seeds,
                                const std::array<std::size_t, 3>& extents);

/// Symmetric boundary agreement: the fraction of boundary voxels of either
/// mask lying within `tolerance` (Euclidean, voxel units) of the other mask's
/// boundary. Two empty masks score 1.0; exactly one empty mask scores 0.0.
/// Throws std::invalid_argument for a negative tolerance or size mismatch.
double surface_dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                    const std::array<std::size_t, 3>& extents, double tolerance);

/// Probability that a uniformly drawn positive outranks a uniformly drawn
/// negative, with ties counting one half: the rank-sum statistic with average
/// ranks over tied groups. Labels are binary (nonzero = positive). Throws
/// std::invalid_argument unless both classes occur, on a size mismatch, or on
/// non-finite scores.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace voxssl
