#include "voxssl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "voxssl/rng.hpp"

namespace voxssl {

namespace {

constexpr std::uint64_t kStrongTag = 0x5354524f4e47ull;

void flip_axis(Volume& v, std::size_t axis) {
  const auto e = v.extents;
  Volume out = v;
  for (std::size_t x = 0; x < e[0]; ++x) {
    for (std::size_t y = 0; y < e[1]; ++y) {
      for (std::size_t z = 0; z < e[2]; ++z) {
        std::array<std::size_t, 3> src = {x, y, z};
        src[axis] = e[axis] - 1 - src[axis];
        const std::size_t di = v.index(x, y, z);
        const std::size_t si = v.index(src[0], src[1], src[2]);
        out.intensity[di] = v.intensity[si];
        if (v.has_labels()) out.labels[di] = v.labels[si];
      }
    }
  }
  v = std::move(out);
}

// One quarter turn in plane (a, b): new coordinate a' = b, b' = n-1-a.
void rot_plane_once(Volume& v, std::size_t a, std::size_t b) {
  if (v.extents[a] != v.extents[b]) {
    throw std::invalid_argument("augment_strong: quarter turn in unequal-extent plane");
  }
  const std::size_t n = v.extents[a];
  Volume out = v;
  for (std::size_t x = 0; x < v.extents[0]; ++x) {
    for (std::size_t y = 0; y < v.extents[1]; ++y) {
      for (std::size_t z = 0; z < v.extents[2]; ++z) {
        std::array<std::size_t, 3> dst = {x, y, z};
        std::array<std::size_t, 3> src = dst;
        src[a] = dst[b];
        src[b] = n - 1 - dst[a];
        const std::size_t di = v.index(x, y, z);
        const std::size_t si = v.index(src[0], src[1], src[2]);
        out.intensity[di] = v.intensity[si];
        if (v.has_labels()) out.labels[di] = v.labels[si];
      }
    }
  }
  v = std::move(out);
}

void resize_nearest(Volume& v, double scale) {
  if (scale == 1.0) return;
  if (!(scale > 0.0)) throw std::invalid_argument("augment_strong: resize scale must be positive");
  Volume out = v;
  const auto e = v.extents;
  std::array<double, 3> center;
  for (std::size_t a = 0; a < 3; ++a) center[a] = (static_cast<double>(e[a]) - 1.0) / 2.0;
  for (std::size_t x = 0; x < e[0]; ++x) {
    for (std::size_t y = 0; y < e[1]; ++y) {
      for (std::size_t z = 0; z < e[2]; ++z) {
        std::array<std::size_t, 3> dst = {x, y, z};
        std::array<std::size_t, 3> src{};
        for (std::size_t a = 0; a < 3; ++a) {
          const double coord = center[a] + (static_cast<double>(dst[a]) - center[a]) / scale;
          const auto idx = static_cast<std::int64_t>(std::llround(coord));
          src[a] = static_cast<std::size_t>(
              std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(e[a]) - 1));
        }
        const std::size_t di = v.index(x, y, z);
        const std::size_t si = v.index(src[0], src[1], src[2]);
        out.intensity[di] = v.intensity[si];
        if (v.has_labels()) out.labels[di] = v.labels[si];
      }
    }
  }
  v = std::move(out);
}

}  // namespace

AugmentationSpec sample_strong_augmentation(const std::array<std::size_t, 3>& extents,
                                            std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {kStrongTag});
  AugmentationSpec spec;
  spec.kind = AugmentationKind::strong;
  spec.seed = seed;
  for (std::size_t a = 0; a < 3; ++a) spec.flip[a] = rng.bernoulli(0.5);
  const std::array<std::pair<std::size_t, std::size_t>, 3> planes = {{{0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto [a, b] = planes[i];
    if (extents[a] == extents[b]) {
      spec.rot_quarter[i] = static_cast<int>(rng.uniform_int(0, 3));
    } else {
      // Only half turns keep unequal extents in place.
      spec.rot_quarter[i] = rng.bernoulli(0.5) ? 2 : 0;
    }
  }
  spec.resize_scale = rng.uniform(0.9, 1.1);
  spec.intensity_scale = rng.uniform(0.9, 1.1);
  spec.intensity_shift = rng.uniform(-0.1, 0.1);
  return spec;
}

Volume augment_strong(const Volume& v, const AugmentationSpec& spec) {
  if (spec.kind != AugmentationKind::strong) {
    throw std::invalid_argument("augment_strong: spec kind must be strong");
  }
  Volume out = v;
  for (std::size_t a = 0; a < 3; ++a) {
    if (spec.flip[a]) flip_axis(out, a);
  }
  const std::array<std::pair<std::size_t, std::size_t>, 3> planes = {{{0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t i = 0; i < 3; ++i) {
    const int k = ((spec.rot_quarter[i] % 4) + 4) % 4;
    const auto [a, b] = planes[i];
    if (k == 2 && out.extents[a] != out.extents[b]) {
      // Half turn = mirror along both plane axes; no extent constraint.
      flip_axis(out, a);
      flip_axis(out, b);
      continue;
    }
    for (int t = 0; t < k; ++t) rot_plane_once(out, a, b);
  }
  resize_nearest(out, spec.resize_scale);
  if (spec.intensity_scale != 1.0 || spec.intensity_shift != 0.0) {
    for (double& x : out.intensity) {
      x = std::clamp(spec.intensity_scale * x + spec.intensity_shift, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace voxssl
