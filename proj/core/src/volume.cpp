#include "voxssl/volume.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "voxssl/errors.hpp"

namespace voxssl {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'V', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_f32(std::ostream& os, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  put_u32(os, bits);
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

}  // namespace

void write_volume(const std::filesystem::path& path, const Volume& v, bool as_f32) {
  if (v.intensity.size() != v.voxels()) {
    throw std::invalid_argument("write_volume: intensity size does not match extents");
  }
  if (v.has_labels() && v.labels.size() != v.voxels()) {
    throw std::invalid_argument("write_volume: label size does not match extents");
  }
  const std::filesystem::path tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ArtifactError("write_volume: cannot open " + tmp.string());
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    for (std::size_t a = 0; a < 3; ++a) put_u32(os, static_cast<std::uint32_t>(v.extents[a]));
    const unsigned char dtype = as_f32 ? 0 : 1;
    const unsigned char has_labels = v.has_labels() ? 1 : 0;
    const unsigned char reserved[2] = {0, 0};
    os.write(reinterpret_cast<const char*>(&dtype), 1);
    os.write(reinterpret_cast<const char*>(&has_labels), 1);
    os.write(reinterpret_cast<const char*>(reserved), 2);
    for (double x : v.intensity) {
      if (as_f32) {
        put_f32(os, static_cast<float>(x));
      } else {
        put_f64(os, x);
      }
    }
    if (v.has_labels()) {
      os.write(reinterpret_cast<const char*>(v.labels.data()),
               static_cast<std::streamsize>(v.labels.size()));
    }
    if (!os) throw ArtifactError("write_volume: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("read_volume: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw ArtifactError("read_volume: bad magic in " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw ArtifactError("read_volume: unsupported version " + std::to_string(version));
  }
  Volume v;
  for (std::size_t a = 0; a < 3; ++a) v.extents[a] = get_u32(is);
  unsigned char dtype = 0, has_labels = 0, reserved[2];
  is.read(reinterpret_cast<char*>(&dtype), 1);
  is.read(reinterpret_cast<char*>(&has_labels), 1);
  is.read(reinterpret_cast<char*>(reserved), 2);
  if (!is || dtype > 1 || has_labels > 1) {
    throw ArtifactError("read_volume: corrupt header in " + path.string());
  }
  const std::size_t n = v.voxels();
  v.intensity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.intensity[i] = (dtype == 1) ? get_f64(is) : static_cast<double>(get_f32(is));
  }
  if (has_labels) {
    v.labels.resize(n);
    is.read(reinterpret_cast<char*>(v.labels.data()), static_cast<std::streamsize>(n));
  }
  if (!is) throw ArtifactError("read_volume: truncated file " + path.string());
  if (v.has_labels()) {
    std::uint8_t max_label = 0;
    for (std::uint8_t l : v.labels) max_label = std::max(max_label, l);
    v.organ_centroids = label_centroids(v, max_label);
  }
  return v;
}

std::vector<std::array<double, 3>> label_centroids(const Volume& v, std::size_t n_labels) {
  std::vector<std::array<double, 3>> sums(n_labels, {0.0, 0.0, 0.0});
  std::vector<std::size_t> counts(n_labels, 0);
  if (v.has_labels()) {
    for (std::size_t x = 0; x < v.extents[0]; ++x) {
      for (std::size_t y = 0; y < v.extents[1]; ++y) {
        for (std::size_t z = 0; z < v.extents[2]; ++z) {
          const std::uint8_t l = v.labels[v.index(x, y, z)];
          if (l == 0 || l > n_labels) continue;
          sums[l - 1][0] += static_cast<double>(x);
          sums[l - 1][1] += static_cast<double>(y);
          sums[l - 1][2] += static_cast<double>(z);
          counts[l - 1]++;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n_labels; ++i) {
    if (counts[i] == 0) {
      sums[i] = {-1.0, -1.0, -1.0};
    } else {
      for (auto& c : sums[i]) c /= static_cast<double>(counts[i]);
    }
  }
  return sums;
}

Volume crop_volume(const Volume& v, const std::array<std::int64_t, 3>& origin,
                   const std::array<std::size_t, 3>& extents) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (origin[a] < 0 ||
        static_cast<std::size_t>(origin[a]) + extents[a] > v.extents[a]) {
      throw std::out_of_range("crop_volume: box leaves source grid on axis " + std::to_string(a));
    }
  }
  Volume out;
  out.extents = extents;
  out.phantom_id = v.phantom_id;
  out.intensity.resize(out.voxels());
  if (v.has_labels()) out.labels.resize(out.voxels());
  for (std::size_t x = 0; x < extents[0]; ++x) {
    for (std::size_t y = 0; y < extents[1]; ++y) {
      const std::size_t src_base =
          v.index(static_cast<std::size_t>(origin[0]) + x,
                  static_cast<std::size_t>(origin[1]) + y, static_cast<std::size_t>(origin[2]));
      const std::size_t dst_base = out.index(x, y, 0);
      std::copy(v.intensity.begin() + static_cast<std::ptrdiff_t>(src_base),
                v.intensity.begin() + static_cast<std::ptrdiff_t>(src_base + extents[2]),
                out.intensity.begin() + static_cast<std::ptrdiff_t>(dst_base));
      if (v.has_labels()) {
        std::copy(v.labels.begin() + static_cast<std::ptrdiff_t>(src_base),
                  v.labels.begin() + static_cast<std::ptrdiff_t>(src_base + extents[2]),
                  out.labels.begin() + static_cast<std::ptrdiff_t>(dst_base));
      }
    }
  }
  if (out.has_labels()) {
    std::uint8_t max_label = 0;
    for (std::uint8_t l : out.labels) max_label = std::max(max_label, l);
    out.organ_centroids = label_centroids(out, max_label);
  }
  return out;
}

}  // namespace voxssl
