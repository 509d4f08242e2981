#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "voxssl/gradcheck.hpp"
#include "voxssl/tensor.hpp"

namespace voxssl {

/// Everything needed to continue a run bit-for-bit: model parameters (online
/// and target), optimizer moments and step count, the training step counter,
/// and the exact resolved configuration text the run was started with.
struct Checkpoint {
  std::uint64_t step = 0;       ///< completed training steps
  std::string config_text;      ///< resolved configuration snapshot
  ParamMap params;
  std::map<std::string, Tensor> opt_m, opt_v;
  std::uint64_t opt_t = 0;
};

// On-disk format (all integers and doubles little-endian):
//   offset  size  field
//   0       4     magic "VXCK"
//   4       4     format version (u32) = 1
//   8       8     FNV-1a hash of config_text (u64)
//   16      8     step (u64)
//   24      8     opt_t (u64)
//   32      8     config_text length (u64), then that many bytes
//   ...           record count (u64), then records:
//                   name length (u32), name bytes,
//                   ndim (u8), dims (u64 each),
//                   payload (f64 each, row-major)
// Record names: parameters keep their own names; optimizer moments are
// stored as "opt.m.<param>" and "opt.v.<param>".

/// Atomic write (temp file + rename).
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws ArtifactError on bad magic, version, hash mismatch with the
/// embedded text, or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace voxssl
