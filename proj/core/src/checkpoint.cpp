#include "voxssl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "voxssl/errors.hpp"

namespace voxssl {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ArtifactError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_record(std::string& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(t.ndim()));
  for (std::size_t d : t.shape()) put_u64(out, d);
  for (double v : t.vec()) put_f64(out, v);
}

std::pair<std::string, Tensor> get_record(Reader& r) {
  const std::uint32_t name_len = r.u32();
  if (name_len > 4096) throw ArtifactError("checkpoint: implausible record name length");
  const std::string name = r.bytes(name_len);
  const std::size_t ndim = static_cast<unsigned char>(r.bytes(1)[0]);
  if (ndim > 4) throw ArtifactError("checkpoint: implausible tensor rank");
  std::vector<std::size_t> shape(ndim);
  std::size_t n = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = static_cast<std::size_t>(r.u64());
    if (shape[i] == 0 || shape[i] > (1ull << 32)) throw ArtifactError("checkpoint: bad extent");
    n *= shape[i];
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = r.f64();
  return {name, Tensor(std::move(shape), std::move(data))};
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, fnv1a(ckpt.config_text));
  put_u64(out, ckpt.step);
  put_u64(out, ckpt.opt_t);
  put_u64(out, ckpt.config_text.size());
  out.append(ckpt.config_text);
  put_u64(out, ckpt.params.size() + ckpt.opt_m.size() + ckpt.opt_v.size());
  for (const auto& [name, t] : ckpt.params) put_record(out, name, t);
  for (const auto& [name, t] : ckpt.opt_m) put_record(out, "opt.m." + name, t);
  for (const auto& [name, t] : ckpt.opt_v) put_record(out, "opt.v." + name, t);

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ArtifactError("checkpoint: cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ArtifactError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("checkpoint: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf);

  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw ArtifactError("checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw ArtifactError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint64_t stored_hash = r.u64();
  ckpt.step = r.u64();
  ckpt.opt_t = r.u64();
  const std::uint64_t text_len = r.u64();
  ckpt.config_text = r.bytes(text_len);
  if (fnv1a(ckpt.config_text) != stored_hash) {
    throw ArtifactError("checkpoint: config text hash mismatch (corrupt file?)");
  }
  const std::uint64_t n_records = r.u64();
  for (std::uint64_t i = 0; i < n_records; ++i) {
    auto [name, t] = get_record(r);
    if (name.rfind("opt.m.", 0) == 0) {
      ckpt.opt_m.emplace(name.substr(6), std::move(t));
    } else if (name.rfind("opt.v.", 0) == 0) {
      ckpt.opt_v.emplace(name.substr(6), std::move(t));
    } else {
      ckpt.params.emplace(std::move(name), std::move(t));
    }
  }
  return ckpt;
}

}  // namespace voxssl
