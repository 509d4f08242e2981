#include "voxssl/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "voxssl/errors.hpp"
#include "voxssl/ops.hpp"
#include "voxssl/rng.hpp"

namespace voxssl {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr double kInitStd = 0.02;

Tensor init_weight(std::uint64_t seed, const std::string& name, std::vector<std::size_t> shape,
                   double stddev = kInitStd) {
  Rng rng = Rng::derive(seed, {fnv1a(name)});
  return Tensor::randn(std::move(shape), rng, stddev);
}

// fan-balanced scale for the projection heads: their three linear layers
// compose without intermediate normalization, so a fixed small scale would
// shrink the output norm geometrically and leave the final l2 normalization
// badly conditioned
double balanced_std(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

void add_transformer_params(ParamMap& p, std::uint64_t seed, const std::string& prefix,
                            std::size_t n_tokens, std::size_t dim, std::size_t depth,
                            std::size_t mlp_ratio) {
  p[prefix + "pos"] = init_weight(seed, prefix + "pos", {n_tokens, dim});
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string bp = prefix + "blocks." + std::to_string(i) + ".";
    p[bp + "ln1.g"] = Tensor::full({dim}, 1.0);
    p[bp + "ln1.b"] = Tensor::zeros({dim});
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      p[bp + "attn." + w] = init_weight(seed, bp + "attn." + w, {dim, dim});
    }
    for (const char* b : {"bq", "bk", "bv", "bo"}) {
      p[bp + "attn." + b] = Tensor::zeros({dim});
    }
    p[bp + "ln2.g"] = Tensor::full({dim}, 1.0);
    p[bp + "ln2.b"] = Tensor::zeros({dim});
    const std::size_t hidden = dim * mlp_ratio;
    p[bp + "mlp.w1"] = init_weight(seed, bp + "mlp.w1", {dim, hidden});
    p[bp + "mlp.b1"] = Tensor::zeros({hidden});
    p[bp + "mlp.w2"] = init_weight(seed, bp + "mlp.w2", {hidden, dim});
    p[bp + "mlp.b2"] = Tensor::zeros({dim});
  }
  p[prefix + "ln_f.g"] = Tensor::full({dim}, 1.0);
  p[prefix + "ln_f.b"] = Tensor::zeros({dim});
}

void add_head_params(ParamMap& p, std::uint64_t seed, const std::string& prefix, std::size_t in,
                     std::size_t hidden, std::size_t out) {
  p[prefix + "w1"] = init_weight(seed, prefix + "w1", {in, hidden}, balanced_std(in, hidden));
  p[prefix + "b1"] = Tensor::zeros({hidden});
  p[prefix + "w2"] = init_weight(seed, prefix + "w2", {hidden, hidden}, balanced_std(hidden, hidden));
  p[prefix + "b2"] = Tensor::zeros({hidden});
  p[prefix + "w3"] = init_weight(seed, prefix + "w3", {hidden, out}, balanced_std(hidden, out));
  p[prefix + "b3"] = Tensor::zeros({out});
}

}  // namespace

void ModelConfig::validate() const {
  const auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string("model: ") + what + " must be positive");
  };
  positive(patch_voxels, "patch_voxels");
  positive(n_tokens, "n_tokens");
  positive(embed_dim, "embed_dim");
  positive(depth, "depth");
  positive(heads, "heads");
  positive(mlp_ratio, "mlp_ratio");
  positive(decoder_dim, "decoder_dim");
  positive(decoder_depth, "decoder_depth");
  positive(decoder_heads, "decoder_heads");
  positive(head_hidden, "head_hidden");
  positive(head_out, "head_out");
  positive(align_dim, "align_dim");
  if (embed_dim % heads != 0) {
    throw ConfigError("model: heads must divide embed_dim");
  }
  if (decoder_dim % decoder_heads != 0) {
    throw ConfigError("model: decoder_heads must divide decoder_dim");
  }
}

ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamMap p;

  p["enc.embed.w"] = init_weight(seed, "enc.embed.w", {cfg.patch_voxels, cfg.embed_dim});
  p["enc.embed.b"] = Tensor::zeros({cfg.embed_dim});
  add_transformer_params(p, seed, "enc.", cfg.n_tokens, cfg.embed_dim, cfg.depth, cfg.mlp_ratio);

  p["dec.in.w"] = init_weight(seed, "dec.in.w", {cfg.embed_dim, cfg.decoder_dim});
  p["dec.in.b"] = Tensor::zeros({cfg.decoder_dim});
  p["dec.mask_token"] = init_weight(seed, "dec.mask_token", {cfg.decoder_dim});
  add_transformer_params(p, seed, "dec.", cfg.n_tokens, cfg.decoder_dim, cfg.decoder_depth,
                         cfg.mlp_ratio);
  // feature projection feeds cosine-based consumers: keep its output scale
  // healthy (see balanced_std)
  p["dec.feat.w"] = init_weight(seed, "dec.feat.w", {cfg.decoder_dim, cfg.embed_dim},
                                balanced_std(cfg.decoder_dim, cfg.embed_dim));
  p["dec.feat.b"] = Tensor::zeros({cfg.embed_dim});
  p["dec.pred.w"] = init_weight(seed, "dec.pred.w", {cfg.decoder_dim, cfg.patch_voxels});
  p["dec.pred.b"] = Tensor::zeros({cfg.patch_voxels});

  p["casa.ln_q.g"] = Tensor::full({cfg.embed_dim}, 1.0);
  p["casa.ln_q.b"] = Tensor::zeros({cfg.embed_dim});
  p["casa.ln_kv.g"] = Tensor::full({cfg.embed_dim}, 1.0);
  p["casa.ln_kv.b"] = Tensor::zeros({cfg.embed_dim});
  p["casa.wq"] = init_weight(seed, "casa.wq", {cfg.embed_dim, cfg.align_dim});
  p["casa.wk"] = init_weight(seed, "casa.wk", {cfg.embed_dim, cfg.align_dim});
  p["casa.wv"] = init_weight(seed, "casa.wv", {cfg.embed_dim, cfg.align_dim});
  p["casa.zeta.w"] = init_weight(seed, "casa.zeta.w", {cfg.align_dim, cfg.align_dim});
  p["casa.zeta.b"] = Tensor::zeros({cfg.align_dim});

  add_head_params(p, seed, "head_s.", cfg.embed_dim, cfg.head_hidden, cfg.head_out);

  // target branch starts as an exact copy of its online partner
  ParamMap targets;
  for (const auto& [name, value] : p) {
    if (name.rfind("enc.", 0) == 0) targets["tgt." + name] = value;
    if (name.rfind("head_s.", 0) == 0) targets["head_t." + name.substr(7)] = value;
  }
  p.insert(targets.begin(), targets.end());
  return p;
}

bool is_target_param(const std::string& name) {
  return name.rfind("tgt.enc.", 0) == 0 || name.rfind("head_t.", 0) == 0;
}

std::vector<std::pair<std::string, std::string>> ema_pairs(const ParamMap& params) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [name, value] : params) {
    (void)value;
    if (name.rfind("tgt.enc.", 0) == 0) {
      pairs.emplace_back(name, name.substr(4));
    } else if (name.rfind("head_t.", 0) == 0) {
      pairs.emplace_back(name, "head_s." + name.substr(7));
    }
  }
  return pairs;
}

void ema_update(ParamMap& params, double momentum) {
  if (!(momentum >= 0.0) || !(momentum <= 1.0)) {
    throw std::invalid_argument("ema_update: momentum must lie in [0, 1]");
  }
  for (const auto& [target_name, online_name] : ema_pairs(params)) {
    Tensor& t = params.at(target_name);
    const Tensor& o = params.at(online_name);
    if (!t.same_shape(o)) {
      throw std::logic_error("ema_update: shape mismatch for " + target_name);
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.at(i) += (1.0 - momentum) * (o.at(i) - t.at(i));
    }
  }
}

ModelSession::ModelSession(const ModelConfig& cfg, VarMap leaves, const ParamMap* constants)
    : cfg_(cfg), leaves_(std::move(leaves)), constants_(constants) {
  cfg_.validate();
}

ModelSession ModelSession::trainable(const ModelConfig& cfg, const ParamMap& params) {
  VarMap leaves;
  for (const auto& [name, value] : params) {
    leaves.emplace(name, Var::leaf(value, /*requires_grad=*/true, name));
  }
  return ModelSession(cfg, std::move(leaves));
}

Var ModelSession::leaf(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  if (constants_ != nullptr) {
    auto pit = constants_->find(name);
    if (pit != constants_->end()) {
      Var v = Var::leaf(pit->second, /*requires_grad=*/false, name);
      leaves_.emplace(name, v);
      return v;
    }
  }
  throw std::logic_error("ModelSession: unknown parameter " + name);
}

Var ModelSession::transformer(Var x, const std::string& prefix, std::size_t depth,
                              std::size_t heads) {
  const std::size_t dim = x.shape()[1];
  const std::size_t dh = dim / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string bp = prefix + "blocks." + std::to_string(i) + ".";
    const Var h = layer_norm(x, leaf(bp + "ln1.g"), leaf(bp + "ln1.b"));
    const Var q = add_rowvec(matmul(h, leaf(bp + "attn.wq")), leaf(bp + "attn.bq"));
    const Var k = add_rowvec(matmul(h, leaf(bp + "attn.wk")), leaf(bp + "attn.bk"));
    const Var v = add_rowvec(matmul(h, leaf(bp + "attn.wv")), leaf(bp + "attn.bv"));
    std::vector<Var> heads_out;
    heads_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const Var qh = gather_cols(q, hd * dh, dh);
      const Var kh = gather_cols(k, hd * dh, dh);
      const Var vh = gather_cols(v, hd * dh, dh);
      const Var att = softmax(scale(matmul(qh, transpose(kh)), att_scale), 1);
      heads_out.push_back(matmul(att, vh));
    }
    const Var cat = heads == 1 ? heads_out[0] : concat(heads_out, 1);
    x = add(x, add_rowvec(matmul(cat, leaf(bp + "attn.wo")), leaf(bp + "attn.bo")));
    const Var h2 = layer_norm(x, leaf(bp + "ln2.g"), leaf(bp + "ln2.b"));
    Var m = gelu(add_rowvec(matmul(h2, leaf(bp + "mlp.w1")), leaf(bp + "mlp.b1")));
    m = add_rowvec(matmul(m, leaf(bp + "mlp.w2")), leaf(bp + "mlp.b2"));
    x = add(x, m);
  }
  return layer_norm(x, leaf(prefix + "ln_f.g"), leaf(prefix + "ln_f.b"));
}

Var ModelSession::encode_visible(const Tensor& tokens, const std::vector<std::size_t>& visible,
                                 const std::string& prefix) {
  if (tokens.ndim() != 2 || tokens.rows() != cfg_.n_tokens ||
      tokens.cols() != cfg_.patch_voxels) {
    throw std::invalid_argument("encode_visible: token matrix must be n_tokens x patch_voxels");
  }
  if (visible.empty()) throw std::invalid_argument("encode_visible: no visible tokens");
  // materialize only the visible rows; hidden rows are never read
  Tensor vis({visible.size(), cfg_.patch_voxels});
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (visible[i] >= cfg_.n_tokens) throw std::out_of_range("encode_visible: token index");
    const double* src = tokens.data() + visible[i] * cfg_.patch_voxels;
    std::copy(src, src + cfg_.patch_voxels, vis.data() + i * cfg_.patch_voxels);
  }
  Var x = Var::leaf(std::move(vis), /*requires_grad=*/false, "tokens");
  x = add_rowvec(matmul(x, leaf(prefix + "embed.w")), leaf(prefix + "embed.b"));
  x = add(x, gather_rows(leaf(prefix + "pos"), visible));
  return transformer(std::move(x), prefix, cfg_.depth, cfg_.heads);
}

Var ModelSession::encode_full(const Tensor& tokens, const std::string& prefix) {
  std::vector<std::size_t> all(cfg_.n_tokens);
  std::iota(all.begin(), all.end(), 0);
  return encode_visible(tokens, all, prefix);
}

DecodeResult ModelSession::decode(const Var& visible_features, const MaskSpec& mask) {
  if (mask.n_tokens != cfg_.n_tokens) {
    throw std::invalid_argument("decode: mask token count does not match the model");
  }
  Var v = add_rowvec(matmul(visible_features, leaf("dec.in.w")), leaf("dec.in.b"));
  Var full = scatter_rows(v, leaf("dec.mask_token"), mask.visible, mask.n_tokens);
  full = add(full, leaf("dec.pos"));
  full = transformer(std::move(full), "dec.", cfg_.decoder_depth, cfg_.decoder_heads);
  DecodeResult out;
  out.features = add_rowvec(matmul(full, leaf("dec.feat.w")), leaf("dec.feat.b"));
  out.prediction = add_rowvec(matmul(full, leaf("dec.pred.w")), leaf("dec.pred.b"));
  return out;
}

Var ModelSession::head(const Var& x, const std::string& prefix) {
  Var h = x;
  if (h.shape().size() == 1) h = reshape(h, {1, h.shape()[0]});
  h = gelu(add_rowvec(matmul(h, leaf(prefix + "w1")), leaf(prefix + "b1")));
  h = gelu(add_rowvec(matmul(h, leaf(prefix + "w2")), leaf(prefix + "b2")));
  h = add_rowvec(matmul(h, leaf(prefix + "w3")), leaf(prefix + "b3"));
  return l2_normalize(h, 1e-12);
}

AlignResult ModelSession::align(const Var& queries, const Var& source) {
  const Var qn = layer_norm(queries, leaf("casa.ln_q.g"), leaf("casa.ln_q.b"));
  const Var kn = layer_norm(source, leaf("casa.ln_kv.g"), leaf("casa.ln_kv.b"));
  const Var q = matmul(qn, leaf("casa.wq"));
  const Var k = matmul(kn, leaf("casa.wk"));
  const Var values = matmul(kn, leaf("casa.wv"));
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg_.align_dim));
  AlignResult out;
  out.attention = softmax(scale(matmul(q, transpose(k)), s), 1);
  out.aligned =
      add_rowvec(matmul(matmul(out.attention, values), leaf("casa.zeta.w")), leaf("casa.zeta.b"));
  return out;
}

}  // namespace voxssl
