#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "voxssl/gradcheck.hpp"
#include "voxssl/tensor.hpp"

namespace voxssl {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// Decoupled-weight-decay Adam. Moment buffers are created lazily per
/// parameter name; `t` counts completed steps (bias correction uses t + 1
/// during the step).
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }

  /// Applies one update to every (name, gradient) entry: the moment estimates
  /// advance, then p -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * p.
  /// `lr_scale` multiplies the configured rate (for schedules). Parameters
  /// without a gradient entry are untouched. Throws NumericError on a
  /// non-finite gradient.
  void step(ParamMap& params, const std::map<std::string, Tensor>& grads, double lr_scale = 1.0);

  /// Moment buffers and the step counter, exposed for checkpointing.
  std::map<std::string, Tensor>& moment1() { return m_; }
  std::map<std::string, Tensor>& moment2() { return v_; }
  const std::map<std::string, Tensor>& moment1() const { return m_; }
  const std::map<std::string, Tensor>& moment2() const { return v_; }
  void restore(std::map<std::string, Tensor> m, std::map<std::string, Tensor> v, std::uint64_t t);

 private:
  AdamWConfig cfg_;
  std::map<std::string, Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

/// Piecewise learning-rate schedule: linear warmup from zero to `peak` over
/// `warmup` steps, then cosine decay to `floor` at `total` steps; constant
/// `floor` beyond. Returns the absolute rate for step (0-based).
double lr_schedule(std::uint64_t step, std::uint64_t warmup, std::uint64_t total, double peak,
                   double floor);

/// Target-momentum schedule: cosine ramp from `base` at step 0 toward 1.0 at
/// `total` steps: m(step) = 1 - (1 - base) * (cos(pi * step / total) + 1) / 2.
double ema_schedule(std::uint64_t step, std::uint64_t total, double base);

/// Rescales gradients in place so their joint l2 norm is at most `max_norm`;
/// returns the pre-clip norm.
double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm);

}  // namespace voxssl
