#include "voxssl/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "voxssl/errors.hpp"

namespace voxssl {

void AdamW::step(ParamMap& params, const std::map<std::string, Tensor>& grads, double lr_scale) {
  const std::uint64_t t = t_ + 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
  const double lr = cfg_.lr * lr_scale;
  for (const auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) {
      throw std::logic_error("AdamW::step: gradient for unknown parameter " + name);
    }
    Tensor& p = pit->second;
    if (!p.same_shape(g)) {
      throw std::logic_error("AdamW::step: gradient shape mismatch for " + name);
    }
    if (!g.all_finite()) {
      throw NumericError("AdamW::step: non-finite gradient for " + name);
    }
    Tensor& m = m_.try_emplace(name, Tensor::zeros(g.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor::zeros(g.shape())).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.at(i) = cfg_.beta1 * m.at(i) + (1.0 - cfg_.beta1) * g.at(i);
      v.at(i) = cfg_.beta2 * v.at(i) + (1.0 - cfg_.beta2) * g.at(i) * g.at(i);
      const double m_hat = m.at(i) / bc1;
      const double v_hat = v.at(i) / bc2;
      p.at(i) -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) + lr * cfg_.weight_decay * p.at(i);
    }
  }
  t_ = t;
}

void AdamW::restore(std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
                    std::uint64_t t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

double lr_schedule(std::uint64_t step, std::uint64_t warmup, std::uint64_t total, double peak,
                   double floor) {
  if (total == 0) throw std::invalid_argument("lr_schedule: total must be positive");
  if (warmup >= total) throw std::invalid_argument("lr_schedule: warmup must be below total");
  if (step < warmup) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (step >= total) return floor;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(progress * 3.14159265358979323846));
}

double ema_schedule(std::uint64_t step, std::uint64_t total, double base) {
  if (total == 0) throw std::invalid_argument("ema_schedule: total must be positive");
  if (!(base >= 0.0) || !(base <= 1.0)) {
    throw std::invalid_argument("ema_schedule: base momentum must lie in [0, 1]");
  }
  const double s = std::min(static_cast<double>(step), static_cast<double>(total));
  const double c = std::cos(3.14159265358979323846 * s / static_cast<double>(total));
  return 1.0 - (1.0 - base) * (c + 1.0) / 2.0;
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    (void)name;
    for (double v : g.vec()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads) {
      (void)name;
      for (double& v : g.vec()) v *= scale;
    }
  }
  return norm;
}

}  // namespace voxssl
