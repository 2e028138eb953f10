#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "hybridq/tensor.hpp"

namespace hybridq {

// Bias-corrected adaptive moment estimation over a parameter list.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState for_params(const std::vector<Tensor>& params, double lr = 3e-4) {
    AdamState s;
    s.lr = lr;
    for (const auto& p : params) {
      s.m.emplace_back(p.shape);
      s.v.emplace_back(p.shape);
    }
    return s;
  }

  void save(std::ostream& os) const {
    os.write(reinterpret_cast<const char*>(&lr), sizeof(lr));
    os.write(reinterpret_cast<const char*>(&beta1), sizeof(beta1));
    os.write(reinterpret_cast<const char*>(&beta2), sizeof(beta2));
    os.write(reinterpret_cast<const char*>(&eps), sizeof(eps));
    os.write(reinterpret_cast<const char*>(&step), sizeof(step));
    for (const auto& t : m)
      os.write(reinterpret_cast<const char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    for (const auto& t : v)
      os.write(reinterpret_cast<const char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }

  void load(std::istream& is) {
    is.read(reinterpret_cast<char*>(&lr), sizeof(lr));
    is.read(reinterpret_cast<char*>(&beta1), sizeof(beta1));
    is.read(reinterpret_cast<char*>(&beta2), sizeof(beta2));
    is.read(reinterpret_cast<char*>(&eps), sizeof(eps));
    is.read(reinterpret_cast<char*>(&step), sizeof(step));
    for (auto& t : m)
      is.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    for (auto& t : v)
      is.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("AdamState::load: truncated stream");
  }
};

inline void adam_step(AdamState& state, std::vector<Tensor>& params,
                      const std::vector<Tensor>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].numel() != grads[t].numel())
      throw std::invalid_argument("adam_step: shape mismatch");
    auto& p = params[t].data;
    const auto& g = grads[t].data;
    auto& m = state.m[t].data;
    auto& v = state.v[t].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    ensure_finite(params[t], "adam_step");
  }
}

// target <- (1 - tau) * target + tau * online, elementwise.
inline void polyak_update(std::vector<Tensor>& target, const std::vector<Tensor>& online,
                          double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak_update: tau in (0, 1]");
  if (target.size() != online.size())
    throw std::invalid_argument("polyak_update: parameter count mismatch");
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t].numel() != online[t].numel())
      throw std::invalid_argument("polyak_update: shape mismatch");
    auto& tgt = target[t].data;
    const auto& src = online[t].data;
    for (std::size_t i = 0; i < tgt.size(); ++i) tgt[i] = (1.0 - tau) * tgt[i] + tau * src[i];
  }
}

}  // namespace hybridq
