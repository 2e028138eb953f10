#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hybridq/mlp.hpp"
#include "hybridq/rng.hpp"
#include "hybridq/tensor.hpp"

// Factorized hybrid policy: one trunk network whose output is sliced into a
// deterministic continuous head (tanh-bounded), a discrete softmax head and,
// for stochastic variants, per-dimension log-stds. Head nonlinearities and
// their gradients live here so agents can push loss gradients through any
// combination of heads with one trunk backward pass.

namespace hybridq {

struct PolicyOutput {
  Tensor raw;      // batch x raw_dim, trunk output before head nonlinearities
  Tensor a_c;      // batch x d_c, in [-v_max, v_max]
  Tensor pi_d;     // batch x K, valid distribution per row
  Tensor log_std;  // batch x d_c when stochastic, else empty
};

// Gradient slots w.r.t. the head outputs; empty tensors mean "no gradient".
struct PolicyHeadGrads {
  Tensor d_a_c;      // dL/da_c
  Tensor d_pi;       // dL/dpi_d (softmax backward applied here)
  Tensor d_log_std;  // dL/dlog_std
};

class HybridPolicy {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  HybridPolicy() = default;

  HybridPolicy(int obs_dim, int d_c, int n_modes, const std::vector<int>& hidden, double v_max,
               bool stochastic, Activation act, Rng& rng, double final_layer_scale = 1e-2)
      : d_c_(d_c), n_modes_(n_modes), v_max_(v_max), stochastic_(stochastic) {
    std::vector<int> widths{obs_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(raw_dim());
    net_ = Mlp(widths, act, OutputActivation::kIdentity, rng, final_layer_scale);
  }

  int raw_dim() const { return d_c_ + n_modes_ + (stochastic_ ? d_c_ : 0); }
  int d_c() const { return d_c_; }
  int n_modes() const { return n_modes_; }
  double v_max() const { return v_max_; }
  bool stochastic() const { return stochastic_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  PolicyOutput forward(const Tensor& obs, MlpTrace* trace = nullptr) const {
    PolicyOutput out;
    out.raw = net_.forward(obs, trace);
    const int batch = out.raw.rows();
    out.a_c = Tensor({batch, d_c_});
    out.pi_d = Tensor({batch, n_modes_});
    if (stochastic_) out.log_std = Tensor({batch, d_c_});
    for (int b = 0; b < batch; ++b) {
      for (int j = 0; j < d_c_; ++j) out.a_c.at(b, j) = v_max_ * std::tanh(out.raw.at(b, j));
      // Softmax over the logit slice.
      double mx = out.raw.at(b, d_c_);
      for (int j = 1; j < n_modes_; ++j) mx = std::max(mx, out.raw.at(b, d_c_ + j));
      double sum = 0.0;
      for (int j = 0; j < n_modes_; ++j) {
        const double e = std::exp(out.raw.at(b, d_c_ + j) - mx);
        out.pi_d.at(b, j) = e;
        sum += e;
      }
      for (int j = 0; j < n_modes_; ++j) out.pi_d.at(b, j) /= sum;
      if (stochastic_) {
        for (int j = 0; j < d_c_; ++j)
          out.log_std.at(b, j) =
              std::clamp(out.raw.at(b, d_c_ + n_modes_ + j), kLogStdMin, kLogStdMax);
      }
    }
    return out;
  }

  // Convert head-space gradients into a raw-output gradient suitable for
  // Mlp::backward.
  Tensor head_backward(const PolicyOutput& out, const PolicyHeadGrads& grads) const {
    const int batch = out.raw.rows();
    Tensor d_raw({batch, raw_dim()});
    for (int b = 0; b < batch; ++b) {
      if (grads.d_a_c.numel() > 0) {
        for (int j = 0; j < d_c_; ++j) {
          const double t = out.a_c.at(b, j) / v_max_;
          d_raw.at(b, j) = grads.d_a_c.at(b, j) * v_max_ * (1.0 - t * t);
        }
      }
      if (grads.d_pi.numel() > 0) {
        double dot = 0.0;
        for (int j = 0; j < n_modes_; ++j) dot += grads.d_pi.at(b, j) * out.pi_d.at(b, j);
        for (int j = 0; j < n_modes_; ++j)
          d_raw.at(b, d_c_ + j) = out.pi_d.at(b, j) * (grads.d_pi.at(b, j) - dot);
      }
      if (stochastic_ && grads.d_log_std.numel() > 0) {
        for (int j = 0; j < d_c_; ++j) {
          const double raw = out.raw.at(b, d_c_ + n_modes_ + j);
          const bool clamped = raw < kLogStdMin || raw > kLogStdMax;
          d_raw.at(b, d_c_ + n_modes_ + j) = clamped ? 0.0 : grads.d_log_std.at(b, j);
        }
      }
    }
    return d_raw;
  }

 private:
  Mlp net_;
  int d_c_ = 0;
  int n_modes_ = 0;
  double v_max_ = 1.0;
  bool stochastic_ = false;
};

// Column concatenation, used to build critic inputs [obs | a_c].
inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Tensor out({a.rows(), a.cols() + b.cols()});
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c);
    for (int c = 0; c < b.cols(); ++c) out.at(r, a.cols() + c) = b.at(r, c);
  }
  return out;
}

}  // namespace hybridq
