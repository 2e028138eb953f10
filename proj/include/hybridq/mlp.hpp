#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hybridq/rng.hpp"
#include "hybridq/tensor.hpp"

// Multilayer perceptron with explicit forward traces and reverse-mode
// backprop at layer granularity. The trace stores the activations needed to
// pull gradients back through the exact computation that produced an output;
// backward returns parameter gradients and the input gradient so callers can
// chain networks (critic -> actor).

namespace hybridq {

enum class Activation { kRelu, kTanh };
enum class OutputActivation { kIdentity, kTanh, kSoftmax };

struct MlpTrace {
  Tensor input;                // batch x in
  std::vector<Tensor> pre;     // pre-activations per layer
  std::vector<Tensor> act;     // activations per layer (act.back() is the output)
  std::uint64_t version = 0;   // parameter version the trace was recorded under
};

struct MlpGrads {
  std::vector<Tensor> params;  // same layout as Mlp::params()
  Tensor input;                // batch x in
};

class Mlp {
 public:
  Mlp() = default;

  // widths = [in, hidden..., out]. Weights use uniform fan-in init with
  // bound 1/sqrt(fan_in); final_layer_scale shrinks the last layer (used by
  // actors to start near-zero actions).
  Mlp(std::vector<int> widths, Activation hidden, OutputActivation output, Rng& rng,
      double final_layer_scale = 1.0)
      : widths_(std::move(widths)), hidden_(hidden), output_(output) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least [in, out] widths");
    const int n_layers = static_cast<int>(widths_.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
      const int fan_in = widths_[l], fan_out = widths_[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      const double scale = (l == n_layers - 1) ? final_layer_scale : 1.0;
      Tensor w({fan_out, fan_in});
      for (double& v : w.data) v = scale * rng.uniform(-bound, bound);
      Tensor b({fan_out});
      for (double& v : b.data) v = scale * rng.uniform(-bound, bound);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
  }

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  Activation hidden_activation() const { return hidden_; }
  OutputActivation output_activation() const { return output_; }
  std::uint64_t version() const { return version_; }

  const std::vector<Tensor>& params() const { return params_; }
  // Any mutation invalidates previously recorded traces.
  std::vector<Tensor>& mutable_params() {
    ++version_;
    return params_;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

  std::vector<Tensor> zero_grads() const {
    std::vector<Tensor> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.shape);
    return g;
  }

  Tensor forward(const Tensor& input, MlpTrace* trace = nullptr) const {
    if (input.shape.size() != 2 || input.cols() != input_dim())
      throw std::invalid_argument("Mlp::forward: input shape mismatch");
    const int batch = input.rows();
    const int n_layers = static_cast<int>(widths_.size()) - 1;
    if (trace) {
      trace->input = input;
      trace->pre.clear();
      trace->act.clear();
      trace->version = version_;
    }
    Tensor cur = input;
    for (int l = 0; l < n_layers; ++l) {
      const Tensor& w = params_[2 * l];
      const Tensor& b = params_[2 * l + 1];
      Tensor pre({batch, widths_[l + 1]});
      affine_forward(cur, w, b, pre);
      Tensor act = pre;
      if (l < n_layers - 1) {
        apply_hidden(act);
      } else {
        apply_output(act);
      }
      ensure_finite(act, "Mlp::forward");
      if (trace) {
        trace->pre.push_back(std::move(pre));
        trace->act.push_back(act);
      }
      cur = trace ? trace->act.back() : std::move(act);
    }
    return cur;
  }

  // Reverse pass for a trace recorded by forward(). output_grad is
  // dLoss/dOutput (batch x out). Gradients accumulate nothing across calls;
  // each call returns fresh buffers.
  MlpGrads backward(const MlpTrace& trace, const Tensor& output_grad) const {
    if (trace.version != version_)
      throw std::runtime_error("Mlp::backward: stale trace (parameters changed)");
    const int n_layers = static_cast<int>(widths_.size()) - 1;
    if (static_cast<int>(trace.act.size()) != n_layers)
      throw std::invalid_argument("Mlp::backward: malformed trace");
    const int batch = trace.input.rows();
    if (output_grad.rows() != batch || output_grad.cols() != output_dim())
      throw std::invalid_argument("Mlp::backward: output_grad shape mismatch");

    MlpGrads grads;
    grads.params = zero_grads();

    Tensor delta = output_grad;
    for (int l = n_layers - 1; l >= 0; --l) {
      // Through the layer's activation.
      if (l == n_layers - 1) {
        backprop_output(trace.act[l], delta);
      } else {
        backprop_hidden(trace.pre[l], trace.act[l], delta);
      }
      const Tensor& below = l == 0 ? trace.input : trace.act[l - 1];
      const Tensor& w = params_[2 * l];
      Tensor& dw = grads.params[2 * l];
      Tensor& db = grads.params[2 * l + 1];
      // dW[o,i] = sum_b delta[b,o] * below[b,i];  db[o] = sum_b delta[b,o]
      for (int bi = 0; bi < batch; ++bi) {
        const double* in_row = &below.data[static_cast<std::size_t>(bi) * below.cols()];
        const double* d_row = &delta.data[static_cast<std::size_t>(bi) * delta.cols()];
        for (int o = 0; o < w.rows(); ++o) {
          const double d = d_row[o];
          db.data[o] += d;
          double* dw_row = &dw.data[static_cast<std::size_t>(o) * w.cols()];
          for (int i = 0; i < w.cols(); ++i) dw_row[i] += d * in_row[i];
        }
      }
      // dBelow[b,i] = sum_o delta[b,o] * W[o,i]
      Tensor next({batch, w.cols()});
      for (int bi = 0; bi < batch; ++bi) {
        const double* d_row = &delta.data[static_cast<std::size_t>(bi) * delta.cols()];
        double* n_row = &next.data[static_cast<std::size_t>(bi) * w.cols()];
        for (int o = 0; o < w.rows(); ++o) {
          const double d = d_row[o];
          const double* w_row = &w.data[static_cast<std::size_t>(o) * w.cols()];
          for (int i = 0; i < w.cols(); ++i) n_row[i] += d * w_row[i];
        }
      }
      delta = std::move(next);
    }
    grads.input = std::move(delta);
    return grads;
  }

  void save(std::ostream& os) const {
    const std::uint32_t n_widths = static_cast<std::uint32_t>(widths_.size());
    os.write(reinterpret_cast<const char*>(&n_widths), sizeof(n_widths));
    for (int w : widths_) {
      const std::int32_t v = w;
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    const std::int32_t h = static_cast<std::int32_t>(hidden_);
    const std::int32_t o = static_cast<std::int32_t>(output_);
    os.write(reinterpret_cast<const char*>(&h), sizeof(h));
    os.write(reinterpret_cast<const char*>(&o), sizeof(o));
    for (const auto& p : params_)
      os.write(reinterpret_cast<const char*>(p.data.data()),
               static_cast<std::streamsize>(p.data.size() * sizeof(double)));
  }

  void load(std::istream& is) {
    std::uint32_t n_widths = 0;
    is.read(reinterpret_cast<char*>(&n_widths), sizeof(n_widths));
    std::vector<int> widths(n_widths);
    for (auto& w : widths) {
      std::int32_t v = 0;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      w = v;
    }
    std::int32_t h = 0, o = 0;
    is.read(reinterpret_cast<char*>(&h), sizeof(h));
    is.read(reinterpret_cast<char*>(&o), sizeof(o));
    if (widths != widths_) {
      // Rebuild parameter storage for the serialized architecture.
      widths_ = widths;
      params_.clear();
      for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        params_.emplace_back(std::vector<int>{widths_[l + 1], widths_[l]});
        params_.emplace_back(std::vector<int>{widths_[l + 1]});
      }
    }
    hidden_ = static_cast<Activation>(h);
    output_ = static_cast<OutputActivation>(o);
    for (auto& p : params_)
      is.read(reinterpret_cast<char*>(p.data.data()),
              static_cast<std::streamsize>(p.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("Mlp::load: truncated stream");
    ++version_;
  }

 private:
  static void affine_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    const int batch = in.rows(), n_in = in.cols(), n_out = w.rows();
    for (int bi = 0; bi < batch; ++bi) {
      const double* in_row = &in.data[static_cast<std::size_t>(bi) * n_in];
      double* out_row = &out.data[static_cast<std::size_t>(bi) * n_out];
      for (int o = 0; o < n_out; ++o) {
        const double* w_row = &w.data[static_cast<std::size_t>(o) * n_in];
        double acc = b.data[o];
        for (int i = 0; i < n_in; ++i) acc += w_row[i] * in_row[i];
        out_row[o] = acc;
      }
    }
  }

  void apply_hidden(Tensor& t) const {
    if (hidden_ == Activation::kRelu) {
      for (double& v : t.data) v = v > 0.0 ? v : 0.0;
    } else {
      for (double& v : t.data) v = std::tanh(v);
    }
  }

  void apply_output(Tensor& t) const {
    switch (output_) {
      case OutputActivation::kIdentity:
        return;
      case OutputActivation::kTanh:
        for (double& v : t.data) v = std::tanh(v);
        return;
      case OutputActivation::kSoftmax: {
        const int batch = t.rows(), dim = t.cols();
        for (int bi = 0; bi < batch; ++bi) {
          double* row = &t.data[static_cast<std::size_t>(bi) * dim];
          double mx = row[0];
          for (int i = 1; i < dim; ++i) mx = std::max(mx, row[i]);
          double sum = 0.0;
          for (int i = 0; i < dim; ++i) {
            row[i] = std::exp(row[i] - mx);
            sum += row[i];
          }
          for (int i = 0; i < dim; ++i) row[i] /= sum;
        }
        return;
      }
    }
  }

  void backprop_hidden(const Tensor& pre, const Tensor& act, Tensor& delta) const {
    if (hidden_ == Activation::kRelu) {
      for (std::size_t i = 0; i < delta.data.size(); ++i)
        if (pre.data[i] <= 0.0) delta.data[i] = 0.0;
    } else {
      for (std::size_t i = 0; i < delta.data.size(); ++i)
        delta.data[i] *= 1.0 - act.data[i] * act.data[i];
    }
  }

  void backprop_output(const Tensor& act, Tensor& delta) const {
    switch (output_) {
      case OutputActivation::kIdentity:
        return;
      case OutputActivation::kTanh:
        for (std::size_t i = 0; i < delta.data.size(); ++i)
          delta.data[i] *= 1.0 - act.data[i] * act.data[i];
        return;
      case OutputActivation::kSoftmax: {
        const int batch = act.rows(), dim = act.cols();
        for (int bi = 0; bi < batch; ++bi) {
          const double* y = &act.data[static_cast<std::size_t>(bi) * dim];
          double* d = &delta.data[static_cast<std::size_t>(bi) * dim];
          double dot = 0.0;
          for (int i = 0; i < dim; ++i) dot += d[i] * y[i];
          for (int i = 0; i < dim; ++i) d[i] = y[i] * (d[i] - dot);
        }
        return;
      }
    }
  }

  std::vector<int> widths_;
  Activation hidden_ = Activation::kRelu;
  OutputActivation output_ = OutputActivation::kIdentity;
  std::vector<Tensor> params_;
  std::uint64_t version_ = 0;
};

}  // namespace hybridq
