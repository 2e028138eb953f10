#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridq {

// Dense row-major tensor of doubles. Just enough structure for MLPs:
// rank 1 (vectors) and rank 2 (batch x dim or out x in matrices).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) throw std::invalid_argument("Tensor: shape/data mismatch");
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// NaN/Inf anywhere is a hard error; called on op outputs.
inline void ensure_finite(const Tensor& t, const char* context) {
  for (double v : t.data) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("non-finite value in ") + context);
  }
}

inline void ensure_finite(double v, const char* context) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + context);
}

}  // namespace hybridq
