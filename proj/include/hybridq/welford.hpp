#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace hybridq {

// Single-pass running mean/variance per observation component:
//   n_t = n_{t-1} + 1
//   delta = x - mu_{t-1};  mu_t = mu_{t-1} + delta / n_t
//   delta' = x - mu_t;     M2_t = M2_{t-1} + delta * delta'
// Variance is the population form M2 / n.
class WelfordState {
 public:
  WelfordState() = default;
  explicit WelfordState(int dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  std::int64_t count() const { return n_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& m2() const { return m2_; }

  void update(const std::vector<double>& x) {
    if (x.size() != mean_.size()) throw std::invalid_argument("WelfordState: dimension mismatch");
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(n_);
      const double delta2 = x[i] - mean_[i];
      m2_[i] += delta * delta2;
    }
  }

  std::vector<double> variance() const {
    std::vector<double> v(mean_.size(), 0.0);
    if (n_ > 0)
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(n_);
    return v;
  }

  // (x - mu) / (sigma + eps), clipped to [-clip, clip]. The raw standardized
  // value is unbounded when sigma is small (a constant stream gives 1/eps),
  // hence the clip.
  std::vector<double> normalize(const std::vector<double>& x, double clip = 5.0,
                                double eps = 1e-7) const {
    if (n_ < 1) throw std::runtime_error("WelfordState::normalize: no samples seen");
    if (x.size() != mean_.size()) throw std::invalid_argument("WelfordState: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sigma = std::sqrt(m2_[i] / static_cast<double>(n_));
      const double z = (x[i] - mean_[i]) / (sigma + eps);
      out[i] = std::clamp(z, -clip, clip);
    }
    return out;
  }

  void save(std::ostream& os) const {
    os.write(reinterpret_cast<const char*>(&n_), sizeof(n_));
    const std::uint32_t dim = static_cast<std::uint32_t>(mean_.size());
    os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    os.write(reinterpret_cast<const char*>(mean_.data()),
             static_cast<std::streamsize>(mean_.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(m2_.data()),
             static_cast<std::streamsize>(m2_.size() * sizeof(double)));
  }

  void load(std::istream& is) {
    is.read(reinterpret_cast<char*>(&n_), sizeof(n_));
    std::uint32_t dim = 0;
    is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    mean_.resize(dim);
    m2_.resize(dim);
    is.read(reinterpret_cast<char*>(mean_.data()),
            static_cast<std::streamsize>(mean_.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(m2_.data()),
            static_cast<std::streamsize>(m2_.size() * sizeof(double)));
    if (!is) throw std::runtime_error("WelfordState::load: truncated stream");
  }

  friend bool operator==(const WelfordState& a, const WelfordState& b) {
    return a.n_ == b.n_ && a.mean_ == b.mean_ && a.m2_ == b.m2_;
  }

 private:
  std::int64_t n_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace hybridq
