#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>

namespace hybridq {

// splitmix64, used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with explicit, serializable state. std:: engines and
// distributions are avoided so that sequences are identical across
// standard library implementations.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL) {}

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection to remove modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return x % n;
  }

  // Standard normal via Marsaglia's polar method (platform-stable, unlike
  // std::normal_distribution).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  void save(std::ostream& os) const {
    for (auto word : state_) os.write(reinterpret_cast<const char*>(&word), sizeof(word));
    const std::uint8_t has = has_spare_ ? 1 : 0;
    os.write(reinterpret_cast<const char*>(&has), 1);
    os.write(reinterpret_cast<const char*>(&spare_), sizeof(spare_));
  }

  void load(std::istream& is) {
    for (auto& word : state_) is.read(reinterpret_cast<char*>(&word), sizeof(word));
    std::uint8_t has = 0;
    is.read(reinterpret_cast<char*>(&has), 1);
    has_spare_ = has != 0;
    is.read(reinterpret_cast<char*>(&spare_), sizeof(spare_));
  }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.state_ == b.state_ && a.has_spare_ == b.has_spare_ &&
           (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// All randomness in the project flows from a single root seed. Independent
// streams are derived from (root, purpose tag, indices); the tag keeps
// unrelated consumers decoupled when configuration changes.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t index_a = 0, std::uint64_t index_b = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = root;
  std::uint64_t mixed = splitmix64(s) ^ h;
  mixed ^= 0x9e3779b97f4a7c15ULL * (index_a + 1);
  std::uint64_t t = mixed + 0x632be59bd9b4e019ULL * (index_b + 1);
  return splitmix64(t);
}

inline Rng derive_rng(std::uint64_t root, std::string_view tag,
                      std::uint64_t index_a = 0, std::uint64_t index_b = 0) {
  return Rng(derive_seed(root, tag, index_a, index_b));
}

}  // namespace hybridq
