#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "hybridq/rng.hpp"
#include "hybridq/tensor.hpp"

namespace hybridq {

// (s, a_d, a_c, r, s', done). done is true only on genuine terminations
// (success or failure); time-limit truncations store done = false so the
// bootstrap continues through them.
struct Transition {
  std::vector<double> s;
  int a_d = 0;
  std::vector<double> a_c;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

// Fixed-capacity ring buffer with uniform with-replacement sampling. Storage
// is struct-of-arrays so batch assembly is a straight gather.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int obs_dim, int act_dim)
      : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
    if (capacity < 1 || obs_dim < 1 || act_dim < 1)
      throw std::invalid_argument("ReplayBuffer: bad dimensions");
    obs_.resize(static_cast<std::size_t>(capacity) * obs_dim);
    obs_next_.resize(static_cast<std::size_t>(capacity) * obs_dim);
    act_c_.resize(static_cast<std::size_t>(capacity) * act_dim);
    act_d_.resize(capacity);
    reward_.resize(capacity);
    done_.resize(capacity);
  }

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  void push(const Transition& t) {
    if (static_cast<int>(t.s.size()) != obs_dim_ ||
        static_cast<int>(t.s_next.size()) != obs_dim_ ||
        static_cast<int>(t.a_c.size()) != act_dim_)
      throw std::invalid_argument("ReplayBuffer::push: dimension mismatch");
    const std::size_t row = static_cast<std::size_t>(cursor_);
    std::copy(t.s.begin(), t.s.end(), obs_.begin() + row * obs_dim_);
    std::copy(t.s_next.begin(), t.s_next.end(), obs_next_.begin() + row * obs_dim_);
    std::copy(t.a_c.begin(), t.a_c.end(), act_c_.begin() + row * act_dim_);
    act_d_[cursor_] = t.a_d;
    reward_[cursor_] = t.r;
    done_[cursor_] = t.done ? 1 : 0;
    cursor_ = (cursor_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }

  Transition get(int index) const {
    if (index < 0 || index >= size_) throw std::out_of_range("ReplayBuffer::get");
    Transition t;
    const std::size_t row = static_cast<std::size_t>(index);
    t.s.assign(obs_.begin() + row * obs_dim_, obs_.begin() + (row + 1) * obs_dim_);
    t.s_next.assign(obs_next_.begin() + row * obs_dim_, obs_next_.begin() + (row + 1) * obs_dim_);
    t.a_c.assign(act_c_.begin() + row * act_dim_, act_c_.begin() + (row + 1) * act_dim_);
    t.a_d = act_d_[index];
    t.r = reward_[index];
    t.done = done_[index] != 0;
    return t;
  }

  std::vector<int> sample_indices(int batch, Rng& rng) const {
    if (batch < 1) throw std::invalid_argument("ReplayBuffer::sample: batch must be >= 1");
    if (size_ < 1) throw std::runtime_error("ReplayBuffer::sample: underfilled buffer");
    std::vector<int> idx(batch);
    for (int& i : idx) i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(size_)));
    return idx;
  }

  struct Batch {
    Tensor s;        // batch x obs_dim
    Tensor s_next;   // batch x obs_dim
    Tensor a_c;      // batch x act_dim
    std::vector<int> a_d;
    std::vector<double> r;
    std::vector<std::uint8_t> done;
  };

  Batch gather(const std::vector<int>& idx) const {
    const int n = static_cast<int>(idx.size());
    Batch b{Tensor({n, obs_dim_}), Tensor({n, obs_dim_}), Tensor({n, act_dim_}),
            std::vector<int>(n), std::vector<double>(n), std::vector<std::uint8_t>(n)};
    for (int row = 0; row < n; ++row) {
      const std::size_t src = static_cast<std::size_t>(idx[row]);
      std::copy(obs_.begin() + src * obs_dim_, obs_.begin() + (src + 1) * obs_dim_,
                b.s.data.begin() + static_cast<std::size_t>(row) * obs_dim_);
      std::copy(obs_next_.begin() + src * obs_dim_, obs_next_.begin() + (src + 1) * obs_dim_,
                b.s_next.data.begin() + static_cast<std::size_t>(row) * obs_dim_);
      std::copy(act_c_.begin() + src * act_dim_, act_c_.begin() + (src + 1) * act_dim_,
                b.a_c.data.begin() + static_cast<std::size_t>(row) * act_dim_);
      b.a_d[row] = act_d_[idx[row]];
      b.r[row] = reward_[idx[row]];
      b.done[row] = done_[idx[row]];
    }
    return b;
  }

  Batch sample(int batch, Rng& rng) const { return gather(sample_indices(batch, rng)); }

  void save(std::ostream& os) const {
    const std::int32_t header[3] = {capacity_, obs_dim_, act_dim_};
    os.write(reinterpret_cast<const char*>(header), sizeof(header));
    const std::int32_t state[2] = {size_, cursor_};
    os.write(reinterpret_cast<const char*>(state), sizeof(state));
    auto dump = [&](const auto& v) {
      os.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(v[0])));
    };
    dump(obs_);
    dump(obs_next_);
    dump(act_c_);
    dump(act_d_);
    dump(reward_);
    dump(done_);
  }

  void load(std::istream& is) {
    std::int32_t header[3];
    is.read(reinterpret_cast<char*>(header), sizeof(header));
    if (header[0] != capacity_ || header[1] != obs_dim_ || header[2] != act_dim_)
      throw std::runtime_error("ReplayBuffer::load: layout mismatch");
    std::int32_t state[2];
    is.read(reinterpret_cast<char*>(state), sizeof(state));
    size_ = state[0];
    cursor_ = state[1];
    auto slurp = [&](auto& v) {
      is.read(reinterpret_cast<char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(v[0])));
    };
    slurp(obs_);
    slurp(obs_next_);
    slurp(act_c_);
    slurp(act_d_);
    slurp(reward_);
    slurp(done_);
    if (!is) throw std::runtime_error("ReplayBuffer::load: truncated stream");
  }

 private:
  int capacity_;
  int obs_dim_;
  int act_dim_;
  int size_ = 0;
  int cursor_ = 0;
  std::vector<double> obs_, obs_next_, act_c_;
  std::vector<int> act_d_;
  std::vector<double> reward_;
  std::vector<std::uint8_t> done_;
};

}  // namespace hybridq
