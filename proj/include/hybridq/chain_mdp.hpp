#pragma once

#include <stdexcept>
#include <vector>

#include "hybridq/env.hpp"
#include "hybridq/rng.hpp"

namespace hybridq {

// Three-state deterministic chain with known Q values, used to certify the
// estimation-bias probe: s0 -> s1 -> s2 (terminal), fixed rewards per hop,
// actions ignored. Observations are one-hot.
class ChainMdpEnv {
 public:
  static constexpr int kObservationDim = 3;

  ChainMdpEnv(double r0 = 1.0, double r1 = 2.0) : r0_(r0), r1_(r1) {}

  double exact_q(int state, double gamma) const {
    if (state == 0) return r0_ + gamma * r1_;
    if (state == 1) return r1_;
    return 0.0;
  }

  void reset(Rng&) {
    state_ = 0;
    terminated_ = false;
  }

  bool terminated() const { return terminated_; }
  int state() const { return state_; }

  std::vector<double> raw_observation() const {
    std::vector<double> obs(kObservationDim, 0.0);
    obs[state_] = 1.0;
    return obs;
  }

  StepResult step(const HybridAction&) {
    if (terminated_) throw std::logic_error("ChainMdpEnv::step: episode already terminated");
    StepResult res;
    res.reward = state_ == 0 ? r0_ : r1_;
    ++state_;
    terminated_ = state_ >= 2;
    res.terminated = terminated_;
    res.reason = terminated_ ? TerminationReason::kSuccess : TerminationReason::kNone;
    res.observation = raw_observation();
    return res;
  }

 private:
  double r0_, r1_;
  int state_ = 0;
  bool terminated_ = false;
};

}  // namespace hybridq
