#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridq/rng.hpp"

// Planar kinematic point-mass manipulator with a hybrid action space: a
// binary suction mode a_d and a 2-D effector velocity a_c. The episode
// configuration (object/goal placement, mass, drag) is resampled at every
// reset, so the transition kernel is nonstationary across episodes.

namespace hybridq {

enum class Task { kReach, kPick, kMove, kPut };

inline const char* task_name(Task t) {
  switch (t) {
    case Task::kReach: return "reach";
    case Task::kPick: return "pick";
    case Task::kMove: return "move";
    case Task::kPut: return "put";
  }
  return "?";
}

inline Task task_from_name(const std::string& s) {
  if (s == "reach") return Task::kReach;
  if (s == "pick") return Task::kPick;
  if (s == "move") return Task::kMove;
  if (s == "put") return Task::kPut;
  throw std::invalid_argument("unknown task: " + s);
}

enum class TerminationReason { kNone, kSuccess, kOutOfWorkspace, kMaxSteps, kBoundaryViolation };

inline const char* termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::kNone: return "none";
    case TerminationReason::kSuccess: return "success";
    case TerminationReason::kOutOfWorkspace: return "out_of_workspace";
    case TerminationReason::kMaxSteps: return "max_steps";
    case TerminationReason::kBoundaryViolation: return "boundary_violation";
  }
  return "?";
}

using Vec2 = std::array<double, 2>;

inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline double norm(const Vec2& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1]); }

struct HybridAction {
  int a_d = 0;        // suction mode, {0, 1}
  Vec2 a_c{0.0, 0.0};  // effector velocity command
};

struct EnvConfig {
  Task task = Task::kReach;
  double dt = 0.05;
  double v_max = 1.0;
  double workspace_half = 1.0;  // workspace is [-h, h]^2
  double grasp_radius = 0.08;
  int max_steps = 100;
  double success_radius = 0.05;
  double pick_lift_distance = 0.1;
  double distance_scale = 0.5;  // tanh scale in the staged distance rewards
  bool terminate_on_boundary = false;

  // Reward weights: W_i for the three reward terms and W_j for the four
  // applicable penalty terms (boundary, timeout, jerkiness, object out of
  // workspace); the composite is divided by reward_norm.
  double w_approach = 1.0;
  double w_transport = 1.0;
  double w_velocity = 0.5;
  double w_boundary = 1.0;
  double w_timeout = 1.0;
  double w_jerk = 0.1;
  double w_object_out = 1.0;
  double reward_norm = 10.0;

  // Domain randomization ranges.
  double spawn_margin = 0.15;
  double mass_min = 0.5, mass_max = 2.0;
  double drag_min = 0.0, drag_max = 0.5;

  double max_abs_reward() const {
    const double jerk_max = 8.0 * v_max * v_max + 1.0;  // |da_c|^2 <= (2 v_max)^2 * 2, |da_d| <= 1
    const double pos = w_approach + w_transport + w_velocity * 2.0 * v_max;
    const double neg = w_boundary + w_timeout + w_jerk * jerk_max + w_object_out;
    return std::max(pos, neg) / reward_norm;
  }
};

// Episode configuration omega, sampled i.i.d. at each reset.
struct DomainConfig {
  Vec2 object_pos{0.0, 0.0};
  Vec2 goal_pos{0.0, 0.0};
  double mass_factor = 1.0;
  double grasp_radius = 0.08;
  double drag = 0.0;
  Task task = Task::kReach;
};

struct StepResult {
  std::vector<double> observation;  // raw, un-normalized
  double reward = 0.0;
  bool terminated = false;
  TerminationReason reason = TerminationReason::kNone;
};

class PointMassEnv {
 public:
  static constexpr int kActionHistory = 3;   // a_{t-3 .. t-1}
  static constexpr int kPositionHistory = 2; // j_{t-2 .. t-1} in addition to j_t

  explicit PointMassEnv(EnvConfig config = {}) : config_(config) {}

  const EnvConfig& config() const { return config_; }
  const DomainConfig& domain() const { return domain_; }
  bool terminated() const { return terminated_; }
  int step_count() const { return step_count_; }
  bool attached() const { return attached_; }
  const Vec2& effector() const { return effector_; }
  const Vec2& object() const { return object_pos_; }

  // Observation layout (fixed order, zero-padded history at episode start):
  //   [0:2]  j_{t-2}   [2:4]  j_{t-1}   [4:6]  j_t
  //   [6:8]  p_eo      [8:10] p_og      [10:12] p_eg
  //   [12] attached flag  [13] released-this-step flag  [14] previous suction command
  //   [15:18] a_{t-3}  [18:21] a_{t-2}  [21:24] a_{t-1}   (each as a_d, a_cx, a_cy)
  static constexpr int kObservationDim = 24;

  DomainConfig reset(Rng& rng) {
    domain_.task = config_.task;
    const double lim = config_.workspace_half - config_.spawn_margin;
    domain_.object_pos = {rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
    domain_.goal_pos = {rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
    domain_.mass_factor = rng.uniform(config_.mass_min, config_.mass_max);
    domain_.drag = rng.uniform(config_.drag_min, config_.drag_max);
    domain_.grasp_radius = config_.grasp_radius;

    effector_ = {0.0, 0.0};
    object_pos_ = domain_.object_pos;
    object_initial_ = domain_.object_pos;
    object_vel_ = {0.0, 0.0};
    attached_ = false;
    ever_attached_ = false;
    released_this_step_ = false;
    position_history_.clear();
    action_history_.clear();
    step_count_ = 0;
    terminated_ = false;
    reason_ = TerminationReason::kNone;
    last_action_ = HybridAction{};
    have_last_action_ = false;
    return domain_;
  }

  // Euler integration of the velocity command, clamped to the workspace.
  // Returns the clamped position; sets `violated` if any component clamped.
  Vec2 integrate_velocity(const Vec2& pos, const Vec2& vel, double dt, bool* violated) const {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_velocity: dt must be > 0");
    const double h = config_.workspace_half;
    Vec2 next{pos[0] + vel[0] * dt, pos[1] + vel[1] * dt};
    bool v = false;
    for (double& c : next) {
      if (c < -h || c > h) {
        c = std::clamp(c, -h, h);
        v = true;
      }
    }
    if (violated) *violated = v;
    return next;
  }

  StepResult step(const HybridAction& action_in) {
    if (terminated_) throw std::logic_error("PointMassEnv::step: episode already terminated");

    HybridAction action = action_in;
    action.a_d = action.a_d != 0 ? 1 : 0;
    for (double& c : action.a_c) c = std::clamp(c, -config_.v_max, config_.v_max);

    const Vec2 effector_prev = effector_;
    bool boundary_violated = false;
    effector_ = integrate_velocity(effector_, action.a_c, config_.dt, &boundary_violated);
    const Vec2 effector_vel = {(effector_[0] - effector_prev[0]) / config_.dt,
                               (effector_[1] - effector_prev[1]) / config_.dt};

    // Suction logic. Attach snaps the object onto the effector; release hands
    // the object the effector velocity scaled down by its mass factor, after
    // which it slides with drag until it stops.
    released_this_step_ = false;
    if (action.a_d == 1 && !attached_ && norm(object_pos_ - effector_) < domain_.grasp_radius) {
      attached_ = true;
      ever_attached_ = true;
    } else if (action.a_d == 0 && attached_) {
      attached_ = false;
      released_this_step_ = true;
      object_vel_ = {effector_vel[0] / domain_.mass_factor, effector_vel[1] / domain_.mass_factor};
    }

    bool object_out = false;
    if (attached_) {
      object_pos_ = effector_;
      object_vel_ = effector_vel;
    } else if (norm(object_vel_) > 1e-12) {
      object_pos_ = {object_pos_[0] + object_vel_[0] * config_.dt,
                     object_pos_[1] + object_vel_[1] * config_.dt};
      const double decay = std::max(0.0, 1.0 - (domain_.drag + 0.1));
      object_vel_ = {object_vel_[0] * decay, object_vel_[1] * decay};
      const double h = config_.workspace_half;
      if (std::fabs(object_pos_[0]) > h || std::fabs(object_pos_[1]) > h) object_out = true;
    }

    ++step_count_;

    // Reward terms.
    const Vec2 p_eo = object_pos_ - effector_;
    const Vec2 p_og = domain_.goal_pos - object_pos_;
    const double r_approach =
        ever_attached_ ? 0.0 : 1.0 - std::tanh(norm(p_eo) / config_.distance_scale);
    const double r_transport =
        attached_ ? 1.0 - std::tanh(norm(p_og) / config_.distance_scale) : 0.0;
    double r_velocity = 0.0;
    const double d_og = norm(p_og);
    if (d_og > 1e-9) {
      r_velocity =
          std::max(0.0, (object_vel_[0] * p_og[0] + object_vel_[1] * p_og[1]) / d_og);
    }

    double jerk = 0.0;
    {
      const HybridAction& prev = last_action_;  // zero action before the first step
      const double dd = static_cast<double>(action.a_d - prev.a_d);
      const Vec2 dc = action.a_c - prev.a_c;
      jerk = dd * dd + dc[0] * dc[0] + dc[1] * dc[1];
    }

    // Success conditions.
    bool success = false;
    switch (domain_.task) {
      case Task::kReach:
        success = norm(p_eo) < config_.success_radius;
        break;
      case Task::kPick:
        success = attached_ && norm(object_pos_ - object_initial_) > config_.pick_lift_distance;
        break;
      case Task::kMove:
        success = d_og < config_.success_radius;
        break;
      case Task::kPut:
        success = d_og < config_.success_radius && !attached_ && action.a_d == 0 &&
                  ever_attached_;
        break;
    }

    bool timeout = false;
    if (success) {
      terminated_ = true;
      reason_ = TerminationReason::kSuccess;
    } else if (object_out) {
      terminated_ = true;
      reason_ = TerminationReason::kOutOfWorkspace;
    } else if (boundary_violated && config_.terminate_on_boundary) {
      terminated_ = true;
      reason_ = TerminationReason::kBoundaryViolation;
    } else if (step_count_ >= config_.max_steps) {
      terminated_ = true;
      timeout = true;
      reason_ = TerminationReason::kMaxSteps;
    }

    const double reward =
        (config_.w_approach * r_approach + config_.w_transport * r_transport +
         config_.w_velocity * r_velocity -
         (config_.w_boundary * (boundary_violated ? 1.0 : 0.0) +
          config_.w_timeout * (timeout ? 1.0 : 0.0) + config_.w_jerk * jerk +
          config_.w_object_out * (object_out ? 1.0 : 0.0))) /
        config_.reward_norm;

    // Advance histories; the returned observation describes the new state.
    position_history_.push_back(effector_prev);
    while (position_history_.size() > kPositionHistory) position_history_.pop_front();
    action_history_.push_back(action);
    while (action_history_.size() > kActionHistory) action_history_.pop_front();
    last_action_ = action;
    have_last_action_ = true;

    StepResult result;
    result.observation = raw_observation();
    result.reward = reward;
    result.terminated = terminated_;
    result.reason = reason_;
    return result;
  }

  std::vector<double> raw_observation() const {
    std::vector<double> obs;
    obs.reserve(kObservationDim);
    // Position history, oldest first, zero-padded.
    const int missing = kPositionHistory - static_cast<int>(position_history_.size());
    for (int i = 0; i < missing; ++i) {
      obs.push_back(0.0);
      obs.push_back(0.0);
    }
    for (const Vec2& p : position_history_) {
      obs.push_back(p[0]);
      obs.push_back(p[1]);
    }
    obs.push_back(effector_[0]);
    obs.push_back(effector_[1]);

    const Vec2 p_eo = object_pos_ - effector_;
    const Vec2 p_og = domain_.goal_pos - object_pos_;
    const Vec2 p_eg = domain_.goal_pos - effector_;
    for (const Vec2& v : {p_eo, p_og, p_eg}) {
      obs.push_back(v[0]);
      obs.push_back(v[1]);
    }

    obs.push_back(attached_ ? 1.0 : 0.0);
    obs.push_back(released_this_step_ ? 1.0 : 0.0);
    obs.push_back(have_last_action_ ? static_cast<double>(last_action_.a_d) : 0.0);

    const int act_missing = kActionHistory - static_cast<int>(action_history_.size());
    for (int i = 0; i < act_missing; ++i) {
      obs.push_back(0.0);
      obs.push_back(0.0);
      obs.push_back(0.0);
    }
    for (const HybridAction& a : action_history_) {
      obs.push_back(static_cast<double>(a.a_d));
      obs.push_back(a.a_c[0]);
      obs.push_back(a.a_c[1]);
    }
    return obs;
  }

 private:
  EnvConfig config_;
  DomainConfig domain_;

  Vec2 effector_{0.0, 0.0};
  Vec2 object_pos_{0.0, 0.0};
  Vec2 object_initial_{0.0, 0.0};
  Vec2 object_vel_{0.0, 0.0};
  bool attached_ = false;
  bool ever_attached_ = false;
  bool released_this_step_ = false;
  std::deque<Vec2> position_history_;
  std::deque<HybridAction> action_history_;
  HybridAction last_action_{};
  bool have_last_action_ = false;
  int step_count_ = 0;
  bool terminated_ = false;
  TerminationReason reason_ = TerminationReason::kNone;
};

}  // namespace hybridq
