#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridq/adam.hpp"
#include "hybridq/env.hpp"
#include "hybridq/mlp.hpp"
#include "hybridq/policy.hpp"
#include "hybridq/replay.hpp"
#include "hybridq/rng.hpp"
#include "hybridq/targets.hpp"
#include "hybridq/welford.hpp"

// Every learner shares one actor interface: the proposed weighted-clipped
// variant, the greedy/DDPG/SAC/PPO baselines, and the DATD3/DARC/TQC/ACC
// target-rule variants.

namespace hybridq {

enum class AgentVariant {
  kHybridTd3,
  kTd3Greedy,
  kDdpg,
  kSac,
  kPpo,
  kHyDatd3,
  kHyDarc,
  kHyTqc,
  kHyAcc,
};

inline const char* agent_variant_name(AgentVariant v) {
  switch (v) {
    case AgentVariant::kHybridTd3: return "hybrid_td3";
    case AgentVariant::kTd3Greedy: return "td3_greedy";
    case AgentVariant::kDdpg: return "ddpg";
    case AgentVariant::kSac: return "sac";
    case AgentVariant::kPpo: return "ppo";
    case AgentVariant::kHyDatd3: return "hydatd3";
    case AgentVariant::kHyDarc: return "hydarc";
    case AgentVariant::kHyTqc: return "hytqc";
    case AgentVariant::kHyAcc: return "hyacc";
  }
  return "?";
}

inline AgentVariant agent_variant_from_name(const std::string& s) {
  for (AgentVariant v :
       {AgentVariant::kHybridTd3, AgentVariant::kTd3Greedy, AgentVariant::kDdpg,
        AgentVariant::kSac, AgentVariant::kPpo, AgentVariant::kHyDatd3, AgentVariant::kHyDarc,
        AgentVariant::kHyTqc, AgentVariant::kHyAcc})
    if (s == agent_variant_name(v)) return v;
  throw std::invalid_argument("unknown agent variant: " + s);
}

struct AgentConfig {
  double gamma = 0.99;
  double tau_polyak = 0.005;
  int policy_delay = 2;
  double smoothing_sigma = 0.2;
  double smoothing_clip = -1.0;  // < 0: use 0.5 * smoothing_sigma
  double explore_sigma = 0.1;
  double eps_greedy_start = 0.3;
  double eps_greedy_end = 0.05;
  std::int64_t eps_anneal_steps = 20000;
  double lambda_darc = 0.7;
  int k_atoms = 22;
  int n_critics = 5;
  int m_atoms = 25;
  int beta_acc = 2;
  double alpha_c = 0.2;
  double alpha_d = 0.2;
  TargetWeighting weighting = TargetWeighting::kAsWritten;
  double lr = 3e-4;
  int batch_size = 256;
  std::int64_t warmup_steps = 1000;
  std::vector<int> hidden = {256, 256};
  Activation activation = Activation::kRelu;
  double actor_final_scale = 1e-2;
  // PPO
  int ppo_rollout = 1024;
  int ppo_epochs = 10;
  int ppo_minibatch = 256;
  double ppo_clip = 0.2;
  double gae_lambda = 0.95;
  double ppo_value_coef = 0.5;
  double ppo_init_log_std = -0.7;

  double smoothing_clip_value() const {
    return smoothing_clip >= 0.0 ? smoothing_clip : 0.5 * smoothing_sigma;
  }
};

struct StepMetrics {
  double reward = 0.0;
  bool episode_end = false;
  TerminationReason reason = TerminationReason::kNone;
  bool critic_updated = false;
  double critic_loss = 0.0;
  bool actor_updated = false;
  double actor_loss = 0.0;
};

class HybridAgent {
 public:
  HybridAgent(AgentVariant variant, AgentConfig cfg, int obs_dim, int act_dim, int n_modes,
              std::uint64_t seed)
      : variant_(variant),
        cfg_(cfg),
        obs_dim_(obs_dim),
        act_dim_(act_dim),
        n_modes_(n_modes) {
    Rng rng = derive_rng(seed, "agent_init");
    const bool stochastic = is_stochastic_family();
    actor_ = HybridPolicy(obs_dim, act_dim, n_modes, cfg_.hidden, v_max_, stochastic,
                          cfg_.activation, rng, cfg_.actor_final_scale);
    actor_opt_ = AdamState::for_params(actor_.net().params(), cfg_.lr);
    if (has_target_actor()) actor_target_ = actor_;

    if (uses_quantile()) {
      std::vector<int> widths{obs_dim + act_dim};
      widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
      widths.push_back(n_modes * cfg_.m_atoms);
      for (int i = 0; i < cfg_.n_critics; ++i) {
        quantile_critics_.emplace_back(widths, cfg_.activation, OutputActivation::kIdentity, rng);
        quantile_opts_.push_back(AdamState::for_params(quantile_critics_.back().params(), cfg_.lr));
      }
      quantile_targets_ = quantile_critics_;
    } else {
      std::vector<int> widths{obs_dim + act_dim};
      widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
      widths.push_back(n_modes);
      q1_ = Mlp(widths, cfg_.activation, OutputActivation::kIdentity, rng);
      q2_ = Mlp(widths, cfg_.activation, OutputActivation::kIdentity, rng);
      q1_opt_ = AdamState::for_params(q1_.params(), cfg_.lr);
      q2_opt_ = AdamState::for_params(q2_.params(), cfg_.lr);
      q1_target_ = q1_;
      q2_target_ = q2_;
    }

    if (variant_ == AgentVariant::kPpo) {
      std::vector<int> widths{obs_dim};
      widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
      widths.push_back(1);
      value_net_ = Mlp(widths, cfg_.activation, OutputActivation::kIdentity, rng);
      value_opt_ = AdamState::for_params(value_net_.params(), cfg_.lr);
      log_std_ = Tensor({act_dim});
      log_std_.fill(cfg_.ppo_init_log_std);
      log_std_opt_ = AdamState::for_params({log_std_}, cfg_.lr);
    }
  }

  AgentVariant variant() const { return variant_; }
  const AgentConfig& config() const { return cfg_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t updates() const { return update_count_; }
  std::int64_t actor_updates() const { return actor_update_count_; }
  void set_v_max(double v) { v_max_ = v; }

  bool is_stochastic_family() const {
    return variant_ == AgentVariant::kSac || variant_ == AgentVariant::kHyTqc ||
           variant_ == AgentVariant::kHyAcc;
  }
  bool uses_quantile() const {
    return variant_ == AgentVariant::kHyTqc || variant_ == AgentVariant::kHyAcc;
  }
  bool has_target_actor() const {
    return !is_stochastic_family() && variant_ != AgentVariant::kPpo;
  }
  bool single_critic() const { return variant_ == AgentVariant::kDdpg; }

  double eps_greedy() const {
    const double frac =
        cfg_.eps_anneal_steps <= 0
            ? 1.0
            : std::min(1.0, static_cast<double>(env_steps_) /
                                static_cast<double>(cfg_.eps_anneal_steps));
    return cfg_.eps_greedy_start + frac * (cfg_.eps_greedy_end - cfg_.eps_greedy_start);
  }

  // exploit: a_c = mu(s), a_d = argmax pi_d. explore: Gaussian noise on a_c
  // and eps-greedy on a_d for the deterministic family; the stochastic family
  // samples its own distributions.
  HybridAction act(const std::vector<double>& obs_norm, bool explore, Rng& rng) const {
    const PolicyOutput out = policy_forward_single(actor_, obs_norm);
    HybridAction a;
    if (is_stochastic_family()) {
      if (explore) {
        for (int j = 0; j < act_dim_; ++j) {
          const double std = std::exp(out.log_std.at(0, j));
          const double u = out.raw.at(0, j) + std * rng.normal();
          a.a_c[j] = v_max_ * std::tanh(u);
        }
        a.a_d = sample_categorical(out.pi_d, 0, rng);
      } else {
        for (int j = 0; j < act_dim_; ++j) a.a_c[j] = out.a_c.at(0, j);
        a.a_d = argmax_row(out.pi_d, 0);
      }
    } else if (variant_ == AgentVariant::kPpo) {
      if (explore) {
        for (int j = 0; j < act_dim_; ++j) {
          const double std = std::exp(log_std_.data[j]);
          a.a_c[j] = out.a_c.at(0, j) + std * rng.normal();
        }
        a.a_d = sample_categorical(out.pi_d, 0, rng);
      } else {
        for (int j = 0; j < act_dim_; ++j) a.a_c[j] = out.a_c.at(0, j);
        a.a_d = argmax_row(out.pi_d, 0);
      }
    } else {
      for (int j = 0; j < act_dim_; ++j) {
        a.a_c[j] = out.a_c.at(0, j);
        if (explore) a.a_c[j] += cfg_.explore_sigma * rng.normal();
      }
      if (explore && rng.uniform() < eps_greedy()) {
        a.a_d = static_cast<int>(rng.uniform_index(n_modes_));
      } else {
        a.a_d = argmax_row(out.pi_d, 0);
      }
    }
    for (int j = 0; j < act_dim_; ++j) a.a_c[j] = std::clamp(a.a_c[j], -v_max_, v_max_);
    return a;
  }

  // Bias-probe value: min over the online critics at (s, a). Quantile critics
  // contribute their atom mean per critic.
  double q_value_min(const std::vector<double>& obs_norm, const HybridAction& a) const {
    Tensor in({1, obs_dim_ + act_dim_});
    for (int i = 0; i < obs_dim_; ++i) in.at(0, i) = obs_norm[i];
    for (int j = 0; j < act_dim_; ++j) in.at(0, obs_dim_ + j) = a.a_c[j];
    if (uses_quantile()) {
      double best = 0.0;
      bool first = true;
      for (const Mlp& critic : quantile_critics_) {
        const Tensor atoms = critic.forward(in);
        double mean = 0.0;
        for (int i = 0; i < cfg_.m_atoms; ++i) mean += atoms.at(0, a.a_d * cfg_.m_atoms + i);
        mean /= cfg_.m_atoms;
        if (first || mean < best) best = mean;
        first = false;
      }
      return best;
    }
    const double v1 = q1_.forward(in).at(0, a.a_d);
    if (single_critic()) return v1;
    const double v2 = q2_.forward(in).at(0, a.a_d);
    return std::min(v1, v2);
  }

  // One environment interaction plus the scheduled updates.
  template <class Env>
  StepMetrics train_step(Env& env, ReplayBuffer& buffer, WelfordState& welford, Rng& rng,
                         double obs_clip = 5.0) {
    if (variant_ == AgentVariant::kPpo) return ppo_train_step(env, welford, rng, obs_clip);

    if (!episode_active_ || env.terminated()) {
      env.reset(rng);
      raw_obs_ = env.raw_observation();
      welford.update(raw_obs_);
      episode_active_ = true;
    }
    const std::vector<double> obs_n = welford.normalize(raw_obs_, obs_clip);

    HybridAction a;
    if (env_steps_ < cfg_.warmup_steps) {
      for (int j = 0; j < act_dim_; ++j) a.a_c[j] = rng.uniform(-v_max_, v_max_);
      a.a_d = static_cast<int>(rng.uniform_index(n_modes_));
    } else {
      a = act(obs_n, /*explore=*/true, rng);
    }

    const StepResult res = env.step(a);
    welford.update(res.observation);

    Transition t;
    t.s = raw_obs_;
    t.a_d = a.a_d;
    t.a_c.assign(a.a_c.begin(), a.a_c.end());
    t.r = res.reward;
    t.s_next = res.observation;
    // Time-limit truncation keeps bootstrapping alive.
    t.done = res.terminated && res.reason != TerminationReason::kMaxSteps;
    buffer.push(t);

    raw_obs_ = res.observation;
    ++env_steps_;

    StepMetrics m;
    m.reward = res.reward;
    m.episode_end = res.terminated;
    m.reason = res.reason;
    if (res.terminated) episode_active_ = false;

    if (env_steps_ >= cfg_.warmup_steps && buffer.size() >= cfg_.batch_size) {
      const ReplayBuffer::Batch batch = buffer.sample(cfg_.batch_size, rng);
      m.critic_loss = critic_update(batch, welford, rng, obs_clip);
      m.critic_updated = true;
      ++update_count_;
      if (update_count_ % cfg_.policy_delay == 0) {
        m.actor_loss = actor_update(batch, welford, obs_clip);
        m.actor_updated = true;
        ++actor_update_count_;
        update_targets();
      }
    }
    return m;
  }

  // --- update machinery, exposed for tests ------------------------------

  double critic_update(const ReplayBuffer::Batch& batch, const WelfordState& welford, Rng& rng,
                       double obs_clip = 5.0) {
    const Tensor s = normalize_batch(batch.s, welford, obs_clip);
    const Tensor s_next = normalize_batch(batch.s_next, welford, obs_clip);
    const std::vector<double> y = compute_targets(batch, s_next, rng);
    if (uses_quantile()) return quantile_critic_update(batch, s, y);
    return twin_critic_update(batch, s, y);
  }

  double actor_update(const ReplayBuffer::Batch& batch, const WelfordState& welford,
                      double obs_clip = 5.0) {
    const Tensor s = normalize_batch(batch.s, welford, obs_clip);
    return actor_objective(s, nullptr);
  }

  // Loss and actor-parameter gradients without applying an update.
  double actor_gradients(const Tensor& s, MlpGrads& grads) { return actor_objective(s, &grads); }

  // Bellman targets for a batch (the variant's rule applied to the target
  // networks). Exposed so tests can pin the arithmetic.
  std::vector<double> compute_targets(const ReplayBuffer::Batch& batch, const Tensor& s_next,
                                      Rng& rng) {
    const int n = s_next.rows();
    if (uses_quantile() || variant_ == AgentVariant::kSac)
      return stochastic_targets(batch, s_next, rng);

    const PolicyOutput pi_next = actor_target_.forward(s_next);
    Tensor a_next = pi_next.a_c;
    if (variant_ != AgentVariant::kDdpg) smooth_actions(a_next, rng);

    if (variant_ == AgentVariant::kHyDatd3 || variant_ == AgentVariant::kHyDarc) {
      Tensor a_next2 = pi_next.a_c;
      smooth_actions(a_next2, rng);
      const Tensor in_a = concat_cols(s_next, a_next);
      const Tensor in_b = concat_cols(s_next, a_next2);
      const Tensor q1a = q1_target_.forward(in_a), q2a = q2_target_.forward(in_a);
      const Tensor q1b = q1_target_.forward(in_b), q2b = q2_target_.forward(in_b);
      if (variant_ == AgentVariant::kHyDatd3)
        return datd3_target(batch.r, batch.done, cfg_.gamma, q1a, q2a, q1b, q2b, pi_next.pi_d);
      return darc_target(batch.r, batch.done, cfg_.gamma, q1a, q2a, q1b, q2b, pi_next.pi_d,
                         cfg_.lambda_darc);
    }

    const Tensor in = concat_cols(s_next, a_next);
    const Tensor q1 = q1_target_.forward(in);
    if (variant_ == AgentVariant::kDdpg)
      return td3_target_greedy(batch.r, batch.done, cfg_.gamma, q1, q1, pi_next.pi_d);
    const Tensor q2 = q2_target_.forward(in);
    if (variant_ == AgentVariant::kTd3Greedy)
      return td3_target_greedy(batch.r, batch.done, cfg_.gamma, q1, q2, pi_next.pi_d);
    return weighted_clipped_target(batch.r, batch.done, cfg_.gamma, q1, q2, pi_next.pi_d,
                                   cfg_.weighting);
  }

  void update_targets() {
    if (uses_quantile()) {
      for (std::size_t i = 0; i < quantile_critics_.size(); ++i)
        polyak_update(quantile_targets_[i].mutable_params(), quantile_critics_[i].params(),
                      cfg_.tau_polyak);
    } else {
      polyak_update(q1_target_.mutable_params(), q1_.params(), cfg_.tau_polyak);
      if (!single_critic())
        polyak_update(q2_target_.mutable_params(), q2_.params(), cfg_.tau_polyak);
    }
    if (has_target_actor())
      polyak_update(actor_target_.net().mutable_params(), actor_.net().params(),
                    cfg_.tau_polyak);
  }

  // Actor loss value only (no update); used by gradient-check tests.
  double actor_loss_value(const Tensor& s) {
    MlpGrads scratch;
    return actor_objective(s, &scratch);
  }

  HybridPolicy& actor() { return actor_; }
  const HybridPolicy& actor() const { return actor_; }
  Mlp& critic1() { return q1_; }
  Mlp& critic2() { return q2_; }
  std::vector<Mlp>& quantile_critics() { return quantile_critics_; }

  void save(std::ostream& os) const {
    actor_.net().save(os);
    if (has_target_actor()) actor_target_.net().save(os);
    if (uses_quantile()) {
      for (const auto& c : quantile_critics_) c.save(os);
      for (const auto& c : quantile_targets_) c.save(os);
      for (const auto& o : quantile_opts_) o.save(os);
    } else {
      q1_.save(os);
      q2_.save(os);
      q1_target_.save(os);
      q2_target_.save(os);
      q1_opt_.save(os);
      q2_opt_.save(os);
    }
    actor_opt_.save(os);
    if (variant_ == AgentVariant::kPpo) {
      value_net_.save(os);
      value_opt_.save(os);
      os.write(reinterpret_cast<const char*>(log_std_.data.data()),
               static_cast<std::streamsize>(log_std_.data.size() * sizeof(double)));
      log_std_opt_.save(os);
      // The in-flight rollout spans episode (and checkpoint) boundaries.
      const std::uint32_t n_samples = static_cast<std::uint32_t>(rollout_.size());
      os.write(reinterpret_cast<const char*>(&n_samples), sizeof(n_samples));
      for (const PpoSample& p : rollout_) {
        const std::uint32_t obs_len = static_cast<std::uint32_t>(p.obs_n.size());
        os.write(reinterpret_cast<const char*>(&obs_len), sizeof(obs_len));
        os.write(reinterpret_cast<const char*>(p.obs_n.data()),
                 static_cast<std::streamsize>(p.obs_n.size() * sizeof(double)));
        const std::int32_t a_d = p.action.a_d;
        os.write(reinterpret_cast<const char*>(&a_d), sizeof(a_d));
        os.write(reinterpret_cast<const char*>(p.action.a_c.data()), 2 * sizeof(double));
        const double scalars[4] = {p.logp, p.value, p.reward, 0.0};
        os.write(reinterpret_cast<const char*>(scalars), sizeof(scalars));
        const std::uint8_t flags[2] = {p.terminal ? std::uint8_t{1} : std::uint8_t{0},
                                       p.boundary ? std::uint8_t{1} : std::uint8_t{0}};
        os.write(reinterpret_cast<const char*>(flags), sizeof(flags));
      }
    }
    const std::int64_t counters[4] = {env_steps_, update_count_, actor_update_count_,
                                      episode_active_ ? 1 : 0};
    os.write(reinterpret_cast<const char*>(counters), sizeof(counters));
    const std::uint32_t obs_len = static_cast<std::uint32_t>(raw_obs_.size());
    os.write(reinterpret_cast<const char*>(&obs_len), sizeof(obs_len));
    os.write(reinterpret_cast<const char*>(raw_obs_.data()),
             static_cast<std::streamsize>(raw_obs_.size() * sizeof(double)));
  }

  void load(std::istream& is) {
    actor_.net().load(is);
    if (has_target_actor()) actor_target_.net().load(is);
    if (uses_quantile()) {
      for (auto& c : quantile_critics_) c.load(is);
      for (auto& c : quantile_targets_) c.load(is);
      for (auto& o : quantile_opts_) o.load(is);
    } else {
      q1_.load(is);
      q2_.load(is);
      q1_target_.load(is);
      q2_target_.load(is);
      q1_opt_.load(is);
      q2_opt_.load(is);
    }
    actor_opt_.load(is);
    if (variant_ == AgentVariant::kPpo) {
      value_net_.load(is);
      value_opt_.load(is);
      is.read(reinterpret_cast<char*>(log_std_.data.data()),
              static_cast<std::streamsize>(log_std_.data.size() * sizeof(double)));
      log_std_opt_.load(is);
      std::uint32_t n_samples = 0;
      is.read(reinterpret_cast<char*>(&n_samples), sizeof(n_samples));
      rollout_.clear();
      rollout_.resize(n_samples);
      for (PpoSample& p : rollout_) {
        std::uint32_t obs_len = 0;
        is.read(reinterpret_cast<char*>(&obs_len), sizeof(obs_len));
        p.obs_n.resize(obs_len);
        is.read(reinterpret_cast<char*>(p.obs_n.data()),
                static_cast<std::streamsize>(p.obs_n.size() * sizeof(double)));
        std::int32_t a_d = 0;
        is.read(reinterpret_cast<char*>(&a_d), sizeof(a_d));
        p.action.a_d = a_d;
        is.read(reinterpret_cast<char*>(p.action.a_c.data()), 2 * sizeof(double));
        double scalars[4];
        is.read(reinterpret_cast<char*>(scalars), sizeof(scalars));
        p.logp = scalars[0];
        p.value = scalars[1];
        p.reward = scalars[2];
        std::uint8_t flags[2];
        is.read(reinterpret_cast<char*>(flags), sizeof(flags));
        p.terminal = flags[0] != 0;
        p.boundary = flags[1] != 0;
      }
    }
    std::int64_t counters[4];
    is.read(reinterpret_cast<char*>(counters), sizeof(counters));
    env_steps_ = counters[0];
    update_count_ = counters[1];
    actor_update_count_ = counters[2];
    episode_active_ = counters[3] != 0;
    std::uint32_t obs_len = 0;
    is.read(reinterpret_cast<char*>(&obs_len), sizeof(obs_len));
    raw_obs_.resize(obs_len);
    is.read(reinterpret_cast<char*>(raw_obs_.data()),
            static_cast<std::streamsize>(raw_obs_.size() * sizeof(double)));
    if (!is) throw std::runtime_error("HybridAgent::load: truncated stream");
  }

 private:
  // --- shared helpers ----------------------------------------------------

  static int argmax_row(const Tensor& t, int row) {
    int best = 0;
    for (int j = 1; j < t.cols(); ++j)
      if (t.at(row, j) > t.at(row, best)) best = j;
    return best;
  }

  static int sample_categorical(const Tensor& probs, int row, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int j = 0; j < probs.cols(); ++j) {
      acc += probs.at(row, j);
      if (u < acc) return j;
    }
    return probs.cols() - 1;
  }

  PolicyOutput policy_forward_single(const HybridPolicy& policy,
                                     const std::vector<double>& obs) const {
    Tensor in({1, obs_dim_});
    std::copy(obs.begin(), obs.end(), in.data.begin());
    return policy.forward(in);
  }

  static Tensor normalize_batch(const Tensor& raw, const WelfordState& welford, double clip) {
    Tensor out({raw.rows(), raw.cols()});
    std::vector<double> row(raw.cols());
    for (int r = 0; r < raw.rows(); ++r) {
      for (int c = 0; c < raw.cols(); ++c) row[c] = raw.at(r, c);
      const std::vector<double> n = welford.normalize(row, clip);
      for (int c = 0; c < raw.cols(); ++c) out.at(r, c) = n[c];
    }
    return out;
  }

  // Target policy smoothing: clipped Gaussian noise, then action bounds.
  void smooth_actions(Tensor& a, Rng& rng) const {
    const double clip = cfg_.smoothing_clip_value();
    for (double& v : a.data) {
      const double noise = std::clamp(cfg_.smoothing_sigma * rng.normal(), -clip, clip);
      v = std::clamp(v + noise, -v_max_, v_max_);
    }
  }

  // --- critic updates ----------------------------------------------------

  double twin_critic_update(const ReplayBuffer::Batch& batch, const Tensor& s,
                            const std::vector<double>& y) {
    const int n = s.rows();
    const Tensor in = concat_cols(s, batch.a_c);
    double loss = 0.0;
    auto update_one = [&](Mlp& net, AdamState& opt) {
      MlpTrace trace;
      const Tensor q = net.forward(in, &trace);
      Tensor dq({n, n_modes_});
      for (int row = 0; row < n; ++row) {
        const double err = q.at(row, batch.a_d[row]) - y[row];
        loss += err * err / n;
        dq.at(row, batch.a_d[row]) = 2.0 * err / n;
      }
      MlpGrads g = net.backward(trace, dq);
      adam_step(opt, net.mutable_params(), g.params);
    };
    update_one(q1_, q1_opt_);
    if (!single_critic()) update_one(q2_, q2_opt_);
    if (!std::isfinite(loss))
      throw std::runtime_error("critic_update: non-finite loss (diverged)");
    return loss;
  }

  double quantile_critic_update(const ReplayBuffer::Batch& batch, const Tensor& s,
                                const std::vector<double>& y) {
    const int n = s.rows();
    const int m = cfg_.m_atoms;
    const Tensor in = concat_cols(s, batch.a_c);
    double loss = 0.0;
    for (std::size_t c = 0; c < quantile_critics_.size(); ++c) {
      MlpTrace trace;
      const Tensor atoms = quantile_critics_[c].forward(in, &trace);
      Tensor datoms({n, n_modes_ * m});
      const double scale = 1.0 / (n * m * static_cast<double>(quantile_critics_.size()));
      for (int row = 0; row < n; ++row) {
        const int base = batch.a_d[row] * m;
        for (int i = 0; i < m; ++i) {
          const double err = atoms.at(row, base + i) - y[row];
          loss += err * err * scale;
          datoms.at(row, base + i) = 2.0 * err * scale;
        }
      }
      MlpGrads g = quantile_critics_[c].backward(trace, datoms);
      adam_step(quantile_opts_[c], quantile_critics_[c].mutable_params(), g.params);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("critic_update: non-finite loss (diverged)");
    return loss;
  }

  // --- SAC-family targets --------------------------------------------------

  std::vector<double> stochastic_targets(const ReplayBuffer::Batch& batch, const Tensor& s_next,
                                         Rng& rng) {
    const int n = s_next.rows();
    const PolicyOutput pi = actor_.forward(s_next);
    // Sample a'_c (squashed Gaussian) and a'_d per row.
    Tensor a_next({n, act_dim_});
    std::vector<double> logp_c(n, 0.0);
    std::vector<int> a_d_next(n);
    for (int row = 0; row < n; ++row) {
      for (int j = 0; j < act_dim_; ++j) {
        const double mean_u = pi.raw.at(row, j);
        const double std = std::exp(pi.log_std.at(row, j));
        const double u = mean_u + std * rng.normal();
        const double t = std::tanh(u);
        a_next.at(row, j) = v_max_ * t;
        const double z = (u - mean_u) / std;
        logp_c[row] += -0.5 * z * z - pi.log_std.at(row, j) - 0.5 * std::log(2.0 * M_PI) -
                       std::log(v_max_ * (1.0 - t * t) + 1e-6);
      }
      a_d_next[row] = sample_categorical(pi.pi_d, row, rng);
    }

    std::vector<double> entropy_bonus(n);
    for (int row = 0; row < n; ++row) {
      const double logp_d = std::log(std::max(pi.pi_d.at(row, a_d_next[row]), 1e-12));
      entropy_bonus[row] = -cfg_.alpha_c * logp_c[row] - cfg_.alpha_d * logp_d;
    }

    const Tensor in = concat_cols(s_next, a_next);
    if (uses_quantile()) {
      // Pool atoms of all target critics at the sampled next mode.
      const int m = cfg_.m_atoms;
      const int pool = static_cast<int>(quantile_targets_.size()) * m;
      Tensor atoms({n, pool});
      for (std::size_t c = 0; c < quantile_targets_.size(); ++c) {
        const Tensor out = quantile_targets_[c].forward(in);
        for (int row = 0; row < n; ++row) {
          const int base = a_d_next[row] * m;
          for (int i = 0; i < m; ++i)
            atoms.at(row, static_cast<int>(c) * m + i) = out.at(row, base + i);
        }
      }
      const int kept = variant_ == AgentVariant::kHyAcc
                           ? cfg_.k_atoms * cfg_.n_critics - cfg_.beta_acc
                           : cfg_.k_atoms * cfg_.n_critics;
      return quantile_truncation_target(batch.r, batch.done, cfg_.gamma, atoms, kept,
                                        entropy_bonus);
    }

    const Tensor q1 = q1_target_.forward(in);
    const Tensor q2 = q2_target_.forward(in);
    std::vector<double> y(n);
    for (int row = 0; row < n; ++row) {
      const double q = std::min(q1.at(row, a_d_next[row]), q2.at(row, a_d_next[row]));
      y[row] = batch.r[row] +
               cfg_.gamma * (batch.done[row] ? 0.0 : q + entropy_bonus[row]);
    }
    return y;
  }

  // --- actor updates -------------------------------------------------------

  // Dispatch to the variant's objective. grads_out == nullptr applies an
  // optimizer step; otherwise gradients are returned untouched.
  double actor_objective(const Tensor& s, MlpGrads* grads_out) {
    switch (variant_) {
      case AgentVariant::kHybridTd3:
      case AgentVariant::kHyDarc:
        return actor_update_weighted_min(s, grads_out);
      case AgentVariant::kTd3Greedy:
      case AgentVariant::kDdpg:
        return actor_update_greedy(s, grads_out);
      case AgentVariant::kHyDatd3:
        return actor_update_datd3(s, grads_out);
      case AgentVariant::kSac:
      case AgentVariant::kHyTqc:
      case AgentVariant::kHyAcc:
        return actor_update_stochastic(s, grads_out);
      case AgentVariant::kPpo:
        throw std::logic_error("actor_objective: PPO updates run inside train_step");
    }
    throw std::logic_error("actor_objective: unknown variant");
  }

  // Per-mode clipped-min critic values and the gradient of their pi-weighted
  // sum w.r.t. a_c. Shared by the weighted-min and DATD3 actors.
  struct ModeValues {
    Tensor values;  // batch x K, min_i Q_i per mode
    Tensor q1, q2;
  };

  ModeValues mode_min_values(const Tensor& in, MlpTrace& tr1, MlpTrace& tr2) {
    ModeValues mv;
    mv.q1 = q1_.forward(in, &tr1);
    mv.q2 = single_critic() ? mv.q1 : q2_.forward(in, &tr2);
    mv.values = Tensor({in.rows(), n_modes_});
    for (int row = 0; row < in.rows(); ++row)
      for (int k = 0; k < n_modes_; ++k)
        mv.values.at(row, k) = std::min(mv.q1.at(row, k), mv.q2.at(row, k));
    return mv;
  }

  // L = -(w) * sum_k pi_k min_i Q_i(s, a_c, k), w = 1/K (literal) or 1.
  double actor_update_weighted_min(const Tensor& s, MlpGrads* grads_out) {
    const int n = s.rows();
    const double w =
        (cfg_.weighting == TargetWeighting::kAsWritten ? 1.0 / n_modes_ : 1.0) / n;

    MlpTrace actor_trace;
    PolicyOutput out;
    out.raw = actor_.net().forward(s, &actor_trace);
    out = heads_from_raw(out.raw);

    const Tensor in = concat_cols(s, out.a_c);
    MlpTrace tr1, tr2;
    const ModeValues mv = mode_min_values(in, tr1, tr2);

    double loss = 0.0;
    Tensor dq1({n, n_modes_}), dq2({n, n_modes_});
    PolicyHeadGrads hg;
    hg.d_a_c = Tensor({n, act_dim_});
    hg.d_pi = Tensor({n, n_modes_});
    for (int row = 0; row < n; ++row) {
      for (int k = 0; k < n_modes_; ++k) {
        const double pi = out.pi_d.at(row, k);
        const double m = mv.values.at(row, k);
        loss -= w * pi * m;
        hg.d_pi.at(row, k) = -w * m;
        Tensor& dq = mv.q1.at(row, k) <= mv.q2.at(row, k) ? dq1 : dq2;
        dq.at(row, k) = -w * pi;
      }
    }
    // Pull dL/da_c out of the critics.
    const MlpGrads g1 = q1_.backward(tr1, dq1);
    for (int row = 0; row < n; ++row)
      for (int j = 0; j < act_dim_; ++j)
        hg.d_a_c.at(row, j) += g1.input.at(row, obs_dim_ + j);
    if (!single_critic()) {
      const MlpGrads g2 = q2_.backward(tr2, dq2);
      for (int row = 0; row < n; ++row)
        for (int j = 0; j < act_dim_; ++j)
          hg.d_a_c.at(row, j) += g2.input.at(row, obs_dim_ + j);
    }

    const Tensor d_raw = actor_.head_backward(out, hg);
    MlpGrads ag = actor_.net().backward(actor_trace, d_raw);
    if (grads_out) {
      *grads_out = std::move(ag);
      return loss;
    }
    adam_step(actor_opt_, actor_.net().mutable_params(), ag.params);
    return loss;
  }

  // L = -max_k Q_1(s, mu(s), k): continuous head trained against the greedy
  // mode of the first critic; the discrete head receives no gradient (the
  // greedy baselines leave it at its initialization).
  double actor_update_greedy(const Tensor& s, MlpGrads* grads_out) {
    const int n = s.rows();
    MlpTrace actor_trace;
    PolicyOutput out;
    out.raw = actor_.net().forward(s, &actor_trace);
    out = heads_from_raw(out.raw);

    const Tensor in = concat_cols(s, out.a_c);
    MlpTrace tr1;
    const Tensor q1 = q1_.forward(in, &tr1);

    double loss = 0.0;
    Tensor dq1({n, n_modes_});
    for (int row = 0; row < n; ++row) {
      int best = 0;
      for (int k = 1; k < n_modes_; ++k)
        if (q1.at(row, k) > q1.at(row, best)) best = k;
      loss -= q1.at(row, best) / n;
      dq1.at(row, best) = -1.0 / n;
    }
    const MlpGrads g1 = q1_.backward(tr1, dq1);
    PolicyHeadGrads hg;
    hg.d_a_c = Tensor({n, act_dim_});
    for (int row = 0; row < n; ++row)
      for (int j = 0; j < act_dim_; ++j)
        hg.d_a_c.at(row, j) = g1.input.at(row, obs_dim_ + j);
    const Tensor d_raw = actor_.head_backward(out, hg);
    MlpGrads ag = actor_.net().backward(actor_trace, d_raw);
    if (grads_out) {
      *grads_out = std::move(ag);
      return loss;
    }
    adam_step(actor_opt_, actor_.net().mutable_params(), ag.params);
    return loss;
  }

  // DATD3 alternating actor: L^(j) = -(1/K) sum_k p_d(k) Q_j(s, a_c, k),
  // switching critics between actor updates.
  double actor_update_datd3(const Tensor& s, MlpGrads* grads_out) {
    const bool use_q1 = actor_update_count_ % 2 == 0;
    Mlp& critic = use_q1 ? q1_ : q2_;
    const int n = s.rows();
    const double w = 1.0 / (n_modes_ * static_cast<double>(n));

    MlpTrace actor_trace;
    PolicyOutput out;
    out.raw = actor_.net().forward(s, &actor_trace);
    out = heads_from_raw(out.raw);

    const Tensor in = concat_cols(s, out.a_c);
    MlpTrace tr;
    const Tensor q = critic.forward(in, &tr);

    double loss = 0.0;
    Tensor dq({n, n_modes_});
    PolicyHeadGrads hg;
    hg.d_a_c = Tensor({n, act_dim_});
    hg.d_pi = Tensor({n, n_modes_});
    for (int row = 0; row < n; ++row) {
      for (int k = 0; k < n_modes_; ++k) {
        const double pi = out.pi_d.at(row, k);
        loss -= w * pi * q.at(row, k);
        hg.d_pi.at(row, k) = -w * q.at(row, k);
        dq.at(row, k) = -w * pi;
      }
    }
    const MlpGrads g = critic.backward(tr, dq);
    for (int row = 0; row < n; ++row)
      for (int j = 0; j < act_dim_; ++j)
        hg.d_a_c.at(row, j) = g.input.at(row, obs_dim_ + j);
    const Tensor d_raw = actor_.head_backward(out, hg);
    MlpGrads ag = actor_.net().backward(actor_trace, d_raw);
    if (grads_out) {
      *grads_out = std::move(ag);
      return loss;
    }
    adam_step(actor_opt_, actor_.net().mutable_params(), ag.params);
    return loss;
  }

  // SAC-family actor: reparameterized squashed-Gaussian continuous head plus
  // exact discrete expectation:
  //   L = E[ alpha_c log p_c(a|s) + sum_k pi_k (alpha_d log pi_k - V_k(a)) ]
  // where V_k is the clipped-min critic (SAC) or the atom mean (TQC/ACC).
  // Noise is drawn from a fixed per-call seed so the loss is deterministic
  // for gradient checking. If grads_out is set, no update is applied.
  double actor_update_stochastic(const Tensor& s, MlpGrads* grads_out) {
    const int n = s.rows();
    Rng noise = derive_rng(actor_noise_seed_, "sac_actor_noise", actor_update_count_);

    MlpTrace actor_trace;
    PolicyOutput out;
    out.raw = actor_.net().forward(s, &actor_trace);
    out = heads_from_raw(out.raw);

    // Reparameterized sample.
    Tensor xi({n, act_dim_}), u({n, act_dim_}), a({n, act_dim_});
    std::vector<double> logp_c(n, 0.0);
    for (int row = 0; row < n; ++row) {
      for (int j = 0; j < act_dim_; ++j) {
        const double mean_u = out.raw.at(row, j);  // pre-tanh mean
        const double std = std::exp(out.log_std.at(row, j));
        xi.at(row, j) = noise.normal();
        u.at(row, j) = mean_u + std * xi.at(row, j);
        const double t = std::tanh(u.at(row, j));
        a.at(row, j) = v_max_ * t;
        logp_c[row] += -0.5 * xi.at(row, j) * xi.at(row, j) - out.log_std.at(row, j) -
                       0.5 * std::log(2.0 * M_PI) - std::log(v_max_ * (1.0 - t * t) + 1e-6);
      }
    }

    const Tensor in = concat_cols(s, a);

    // Per-mode values and their input gradients.
    Tensor values({n, n_modes_});
    Tensor d_a_from_q({n, act_dim_});  // dL_Q/da accumulated
    double loss = 0.0;

    if (uses_quantile()) {
      const int m = cfg_.m_atoms;
      const double inv = 1.0 / (static_cast<double>(quantile_critics_.size()) * m);
      std::vector<MlpTrace> traces(quantile_critics_.size());
      std::vector<Tensor> outs;
      outs.reserve(quantile_critics_.size());
      for (std::size_t c = 0; c < quantile_critics_.size(); ++c)
        outs.push_back(quantile_critics_[c].forward(in, &traces[c]));
      for (int row = 0; row < n; ++row)
        for (int k = 0; k < n_modes_; ++k) {
          double acc = 0.0;
          for (std::size_t c = 0; c < outs.size(); ++c)
            for (int i = 0; i < m; ++i) acc += outs[c].at(row, k * m + i);
          values.at(row, k) = acc * inv;
        }
      // dL/datom = -pi_k * inv / n on every atom of mode k.
      for (std::size_t c = 0; c < outs.size(); ++c) {
        Tensor datoms({n, n_modes_ * m});
        for (int row = 0; row < n; ++row)
          for (int k = 0; k < n_modes_; ++k) {
            const double coef = -out.pi_d.at(row, k) * inv / n;
            for (int i = 0; i < m; ++i) datoms.at(row, k * m + i) = coef;
          }
        const MlpGrads g = quantile_critics_[c].backward(traces[c], datoms);
        for (int row = 0; row < n; ++row)
          for (int j = 0; j < act_dim_; ++j)
            d_a_from_q.at(row, j) += g.input.at(row, obs_dim_ + j);
      }
    } else {
      MlpTrace tr1, tr2;
      const ModeValues mv = mode_min_values(in, tr1, tr2);
      values = mv.values;
      Tensor dq1({n, n_modes_}), dq2({n, n_modes_});
      for (int row = 0; row < n; ++row)
        for (int k = 0; k < n_modes_; ++k) {
          Tensor& dq = mv.q1.at(row, k) <= mv.q2.at(row, k) ? dq1 : dq2;
          dq.at(row, k) = -out.pi_d.at(row, k) / n;
        }
      const MlpGrads g1 = q1_.backward(tr1, dq1);
      const MlpGrads g2 = q2_.backward(tr2, dq2);
      for (int row = 0; row < n; ++row)
        for (int j = 0; j < act_dim_; ++j)
          d_a_from_q.at(row, j) =
              g1.input.at(row, obs_dim_ + j) + g2.input.at(row, obs_dim_ + j);
    }

    // Assemble loss and gradients onto the raw actor output.
    Tensor d_raw({n, actor_.raw_dim()});
    for (int row = 0; row < n; ++row) {
      double discrete_part = 0.0;
      std::vector<double> coef(n_modes_);
      for (int k = 0; k < n_modes_; ++k) {
        const double pi = out.pi_d.at(row, k);
        const double logpi = std::log(std::max(pi, 1e-12));
        discrete_part += pi * (cfg_.alpha_d * logpi - values.at(row, k));
        coef[k] = cfg_.alpha_d * (logpi + 1.0) - values.at(row, k);
      }
      loss += (cfg_.alpha_c * logp_c[row] + discrete_part) / n;

      // Softmax backward for the logits slice with coefficients coef/n.
      double dot = 0.0;
      for (int k = 0; k < n_modes_; ++k) dot += coef[k] * out.pi_d.at(row, k);
      for (int k = 0; k < n_modes_; ++k)
        d_raw.at(row, act_dim_ + k) = out.pi_d.at(row, k) * (coef[k] - dot) / n;

      for (int j = 0; j < act_dim_; ++j) {
        const double t = std::tanh(u.at(row, j));
        const double squash = v_max_ * (1.0 - t * t);
        const double g_logp_du = 2.0 * v_max_ * t * (1.0 - t * t) / (squash + 1e-6);
        const double std = std::exp(out.log_std.at(row, j));
        const double d_mean =
            cfg_.alpha_c * g_logp_du / n + d_a_from_q.at(row, j) * squash;
        const double d_logstd =
            cfg_.alpha_c * (-1.0 + g_logp_du * std * xi.at(row, j)) / n +
            d_a_from_q.at(row, j) * squash * std * xi.at(row, j);
        d_raw.at(row, j) = d_mean;
        const double raw_ls = out.raw.at(row, act_dim_ + n_modes_ + j);
        const bool clamped =
            raw_ls < HybridPolicy::kLogStdMin || raw_ls > HybridPolicy::kLogStdMax;
        d_raw.at(row, act_dim_ + n_modes_ + j) = clamped ? 0.0 : d_logstd;
      }
    }

    MlpGrads ag = actor_.net().backward(actor_trace, d_raw);
    if (grads_out) {
      *grads_out = std::move(ag);
      return loss;
    }
    adam_step(actor_opt_, actor_.net().mutable_params(), ag.params);
    return loss;
  }

  PolicyOutput heads_from_raw(const Tensor& raw) const {
    // Re-derive head outputs from a raw trunk output (avoids recomputing the
    // trunk when a trace is also needed).
    PolicyOutput out;
    out.raw = raw;
    const int batch = raw.rows();
    out.a_c = Tensor({batch, act_dim_});
    out.pi_d = Tensor({batch, n_modes_});
    if (actor_.stochastic()) out.log_std = Tensor({batch, act_dim_});
    for (int b = 0; b < batch; ++b) {
      for (int j = 0; j < act_dim_; ++j) out.a_c.at(b, j) = v_max_ * std::tanh(raw.at(b, j));
      double mx = raw.at(b, act_dim_);
      for (int j = 1; j < n_modes_; ++j) mx = std::max(mx, raw.at(b, act_dim_ + j));
      double sum = 0.0;
      for (int j = 0; j < n_modes_; ++j) {
        const double e = std::exp(raw.at(b, act_dim_ + j) - mx);
        out.pi_d.at(b, j) = e;
        sum += e;
      }
      for (int j = 0; j < n_modes_; ++j) out.pi_d.at(b, j) /= sum;
      if (actor_.stochastic())
        for (int j = 0; j < act_dim_; ++j)
          out.log_std.at(b, j) = std::clamp(raw.at(b, act_dim_ + n_modes_ + j),
                                            HybridPolicy::kLogStdMin, HybridPolicy::kLogStdMax);
    }
    return out;
  }

  // --- PPO -----------------------------------------------------------------

  struct PpoSample {
    std::vector<double> obs_n;
    HybridAction action;  // pre-clamp continuous sample
    double logp = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool terminal = false;   // true terminal (no bootstrap)
    bool boundary = false;   // episode boundary of any kind
  };

  template <class Env>
  StepMetrics ppo_train_step(Env& env, WelfordState& welford, Rng& rng, double obs_clip) {
    if (!episode_active_ || env.terminated()) {
      env.reset(rng);
      raw_obs_ = env.raw_observation();
      welford.update(raw_obs_);
      episode_active_ = true;
    }
    const std::vector<double> obs_n = welford.normalize(raw_obs_, obs_clip);

    // Sample the factorized policy and record the pre-clamp action.
    const PolicyOutput out = policy_forward_single(actor_, obs_n);
    HybridAction sampled;
    double logp = 0.0;
    for (int j = 0; j < act_dim_; ++j) {
      const double std = std::exp(log_std_.data[j]);
      const double mean = out.a_c.at(0, j);
      sampled.a_c[j] = mean + std * rng.normal();
      const double z = (sampled.a_c[j] - mean) / std;
      logp += -0.5 * z * z - log_std_.data[j] - 0.5 * std::log(2.0 * M_PI);
    }
    sampled.a_d = sample_categorical(out.pi_d, 0, rng);
    logp += std::log(std::max(out.pi_d.at(0, sampled.a_d), 1e-12));

    Tensor vin({1, obs_dim_});
    std::copy(obs_n.begin(), obs_n.end(), vin.data.begin());
    const double value = value_net_.forward(vin).at(0, 0);

    HybridAction applied = sampled;
    for (int j = 0; j < act_dim_; ++j) applied.a_c[j] = std::clamp(applied.a_c[j], -v_max_, v_max_);
    const StepResult res = env.step(applied);
    welford.update(res.observation);

    PpoSample ps;
    ps.obs_n = obs_n;
    ps.action = sampled;
    ps.logp = logp;
    ps.value = value;
    ps.reward = res.reward;
    ps.terminal = res.terminated && res.reason != TerminationReason::kMaxSteps;
    ps.boundary = res.terminated;
    rollout_.push_back(std::move(ps));

    raw_obs_ = res.observation;
    ++env_steps_;
    if (res.terminated) episode_active_ = false;

    StepMetrics m;
    m.reward = res.reward;
    m.episode_end = res.terminated;
    m.reason = res.reason;

    if (static_cast<int>(rollout_.size()) >= cfg_.ppo_rollout) {
      double tail_value = 0.0;
      if (!res.terminated) {
        const std::vector<double> next_n = welford.normalize(raw_obs_, obs_clip);
        Tensor nin({1, obs_dim_});
        std::copy(next_n.begin(), next_n.end(), nin.data.begin());
        tail_value = value_net_.forward(nin).at(0, 0);
      }
      const auto losses = ppo_update(tail_value, rng);
      rollout_.clear();
      m.critic_updated = true;
      m.critic_loss = losses.second;
      m.actor_updated = true;
      m.actor_loss = losses.first;
      ++update_count_;
      ++actor_update_count_;
    }
    return m;
  }

  std::pair<double, double> ppo_update(double tail_value, Rng& rng) {
    const int n = static_cast<int>(rollout_.size());
    // GAE advantages.
    std::vector<double> adv(n), ret(n);
    // Episode boundaries cut both the bootstrap and the GAE recursion; the
    // rollout tail (mid-episode) bootstraps tail_value. Time-limit cuts are
    // treated as terminal here, the usual fixed-rollout simplification.
    double gae = 0.0;
    double next_value = tail_value;
    for (int t = n - 1; t >= 0; --t) {
      const PpoSample& s = rollout_[t];
      const double nv = s.boundary ? 0.0 : next_value;
      const double delta = s.reward + cfg_.gamma * nv - s.value;
      gae = delta + (s.boundary ? 0.0 : cfg_.gamma * cfg_.gae_lambda * gae);
      adv[t] = gae;
      ret[t] = adv[t] + s.value;
      next_value = s.value;
    }
    double mean = 0.0, var = 0.0;
    for (double a : adv) mean += a / n;
    for (double a : adv) var += (a - mean) * (a - mean) / n;
    const double stdev = std::sqrt(std::max(var, 1e-12));
    std::vector<double> adv_n(n);
    for (int t = 0; t < n; ++t) adv_n[t] = (adv[t] - mean) / stdev;

    double actor_loss_acc = 0.0, value_loss_acc = 0.0;
    int loss_count = 0;

    for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
      // Deterministic shuffled order.
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(rng.uniform_index(i + 1))]);

      for (int start = 0; start < n; start += cfg_.ppo_minibatch) {
        const int count = std::min(cfg_.ppo_minibatch, n - start);
        Tensor obs({count, obs_dim_});
        for (int i = 0; i < count; ++i)
          std::copy(rollout_[order[start + i]].obs_n.begin(),
                    rollout_[order[start + i]].obs_n.end(),
                    obs.data.begin() + static_cast<std::size_t>(i) * obs_dim_);

        MlpTrace actor_trace;
        PolicyOutput out;
        out.raw = actor_.net().forward(obs, &actor_trace);
        out = heads_from_raw(out.raw);

        MlpTrace value_trace;
        const Tensor v = value_net_.forward(obs, &value_trace);

        Tensor d_raw({count, actor_.raw_dim()});
        Tensor d_logstd({act_dim_});
        Tensor dv({count, 1});
        double a_loss = 0.0, v_loss = 0.0;

        for (int i = 0; i < count; ++i) {
          const PpoSample& s = rollout_[order[start + i]];
          double logp_new = 0.0;
          std::vector<double> z(act_dim_);
          for (int j = 0; j < act_dim_; ++j) {
            const double std = std::exp(log_std_.data[j]);
            z[j] = (s.action.a_c[j] - out.a_c.at(i, j)) / std;
            logp_new += -0.5 * z[j] * z[j] - log_std_.data[j] - 0.5 * std::log(2.0 * M_PI);
          }
          const double pi_ad = std::max(out.pi_d.at(i, s.action.a_d), 1e-12);
          logp_new += std::log(pi_ad);

          const double A = adv_n[order[start + i]];
          const double ratio = std::exp(logp_new - s.logp);
          const double clipped = std::clamp(ratio, 1.0 - cfg_.ppo_clip, 1.0 + cfg_.ppo_clip);
          const bool use_unclipped = ratio * A <= clipped * A;
          a_loss -= std::min(ratio * A, clipped * A) / count;

          // d(-min)/dlogp_new: only the unclipped branch carries gradient.
          const double dlogp = use_unclipped ? -ratio * A / count : 0.0;

          // Continuous slice: dlogp/dmean_j = z_j / std_j; mean = tanh head.
          for (int j = 0; j < act_dim_; ++j) {
            const double std = std::exp(log_std_.data[j]);
            const double dmean = dlogp * z[j] / std;
            const double t = out.a_c.at(i, j) / v_max_;
            d_raw.at(i, j) += dmean * v_max_ * (1.0 - t * t);
            d_logstd.data[j] += dlogp * (z[j] * z[j] - 1.0);
          }
          // Discrete slice: dlogp/dlogit_k = 1{k=a_d} - pi_k.
          for (int k = 0; k < n_modes_; ++k) {
            const double ind = k == s.action.a_d ? 1.0 : 0.0;
            d_raw.at(i, act_dim_ + k) += dlogp * (ind - out.pi_d.at(i, k));
          }

          const double verr = v.at(i, 0) - ret[order[start + i]];
          v_loss += cfg_.ppo_value_coef * verr * verr / count;
          dv.at(i, 0) = cfg_.ppo_value_coef * 2.0 * verr / count;
        }

        MlpGrads ag = actor_.net().backward(actor_trace, d_raw);
        adam_step(actor_opt_, actor_.net().mutable_params(), ag.params);
        std::vector<Tensor> ls_params{log_std_};
        std::vector<Tensor> ls_grads{d_logstd};
        adam_step(log_std_opt_, ls_params, ls_grads);
        log_std_ = ls_params[0];
        for (double& v_ls : log_std_.data) v_ls = std::clamp(v_ls, -3.0, 1.0);

        MlpGrads vg = value_net_.backward(value_trace, dv);
        adam_step(value_opt_, value_net_.mutable_params(), vg.params);

        actor_loss_acc += a_loss;
        value_loss_acc += v_loss;
        ++loss_count;
      }
    }
    if (!std::isfinite(actor_loss_acc) || !std::isfinite(value_loss_acc))
      throw std::runtime_error("ppo_update: non-finite loss (diverged)");
    return {actor_loss_acc / loss_count, value_loss_acc / loss_count};
  }

  AgentVariant variant_;
  AgentConfig cfg_;
  int obs_dim_;
  int act_dim_;
  int n_modes_;
  double v_max_ = 1.0;

  HybridPolicy actor_;
  HybridPolicy actor_target_;
  AdamState actor_opt_;

  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamState q1_opt_, q2_opt_;

  std::vector<Mlp> quantile_critics_, quantile_targets_;
  std::vector<AdamState> quantile_opts_;

  Mlp value_net_;
  AdamState value_opt_;
  Tensor log_std_;
  AdamState log_std_opt_;
  std::vector<PpoSample> rollout_;

  std::vector<double> raw_obs_;
  bool episode_active_ = false;
  std::int64_t env_steps_ = 0;
  std::int64_t update_count_ = 0;
  std::int64_t actor_update_count_ = 0;
  std::uint64_t actor_noise_seed_ = 0x5ac0ffee;
};

}  // namespace hybridq
