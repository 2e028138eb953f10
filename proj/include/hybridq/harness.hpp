#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hybridq/agents.hpp"
#include "hybridq/env.hpp"
#include "hybridq/replay.hpp"
#include "hybridq/rng.hpp"
#include "hybridq/welford.hpp"

// Experiment orchestration: multi-seed training with per-epoch evaluation,
// empirical estimation-bias measurement, incremental persistence with
// crash resume, and cross-seed aggregation.

namespace hybridq {

struct RunConfig {
  std::string task = "reach";
  std::string variant = "hybrid_td3";
  std::vector<int> seeds = {1, 2, 3, 4};
  int episodes = 2000;       // desk-scale default; the full-scale preset is 40000
  int epoch_episodes = 50;   // one epoch = this many training episodes
  int eval_episodes = 5;
  int bias_episodes = 5;
  bool bias_discounted = true;
  double obs_clip = 5.0;
  int buffer_capacity = 100000;
  int n_workers = 1;
  std::uint64_t root_seed = 42;
  bool measure_wall_time = false;  // off by default: keeps CSVs byte-deterministic
  std::string out_dir = ".";
  EnvConfig env;
  AgentConfig agent;

  int epochs() const { return (episodes + epoch_episodes - 1) / epoch_episodes; }

  void validate() const {
    if (seeds.empty()) throw std::invalid_argument("RunConfig: need at least one seed");
    for (std::size_t i = 0; i < seeds.size(); ++i)
      for (std::size_t j = i + 1; j < seeds.size(); ++j)
        if (seeds[i] == seeds[j]) throw std::invalid_argument("RunConfig: seeds must be distinct");
    if (episodes < 1 || epoch_episodes < 1 || eval_episodes < 1 || bias_episodes < 1)
      throw std::invalid_argument("RunConfig: counts must be positive");
    if (env.max_steps < 1) throw std::invalid_argument("RunConfig: max_steps must be positive");
  }
};

struct EpochRow {
  int epoch = 0;
  int seed = 0;
  double eval_return = 0.0;
  double est_bias = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double wall_time = 0.0;
};

struct RunLog {
  std::string variant;
  int seed = 0;
  bool failed = false;        // NaN divergence or other per-seed failure
  std::string failure_reason;
  std::vector<EpochRow> rows;
};

struct BiasStats {
  double mean = 0.0;
  double stdev = 0.0;
  std::int64_t count = 0;
};

namespace harness_detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string runlog_path(const RunConfig& cfg, int seed) {
  return cfg.out_dir + "/runlog_" + cfg.variant + "_" + std::to_string(seed) + ".csv";
}

inline std::string checkpoint_path(const RunConfig& cfg, int seed) {
  return cfg.out_dir + "/checkpoint_" + cfg.variant + "_" + std::to_string(seed) + ".bin";
}

inline void write_runlog_csv(const std::string& path, const std::vector<EpochRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "epoch,seed,eval_return,est_bias,critic_loss,actor_loss,wall_time\n";
  for (const EpochRow& r : rows) {
    os << r.epoch << ',' << r.seed << ',' << format_double(r.eval_return) << ','
       << format_double(r.est_bias) << ',' << format_double(r.critic_loss) << ','
       << format_double(r.actor_loss) << ',' << format_double(r.wall_time) << '\n';
  }
}

inline std::vector<EpochRow> read_runlog_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<EpochRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EpochRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ls >> r.epoch >> r.seed >> r.eval_return >> r.est_bias >> r.critic_loss >> r.actor_loss >>
        r.wall_time;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace harness_detail

// Undiscounted return of the exploit policy, averaged over episodes. The
// normalizer is read-only and nothing is written to any buffer.
template <class Env>
inline double evaluate_return(Env env, const HybridAgent& agent, const WelfordState& welford,
                              int episodes, Rng& rng, double obs_clip) {
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    std::vector<double> obs = env.raw_observation();
    while (!env.terminated()) {
      const HybridAction a = agent.act(welford.normalize(obs, obs_clip), false, rng);
      const StepResult res = env.step(a);
      total += res.reward;
      obs = res.observation;
    }
  }
  return total / episodes;
}

// Baseline floor: uniform random actions.
template <class Env>
inline double random_policy_return(Env env, int episodes, Rng& rng, double v_max = 1.0) {
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    while (!env.terminated()) {
      HybridAction a;
      a.a_d = static_cast<int>(rng.uniform_index(2));
      a.a_c = {rng.uniform(-v_max, v_max), rng.uniform(-v_max, v_max)};
      total += env.step(a).reward;
    }
  }
  return total / episodes;
}

// Estimation-bias probe over test episodes: for every visited (s_t, a_t),
//   bias_t = G_t - Q(s_t, a_t),  G_t = sum_{u >= t} gamma^{u-t} r_u
// with gamma the training discount (discounted = true) or 1. Generic in the
// policy and value function so exact dynamic-programming oracles can drive it.
template <class Env, class PolicyFn, class QFn>
inline BiasStats estimation_bias_generic(Env& env, PolicyFn policy, QFn q_fn, int episodes,
                                         double gamma, Rng& rng, bool discounted = true) {
  std::vector<double> biases;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    std::vector<std::vector<double>> obs_seq;
    std::vector<HybridAction> act_seq;
    std::vector<double> rew_seq;
    std::vector<double> obs = env.raw_observation();
    while (!env.terminated()) {
      const HybridAction a = policy(obs, rng);
      obs_seq.push_back(obs);
      act_seq.push_back(a);
      const StepResult res = env.step(a);
      rew_seq.push_back(res.reward);
      obs = res.observation;
    }
    if (rew_seq.empty()) throw std::runtime_error("estimation_bias: zero-length episode");
    const double g = discounted ? gamma : 1.0;
    double ret = 0.0;
    std::vector<double> returns(rew_seq.size());
    for (int t = static_cast<int>(rew_seq.size()) - 1; t >= 0; --t) {
      ret = rew_seq[t] + g * ret;
      returns[t] = ret;
    }
    for (std::size_t t = 0; t < rew_seq.size(); ++t)
      biases.push_back(returns[t] - q_fn(obs_seq[t], act_seq[t]));
  }
  BiasStats stats;
  stats.count = static_cast<std::int64_t>(biases.size());
  for (double b : biases) stats.mean += b;
  stats.mean /= stats.count;
  for (double b : biases) stats.stdev += (b - stats.mean) * (b - stats.mean);
  stats.stdev = std::sqrt(stats.stdev / stats.count);
  return stats;
}

template <class Env>
inline BiasStats estimation_bias(Env env, const HybridAgent& agent, const WelfordState& welford,
                                 int episodes, Rng& rng, double obs_clip,
                                 bool discounted = true) {
  auto policy = [&](const std::vector<double>& obs, Rng& r) {
    return agent.act(welford.normalize(obs, obs_clip), false, r);
  };
  auto q_fn = [&](const std::vector<double>& obs, const HybridAction& a) {
    return agent.q_value_min(welford.normalize(obs, obs_clip), a);
  };
  return estimation_bias_generic(env, policy, q_fn, episodes, agent.config().gamma, rng,
                                 discounted);
}

// --- single-seed training with incremental persistence ---------------------

namespace harness_detail {

struct RunState {
  HybridAgent agent;
  ReplayBuffer buffer;
  WelfordState welford;
  Rng train_rng;
  int epochs_done = 0;
  std::vector<EpochRow> rows;
};

constexpr std::uint32_t kCheckpointMagic = 0x48514331;  // "HQC1"

inline void save_checkpoint(const std::string& path, const RunState& st) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os.write(reinterpret_cast<const char*>(&kCheckpointMagic), sizeof(kCheckpointMagic));
    const std::int32_t epoch = st.epochs_done;
    os.write(reinterpret_cast<const char*>(&epoch), sizeof(epoch));
    st.agent.save(os);
    st.buffer.save(os);
    st.welford.save(os);
    st.train_rng.save(os);
    const std::uint32_t n_rows = static_cast<std::uint32_t>(st.rows.size());
    os.write(reinterpret_cast<const char*>(&n_rows), sizeof(n_rows));
    os.write(reinterpret_cast<const char*>(st.rows.data()),
             static_cast<std::streamsize>(st.rows.size() * sizeof(EpochRow)));
  }
  std::filesystem::rename(tmp, path);
}

inline bool load_checkpoint(const std::string& path, RunState& st) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  std::uint32_t magic = 0;
  is.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  if (magic != kCheckpointMagic) throw std::runtime_error("bad checkpoint magic in " + path);
  std::int32_t epoch = 0;
  is.read(reinterpret_cast<char*>(&epoch), sizeof(epoch));
  st.agent.load(is);
  st.buffer.load(is);
  st.welford.load(is);
  st.train_rng.load(is);
  std::uint32_t n_rows = 0;
  is.read(reinterpret_cast<char*>(&n_rows), sizeof(n_rows));
  st.rows.resize(n_rows);
  is.read(reinterpret_cast<char*>(st.rows.data()),
          static_cast<std::streamsize>(st.rows.size() * sizeof(EpochRow)));
  if (!is) throw std::runtime_error("truncated checkpoint " + path);
  st.epochs_done = epoch;
  return true;
}

}  // namespace harness_detail

// Train one seed, resuming from the last completed epoch if a checkpoint is
// present. Writes runlog_<variant>_<seed>.csv and a checkpoint after every
// epoch. Evaluation runs with exploration disabled and the normalizer frozen;
// its RNG streams are derived per (seed, epoch) so a resumed run continues
// exactly as an uninterrupted one.
inline RunLog run_single_seed(const RunConfig& cfg, int seed) {
  cfg.validate();
  EnvConfig env_cfg = cfg.env;
  env_cfg.task = task_from_name(cfg.task);
  PointMassEnv env(env_cfg);

  const AgentVariant variant = agent_variant_from_name(cfg.variant);
  harness_detail::RunState st{
      HybridAgent(variant, cfg.agent, PointMassEnv::kObservationDim, 2, 2,
                  derive_seed(cfg.root_seed, "agent", seed)),
      ReplayBuffer(cfg.buffer_capacity, PointMassEnv::kObservationDim, 2),
      WelfordState(PointMassEnv::kObservationDim),
      derive_rng(cfg.root_seed, "train", seed)};

  const std::string ckpt = harness_detail::checkpoint_path(cfg, seed);
  const std::string csv = harness_detail::runlog_path(cfg, seed);
  if (harness_detail::load_checkpoint(ckpt, st)) {
    // The CSV is rewritten from checkpoint rows so a crash between the two
    // files cannot leave them out of sync.
    harness_detail::write_runlog_csv(csv, st.rows);
  } else {
    harness_detail::write_runlog_csv(csv, {});
  }

  RunLog log;
  log.variant = cfg.variant;
  log.seed = seed;

  const int total_epochs = cfg.epochs();
  for (int epoch = st.epochs_done; epoch < total_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double critic_loss_sum = 0.0, actor_loss_sum = 0.0;
    std::int64_t critic_n = 0, actor_n = 0;
    const int target_episodes = std::min(cfg.episodes, (epoch + 1) * cfg.epoch_episodes);
    int episodes_done = epoch * cfg.epoch_episodes;
    while (episodes_done < target_episodes) {
      const StepMetrics m = st.agent.train_step(env, st.buffer, st.welford, st.train_rng,
                                                cfg.obs_clip);
      if (m.critic_updated) {
        critic_loss_sum += m.critic_loss;
        ++critic_n;
      }
      if (m.actor_updated) {
        actor_loss_sum += m.actor_loss;
        ++actor_n;
      }
      if (m.episode_end) ++episodes_done;
    }

    // Evaluation: fresh derived streams, frozen normalizer, no buffer writes.
    Rng eval_rng = derive_rng(cfg.root_seed, "eval", seed, epoch);
    const double eval_return = evaluate_return(PointMassEnv(env_cfg), st.agent, st.welford,
                                               cfg.eval_episodes, eval_rng, cfg.obs_clip);
    Rng bias_rng = derive_rng(cfg.root_seed, "bias", seed, epoch);
    const BiasStats bias =
        estimation_bias(PointMassEnv(env_cfg), st.agent, st.welford, cfg.bias_episodes, bias_rng,
                        cfg.obs_clip, cfg.bias_discounted);

    EpochRow row;
    row.epoch = epoch + 1;
    row.seed = seed;
    row.eval_return = eval_return;
    row.est_bias = bias.mean;
    row.critic_loss = critic_n > 0 ? critic_loss_sum / critic_n : 0.0;
    row.actor_loss = actor_n > 0 ? actor_loss_sum / actor_n : 0.0;
    if (cfg.measure_wall_time) {
      row.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    st.rows.push_back(row);
    st.epochs_done = epoch + 1;

    harness_detail::write_runlog_csv(csv, st.rows);
    harness_detail::save_checkpoint(ckpt, st);
  }

  log.rows = st.rows;
  return log;
}

// Fan seeds out across a worker pool. Each worker owns its full stack; a
// diverged seed is recorded and does not abort its siblings.
inline std::vector<RunLog> run_experiment(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const int n = static_cast<int>(cfg.seeds.size());
  std::vector<RunLog> logs(n);
  std::vector<std::thread> workers;
  std::mutex mu;
  int next = 0;
  const int pool = std::max(1, std::min(cfg.n_workers, n));
  auto worker = [&]() {
    while (true) {
      int idx;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n) return;
        idx = next++;
      }
      try {
        logs[idx] = run_single_seed(cfg, cfg.seeds[idx]);
      } catch (const std::exception& e) {
        logs[idx].variant = cfg.variant;
        logs[idx].seed = cfg.seeds[idx];
        logs[idx].failed = true;
        logs[idx].failure_reason = e.what();
      }
    }
  };
  if (pool == 1) {
    worker();
  } else {
    for (int w = 0; w < pool; ++w) workers.emplace_back(worker);
    for (auto& t : workers) t.join();
  }
  return logs;
}

// --- aggregation ------------------------------------------------------------

struct EpochSummary {
  int epoch = 0;
  double return_mean = 0.0, return_std = 0.0;
  double bias_mean = 0.0, bias_std = 0.0;
};

struct Summary {
  std::string variant;
  std::vector<int> seeds;
  std::vector<int> failed_seeds;
  std::vector<EpochSummary> epochs;
  std::vector<double> final_window_returns;  // per (seed, final-window epoch)
  double final_return_mean = 0.0, final_return_std = 0.0;
  double final_bias_mean = 0.0;
};

inline Summary aggregate(const std::vector<RunLog>& logs, double final_window_frac = 0.1) {
  if (logs.empty()) throw std::invalid_argument("aggregate: need at least one log");
  Summary s;
  s.variant = logs.front().variant;
  std::vector<const RunLog*> ok;
  for (const RunLog& log : logs) {
    s.seeds.push_back(log.seed);
    if (log.failed)
      s.failed_seeds.push_back(log.seed);
    else
      ok.push_back(&log);
  }
  if (ok.empty()) return s;
  const std::size_t n_epochs = ok.front()->rows.size();
  for (const RunLog* log : ok)
    if (log->rows.size() != n_epochs)
      throw std::invalid_argument("aggregate: mismatched epoch counts across seeds");

  for (std::size_t e = 0; e < n_epochs; ++e) {
    EpochSummary es;
    es.epoch = ok.front()->rows[e].epoch;
    double rm = 0.0, bm = 0.0;
    for (const RunLog* log : ok) {
      rm += log->rows[e].eval_return;
      bm += log->rows[e].est_bias;
    }
    rm /= ok.size();
    bm /= ok.size();
    double rv = 0.0, bv = 0.0;
    for (const RunLog* log : ok) {
      rv += (log->rows[e].eval_return - rm) * (log->rows[e].eval_return - rm);
      bv += (log->rows[e].est_bias - bm) * (log->rows[e].est_bias - bm);
    }
    es.return_mean = rm;
    es.return_std = std::sqrt(rv / ok.size());
    es.bias_mean = bm;
    es.bias_std = std::sqrt(bv / ok.size());
    s.epochs.push_back(es);
  }

  const std::size_t window =
      std::max<std::size_t>(1, static_cast<std::size_t>(n_epochs * final_window_frac + 0.5));
  double fr = 0.0, fb = 0.0;
  for (const RunLog* log : ok)
    for (std::size_t e = n_epochs - window; e < n_epochs; ++e) {
      s.final_window_returns.push_back(log->rows[e].eval_return);
      fr += log->rows[e].eval_return;
      fb += log->rows[e].est_bias;
    }
  fr /= s.final_window_returns.size();
  fb /= s.final_window_returns.size();
  double fv = 0.0;
  for (double v : s.final_window_returns) fv += (v - fr) * (v - fr);
  s.final_return_mean = fr;
  s.final_return_std = std::sqrt(fv / s.final_window_returns.size());
  s.final_bias_mean = fb;
  return s;
}

// Final-window mean return for one seed's log.
inline double final_window_return(const RunLog& log, double frac = 0.1) {
  const std::size_t n = log.rows.size();
  if (n == 0) throw std::invalid_argument("final_window_return: empty log");
  const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(n * frac + 0.5));
  double acc = 0.0;
  for (std::size_t e = n - window; e < n; ++e) acc += log.rows[e].eval_return;
  return acc / window;
}

inline double final_window_bias(const RunLog& log, double frac = 0.1) {
  const std::size_t n = log.rows.size();
  if (n == 0) throw std::invalid_argument("final_window_bias: empty log");
  const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(n * frac + 0.5));
  double acc = 0.0;
  for (std::size_t e = n - window; e < n; ++e) acc += log.rows[e].est_bias;
  return acc / window;
}

}  // namespace hybridq
