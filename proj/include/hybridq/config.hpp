#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridq/agents.hpp"
#include "hybridq/harness.hpp"

// Run configuration file handling: versioned JSON schema, dotted-key
// overrides (agent.lr=1e-4), strict unknown-key rejection, and resolved
// snapshots written beside outputs.

namespace hybridq {

using nlohmann::json;

constexpr int kConfigVersion = 1;

inline json agent_config_to_json(const AgentConfig& a) {
  return json{{"gamma", a.gamma},
              {"tau_polyak", a.tau_polyak},
              {"policy_delay", a.policy_delay},
              {"smoothing_sigma", a.smoothing_sigma},
              {"smoothing_clip", a.smoothing_clip},
              {"explore_sigma", a.explore_sigma},
              {"eps_greedy_start", a.eps_greedy_start},
              {"eps_greedy_end", a.eps_greedy_end},
              {"eps_anneal_steps", a.eps_anneal_steps},
              {"lambda_darc", a.lambda_darc},
              {"k_atoms", a.k_atoms},
              {"n_critics", a.n_critics},
              {"m_atoms", a.m_atoms},
              {"beta_acc", a.beta_acc},
              {"alpha_c", a.alpha_c},
              {"alpha_d", a.alpha_d},
              {"weighting",
               a.weighting == TargetWeighting::kAsWritten ? "as_written" : "expectation"},
              {"lr", a.lr},
              {"batch_size", a.batch_size},
              {"warmup_steps", a.warmup_steps},
              {"hidden", a.hidden},
              {"activation", a.activation == Activation::kRelu ? "relu" : "tanh"},
              {"actor_final_scale", a.actor_final_scale},
              {"ppo_rollout", a.ppo_rollout},
              {"ppo_epochs", a.ppo_epochs},
              {"ppo_minibatch", a.ppo_minibatch},
              {"ppo_clip", a.ppo_clip},
              {"gae_lambda", a.gae_lambda},
              {"ppo_value_coef", a.ppo_value_coef},
              {"ppo_init_log_std", a.ppo_init_log_std}};
}

inline json env_config_to_json(const EnvConfig& e) {
  return json{{"dt", e.dt},
              {"v_max", e.v_max},
              {"workspace_half", e.workspace_half},
              {"grasp_radius", e.grasp_radius},
              {"max_steps", e.max_steps},
              {"success_radius", e.success_radius},
              {"pick_lift_distance", e.pick_lift_distance},
              {"distance_scale", e.distance_scale},
              {"terminate_on_boundary", e.terminate_on_boundary},
              {"w_approach", e.w_approach},
              {"w_transport", e.w_transport},
              {"w_velocity", e.w_velocity},
              {"w_boundary", e.w_boundary},
              {"w_timeout", e.w_timeout},
              {"w_jerk", e.w_jerk},
              {"w_object_out", e.w_object_out},
              {"reward_norm", e.reward_norm},
              {"spawn_margin", e.spawn_margin},
              {"mass_min", e.mass_min},
              {"mass_max", e.mass_max},
              {"drag_min", e.drag_min},
              {"drag_max", e.drag_max}};
}

inline json run_config_to_json(const RunConfig& c) {
  return json{{"version", kConfigVersion},
              {"task", c.task},
              {"variant", c.variant},
              {"seeds", c.seeds},
              {"episodes", c.episodes},
              {"epoch_episodes", c.epoch_episodes},
              {"eval_episodes", c.eval_episodes},
              {"bias_episodes", c.bias_episodes},
              {"bias_discounted", c.bias_discounted},
              {"obs_clip", c.obs_clip},
              {"buffer_capacity", c.buffer_capacity},
              {"n_workers", c.n_workers},
              {"root_seed", c.root_seed},
              {"measure_wall_time", c.measure_wall_time},
              {"out_dir", c.out_dir},
              {"env", env_config_to_json(c.env)},
              {"agent", agent_config_to_json(c.agent)}};
}

namespace config_detail {

template <class T>
void take(json& j, const char* key, T& out) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
    j.erase(key);
  }
}

inline void ensure_consumed(const json& j, const std::string& scope) {
  if (!j.empty()) {
    std::string keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys += it.key() + " ";
    throw std::invalid_argument("unknown config keys in " + scope + ": " + keys);
  }
}

}  // namespace config_detail

inline AgentConfig agent_config_from_json(json j) {
  AgentConfig a;
  using config_detail::take;
  take(j, "gamma", a.gamma);
  take(j, "tau_polyak", a.tau_polyak);
  take(j, "policy_delay", a.policy_delay);
  take(j, "smoothing_sigma", a.smoothing_sigma);
  take(j, "smoothing_clip", a.smoothing_clip);
  take(j, "explore_sigma", a.explore_sigma);
  take(j, "eps_greedy_start", a.eps_greedy_start);
  take(j, "eps_greedy_end", a.eps_greedy_end);
  take(j, "eps_anneal_steps", a.eps_anneal_steps);
  take(j, "lambda_darc", a.lambda_darc);
  take(j, "k_atoms", a.k_atoms);
  take(j, "n_critics", a.n_critics);
  take(j, "m_atoms", a.m_atoms);
  take(j, "beta_acc", a.beta_acc);
  take(j, "alpha_c", a.alpha_c);
  take(j, "alpha_d", a.alpha_d);
  if (j.contains("weighting")) {
    const std::string w = j.at("weighting").get<std::string>();
    if (w == "as_written")
      a.weighting = TargetWeighting::kAsWritten;
    else if (w == "expectation")
      a.weighting = TargetWeighting::kExpectation;
    else
      throw std::invalid_argument("weighting must be as_written or expectation");
    j.erase("weighting");
  }
  take(j, "lr", a.lr);
  take(j, "batch_size", a.batch_size);
  take(j, "warmup_steps", a.warmup_steps);
  take(j, "hidden", a.hidden);
  if (j.contains("activation")) {
    const std::string act = j.at("activation").get<std::string>();
    if (act == "relu")
      a.activation = Activation::kRelu;
    else if (act == "tanh")
      a.activation = Activation::kTanh;
    else
      throw std::invalid_argument("activation must be relu or tanh");
    j.erase("activation");
  }
  take(j, "actor_final_scale", a.actor_final_scale);
  take(j, "ppo_rollout", a.ppo_rollout);
  take(j, "ppo_epochs", a.ppo_epochs);
  take(j, "ppo_minibatch", a.ppo_minibatch);
  take(j, "ppo_clip", a.ppo_clip);
  take(j, "gae_lambda", a.gae_lambda);
  take(j, "ppo_value_coef", a.ppo_value_coef);
  take(j, "ppo_init_log_std", a.ppo_init_log_std);
  config_detail::ensure_consumed(j, "agent");
  return a;
}

inline EnvConfig env_config_from_json(json j) {
  EnvConfig e;
  using config_detail::take;
  take(j, "dt", e.dt);
  take(j, "v_max", e.v_max);
  take(j, "workspace_half", e.workspace_half);
  take(j, "grasp_radius", e.grasp_radius);
  take(j, "max_steps", e.max_steps);
  take(j, "success_radius", e.success_radius);
  take(j, "pick_lift_distance", e.pick_lift_distance);
  take(j, "distance_scale", e.distance_scale);
  take(j, "terminate_on_boundary", e.terminate_on_boundary);
  take(j, "w_approach", e.w_approach);
  take(j, "w_transport", e.w_transport);
  take(j, "w_velocity", e.w_velocity);
  take(j, "w_boundary", e.w_boundary);
  take(j, "w_timeout", e.w_timeout);
  take(j, "w_jerk", e.w_jerk);
  take(j, "w_object_out", e.w_object_out);
  take(j, "reward_norm", e.reward_norm);
  take(j, "spawn_margin", e.spawn_margin);
  take(j, "mass_min", e.mass_min);
  take(j, "mass_max", e.mass_max);
  take(j, "drag_min", e.drag_min);
  take(j, "drag_max", e.drag_max);
  config_detail::ensure_consumed(j, "env");
  return e;
}

inline RunConfig run_config_from_json(json j) {
  RunConfig c;
  using config_detail::take;
  if (j.contains("version")) {
    const int v = j.at("version").get<int>();
    if (v != kConfigVersion)
      throw std::invalid_argument("unsupported config version " + std::to_string(v));
    j.erase("version");
  }
  take(j, "task", c.task);
  take(j, "variant", c.variant);
  take(j, "seeds", c.seeds);
  take(j, "episodes", c.episodes);
  take(j, "epoch_episodes", c.epoch_episodes);
  take(j, "eval_episodes", c.eval_episodes);
  take(j, "bias_episodes", c.bias_episodes);
  take(j, "bias_discounted", c.bias_discounted);
  take(j, "obs_clip", c.obs_clip);
  take(j, "buffer_capacity", c.buffer_capacity);
  take(j, "n_workers", c.n_workers);
  take(j, "root_seed", c.root_seed);
  take(j, "measure_wall_time", c.measure_wall_time);
  take(j, "out_dir", c.out_dir);
  if (j.contains("env")) {
    c.env = env_config_from_json(j.at("env"));
    j.erase("env");
  }
  if (j.contains("agent")) {
    c.agent = agent_config_from_json(j.at("agent"));
    j.erase("agent");
  }
  config_detail::ensure_consumed(j, "run config");
  // Validate the names eagerly.
  task_from_name(c.task);
  agent_variant_from_name(c.variant);
  return c;
}

// Apply a dotted-key override like "agent.lr=1e-4" or "seeds=[1,2]". The key
// must already exist in the schema; values parse as JSON when possible and
// fall back to strings.
inline void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string value_str = spec.substr(eq + 1);

  json* node = &j;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]))
      throw std::invalid_argument("override path not in schema: " + path);
    node = &node->at(parts[i]);
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf))
    throw std::invalid_argument("override key not in schema: " + path);

  json value;
  try {
    value = json::parse(value_str);
  } catch (const json::parse_error&) {
    value = value_str;  // plain string
  }
  (*node)[leaf] = value;
}

inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {}) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  // Overrides are validated against the fully populated schema.
  json schema = run_config_to_json(run_config_from_json(j));
  for (const std::string& o : overrides) apply_override(schema, o);
  return run_config_from_json(schema);
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

}  // namespace hybridq
