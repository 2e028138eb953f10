// Command-line entry point: analytic bias tables and checks, ordering
// reports, training, evaluation, aggregation, and the oracle self-test.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure,
// 3 self-test failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hybridq/bias.hpp"
#include "hybridq/bias_mc.hpp"
#include "hybridq/chain_mdp.hpp"
#include "hybridq/config.hpp"
#include "hybridq/gaussian_ops.hpp"
#include "hybridq/harness.hpp"
#include "hybridq/targets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hybridq;

namespace {

// Per-variant Monte Carlo agreement slack on top of 3 standard errors: zero
// for the exact clipped-min form, the Gaussian-aggregation error for
// DATD3/DARC, and the Blom order-statistic gap for the quantile rules.
double mc_slack(Variant v) {
  switch (v) {
    case Variant::kHybridTd3: return 0.0;
    case Variant::kHyDatd3:
    case Variant::kHyDarc: return 6e-4;
    case Variant::kHyTqc:
    case Variant::kHyAcc: return 1e-3;
  }
  return 0.0;
}

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("HYBRIDQ_OUT_DIR"); env && *env) return env;
  return ".";
}

void write_snapshot(const std::string& out_dir, const std::string& subcommand, const json& j) {
  write_json(out_dir + "/resolved_config_" + subcommand + ".json", j);
}

std::string format_coef(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int cmd_bias_table(const std::string& out_dir_flag, int n_critics, int m_atoms, int beta,
                   int k_min, int k_max) {
  const std::string out_dir = resolve_out_dir(out_dir_flag);
  fs::create_directories(out_dir);
  write_snapshot(out_dir, "bias_table",
                 json{{"n_critics", n_critics},
                      {"m_atoms", m_atoms},
                      {"beta", beta},
                      {"k_min", k_min},
                      {"k_max", k_max}});

  std::ofstream tqc(out_dir + "/bias_table_tqc.csv", std::ios::trunc);
  std::ofstream acc(out_dir + "/bias_table_acc.csv", std::ios::trunc);
  tqc << "k,effective_atoms,coefficient\n";
  acc << "k,effective_atoms,coefficient\n";
  std::printf("k,effective_atoms,tqc_coefficient,acc_coefficient(beta=%d)\n", beta);
  for (int k = k_min; k <= k_max; ++k) {
    const double c_tqc = tqc_truncation_coefficient(k, n_critics, m_atoms);
    const double c_acc = acc_truncation_coefficient(k, n_critics, m_atoms, beta);
    tqc << k << ',' << k * n_critics << ',' << format_coef(c_tqc) << '\n';
    acc << k << ',' << k * n_critics - beta << ',' << format_coef(c_acc) << '\n';
    std::printf("%d,%d,%s,%s\n", k, k * n_critics, format_coef(c_tqc).c_str(),
                format_coef(c_acc).c_str());
  }
  return 0;
}

BiasModel model_from_cli(double mu, double sigma, double lambda, int k, int n_critics,
                         int m_atoms, int beta, double p0) {
  BiasModel m;
  m.mu = mu;
  m.sigma = sigma;
  m.lambda = lambda;
  m.k_atoms = k;
  m.n_critics = n_critics;
  m.m_atoms = m_atoms;
  m.beta = beta;
  m.p_d = {p0, 1.0 - p0};
  m.validate();
  return m;
}

int cmd_bias_check(const std::string& out_dir_flag, const BiasModel& model, std::int64_t samples,
                   std::uint64_t seed, int shards) {
  const std::string out_dir = resolve_out_dir(out_dir_flag);
  fs::create_directories(out_dir);
  json results = json::array();
  bool all_pass = true;
  for (Variant v : {Variant::kHybridTd3, Variant::kHyDatd3, Variant::kHyDarc, Variant::kHyTqc,
                    Variant::kHyAcc}) {
    const double closed = variant_bias(model, v);
    const McEstimate mc = monte_carlo_bias(model, v, samples, seed, shards);
    const double tolerance = 3.0 * mc.std_error + mc_slack(v) * model.sigma;
    const bool pass = std::fabs(closed - mc.mean) <= tolerance;
    all_pass = all_pass && pass;
    results.push_back(json{{"variant", variant_name(v)},
                           {"closed_form", closed},
                           {"mc_mean", mc.mean},
                           {"mc_se", mc.std_error},
                           {"tolerance", tolerance},
                           {"pass", pass}});
    std::printf("%-11s closed=%+.6f mc=%+.6f se=%.2e %s\n", variant_name(v), closed, mc.mean,
                mc.std_error, pass ? "pass" : "FAIL");
  }
  json out{{"mu", model.mu},
           {"sigma", model.sigma},
           {"lambda", model.lambda},
           {"k_atoms", model.k_atoms},
           {"n_critics", model.n_critics},
           {"m_atoms", model.m_atoms},
           {"beta", model.beta},
           {"p_d", model.p_d},
           {"n_samples", samples},
           {"seed", seed},
           {"shards", shards},
           {"results", results}};
  write_json(out_dir + "/bias_check.json", out);
  write_snapshot(out_dir, "bias_check", out);
  return all_pass ? 0 : 2;
}

int cmd_ordering(const std::string& out_dir_flag, const BiasModel& model, double tie_tol_factor) {
  const std::string out_dir = resolve_out_dir(out_dir_flag);
  fs::create_directories(out_dir);
  const BiasReport r = ordering_report(model, tie_tol_factor);
  json out{{"mu", model.mu},
           {"sigma", model.sigma},
           {"lambda", model.lambda},
           {"k_atoms", model.k_atoms},
           {"n_critics", model.n_critics},
           {"m_atoms", model.m_atoms},
           {"beta", model.beta},
           {"p_d", model.p_d},
           {"tie_tol", r.tie_tol},
           {"bias", json{{"hybrid_td3", r.hybrid_td3},
                         {"hyacc", r.hyacc},
                         {"hytqc", r.hytqc},
                         {"hydarc", r.hydarc},
                         {"hydatd3", r.hydatd3}}},
           {"ordering_satisfied", r.ordering_satisfied}};
  write_json(out_dir + "/ordering.json", out);
  write_snapshot(out_dir, "ordering", out);
  std::cout << out.dump(2) << "\n";
  return 0;
}

json summary_to_json(const Summary& s, const RunConfig& cfg) {
  json epochs = json::array();
  for (const EpochSummary& e : s.epochs)
    epochs.push_back(json{{"epoch", e.epoch},
                          {"return_mean", e.return_mean},
                          {"return_std", e.return_std},
                          {"bias_mean", e.bias_mean},
                          {"bias_std", e.bias_std}});
  return json{{"variant", s.variant},
              {"task", cfg.task},
              {"seeds", s.seeds},
              {"failed_seeds", s.failed_seeds},
              {"epochs", epochs},
              {"final_window_returns", s.final_window_returns},
              {"final_return_mean", s.final_return_mean},
              {"final_return_std", s.final_return_std},
              {"final_bias_mean", s.final_bias_mean}};
}

void write_plot_csv(const std::string& path, const Summary& s, const RunConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  os << "variant,task,epoch,mean,std\n";
  for (const EpochSummary& e : s.epochs) {
    os << s.variant << ',' << cfg.task << ',' << e.epoch << ','
       << harness_detail::format_double(e.return_mean) << ','
       << harness_detail::format_double(e.return_std) << '\n';
  }
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir_flag) {
  RunConfig cfg = load_run_config(config_path, overrides);
  if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  write_snapshot(cfg.out_dir, "train", run_config_to_json(cfg));

  const std::vector<RunLog> logs = run_experiment(cfg);
  for (const RunLog& log : logs) {
    if (log.failed)
      std::printf("seed %d FAILED: %s\n", log.seed, log.failure_reason.c_str());
    else
      std::printf("seed %d done: %zu epochs, final return %.4f\n", log.seed, log.rows.size(),
                  final_window_return(log));
  }
  const Summary s = aggregate(logs);
  write_json(cfg.out_dir + "/summary_" + cfg.variant + ".json", summary_to_json(s, cfg));
  write_plot_csv(cfg.out_dir + "/plot_" + cfg.variant + ".csv", s, cfg);
  std::printf("summary: final return %.4f +- %.4f (bias %.4f)\n", s.final_return_mean,
              s.final_return_std, s.final_bias_mean);
  return 0;
}

int cmd_aggregate(const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& out_dir_flag) {
  RunConfig cfg = load_run_config(config_path, overrides);
  if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
  std::vector<RunLog> logs;
  for (int seed : cfg.seeds) {
    RunLog log;
    log.variant = cfg.variant;
    log.seed = seed;
    const std::string path = harness_detail::runlog_path(cfg, seed);
    if (!fs::exists(path)) {
      log.failed = true;
      log.failure_reason = "missing " + path;
    } else {
      log.rows = harness_detail::read_runlog_csv(path);
    }
    logs.push_back(std::move(log));
  }
  const Summary s = aggregate(logs);
  write_json(cfg.out_dir + "/summary_" + cfg.variant + ".json", summary_to_json(s, cfg));
  write_plot_csv(cfg.out_dir + "/plot_" + cfg.variant + ".csv", s, cfg);
  write_snapshot(cfg.out_dir, "aggregate", run_config_to_json(cfg));
  std::printf("aggregated %zu seeds (%zu failed): final return %.4f +- %.4f\n", logs.size(),
              s.failed_seeds.size(), s.final_return_mean, s.final_return_std);
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_dir_flag, int seed, int episodes,
                 const std::string& trajectory_path) {
  RunConfig cfg = load_run_config(config_path, overrides);
  if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
  const std::string ckpt = harness_detail::checkpoint_path(cfg, seed);
  if (!fs::exists(ckpt)) throw std::invalid_argument("no checkpoint at " + ckpt);

  EnvConfig env_cfg = cfg.env;
  env_cfg.task = task_from_name(cfg.task);
  harness_detail::RunState st{
      HybridAgent(agent_variant_from_name(cfg.variant), cfg.agent,
                  PointMassEnv::kObservationDim, 2, 2, derive_seed(cfg.root_seed, "agent", seed)),
      ReplayBuffer(cfg.buffer_capacity, PointMassEnv::kObservationDim, 2),
      WelfordState(PointMassEnv::kObservationDim),
      derive_rng(cfg.root_seed, "train", seed)};
  if (!harness_detail::load_checkpoint(ckpt, st))
    throw std::runtime_error("failed to load checkpoint " + ckpt);

  Rng rng = derive_rng(cfg.root_seed, "evaluate_cli", seed);
  const double ret = evaluate_return(PointMassEnv(env_cfg), st.agent, st.welford, episodes, rng,
                                     cfg.obs_clip);
  Rng bias_rng = derive_rng(cfg.root_seed, "evaluate_cli_bias", seed);
  const BiasStats bias = estimation_bias(PointMassEnv(env_cfg), st.agent, st.welford, episodes,
                                         bias_rng, cfg.obs_clip, cfg.bias_discounted);

  json out{{"variant", cfg.variant}, {"task", cfg.task},         {"seed", seed},
           {"episodes", episodes},   {"mean_return", ret},       {"bias_mean", bias.mean},
           {"bias_std", bias.stdev}, {"epochs_trained", st.epochs_done}};
  write_json(cfg.out_dir + "/eval_" + cfg.variant + "_" + std::to_string(seed) + ".json", out);
  write_snapshot(cfg.out_dir, "evaluate", run_config_to_json(cfg));
  std::cout << out.dump(2) << "\n";

  if (!trajectory_path.empty()) {
    // JSON-lines dump: one object per step.
    std::ofstream os(trajectory_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + trajectory_path);
    PointMassEnv env(env_cfg);
    Rng traj_rng = derive_rng(cfg.root_seed, "trajectory", seed);
    for (int ep = 0; ep < episodes; ++ep) {
      env.reset(traj_rng);
      std::vector<double> obs = env.raw_observation();
      int t = 0;
      while (!env.terminated()) {
        const HybridAction a =
            st.agent.act(st.welford.normalize(obs, cfg.obs_clip), false, traj_rng);
        const StepResult res = env.step(a);
        json line{{"t", t},
                  {"obs", obs},
                  {"a_d", a.a_d},
                  {"a_c", std::vector<double>{a.a_c[0], a.a_c[1]}},
                  {"r", res.reward},
                  {"done", res.terminated},
                  {"reason", termination_name(res.reason)}};
        os << line.dump() << "\n";
        obs = res.observation;
        ++t;
      }
    }
  }
  return 0;
}

// --- selftest ----------------------------------------------------------------

struct SelftestReport {
  int passed = 0;
  int failed = 0;
  void item(const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "pass" : "FAIL", name.c_str(),
                detail.empty() ? "" : ": ", detail.c_str());
    if (ok)
      ++passed;
    else
      ++failed;
  }
};

int cmd_selftest(const std::string& inject_fault) {
  SelftestReport rep;
  const double fault = inject_fault == "bias-constant" ? 1e-3 : 0.0;
  if (!inject_fault.empty() && inject_fault != "bias-constant")
    throw std::invalid_argument("unknown fault: " + inject_fault);

  // 1. Truncation coefficient tables (N=5, M=25).
  {
    const double tqc_expected[] = {-0.346536, -0.286522, -0.224476, -0.159079, -0.087683};
    const double acc_expected[] = {-0.370168, -0.310718, -0.249606, -0.185761, -0.117252};
    bool ok = true;
    for (int k = 20; k <= 24; ++k) {
      ok = ok && std::fabs(tqc_truncation_coefficient(k, 5, 25) - tqc_expected[k - 20]) < 1e-5;
      ok = ok && std::fabs(acc_truncation_coefficient(k, 5, 25, 2) - acc_expected[k - 20]) < 1e-5;
    }
    rep.item("truncation coefficient tables", ok);
  }

  // 2. Closed forms vs Monte Carlo (an injected fault shifts the closed
  // form; the suite must notice).
  {
    BiasModel m;
    m.mu = 0.0;
    m.sigma = 1.0;
    bool ok = true;
    for (Variant v : {Variant::kHybridTd3, Variant::kHyDatd3, Variant::kHyDarc, Variant::kHyTqc,
                      Variant::kHyAcc}) {
      const double closed = variant_bias(m, v) + fault;
      const McEstimate mc = monte_carlo_bias(m, v, 400000, 11, 4);
      const double tol = 3.0 * mc.std_error + mc_slack(v) * m.sigma;
      ok = ok && std::fabs(closed - mc.mean) <= tol;
    }
    rep.item("variant bias closed forms vs Monte Carlo", ok,
             fault != 0.0 ? "fault injected" : "");
  }

  // 3. Gaussian operator closed forms vs sampling.
  {
    bool ok = true;
    Rng rng(21);
    for (int trial = 0; trial < 4; ++trial) {
      const GaussianPair p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                           rng.uniform(0.4, 1.5)};
      double sum = 0.0, sum_max = 0.0;
      const int n = 1000000;
      Rng draw(100 + trial);
      for (int i = 0; i < n; ++i) {
        const double x = draw.normal(p.mu1, p.sigma), y = draw.normal(p.mu2, p.sigma);
        sum += std::min(x, y);
        sum_max += std::max(x, y);
      }
      ok = ok && std::fabs(expected_min_pair(p) - sum / n) < 4.5e-3 * p.sigma;
      ok = ok && std::fabs(expected_max_pair(p) - sum_max / n) < 4.5e-3 * p.sigma;
      ok = ok && std::fabs(expected_min_pair(p) + expected_max_pair(p) - p.mu1 - p.mu2) < 1e-12;
    }
    rep.item("Gaussian min/max operators vs Monte Carlo", ok);
  }

  // 4. Autodiff vs central finite differences.
  {
    Rng rng(31);
    bool ok = true;
    for (int arch = 0; arch < 3 && ok; ++arch) {
      Mlp net({4, 10, 3}, arch % 2 ? Activation::kTanh : Activation::kRelu,
              OutputActivation::kIdentity, rng);
      Tensor x({3, 4});
      for (double& v : x.data) v = rng.normal();
      Tensor coef({3, 3});
      for (double& v : coef.data) v = rng.normal();
      MlpTrace tr;
      net.forward(x, &tr);
      const MlpGrads g = net.backward(tr, coef);
      for (int probe = 0; probe < 10; ++probe) {
        const std::size_t t = rng.uniform_index(net.params().size());
        const std::size_t i = rng.uniform_index(net.params()[t].numel());
        auto loss = [&](Mlp& n) {
          const Tensor out = n.forward(x);
          double acc = 0.0;
          for (std::size_t j = 0; j < out.data.size(); ++j) acc += coef.data[j] * out.data[j];
          return acc;
        };
        Mlp b = net;
        b.mutable_params()[t].data[i] += 1e-5;
        const double up = loss(b);
        b.mutable_params()[t].data[i] -= 2e-5;
        const double dn = loss(b);
        const double fd = (up - dn) / 2e-5;
        const double rel = std::fabs(g.params[t].data[i] - fd) /
                           std::max(1e-8, std::fabs(g.params[t].data[i]) + std::fabs(fd));
        ok = ok && rel < 1e-4;
      }
    }
    rep.item("gradients vs finite differences", ok);
  }

  // 5. Chain-MDP bias probe.
  {
    ChainMdpEnv chain(1.0, 2.0);
    Rng rng(41);
    auto policy = [](const std::vector<double>&, Rng&) { return HybridAction{}; };
    auto exact_q = [&](const std::vector<double>& obs, const HybridAction&) {
      const int state = obs[0] == 1.0 ? 0 : (obs[1] == 1.0 ? 1 : 2);
      return chain.exact_q(state, 0.9);
    };
    const BiasStats b = estimation_bias_generic(chain, policy, exact_q, 2, 0.9, rng, true);
    rep.item("chain-MDP bias probe", std::fabs(b.mean) < 1e-10);
  }

  // 6. Welford stability.
  {
    Rng rng(51);
    WelfordState w(1);
    std::vector<double> xs(100000);
    for (auto& x : xs) {
      x = 1e6 + rng.normal();
      w.update({x});
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size();
    const bool ok = std::fabs(w.mean()[0] - mean) / mean < 1e-9 &&
                    std::fabs(w.variance()[0] - var) / var < 1e-9;
    rep.item("Welford vs two-pass statistics", ok);
  }

  // 7. Target-rule arithmetic spot checks.
  {
    const std::vector<double> r{0.0};
    const std::vector<std::uint8_t> done{0};
    const Tensor q1({1, 2}, {2.0, 5.0});
    const Tensor q2({1, 2}, {3.0, 4.0});
    const Tensor pi({1, 2}, {0.5, 0.5});
    bool ok = std::fabs(weighted_clipped_target(r, done, 1.0, q1, q2, pi,
                                                TargetWeighting::kAsWritten)[0] -
                        1.5) < 1e-12;
    ok = ok && std::fabs(weighted_clipped_target(r, done, 1.0, q1, q2, pi,
                                                 TargetWeighting::kExpectation)[0] -
                         3.0) < 1e-12;
    std::vector<double> atoms(10);
    for (int i = 0; i < 10; ++i) atoms[i] = 10.0 - i;
    const Tensor pool({1, 10}, atoms);
    ok = ok &&
         std::fabs(quantile_truncation_target(r, done, 1.0, pool, 5, {0.0})[0] - 3.0) < 1e-12;
    rep.item("target-rule arithmetic", ok);
  }

  std::printf("selftest: %d passed, %d failed\n", rep.passed, rep.failed);
  return rep.failed == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid action-space TD3 toolkit"};
  app.require_subcommand(1);
  app.fallthrough(true);

  std::string out_dir_flag;
  app.add_option("--out-dir", out_dir_flag,
                 "output directory (default: $HYBRIDQ_OUT_DIR or '.')");

  // bias-table
  auto* table = app.add_subcommand("bias-table", "emit the truncation coefficient tables as CSV");
  int n_critics = 5, m_atoms = 25, beta = 2, k_min = 20, k_max = 24;
  table->add_option("--n-critics", n_critics, "ensemble size N");
  table->add_option("--m-atoms", m_atoms, "atoms per critic M");
  table->add_option("--beta", beta, "extra atoms removed by the ACC rule");
  table->add_option("--k-min", k_min, "first kept-atom count");
  table->add_option("--k-max", k_max, "last kept-atom count");

  // shared analytic-model flags
  double mu = 0.0, sigma = 1.0, lambda = 0.7, p0 = 0.5;
  double tie_tol_factor = kDefaultOrderingTieTolFactor;
  int model_k = 22, model_beta = 2, model_n = 5, model_m = 25;
  std::int64_t samples = 1000000;
  std::uint64_t seed = 7;
  int shards = 4;

  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--mu", mu, "synchronized critic bias");
    cmd->add_option("--sigma", sigma, "per-critic error std");
    cmd->add_option("--lambda", lambda, "DARC mixing coefficient");
    cmd->add_option("--k", model_k, "kept atoms per critic");
    cmd->add_option("--beta", model_beta, "extra ACC truncation");
    cmd->add_option("--n-critics", model_n, "ensemble size N");
    cmd->add_option("--m-atoms", model_m, "atoms per critic M");
    cmd->add_option("--p0", p0, "discrete probability of mode 0 (two modes)");
  };

  auto* check = app.add_subcommand("bias-check", "closed forms vs Monte Carlo oracle");
  add_model_flags(check);
  check->add_option("--samples", samples, "Monte Carlo sample count");
  check->add_option("--seed", seed, "Monte Carlo seed");
  check->add_option("--shards", shards, "Monte Carlo shards");

  auto* ordering = app.add_subcommand("ordering", "closed-form bias ordering report");
  add_model_flags(ordering);
  ordering->add_option("--tie-tol-factor", tie_tol_factor,
                       "tie tolerance between ACC and TQC, as a fraction of sigma");

  // train / evaluate / aggregate
  std::string config_path;
  std::vector<std::string> overrides;
  int eval_seed = 1, eval_episodes = 5;
  std::string trajectory_path;

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file (JSON)")->required();
    cmd->add_option("--set", overrides, "dotted-key override, e.g. agent.lr=1e-4");
  };
  auto* train = app.add_subcommand("train", "train seeds and aggregate");
  add_config_flags(train);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a trained checkpoint");
  add_config_flags(evaluate);
  evaluate->add_option("--seed", eval_seed, "seed whose checkpoint to evaluate");
  evaluate->add_option("--episodes", eval_episodes, "evaluation episodes");
  evaluate->add_option("--trajectories", trajectory_path, "JSON-lines trajectory dump path");
  auto* agg = app.add_subcommand("aggregate", "aggregate existing run logs");
  add_config_flags(agg);

  auto* selftest = app.add_subcommand("selftest", "run the oracle suite");
  std::string inject_fault;
  selftest->add_option("--inject-fault", inject_fault,
                       "deliberately corrupt a constant to prove the suite notices "
                       "(bias-constant)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (table->parsed())
      return cmd_bias_table(out_dir_flag, n_critics, m_atoms, beta, k_min, k_max);
    if (check->parsed())
      return cmd_bias_check(out_dir_flag,
                            model_from_cli(mu, sigma, lambda, model_k, model_n, model_m,
                                           model_beta, p0),
                            samples, seed, shards);
    if (ordering->parsed())
      return cmd_ordering(out_dir_flag,
                          model_from_cli(mu, sigma, lambda, model_k, model_n, model_m,
                                         model_beta, p0),
                          tie_tol_factor);
    if (train->parsed()) return cmd_train(config_path, overrides, out_dir_flag);
    if (evaluate->parsed())
      return cmd_evaluate(config_path, overrides, out_dir_flag, eval_seed, eval_episodes,
                          trajectory_path);
    if (agg->parsed()) return cmd_aggregate(config_path, overrides, out_dir_flag);
    if (selftest->parsed()) return cmd_selftest(inject_fault);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 1;
}
