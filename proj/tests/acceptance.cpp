// Acceptance suite: one numbered check per release criterion, each printing a
// single [PASS]/[FAIL] line (plus supporting detail). Run everything with no
// arguments or a subset with --criterion 1,2,...; exits nonzero if any
// selected criterion fails.
//
// Criteria 7 and 8 share the trained runs cached under the working directory,
// so re-runs resume instead of retraining.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hybridq/bias.hpp"
#include "hybridq/bias_mc.hpp"
#include "hybridq/chain_mdp.hpp"
#include "hybridq/config.hpp"
#include "hybridq/gaussian_ops.hpp"
#include "hybridq/harness.hpp"
#include "hybridq/targets.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hybridq;

namespace {

struct Criterion {
  int id;
  bool passed;
  std::string summary;
};

std::string cli_path() {
  if (const char* env = std::getenv("HYBRIDQ_CLI"); env && *env) return env;
  return "./tools/hybridq";  // sensible default when run from the build root
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return "<missing:" + path + ">";
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---- criterion 1: coefficient table reproduction ---------------------------

std::vector<double> parse_coefficients(const std::string& csv_path) {
  std::ifstream is(csv_path);
  std::vector<double> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    const auto last_comma = line.rfind(',');
    if (last_comma != std::string::npos) out.push_back(std::stod(line.substr(last_comma + 1)));
  }
  return out;
}

Criterion criterion_1() {
  const std::string dir = "acceptance_c1";
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = run_cli("bias-table --n-critics 5 --m-atoms 25 --out-dir " + dir);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double tqc_reference[] = {-0.3460, -0.2865, -0.2245, -0.1591, -0.0877};
  const double acc_reference[] = {-0.3702, -0.3107, -0.2496, -0.1858, -0.1173};
  const auto tqc = parse_coefficients(dir + "/bias_table_tqc.csv");
  const auto acc = parse_coefficients(dir + "/bias_table_acc.csv");

  bool ok = rc == 0 && tqc.size() == 5 && acc.size() == 5 && elapsed < 1.0;
  std::string detail;
  for (int i = 0; i < 5 && tqc.size() == 5; ++i) {
    const double d_tqc = std::fabs(tqc[i] - tqc_reference[i]);
    const double d_acc = std::fabs(acc[i] - acc_reference[i]);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  k=%d tqc |%+.6f - %+.4f| = %.2e %s; acc diff %.2e %s\n",
                  20 + i, tqc[i], tqc_reference[i], d_tqc, d_tqc <= 5e-4 ? "ok" : "EXCEEDS",
                  d_acc, d_acc <= 5e-4 ? "ok" : "EXCEEDS");
    detail += buf;
    ok = ok && d_tqc <= 5e-4 && d_acc <= 5e-4;
  }
  std::fputs(detail.c_str(), stdout);
  std::printf("  runtime %.3fs (budget 1s)\n", elapsed);
  if (!ok)
    std::printf(
        "  note: the reference k=20 TQC entry (-0.3460) is inconsistent with its own k=21 row;\n"
        "  the Blom sums force -0.3465 (their difference is the five atom values 101..105).\n");
  return {1, ok, "bias-table reproduces the reference coefficient tables to 5e-4"};
}

// ---- criterion 2: lemma oracle agreement ------------------------------------

Criterion criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng param_rng(20260808);
  bool ok = true;
  const std::int64_t n = 10'000'000;
  for (int set = 0; set < 20; ++set) {
    // Randomized parameter regime: means in [-1.5, 1.5], sigma in [0.4, 2].
    const GaussianPair p{param_rng.uniform(-1.5, 1.5), param_rng.uniform(-1.5, 1.5),
                         param_rng.uniform(0.4, 2.0)};
    const std::uint64_t seed = 7000 + set;

    // expected_abs_gaussian: deterministic quadrature oracle, 1e-6.
    const double mu_z = p.mu1 - p.mu2;
    const double sigma_z = p.sigma * std::sqrt(2.0);
    const double abs_closed = expected_abs_gaussian(mu_z, sigma_z);
    const double abs_quad = oracles::abs_gaussian_by_quadrature(mu_z, sigma_z);
    const bool abs_ok = std::fabs(abs_closed - abs_quad) < 1e-6;

    // min / max pair: exact closed forms vs Monte Carlo at 3 SE.
    const auto mc_min = oracles::mc_mean(
        [&](Rng& r) { return std::min(r.normal(p.mu1, p.sigma), r.normal(p.mu2, p.sigma)); }, n,
        seed);
    const bool min_ok = std::fabs(expected_min_pair(p) - mc_min.mean) < 3.0 * mc_min.se;
    const auto mc_max = oracles::mc_mean(
        [&](Rng& r) { return std::max(r.normal(p.mu1, p.sigma), r.normal(p.mu2, p.sigma)); }, n,
        seed + 500);
    const bool max_ok = std::fabs(expected_max_pair(p) - mc_max.mean) < 3.0 * mc_max.se;

    // nested min, constituent-certified oracle: Monte Carlo moments of the
    // pair minimum assembled into mu_w - sigma_w/sqrt(pi). Batch means give
    // the standard error of the assembled estimator.
    const int batches = 100;
    std::vector<double> batch_vals(batches);
    {
      Rng r(seed + 900);
      const std::int64_t per_batch = n / batches;
      for (int b = 0; b < batches; ++b) {
        double s1 = 0.0, s2 = 0.0;
        for (std::int64_t i = 0; i < per_batch; ++i) {
          const double w = std::min(r.normal(p.mu1, p.sigma), r.normal(p.mu2, p.sigma));
          s1 += w;
          s2 += w * w;
        }
        const double m = s1 / per_batch;
        const double sd = std::sqrt(std::max(0.0, s2 / per_batch - m * m));
        batch_vals[b] = m - sd / std::sqrt(M_PI);
      }
    }
    double oracle_mean = 0.0;
    for (double v : batch_vals) oracle_mean += v / batches;
    double oracle_var = 0.0;
    for (double v : batch_vals) oracle_var += (v - oracle_mean) * (v - oracle_mean) / batches;
    const double oracle_se = std::sqrt(oracle_var / batches);
    const bool nested_const_ok =
        std::fabs(expected_nested_min(p) - oracle_mean) < 3.0 * oracle_se;

    // nested min, direct two-stage simulation: carries the documented
    // Gaussian-approximation slack of the closed form (<= 1.5e-3 sigma).
    const auto mc_nested = oracles::mc_mean(
        [&](Rng& r) {
          const double w1 = std::min(r.normal(p.mu1, p.sigma), r.normal(p.mu2, p.sigma));
          const double w2 = std::min(r.normal(p.mu1, p.sigma), r.normal(p.mu2, p.sigma));
          return std::min(w1, w2);
        },
        n, seed + 1300);
    const bool nested_direct_ok = std::fabs(expected_nested_min(p) - mc_nested.mean) <
                                  3.0 * mc_nested.se + 1.5e-3 * p.sigma;

    const bool set_ok = abs_ok && min_ok && max_ok && nested_const_ok && nested_direct_ok;
    if (!set_ok || set < 3) {
      std::printf(
          "  set %2d (mu1 %+0.2f mu2 %+0.2f s %.2f): abs %s min %s max %s nested %s/%s\n", set,
          p.mu1, p.mu2, p.sigma, abs_ok ? "ok" : "FAIL", min_ok ? "ok" : "FAIL",
          max_ok ? "ok" : "FAIL", nested_const_ok ? "ok" : "FAIL",
          nested_direct_ok ? "ok" : "FAIL");
    }
    ok = ok && set_ok;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  runtime %.1fs (budget 120s)\n", elapsed);
  return {2, ok && elapsed < 120.0,
          "min/max/nested/abs closed forms match their oracles at 1e7 samples"};
}

// ---- criterion 3: ordering property ------------------------------------------

Criterion criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(33);
  int satisfied = 0;
  bool printed_example = false;
  for (int trial = 0; trial < 100; ++trial) {
    BiasModel m;
    m.sigma = rng.uniform(0.1, 2.0);
    m.mu = rng.uniform(-1.0, 1.0);
    m.lambda = rng.uniform(0.5000001, 1.0);
    m.k_atoms = 20 + static_cast<int>(rng.uniform_index(5));
    m.beta = 1 + static_cast<int>(rng.uniform_index(4));
    const double p0 = rng.uniform(0.2, 0.8);
    m.p_d = {p0, 1.0 - p0};
    const BiasReport r = ordering_report(m);
    if (r.ordering_satisfied) ++satisfied;
    if (!r.ordering_satisfied && !printed_example) {
      printed_example = true;
      std::printf(
          "  counterexample: mu=%.3f sigma=%.3f lambda=%.3f k=%d beta=%d p0=%.2f ->\n"
          "    td3 %+.4f | acc %+.4f ~ tqc %+.4f | darc %+.4f | datd3 %+.4f\n"
          "    the chain needs tqc < darc, but darc = td3 + (1-2*lambda)*tau/sqrt(pi) < td3\n"
          "    for every lambda > 0.5, so darc sits below td3, not above tqc.\n",
          m.mu, m.sigma, m.lambda, m.k_atoms, m.beta, p0, r.hybrid_td3, r.hyacc, r.hytqc,
          r.hydarc, r.hydatd3);
    }
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  ordering satisfied for %d/100 models; runtime %.2fs (budget 10s)\n", satisfied,
              elapsed);
  return {3, satisfied == 100 && elapsed < 10.0,
          "closed-form biases satisfy the reference ordering chain on 100 models"};
}

// ---- criterion 4: target-rule / bias bridge ----------------------------------

Criterion criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  BiasModel model;
  model.mu = 0.1;
  model.sigma = 0.8;
  model.p_d = {0.6, 0.4};
  model.lambda = 0.7;
  model.k_atoms = 20;

  const double q_true = 2.0;
  const int n_samples = 1'000'000;
  const int k = 2;
  Rng rng(4096);
  const std::vector<double> r(1, 0.0);
  const std::vector<std::uint8_t> done(1, 0);
  const Tensor pi({1, k}, {model.p_d[0], model.p_d[1]});

  std::vector<double> sum(5, 0.0), sum_sq(5, 0.0);
  std::vector<double> sample(5);
  for (int i = 0; i < n_samples; ++i) {
    auto noisy = [&](int cols) {
      Tensor t({1, cols});
      for (double& v : t.data) v = q_true + rng.normal(model.mu, model.sigma);
      return t;
    };
    const Tensor q1a = noisy(k), q2a = noisy(k), q1b = noisy(k), q2b = noisy(k);
    sample[0] =
        weighted_clipped_target(r, done, 1.0, q1a, q2a, pi, TargetWeighting::kExpectation)[0] -
        q_true;
    sample[1] = datd3_target(r, done, 1.0, q1a, q2a, q1b, q2b, pi)[0] - q_true;
    sample[2] = darc_target(r, done, 1.0, q1a, q2a, q1b, q2b, pi, model.lambda)[0] - q_true;
    Tensor atoms({1, model.n_critics * model.m_atoms});
    for (double& v : atoms.data) v = q_true + rng.normal(model.mu, model.sigma);
    const std::vector<double> zero{0.0};
    sample[3] = quantile_truncation_target(r, done, 1.0, atoms,
                                           model.k_atoms * model.n_critics, zero)[0] -
                q_true;
    sample[4] = quantile_truncation_target(
                    r, done, 1.0, atoms, model.k_atoms * model.n_critics - model.beta, zero)[0] -
                q_true;
    for (int v = 0; v < 5; ++v) {
      sum[v] += sample[v];
      sum_sq[v] += sample[v] * sample[v];
    }
  }

  const Variant variants[5] = {Variant::kHybridTd3, Variant::kHyDatd3, Variant::kHyDarc,
                               Variant::kHyTqc, Variant::kHyAcc};
  // Known approximation gaps of the closed forms themselves (documented):
  // exact for the clipped-min expectation, Gaussian-aggregation error for
  // DATD3/DARC, Blom order-statistic gap for TQC/ACC.
  const double approx_slack[5] = {0.0, 6e-4, 6e-4, 1e-3, 1e-3};
  bool ok = true;
  for (int v = 0; v < 5; ++v) {
    const double mean = sum[v] / n_samples;
    const double var = std::max(0.0, sum_sq[v] / n_samples - mean * mean);
    const double se = std::sqrt(var / n_samples);
    const double closed = variant_bias(model, variants[v]);
    const double gap = std::fabs(closed - mean);
    const bool strict = gap <= 3.0 * se;
    const bool with_slack = gap <= 3.0 * se + approx_slack[v] * model.sigma;
    ok = ok && strict;
    std::printf("  %-11s closed %+.6f sim %+.6f gap %.2e vs 3se %.2e -> %s%s\n",
                variant_name(variants[v]), closed, mean, gap, 3.0 * se,
                strict ? "ok" : "FAIL (strict 3se)",
                strict ? "" : with_slack ? "; within documented approximation slack" : "");
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  runtime %.1fs (budget 120s)\n", elapsed);
  if (!ok)
    std::printf(
        "  note: the TQC/ACC closed forms are Blom sums; their gap to the exact order-statistic\n"
        "  mean (~6e-4 sigma) exceeds 3 standard errors at 1e6 samples by construction.\n");
  return {4, ok && elapsed < 120.0,
          "five target rules on synthetic errors reproduce variant_bias within 3 SE at 1e6"};
}

// ---- criterion 5: gradient correctness ---------------------------------------

Criterion criterion_5() {
  Rng rng(55);
  const Activation hiddens[] = {Activation::kRelu, Activation::kTanh};
  const OutputActivation outputs[] = {OutputActivation::kIdentity, OutputActivation::kTanh,
                                      OutputActivation::kSoftmax};
  bool ok = true;
  double worst = 0.0;
  for (int arch = 0; arch < 20; ++arch) {
    std::vector<int> widths{1 + static_cast<int>(rng.uniform_index(6))};
    const int n_hidden = 1 + static_cast<int>(rng.uniform_index(3));
    for (int l = 0; l < n_hidden; ++l) widths.push_back(2 + static_cast<int>(rng.uniform_index(8)));
    widths.push_back(1 + static_cast<int>(rng.uniform_index(4)));
    Mlp net(widths, hiddens[arch % 2], outputs[arch % 3], rng);

    const int batch = 1 + static_cast<int>(rng.uniform_index(4));
    Tensor x({batch, widths.front()});
    for (double& v : x.data) v = rng.normal();
    Tensor coef({batch, widths.back()});
    for (double& v : coef.data) v = rng.normal();

    MlpTrace tr;
    net.forward(x, &tr);
    const MlpGrads g = net.backward(tr, coef);
    auto loss = [&](const Mlp& n) {
      const Tensor out = n.forward(x);
      double acc = 0.0;
      for (std::size_t j = 0; j < out.data.size(); ++j) acc += coef.data[j] * out.data[j];
      return acc;
    };
    for (int probe = 0; probe < 50; ++probe) {
      const std::size_t t = rng.uniform_index(net.params().size());
      const std::size_t i = rng.uniform_index(net.params()[t].numel());
      Mlp b = net;
      b.mutable_params()[t].data[i] += 1e-5;
      const double up = loss(b);
      b.mutable_params()[t].data[i] -= 2e-5;
      const double dn = loss(b);
      const double fd = (up - dn) / 2e-5;
      const double rel = std::fabs(g.params[t].data[i] - fd) /
                         std::max(1e-8, std::fabs(g.params[t].data[i]) + std::fabs(fd));
      worst = std::max(worst, rel);
      ok = ok && rel < 1e-4;
    }
  }
  std::printf("  worst relative error %.2e over 20 architectures x 50 parameters\n", worst);
  return {5, ok, "reverse-mode gradients match central finite differences below 1e-4"};
}

// ---- criterion 6: bias-probe exactness ---------------------------------------

Criterion criterion_6() {
  const double gamma = 0.9;
  ChainMdpEnv chain(1.0, 2.0);
  Rng rng(66);
  auto policy = [](const std::vector<double>&, Rng&) { return HybridAction{}; };
  auto exact_q = [&](const std::vector<double>& obs, const HybridAction&) {
    const int state = obs[0] == 1.0 ? 0 : (obs[1] == 1.0 ? 1 : 2);
    return chain.exact_q(state, gamma);
  };
  const BiasStats zero = estimation_bias_generic(chain, policy, exact_q, 3, gamma, rng, true);
  auto shifted_q = [&](const std::vector<double>& obs, const HybridAction& a) {
    return exact_q(obs, a) + 0.25;
  };
  const BiasStats shifted = estimation_bias_generic(chain, policy, shifted_q, 3, gamma, rng, true);
  const bool ok = std::fabs(zero.mean) < 1e-10 && std::fabs(shifted.mean + 0.25) < 1e-10;
  std::printf("  exact-critic bias %.2e, shifted-critic bias error %.2e\n", zero.mean,
              std::fabs(shifted.mean + 0.25));
  return {6, ok, "estimation bias matches the chain-MDP hand value to 1e-10"};
}

// ---- criteria 7 and 8: learning smoke test -----------------------------------

RunConfig smoke_config(const std::string& variant, const std::string& out_dir) {
  RunConfig cfg;
  cfg.task = "reach";
  cfg.variant = variant;
  cfg.seeds = {1, 2, 3, 4};
  cfg.episodes = 2000;
  cfg.epoch_episodes = 50;
  cfg.eval_episodes = 5;
  cfg.bias_episodes = 5;
  cfg.out_dir = out_dir;
  cfg.n_workers = 4;  // harmless on one core, parallel elsewhere
  cfg.agent.hidden = {32, 32};
  cfg.agent.batch_size = 64;
  cfg.agent.warmup_steps = 1000;
  cfg.agent.eps_anneal_steps = 16000;
  cfg.agent.weighting = TargetWeighting::kExpectation;
  return cfg;
}

std::pair<Criterion, Criterion> criteria_7_8() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir = "acceptance_runs";
  fs::create_directories(dir);

  std::printf("  training hybrid_td3, ddpg, hydatd3 x 4 seeds x 2000 episodes (cached in %s)\n",
              dir.c_str());
  const auto td3_logs = run_experiment(smoke_config("hybrid_td3", dir));
  const auto ddpg_logs = run_experiment(smoke_config("ddpg", dir));
  const auto datd3_logs = run_experiment(smoke_config("hydatd3", dir));

  Rng base_rng(20260807);
  const double random_floor = random_policy_return(PointMassEnv(smoke_config("x", dir).env), 200,
                                                   base_rng);

  bool above_random = true;
  int beats_ddpg = 0;
  double td3_bias_mean = 0.0, datd3_bias_mean = 0.0;
  bool any_failed = false;
  for (int i = 0; i < 4; ++i) {
    any_failed = any_failed || td3_logs[i].failed || ddpg_logs[i].failed || datd3_logs[i].failed;
    if (any_failed) continue;
    const double td3_ret = final_window_return(td3_logs[i]);
    const double ddpg_ret = final_window_return(ddpg_logs[i]);
    const double td3_bias = final_window_bias(td3_logs[i]);
    const double datd3_bias = final_window_bias(datd3_logs[i]);
    above_random = above_random && td3_ret > random_floor;
    if (td3_ret >= ddpg_ret) ++beats_ddpg;
    td3_bias_mean += td3_bias / 4.0;
    datd3_bias_mean += datd3_bias / 4.0;
    std::printf(
        "  seed %d: td3 return %7.3f (bias %+7.3f) | ddpg return %7.3f | datd3 bias %+7.3f\n",
        td3_logs[i].seed, td3_ret, td3_bias, ddpg_ret, datd3_bias);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  random-policy floor %.3f; runtime %.0fs\n", random_floor, elapsed);

  const bool c7 = !any_failed && above_random && beats_ddpg >= 3;
  std::printf("  c7: above random in %s, >= ddpg in %d/4 seeds\n",
              above_random ? "4/4" : "<4/4", beats_ddpg);

  // The probe reports G_t - Q (underestimation positive); the reference
  // ordering and the estimation-bias figures are stated with overestimation
  // positive (Q - G). "TD3 bias <= DATD3 bias" therefore compares -probe:
  // the less overestimating TD3 must sit at or below DATD3.
  const double td3_over = -td3_bias_mean;
  const double datd3_over = -datd3_bias_mean;
  const bool c8 = !any_failed && td3_over <= datd3_over;
  std::printf(
      "  c8: overestimation (Q - G) means: td3 %+0.4f vs datd3 %+0.4f"
      " (probe G - Q means: %+0.4f vs %+0.4f)\n",
      td3_over, datd3_over, td3_bias_mean, datd3_bias_mean);

  return {{7, c7, "hybrid TD3 beats the random floor 4/4 and matches DDPG in >= 3/4 seeds"},
          {8, c8,
           "hybrid TD3 overestimates no more than HyDATD3 (4-seed mean, Q - G convention)"}};
}

// ---- criterion 9: determinism -------------------------------------------------

Criterion criterion_9() {
  bool ok = true;
  // Byte-compares every CSV (and, for good measure, JSON) output of two runs.
  auto compare_outputs = [](const std::string& dir_a, const std::string& dir_b,
                            const char* label) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir_a)) {
      const auto ext = e.path().extension();
      const std::string name = e.path().filename().string();
      // resolved_config_* records the output path itself, so it necessarily
      // differs between the two directories.
      if ((ext == ".csv" || ext == ".json") && name.rfind("resolved_config_", 0) != 0)
        names.insert(name);
    }
    bool same_all = !names.empty();
    for (const std::string& name : names) {
      const bool same = slurp(dir_a + "/" + name) == slurp(dir_b + "/" + name);
      if (!same) std::printf("  MISMATCH in %s\n", name.c_str());
      same_all = same_all && same;
    }
    std::printf("  %s: %zu output file(s) byte-identical across two runs: %s\n", label,
                names.size(), same_all ? "yes" : "NO");
    return same_all;
  };

  // Analytic subcommands.
  for (const std::string cmd :
       {std::string("bias-table"), std::string("ordering"),
        std::string("bias-check --samples 50000 --seed 3 --shards 4")}) {
    const std::string a = "acceptance_c9_a", b = "acceptance_c9_b";
    fs::remove_all(a);
    fs::remove_all(b);
    run_cli(cmd + " --out-dir " + a);
    run_cli(cmd + " --out-dir " + b);
    ok = compare_outputs(a, b, cmd.substr(0, cmd.find(' ')).c_str()) && ok;
  }

  // Training subcommand on a tiny config (exercises the full stack).
  {
    RunConfig tiny;
    tiny.task = "reach";
    tiny.variant = "hybrid_td3";
    tiny.seeds = {1, 2};
    tiny.episodes = 4;
    tiny.epoch_episodes = 2;
    tiny.eval_episodes = 2;
    tiny.bias_episodes = 2;
    tiny.buffer_capacity = 2048;
    tiny.env.max_steps = 15;
    tiny.agent.hidden = {8, 8};
    tiny.agent.batch_size = 8;
    tiny.agent.warmup_steps = 16;
    write_json("acceptance_c9_tiny.json", run_config_to_json(tiny));
    const std::string a = "acceptance_c9_train_a", b = "acceptance_c9_train_b";
    fs::remove_all(a);
    fs::remove_all(b);
    if (run_cli("train --config acceptance_c9_tiny.json --out-dir " + a) != 0) ok = false;
    if (run_cli("train --config acceptance_c9_tiny.json --out-dir " + b) != 0) ok = false;
    ok = compare_outputs(a, b, "train") && ok;
  }
  return {9, ok, "repeated executions produce byte-identical CSV outputs"};
}

// ---- criterion 10: Welford stability ------------------------------------------

Criterion criterion_10() {
  Rng rng(1010);
  WelfordState w(1);
  std::vector<double> xs(1'000'000);
  for (auto& x : xs) {
    x = 1e6 + rng.normal();
    w.update({x});
  }
  const auto tp = oracles::two_pass(xs);
  const double mean_rel = std::fabs(w.mean()[0] - tp.mean) / std::fabs(tp.mean);
  const double var_rel = std::fabs(w.variance()[0] - tp.variance) / tp.variance;
  std::printf("  relative errors: mean %.2e, variance %.2e (budget 1e-9)\n", mean_rel, var_rel);
  return {10, mean_rel < 1e-9 && var_rel < 1e-9,
          "single-pass statistics match two-pass on a high-mean stream within 1e-9"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) selected.insert(std::stoi(tok));
    }
  }
  const auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  std::vector<Criterion> results;
  const auto banner = [](int id) { std::printf("--- criterion %d ---\n", id); };
  if (want(1)) { banner(1); results.push_back(criterion_1()); }
  if (want(2)) { banner(2); results.push_back(criterion_2()); }
  if (want(3)) { banner(3); results.push_back(criterion_3()); }
  if (want(4)) { banner(4); results.push_back(criterion_4()); }
  if (want(5)) { banner(5); results.push_back(criterion_5()); }
  if (want(6)) { banner(6); results.push_back(criterion_6()); }
  if (want(7) || want(8)) {
    banner(7);
    const auto [c7, c8] = criteria_7_8();
    if (want(7)) results.push_back(c7);
    if (want(8)) results.push_back(c8);
  }
  if (want(9)) { banner(9); results.push_back(criterion_9()); }
  if (want(10)) { banner(10); results.push_back(criterion_10()); }

  int failures = 0;
  for (const Criterion& c : results) {
    std::printf("[%s] criterion %d: %s\n", c.passed ? "PASS" : "FAIL", c.id, c.summary.c_str());
    if (!c.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
