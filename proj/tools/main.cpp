// Experiment runner over the power-control library: offline solves, online
// value iteration, policy comparisons across source correlations, and buffer
// overflow sweeps. Batch tool: reads a JSON config, writes CSV/JSON plus a
// manifest into the output directory.
//
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
// 4 invariant violation detected in the outputs.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ehpc/baselines.hpp"
#include "ehpc/io.hpp"
#include "ehpc/model.hpp"
#include "ehpc/offline.hpp"
#include "ehpc/online.hpp"
#include "ehpc/sim.hpp"

using nlohmann::json;
using namespace ehpc;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Config {
  SystemParams params{0.7, 0.3, 0.7, 0.8, 0.5};

  EnergyTrace e1, e2;        // offline traces
  double offline_eps = 1e-6;

  int L1 = 12, L2 = 12, e1max = 5, e2max = 3;
  double alpha = 0.95, delta = 1.0;
  double vi_eps = 1e-3;

  std::vector<double> sqrt_eta;  // compare grid
  int mc_runs = 24, mc_horizon = 4000;
  int offline_T = 40, offline_runs = 24;

  std::vector<int> L_list;  // overflow sweep
  int of_e1max = 8, of_e2max = 6;

  std::uint64_t seed = 2024;

  OnlineModel online_model() const {
    return {L1, L2, e1max, e2max, alpha, delta, params};
  }
};

// Reference constants: sqrt(eta) = 0.8367, weights (0.3, 0.7), gains
// (0.8, 0.5), the two 10-slot harvest realizations, alpha = 0.99, delta = 1.
void apply_paper_defaults(Config& c) {
  c.params = {0.7, 0.3, 0.7, 0.8, 0.5};
  c.e1 = {5, 6, 2, 4, 9, 2, 10, 8, 6, 7};
  c.e2 = {5, 10, 2, 9, 10, 9, 2, 4, 5, 9};
  c.alpha = 0.99;
  c.delta = 1.0;
}

void apply_scale(Config& c, const std::string& scale) {
  if (scale == "ci") {
    c.L1 = c.L2 = 12;
    c.e1max = 5;
    c.e2max = 3;
    c.alpha = 0.95;
  } else if (scale == "paper") {
    c.L1 = c.L2 = 30;
    c.e1max = 8;
    c.e2max = 5;
    c.alpha = 0.99;
  }
}

void merge_json(Config& c, const json& j) {
  if (j.contains("system")) {
    const json& s = j["system"];
    if (s.contains("eta")) c.params.eta = s["eta"];
    if (s.contains("w1")) c.params.w1 = s["w1"];
    if (s.contains("w2")) c.params.w2 = s["w2"];
    if (s.contains("h1")) c.params.h1 = s["h1"];
    if (s.contains("h2")) c.params.h2 = s["h2"];
  }
  if (j.contains("offline")) {
    const json& o = j["offline"];
    if (o.contains("e1")) c.e1 = o["e1"].get<EnergyTrace>();
    if (o.contains("e2")) c.e2 = o["e2"].get<EnergyTrace>();
    if (o.contains("eps")) c.offline_eps = o["eps"];
  }
  if (j.contains("online")) {
    const json& o = j["online"];
    if (o.contains("L1")) c.L1 = o["L1"];
    if (o.contains("L2")) c.L2 = o["L2"];
    if (o.contains("e1max")) c.e1max = o["e1max"];
    if (o.contains("e2max")) c.e2max = o["e2max"];
    if (o.contains("alpha")) c.alpha = o["alpha"];
    if (o.contains("delta")) c.delta = o["delta"];
    if (o.contains("eps")) c.vi_eps = o["eps"];
  }
  if (j.contains("compare")) {
    const json& o = j["compare"];
    if (o.contains("sqrt_eta")) c.sqrt_eta = o["sqrt_eta"].get<std::vector<double>>();
    if (o.contains("runs")) c.mc_runs = o["runs"];
    if (o.contains("horizon")) c.mc_horizon = o["horizon"];
    if (o.contains("offline_T")) c.offline_T = o["offline_T"];
    if (o.contains("offline_runs")) c.offline_runs = o["offline_runs"];
  }
  if (j.contains("overflow")) {
    const json& o = j["overflow"];
    if (o.contains("L")) c.L_list = o["L"].get<std::vector<int>>();
    if (o.contains("e1max")) c.of_e1max = o["e1max"];
    if (o.contains("e2max")) c.of_e2max = o["e2max"];
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
}

json config_echo(const Config& c) {
  json j;
  j["system"] = {{"eta", c.params.eta}, {"w1", c.params.w1}, {"w2", c.params.w2},
                 {"h1", c.params.h1},   {"h2", c.params.h2}};
  j["offline"] = {{"e1", c.e1}, {"e2", c.e2}, {"eps", c.offline_eps}};
  j["online"] = {{"L1", c.L1},       {"L2", c.L2},     {"e1max", c.e1max},
                 {"e2max", c.e2max}, {"alpha", c.alpha}, {"delta", c.delta},
                 {"eps", c.vi_eps}};
  j["compare"] = {{"sqrt_eta", c.sqrt_eta},
                  {"runs", c.mc_runs},
                  {"horizon", c.mc_horizon},
                  {"offline_T", c.offline_T},
                  {"offline_runs", c.offline_runs}};
  j["overflow"] = {{"L", c.L_list}, {"e1max", c.of_e1max}, {"e2max", c.of_e2max}};
  j["seed"] = c.seed;
  return j;
}

int thread_budget() {
  if (const char* env = std::getenv("EHPC_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(k) for k in [0, n) on up to thread_budget() workers. Each index
// owns its output slot, so the result does not depend on the worker count.
void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(n, thread_budget());
  if (workers <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int k = next.fetch_add(1); k < n; k = next.fetch_add(1)) fn(k);
    });
  for (auto& t : pool) t.join();
}

struct RunContext {
  std::string out_dir;
  std::string command;
  Config cfg;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write_manifest(json extra = {}) const {
    json m;
    m["schema_version"] = io::kSchemaVersion;
    m["tool_version"] = kVersion;
    m["command"] = command;
    m["config"] = config_echo(cfg);
    m["seed"] = cfg.seed;
    m["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    if (!extra.is_null()) m["run"] = std::move(extra);
    io::write_json(out_dir + "/manifest.json", m);
  }
};

json structure_to_json(const StructureReport& rep) {
  json j;
  const auto bands = [](const std::vector<StructureBand>& bs) {
    json arr = json::array();
    for (const auto& b : bs)
      arr.push_back({{"start", b.start}, {"end", b.end}, {"level", b.level}});
    return arr;
  };
  j["bands1"] = bands(rep.bands1);
  j["bands2"] = bands(rep.bands2);
  j["depletion1"] = rep.depletion1;
  j["depletion2"] = rep.depletion2;
  json viols = json::array();
  for (const auto& v : rep.violations)
    viols.push_back({{"node", v.node}, {"slot", v.slot}, {"what", v.what}});
  j["violations"] = std::move(viols);
  return j;
}

int run_offline(RunContext& ctx, const std::string& oracle) {
  Config& c = ctx.cfg;
  if (c.e1.empty() || c.e2.empty())
    throw std::invalid_argument(
        "offline: energy traces missing (set offline.e1/e2 or --paper-defaults)");
  c.params.validate();

  const DirectionalWfResult init = directional_wf_single(c.e1);
  const GbwfResult res = iterative_gbwf(c.e1, c.e2, c.params, c.offline_eps);
  io::write_schedule_csv(ctx.out_dir + "/schedule.csv", res.p1, res.p2, c.params);

  const StructureReport rep =
      verify_structure(res.p1, res.p2, c.e1, c.e2, c.params, 1e-5);
  io::write_json(ctx.out_dir + "/structure.json", structure_to_json(rep));

  json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["objective"] = res.objective;
  summary["iterations"] = res.iterations;
  summary["structure_ok"] = rep.ok();
  json init_bands = json::array();
  for (const auto& b : init.bands)
    init_bands.push_back({{"start", b.start}, {"end", b.end}, {"power", b.power}});
  summary["node1_single_user_bands"] = std::move(init_bands);

  if (oracle != "none") {
    const OracleMode mode =
        oracle == "exhaustive" ? OracleMode::exhaustive : OracleMode::descent;
    const OfflineOracleResult ref = offline_oracle(c.e1, c.e2, c.params, mode);
    summary["oracle"] = oracle;
    summary["oracle_objective"] = ref.objective;
    summary["oracle_rel_gap"] =
        std::abs(ref.objective - res.objective) / std::max(1e-300, res.objective);
  }
  io::write_json(ctx.out_dir + "/summary.json", summary);
  ctx.write_manifest(summary);
  return rep.ok() ? 0 : 4;
}

// Checks that a cost vector never rises when either buffer level grows.
bool value_monotone(const std::vector<double>& v, int L1, int L2) {
  for (int i = 1; i <= L1; ++i)
    for (int j = 1; j <= L2; ++j) {
      const double here = v[encode_state(i, j, L2) - 1];
      if (i < L1 && v[encode_state(i + 1, j, L2) - 1] > here + 1e-12) return false;
      if (j < L2 && v[encode_state(i, j + 1, L2) - 1] > here + 1e-12) return false;
    }
  return true;
}

int run_online(RunContext& ctx, bool convergence_only, int episode_slots = 0) {
  Config& c = ctx.cfg;
  const OnlineModel m = c.online_model();
  m.validate();
  const ValueIterationResult vi = value_iteration(m, c.vi_eps);
  io::write_trace_csv(ctx.out_dir + "/trace.csv", vi.trace);

  bool geometric = true;
  for (std::size_t l = 1; l + 1 < vi.trace.size(); ++l) {
    const double prev = vi.trace[l].second, next = vi.trace[l + 1].second;
    if (prev < 1e-15) break;
    if (next / prev > m.alpha + 0.01) geometric = false;
  }

  json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["iterations"] = vi.iterations;
  summary["residual_sup"] = vi.residual_sup;
  summary["geometric_decay"] = geometric;

  if (convergence_only) {
    io::write_json(ctx.out_dir + "/summary.json", summary);
    ctx.write_manifest(summary);
    return geometric ? 0 : 4;
  }

  const TransferMatrix P = transfer_matrix(vi.policy, m);
  const std::vector<double> pi = stationary_distribution(P);
  double expected = 0.0;
  for (int s = 0; s < m.num_states(); ++s) expected += pi[s] * vi.v[s];

  io::write_policy_csv(ctx.out_dir + "/value.csv", vi.policy, vi.v, pi, m.L2);
  io::write_json(ctx.out_dir + "/solution.json",
                 io::online_solution_json(vi, pi, expected));

  if (episode_slots > 0) {
    SimOptions opts;
    opts.cost_vector = &vi.v;
    opts.record_slots = true;
    opts.burn_in = 0;
    const EpisodeResult ep = simulate_episode(
        policy_fn(vi.policy, m), m, episode_slots, derive_seed(c.seed, 1), opts);
    io::write_episode_jsonl(ctx.out_dir + "/episode_slots.jsonl", ep);
  }

  const bool monotone = value_monotone(vi.v, m.L1, m.L2);
  summary["expected_distortion"] = expected;
  summary["value_monotone"] = monotone;
  io::write_json(ctx.out_dir + "/summary.json", summary);
  ctx.write_manifest(summary);
  return (geometric && monotone) ? 0 : 4;
}

struct CompareRow {
  std::string policy;
  double sqrt_eta, eta;
  double expected, se;
  bool analytic;
};

int run_compare(RunContext& ctx) {
  Config& c = ctx.cfg;
  if (c.sqrt_eta.empty()) c.sqrt_eta = {0.3, 0.5, 0.7, 0.9};
  const int G = static_cast<int>(c.sqrt_eta.size());

  struct PointResult {
    double online_a, online_mc, online_se;
    double greedy_a, greedy_mc, greedy_se;
    double offline_mc, offline_se;
    double sf_mc, sf_se;
    std::vector<double> online_runs, greedy_runs, offline_runs, sf_runs;
  };
  std::vector<PointResult> pts(G);

  parallel_for(G, [&](int g) {
    Config local = c;
    local.params.eta = c.sqrt_eta[g] * c.sqrt_eta[g];
    const OnlineModel m = local.online_model();
    m.validate();

    PointResult& out = pts[g];
    const ValueIterationResult vi = value_iteration(m, local.vi_eps);
    out.online_a = expected_distortion(vi.v, vi.policy, m);
    const McSummary mco = monte_carlo(policy_fn(vi.policy, m), m, local.mc_horizon,
                                      local.mc_runs, derive_seed(local.seed, 100 + g));
    out.online_mc = mco.mean;
    out.online_se = mco.stderr_mean;
    out.online_runs = mco.episode_means;

    const PolicyTable greedy = greedy_policy(m);
    const std::vector<double> vg = policy_value_exact(greedy, m);
    out.greedy_a = expected_distortion(vg, greedy, m);
    const McSummary mcg = monte_carlo(policy_fn(greedy, m), m, local.mc_horizon,
                                      local.mc_runs, derive_seed(local.seed, 200 + g));
    out.greedy_mc = mcg.mean;
    out.greedy_se = mcg.stderr_mean;
    out.greedy_runs = mcg.episode_means;

    // Trace-driven baselines on common random traces across the eta grid
    // (same seeds for every g, so each column is pathwise monotone in eta).
    std::vector<double> off_means(local.offline_runs), sf_means(local.offline_runs);
    const double mean1 = (m.e1max + 1) / 2.0, mean2 = (m.e2max + 1) / 2.0;
    for (int r = 0; r < local.offline_runs; ++r) {
      const EnergyTrace t1 = generate_arrivals(
          {m.e1max, derive_seed(local.seed, 2 * r)}, local.offline_T);
      const EnergyTrace t2 = generate_arrivals(
          {m.e2max, derive_seed(local.seed, 2 * r + 1)}, local.offline_T);
      const GbwfResult sol = iterative_gbwf(t1, t2, local.params, local.offline_eps);
      off_means[r] = sol.objective / local.offline_T;
      const PowerSchedule s1 = save_and_forward(t1, {-1, mean1});
      const PowerSchedule s2 = save_and_forward(t2, {-1, mean2});
      sf_means[r] = offline_objective(s1, s2, local.params) / local.offline_T;
    }
    const auto mean_se = [](const std::vector<double>& xs, double& mean, double& se) {
      mean = 0.0;
      for (double x : xs) mean += x;
      mean /= xs.size();
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      se = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1.0) / xs.size()) : 0.0;
    };
    mean_se(off_means, out.offline_mc, out.offline_se);
    mean_se(sf_means, out.sf_mc, out.sf_se);
    out.offline_runs = std::move(off_means);
    out.sf_runs = std::move(sf_means);
  });

  std::vector<io::EpisodeRow> episodes;
  for (int g = 0; g < G; ++g) {
    const auto emit = [&](const char* policy, const std::vector<double>& runs) {
      for (std::size_t r = 0; r < runs.size(); ++r)
        episodes.push_back({policy, c.sqrt_eta[g], static_cast<int>(r), runs[r]});
    };
    emit("online", pts[g].online_runs);
    emit("greedy", pts[g].greedy_runs);
    emit("offline", pts[g].offline_runs);
    emit("saveforward", pts[g].sf_runs);
  }
  io::write_episodes_csv(ctx.out_dir + "/episodes.csv", episodes);

  bool order_ok = true, monotone_ok = true;
  auto out = io::open_out(ctx.out_dir + "/compare.csv");
  out << "policy,sqrt_eta,eta,expected_distortion,stderr,analytic,"
         "ok_offline_le_online,ok_online_le_greedy\n";
  for (int g = 0; g < G; ++g) {
    const PointResult& p = pts[g];
    const bool ok1 = p.offline_mc <= p.online_a + 2.0 * p.offline_se;
    const bool ok2 = p.online_a <= p.greedy_a + 1e-12;
    order_ok = order_ok && ok1 && ok2;
    const double eta = c.sqrt_eta[g] * c.sqrt_eta[g];
    const auto row = [&](const char* name, double v, double se, bool analytic) {
      out << name << ',' << io::fmt(c.sqrt_eta[g]) << ',' << io::fmt(eta) << ','
          << io::fmt(v) << ',' << io::fmt(se) << ',' << (analytic ? 1 : 0) << ','
          << (ok1 ? 1 : 0) << ',' << (ok2 ? 1 : 0) << '\n';
    };
    row("offline", p.offline_mc, p.offline_se, false);
    row("online", p.online_a, 0.0, true);
    row("online_mc", p.online_mc, p.online_se, false);
    row("greedy", p.greedy_a, 0.0, true);
    row("greedy_mc", p.greedy_mc, p.greedy_se, false);
    row("saveforward", p.sf_mc, p.sf_se, false);
  }
  for (int g = 0; g + 1 < G; ++g) {
    if (pts[g + 1].online_a > pts[g].online_a + 1e-12) monotone_ok = false;
    if (pts[g + 1].greedy_a > pts[g].greedy_a + 1e-12) monotone_ok = false;
    if (pts[g + 1].offline_mc > pts[g].offline_mc + 1e-9) monotone_ok = false;
    if (pts[g + 1].sf_mc > pts[g].sf_mc + 1e-9) monotone_ok = false;
  }

  json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["ordering_ok"] = order_ok;
  summary["monotone_in_correlation"] = monotone_ok;
  io::write_json(ctx.out_dir + "/summary.json", summary);
  ctx.write_manifest(summary);
  return (order_ok && monotone_ok) ? 0 : 4;
}

int run_overflow(RunContext& ctx) {
  Config& c = ctx.cfg;
  if (c.L_list.empty())
    for (int L = 4; L <= 14; ++L) c.L_list.push_back(L);
  const int G = static_cast<int>(c.L_list.size());

  struct Row {
    double q1, q2, mc1, se1, mc2, se2;
  };
  std::vector<Row> rows(G);
  parallel_for(G, [&](int g) {
    Config local = c;
    const int L = c.L_list[g];
    OnlineModel m{L, L, c.of_e1max, c.of_e2max, c.alpha, c.delta, local.params};
    m.validate();
    const ValueIterationResult vi = value_iteration(m, local.vi_eps);
    const auto [q1, q2] = overflow_probability(vi.policy, m);
    const McSummary mc = monte_carlo(policy_fn(vi.policy, m), m, local.mc_horizon,
                                     local.mc_runs, derive_seed(local.seed, 300 + g));
    const double n = static_cast<double>(local.mc_runs) *
                     std::max(1, local.mc_horizon - 100);
    rows[g] = {q1,
               q2,
               mc.overflow_rate1,
               std::sqrt(std::max(q1 * (1 - q1), 1e-12) / n),
               mc.overflow_rate2,
               std::sqrt(std::max(q2 * (1 - q2), 1e-12) / n)};
  });

  bool monotone = true;
  auto out = io::open_out(ctx.out_dir + "/overflow.csv");
  out << "L,q1,q2,mc_q1,mc_se1,mc_q2,mc_se2\n";
  for (int g = 0; g < G; ++g) {
    out << c.L_list[g] << ',' << io::fmt(rows[g].q1) << ',' << io::fmt(rows[g].q2)
        << ',' << io::fmt(rows[g].mc1) << ',' << io::fmt(rows[g].se1) << ','
        << io::fmt(rows[g].mc2) << ',' << io::fmt(rows[g].se2) << '\n';
    if (g > 0 && (rows[g].q1 > rows[g - 1].q1 + 1e-9 ||
                  rows[g].q2 > rows[g - 1].q2 + 1e-9))
      monotone = false;
  }

  json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["monotone_in_L"] = monotone;
  io::write_json(ctx.out_dir + "/summary.json", summary);
  ctx.write_manifest(summary);
  return monotone ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power scheduling experiments for two energy-harvesting sensors"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", oracle = "none", scale = "ci";
  bool paper_defaults = false;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_flag("--paper-defaults", paper_defaults,
                  "inject the reference constants and harvest traces");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed_flag, "base seed")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("--scale", scale, "model scale: ci or paper")
        ->check(CLI::IsMember({"ci", "paper"}));
  };

  CLI::App* off = app.add_subcommand("offline", "solve a finite-horizon instance");
  add_common(off);
  off->add_option("--oracle", oracle, "reference solver: none, exhaustive, descent")
      ->check(CLI::IsMember({"none", "exhaustive", "descent"}));
  CLI::App* onl = app.add_subcommand("online", "solve the stationary policy");
  add_common(onl);
  int episode_slots = 0;
  onl->add_option("--episode-slots", episode_slots,
                  "also log one simulated episode of this length as JSON lines");
  CLI::App* cmp = app.add_subcommand("compare",
                                     "policy comparison across correlations");
  add_common(cmp);
  CLI::App* ovf = app.add_subcommand("overflow", "buffer overflow sweep");
  add_common(ovf);
  CLI::App* cnv = app.add_subcommand("convergence", "value-iteration error trace");
  add_common(cnv);

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx;
    if (paper_defaults) apply_paper_defaults(ctx.cfg);
    apply_scale(ctx.cfg, scale);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot read config: " + config_path);
      json j;
      in >> j;
      merge_json(ctx.cfg, j);
    }
    if (seed_set) ctx.cfg.seed = seed_flag;

    std::filesystem::create_directories(out_dir);
    ctx.out_dir = out_dir;

    int rc = 0;
    if (off->parsed()) {
      ctx.command = "offline";
      rc = run_offline(ctx, oracle);
    } else if (onl->parsed()) {
      ctx.command = "online";
      rc = run_online(ctx, false, episode_slots);
    } else if (cnv->parsed()) {
      ctx.command = "convergence";
      rc = run_online(ctx, true);
    } else if (cmp->parsed()) {
      ctx.command = "compare";
      rc = run_compare(ctx);
    } else if (ovf->parsed()) {
      ctx.command = "overflow";
      rc = run_overflow(ctx);
    }
    if (rc == 4)
      std::cerr << "invariant violation detected; see " << out_dir << "/summary.json\n";
    return rc;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
}
