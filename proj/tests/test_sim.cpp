#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ehpc/baselines.hpp"
#include "ehpc/sim.hpp"

using namespace ehpc;

namespace {
const SystemParams kPaper{0.7, 0.3, 0.7, 0.8, 0.5};
OnlineModel ci_model() { return {12, 12, 5, 3, 0.95, 1.0, kPaper}; }
}  // namespace

TEST_CASE("arrival generation is deterministic and in range") {
  const ArrivalSpec spec{5, 12345};
  const EnergyTrace a = generate_arrivals(spec, 500);
  const EnergyTrace b = generate_arrivals(spec, 500);
  CHECK(a == b);
  for (double v : a) {
    CHECK(v >= 1.0);
    CHECK(v <= 5.0);
    CHECK(v == std::floor(v));
  }
  const EnergyTrace ones = generate_arrivals({1, 9}, 50);
  for (double v : ones) CHECK(v == 1.0);
}

TEST_CASE("arrival mean matches the uniform distribution") {
  const int n = 100000, emax = 5;
  const EnergyTrace a = generate_arrivals({emax, 99}, n);
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= n;
  const double sigma = std::sqrt((emax * emax - 1.0) / 12.0) / std::sqrt(double(n));
  CHECK_THAT(mean, Catch::Matchers::WithinAbs((emax + 1.0) / 2.0, 3.0 * sigma));
}

TEST_CASE("single-state episodes are constant") {
  const OnlineModel m{1, 1, 1, 1, 0.9, 1.0, kPaper};
  const PolicyFn rho = policy_fn(greedy_policy(m), m);
  const EpisodeResult ep = simulate_episode(rho, m, 50, 7);
  CHECK_THAT(ep.mean_distortion,
             Catch::Matchers::WithinRel(state_distortion(1, 1, m), 1e-14));
  CHECK(ep.overflow1 == 0);
  CHECK(ep.overflow2 == 0);
}

TEST_CASE("episodes are bitwise reproducible") {
  const OnlineModel m = ci_model();
  const ValueIterationResult vi = value_iteration(m, 1e-4);
  SimOptions opts;
  opts.record_slots = true;
  const PolicyFn rho = policy_fn(vi.policy, m);
  const EpisodeResult a = simulate_episode(rho, m, 1000, 42, opts);
  const EpisodeResult b = simulate_episode(rho, m, 1000, 42, opts);
  CHECK(a.mean_distortion == b.mean_distortion);
  CHECK(a.overflow1 == b.overflow1);
  REQUIRE(a.slots.size() == b.slots.size());
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    CHECK(a.slots[k].s == b.slots[k].s);
    CHECK(a.slots[k].distortion == b.slots[k].distortion);
  }
  // Actions stay within the buffer levels along the whole path.
  for (const SlotRecord& rec : a.slots) {
    const auto [i, j] = decode_state(rec.s, m.L2);
    CHECK(rec.p1 <= i);
    CHECK(rec.p2 <= j);
  }
}

TEST_CASE("infeasible policies are reported with the state") {
  const OnlineModel m{3, 3, 2, 2, 0.9, 1.0, kPaper};
  const PolicyFn bad = [](int i, int j) { return std::pair<int, int>{i + 1, j}; };
  CHECK_THROWS_AS(simulate_episode(bad, m, 10, 1), SimulationError);
}

TEST_CASE("monte carlo aggregates match a single episode") {
  const OnlineModel m = ci_model();
  const PolicyFn rho = policy_fn(greedy_policy(m), m);
  const McSummary mc = monte_carlo(rho, m, 2000, 1, 9);
  const EpisodeResult ep = simulate_episode(rho, m, 2000, derive_seed(9, 0));
  CHECK(mc.mean == ep.mean_distortion);
  CHECK(mc.stderr_mean == 0.0);
}

TEST_CASE("standard error shrinks like the square root of the run count") {
  const OnlineModel m = ci_model();
  const PolicyFn rho = policy_fn(greedy_policy(m), m);
  const McSummary a = monte_carlo(rho, m, 400, 16, 1234);
  const McSummary b = monte_carlo(rho, m, 400, 64, 1234);
  const McSummary c = monte_carlo(rho, m, 400, 256, 1234);
  CHECK(a.stderr_mean / b.stderr_mean > 1.15);
  CHECK(a.stderr_mean / b.stderr_mean < 3.5);
  CHECK(b.stderr_mean / c.stderr_mean > 1.15);
  CHECK(b.stderr_mean / c.stderr_mean < 3.5);
}

TEST_CASE("time-average cost equals time-average distortion") {
  const OnlineModel m = ci_model();
  const ValueIterationResult vi = value_iteration(m, 1e-6);

  SimOptions opts;
  opts.cost_vector = &vi.v;
  McSummary opt = monte_carlo(policy_fn(vi.policy, m), m, 5000, 8, 77, opts);
  CHECK(std::abs(opt.mean_cost - opt.mean) / opt.mean <= 0.02);

  const std::vector<double> vg = policy_value_exact(greedy_policy(m), m);
  SimOptions gopts;
  gopts.cost_vector = &vg;
  McSummary gr = monte_carlo(policy_fn(greedy_policy(m), m), m, 5000, 8, 78, gopts);
  CHECK(std::abs(gr.mean_cost - gr.mean) / gr.mean <= 0.02);

  // The simulated ordering matches the analytic one.
  CHECK(gr.mean >= opt.mean);
}

TEST_CASE("simulated averages match the stationary prediction") {
  const OnlineModel m = ci_model();
  const ValueIterationResult vi = value_iteration(m, 1e-6);
  const double expected = expected_distortion(vi.v, vi.policy, m);
  const McSummary mc = monte_carlo(policy_fn(vi.policy, m), m, 10000, 8, 5);
  CHECK(std::abs(mc.mean - expected) / expected <= 0.02);
}

TEST_CASE("overflow frequency matches the stationary clip mass") {
  // A policy that always spends one quantum drives the buffers to the cap,
  // so clipping is frequent and the comparison is informative.
  const OnlineModel m{6, 6, 4, 3, 0.9, 1.0, kPaper};
  PolicyTable rho;
  rho.action.assign(m.num_states(), {1, 1});
  const auto [q1, q2] = overflow_probability(rho, m);
  REQUIRE(q1 > 0.05);
  const int runs = 32, T = 2000;
  const McSummary mc = monte_carlo(policy_fn(rho, m), m, T, runs, 2024);
  const double n = static_cast<double>(runs) * (T - 100);
  const double se1 = std::sqrt(q1 * (1 - q1) / n);
  const double se2 = std::sqrt(q2 * (1 - q2) / n);
  CHECK_THAT(mc.overflow_rate1, Catch::Matchers::WithinAbs(q1, 3.0 * se1));
  CHECK_THAT(mc.overflow_rate2, Catch::Matchers::WithinAbs(q2, 3.0 * se2));
}
