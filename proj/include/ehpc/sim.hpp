// Seeded Monte Carlo episode simulation of the online chain under any
// policy: clipped buffer dynamics, per-slot distortion and realized cost,
// overflow counting, and fixed-order aggregation across episodes.
//
// Random streams: harvests come from std::mt19937_64 mapped to {1..emax}
// by modulo; per-episode seeds derive from the base seed via splitmix64.
// Both choices are part of the documented output contract.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ehpc/errors.hpp"
#include "ehpc/online.hpp"

namespace ehpc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic per-stream seed derivation.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream));
}

/// Uniform integer harvest source.
struct ArrivalSpec {
  int emax = 1;
  std::uint64_t seed = 0;
};

/// Seeded harvest trace with entries in {1..emax}.
inline EnergyTrace generate_arrivals(const ArrivalSpec& spec, int T) {
  if (spec.emax < 1) throw std::invalid_argument("generate_arrivals: emax must be >= 1");
  if (T < 1) throw std::invalid_argument("generate_arrivals: horizon must be >= 1");
  std::mt19937_64 rng(spec.seed);
  EnergyTrace e(T);
  for (int t = 0; t < T; ++t)
    e[t] = 1.0 + static_cast<double>(rng() % static_cast<std::uint64_t>(spec.emax));
  return e;
}

/// State-feedback policy: buffer pair in, action pair out.
using PolicyFn = std::function<std::pair<int, int>(int i, int j)>;

inline PolicyFn policy_fn(const PolicyTable& rho, const OnlineModel& m) {
  return [rho, L2 = m.L2](int i, int j) {
    return rho.action[encode_state(i, j, L2) - 1];
  };
}

struct SlotRecord {
  int s;             // state before acting
  int p1, p2;        // action in quanta
  double distortion;
  double cost;       // only meaningful when a cost vector was supplied
};

struct EpisodeResult {
  int horizon = 0;
  int counted_slots = 0;  // slots after burn-in
  double mean_distortion = 0.0;
  double mean_cost = 0.0;
  bool has_cost = false;
  long overflow1 = 0, overflow2 = 0;  // clipping events after burn-in
  std::vector<SlotRecord> slots;      // filled only when requested
};

struct SimOptions {
  int initial_i = -1;  // < 0 means full buffer
  int initial_j = -1;
  int burn_in = 100;   // leading slots excluded from the summary
  const std::vector<double>* cost_vector = nullptr;
  bool record_slots = false;
};

/// Runs one seeded episode. Buffer dynamics clip at the capacities; every
/// clip is counted as an overflow event. When a cost vector is supplied the
/// per-slot cost blends current distortion with the realized next state's
/// value. Episodes shorter than the burn-in keep all slots.
inline EpisodeResult simulate_episode(const PolicyFn& policy,
                                      const OnlineModel& m, int T,
                                      std::uint64_t seed,
                                      const SimOptions& opts = {},
                                      const DistortionTable* dtab = nullptr) {
  m.validate();
  if (T < 1) throw std::invalid_argument("simulate_episode: horizon must be >= 1");
  DistortionTable local;
  if (!dtab) {
    local = make_distortion_table(m);
    dtab = &local;
  }
  std::mt19937_64 rng(seed);
  const auto draw = [&](int emax) {
    return 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(emax));
  };

  int i = opts.initial_i > 0 ? opts.initial_i : m.L1;
  int j = opts.initial_j > 0 ? opts.initial_j : m.L2;
  if (i > m.L1 || j > m.L2)
    throw std::invalid_argument("simulate_episode: initial state out of range");
  const int burn = (T > opts.burn_in) ? opts.burn_in : 0;

  EpisodeResult res;
  res.horizon = T;
  res.has_cost = opts.cost_vector != nullptr;
  double dist_sum = 0.0, cost_sum = 0.0;
  for (int t = 1; t <= T; ++t) {
    const int s = encode_state(i, j, m.L2);
    const auto [p1, p2] = policy(i, j);
    if (p1 < 1 || p1 > i || p2 < 1 || p2 > j)
      throw SimulationError("policy returned infeasible action at state " +
                            std::to_string(s) + " (i=" + std::to_string(i) +
                            ", j=" + std::to_string(j) + ")");
    const double d = dtab->at(p1, p2);

    const int e1 = draw(m.e1max), e2 = draw(m.e2max);
    const bool of1 = i - p1 + e1 > m.L1;
    const bool of2 = j - p2 + e2 > m.L2;
    const int ni = of1 ? m.L1 : i - p1 + e1;
    const int nj = of2 ? m.L2 : j - p2 + e2;

    double cost = 0.0;
    if (opts.cost_vector) {
      const int s_next = encode_state(ni, nj, m.L2);
      cost = (1.0 - m.alpha) * d + m.alpha * (*opts.cost_vector)[s_next - 1];
    }
    if (t > burn) {
      dist_sum += d;
      cost_sum += cost;
      res.overflow1 += of1;
      res.overflow2 += of2;
      ++res.counted_slots;
    }
    if (opts.record_slots) res.slots.push_back({s, p1, p2, d, cost});
    i = ni;
    j = nj;
  }
  res.mean_distortion = dist_sum / res.counted_slots;
  res.mean_cost = res.has_cost ? cost_sum / res.counted_slots : 0.0;
  return res;
}

struct McSummary {
  double mean = 0.0;          // mean of per-episode mean distortions
  double stderr_mean = 0.0;   // sample standard error of that mean
  double mean_cost = 0.0;
  double overflow_rate1 = 0.0, overflow_rate2 = 0.0;  // per counted slot
  std::vector<double> episode_means;
};

/// Independent seeded episodes aggregated in episode order.
inline McSummary monte_carlo(const PolicyFn& policy, const OnlineModel& m,
                             int T, int runs, std::uint64_t base_seed,
                             const SimOptions& opts = {}) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  const DistortionTable dtab = make_distortion_table(m);
  McSummary sum;
  sum.episode_means.reserve(runs);
  double cost_total = 0.0;
  long of1 = 0, of2 = 0, slots = 0;
  for (int r = 0; r < runs; ++r) {
    const EpisodeResult ep =
        simulate_episode(policy, m, T, derive_seed(base_seed, r), opts, &dtab);
    sum.episode_means.push_back(ep.mean_distortion);
    cost_total += ep.mean_cost;
    of1 += ep.overflow1;
    of2 += ep.overflow2;
    slots += ep.counted_slots;
  }
  double mean = 0.0;
  for (double v : sum.episode_means) mean += v;
  mean /= runs;
  double var = 0.0;
  for (double v : sum.episode_means) var += (v - mean) * (v - mean);
  sum.mean = mean;
  sum.stderr_mean = runs > 1 ? std::sqrt(var / (runs - 1)) / std::sqrt(double(runs)) : 0.0;
  sum.mean_cost = cost_total / runs;
  sum.overflow_rate1 = static_cast<double>(of1) / slots;
  sum.overflow_rate2 = static_cast<double>(of2) / slots;
  return sum;
}

}  // namespace ehpc
