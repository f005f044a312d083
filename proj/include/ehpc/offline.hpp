// Offline power scheduling for two energy-harvesting nodes over a known
// horizon: single-node directional water-filling, generalized water levels
// from the stationarity conditions, the alternating backward water-filling
// solver, a structure verifier, and grid/descent reference oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehpc/errors.hpp"
#include "ehpc/model.hpp"

namespace ehpc {

using EnergyTrace = std::vector<double>;    // harvested energy per slot, >= 0
using PowerSchedule = std::vector<double>;  // transmit power per slot, >= 0

namespace detail {

inline void check_trace(const EnergyTrace& e, const char* who) {
  if (e.empty())
    throw std::invalid_argument(std::string(who) + ": empty energy trace");
  for (double v : e)
    if (!(v >= 0.0))
      throw std::invalid_argument(std::string(who) + ": negative energy entry");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Directional water-filling for a single node
// ---------------------------------------------------------------------------

/// A maximal run of slots sharing one transmit power, ending at a slot where
/// the buffer is depleted.
struct DwfBand {
  int start, end;  // 1-based, inclusive
  double power;
};

struct DirectionalWfResult {
  PowerSchedule power;
  std::vector<DwfBand> bands;
};

/// Single-node directional water-filling: splits the horizon into bands at
/// the prefix of minimum average arrival (largest slot on ties, which gives
/// maximal bands) and spends each band's arrivals evenly across it. The
/// output is causal with equality at every band end.
inline DirectionalWfResult directional_wf_single(const EnergyTrace& e) {
  detail::check_trace(e, "directional_wf_single");
  const int T = static_cast<int>(e.size());
  std::vector<double> cum(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) cum[t] = cum[t - 1] + e[t - 1];

  DirectionalWfResult out;
  out.power.assign(T, 0.0);
  int prev = 0;
  while (prev < T) {
    int best_end = prev + 1;
    double best_avg = std::numeric_limits<double>::infinity();
    for (int t = prev + 1; t <= T; ++t) {
      const double avg = (cum[t] - cum[prev]) / (t - prev);
      if (avg <= best_avg) {
        best_avg = avg;
        best_end = t;
      }
    }
    out.bands.push_back({prev + 1, best_end, best_avg});
    for (int t = prev; t < best_end; ++t) out.power[t] = best_avg;
    prev = best_end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stationarity multipliers and generalized water levels
// ---------------------------------------------------------------------------

/// Multipliers of the active distortion-region constraints at the optimum,
/// as functions of x = 2^(-2 r1) and y = 2^(-2 r2). At most one of the two
/// corner multipliers is nonzero; the product-bound multiplier is always
/// strictly positive.
struct KktMultipliers {
  double lambda1;  // D1 floor, positive only at corner C
  double lambda2;  // D2 floor, positive only at corner D
  double lambda3;  // product bound
  DistortionBranch branch;
};

inline KktMultipliers kkt_multipliers(double x, double y,
                                      const SystemParams& p) {
  if (!(x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0))
    throw std::domain_error("kkt_multipliers: x and y must lie in (0, 1]");
  const double eb = p.eta_bar();
  const double u = eb + p.eta * x * y;
  KktMultipliers m{0.0, 0.0, 0.0, detail::select_branch(x, y, p)};
  switch (m.branch) {
    case DistortionBranch::curve:
      m.lambda3 = kLn2 * std::sqrt(p.w1 * p.w2 * u * x * y);
      break;
    case DistortionBranch::corner_d: {
      const double tx = eb + p.eta * x;
      m.lambda3 = p.w1 * kLn2 * u * x / tx;
      m.lambda2 = p.w2 - p.w1 * u * x / (tx * tx * y);
      break;
    }
    case DistortionBranch::corner_c: {
      const double ty = eb + p.eta * y;
      m.lambda3 = p.w2 * kLn2 * u * y / ty;
      m.lambda1 = p.w1 - p.w2 * u * y / (ty * ty * x);
      break;
    }
  }
  return m;
}

/// Generalized water level of one node's slot given both transmit powers.
/// The level is the reciprocal of the stationarity expression in that
/// node's rate; it rises strictly with the node's own power, which is what
/// makes level equalization by bisection well posed.
inline double water_level(int node, double p_self, double p_other,
                          const SystemParams& params) {
  if (node != 1 && node != 2)
    throw std::invalid_argument("water_level: node must be 1 or 2");
  if (!(p_self >= 0.0 && p_other >= 0.0))
    throw std::domain_error("water_level: powers must be >= 0");
  const double p1 = (node == 1) ? p_self : p_other;
  const double p2 = (node == 1) ? p_other : p_self;
  const double x = 1.0 / (1.0 + params.h1 * p1);
  const double y = 1.0 / (1.0 + params.h2 * p2);
  const KktMultipliers m = kkt_multipliers(x, y, params);
  const double eb = params.eta_bar();
  const double u = eb + params.eta * x * y;
  const double shared =
      m.lambda3 * params.eta * x * y / (u * kLn2) + m.lambda3 / kLn2;
  if (node == 1) {
    const double lhs =
        params.h1 * x *
        (m.lambda1 * (eb + params.eta * y) * x +
         m.lambda2 * params.eta * x * y + shared);
    return 1.0 / lhs;
  }
  const double lhs =
      params.h2 * y *
      (m.lambda1 * params.eta * x * y +
       m.lambda2 * (eb + params.eta * x) * y + shared);
  return 1.0 / lhs;
}

namespace detail {

struct LevelBisection {
  double level_tol = 1e-12;   // relative, on the water level
  double energy_tol = 1e-11;  // relative, on band energy conservation
  int max_iter = 200;
};

// Power that brings slot tau of `node` to water level z (0 when the dry
// level already exceeds z). Inner bisection of the strictly increasing
// level-of-power map.
inline double power_for_level(int node, double z, double p_other,
                              const SystemParams& params,
                              const LevelBisection& opt) {
  if (water_level(node, 0.0, p_other, params) >= z) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (water_level(node, hi, p_other, params) < z) {
    hi *= 2.0;
    if (++guard > 200)
      throw SolverError("power_for_level: failed to bracket the target level");
  }
  double lo = (hi == 1.0) ? 0.0 : hi / 2.0;
  const double tol = opt.level_tol * std::max(1.0, z);
  for (int it = 0; it < opt.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double zl = water_level(node, mid, p_other, params);
    if (std::abs(zl - z) <= tol || hi - lo <= 1e-16 * std::max(1.0, hi)) return mid;
    if (zl < z)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// One contiguous group of slots sharing a common water level.
struct LevelBand {
  int start, end;  // 1-based, inclusive
  double energy;
  double level;
  std::vector<double> power;
};

// Equalizes `band` at a common level: finds z such that the slot powers
// reaching level z spend exactly the band energy. Slots whose dry level
// already exceeds z stay at zero power.
inline void equalize_band(int node, LevelBand& band,
                          const PowerSchedule& other,
                          const SystemParams& params,
                          const LevelBisection& opt) {
  const int n = band.end - band.start + 1;
  band.power.assign(n, 0.0);
  double dry_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k)
    dry_min = std::min(
        dry_min, water_level(node, 0.0, other[band.start - 1 + k], params));
  if (band.energy <= 0.0) {
    band.level = dry_min;
    return;
  }
  if (n == 1) {  // a lone slot keeps its energy exactly
    band.power[0] = band.energy;
    band.level = water_level(node, band.energy, other[band.start - 1], params);
    return;
  }
  const auto spent = [&](double z) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      s += power_for_level(node, z, other[band.start - 1 + k], params, opt);
    return s;
  };
  double lo = dry_min, hi = std::max(dry_min, 1.0);
  int guard = 0;
  while (spent(hi) < band.energy) {
    hi *= 2.0;
    if (++guard > 200)
      throw SolverError("equalize_band: failed to bracket the common level");
  }
  const double etol = opt.energy_tol * std::max(1.0, band.energy);
  double z = hi;
  for (int it = 0; it < opt.max_iter; ++it) {
    z = 0.5 * (lo + hi);
    const double s = spent(z);
    if (std::abs(s - band.energy) <= etol ||
        hi - lo <= 1e-15 * std::max(1.0, hi))
      break;
    if (s < band.energy)
      lo = z;
    else
      hi = z;
  }
  band.level = z;
  for (int k = 0; k < n; ++k)
    band.power[k] =
        power_for_level(node, z, other[band.start - 1 + k], params, opt);
}

}  // namespace detail

/// One backward water-filling sweep for `node` against a fixed schedule of
/// the other node. Processes slots last to first: each slot first keeps its
/// own arrival; whenever its level exceeds the level immediately downstream,
/// the slot is merged with the downstream band and the union is equalized
/// at a common level. Energy only ever moves forward in time, so the result
/// is causal by construction, with non-decreasing levels along the horizon.
inline PowerSchedule backward_wf_pass(int node, const EnergyTrace& e,
                                      const PowerSchedule& other_schedule,
                                      const SystemParams& params) {
  detail::check_trace(e, "backward_wf_pass");
  if (other_schedule.size() != e.size())
    throw std::invalid_argument("backward_wf_pass: schedule/trace length mismatch");
  params.validate();
  const int T = static_cast<int>(e.size());
  const detail::LevelBisection opt;

  std::vector<detail::LevelBand> bands;  // ordered by start slot, earliest first
  for (int tau = T; tau >= 1; --tau) {
    detail::LevelBand cur{tau, tau, e[tau - 1], 0.0, {}};
    detail::equalize_band(node, cur, other_schedule, params, opt);
    // Merge while this slot's level pokes above the band just after it.
    while (!bands.empty() &&
           cur.level > bands.front().level * (1.0 + 1e-12) + 1e-12) {
      cur.end = bands.front().end;
      cur.energy += bands.front().energy;
      bands.erase(bands.begin());
      detail::equalize_band(node, cur, other_schedule, params, opt);
    }
    bands.insert(bands.begin(), std::move(cur));
  }

  PowerSchedule p(T, 0.0);
  for (const auto& b : bands)
    for (int k = 0; k < b.end - b.start + 1; ++k)
      p[b.start - 1 + k] = b.power[k];
  return p;
}

/// Per-slot water levels of one node's schedule against the other's.
inline std::vector<double> water_levels(int node, const PowerSchedule& self,
                                        const PowerSchedule& other,
                                        const SystemParams& params) {
  if (self.size() != other.size())
    throw std::invalid_argument("water_levels: length mismatch");
  std::vector<double> z(self.size());
  for (std::size_t t = 0; t < self.size(); ++t)
    z[t] = water_level(node, self[t], other[t], params);
  return z;
}

/// Water levels of one node: zeta evaluated slot by slot, and the piecewise
/// constant nu extracted by averaging zeta within depletion-delimited bands.
/// At an optimal schedule with positive powers the two coincide, and nu is
/// non-decreasing over the horizon.
struct WaterLevels {
  std::vector<double> zeta;
  std::vector<double> nu;
};

inline WaterLevels make_water_levels(int node, const PowerSchedule& self,
                                     const PowerSchedule& other,
                                     const SystemParams& params,
                                     const std::vector<int>& depletion_slots) {
  WaterLevels w;
  w.zeta = water_levels(node, self, other, params);
  w.nu.resize(w.zeta.size());
  int start = 0;
  auto next_dep = depletion_slots.begin();
  const int T = static_cast<int>(self.size());
  while (start < T) {
    while (next_dep != depletion_slots.end() && *next_dep <= start) ++next_dep;
    const int end = next_dep != depletion_slots.end() ? *next_dep : T;
    double level = 0.0;
    for (int t = start; t < end; ++t) level += w.zeta[t];
    level /= end - start;
    for (int t = start; t < end; ++t) w.nu[t] = level;
    start = end;
  }
  return w;
}

/// Total weighted-sum distortion of a schedule pair.
inline double offline_objective(const PowerSchedule& p1, const PowerSchedule& p2,
                                const SystemParams& params) {
  if (p1.size() != p2.size())
    throw std::invalid_argument("offline_objective: length mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < p1.size(); ++t) {
    const RatePair r{channel_rate(p1[t], params.h1), channel_rate(p2[t], params.h2)};
    sum += min_weighted_distortion(r, params).value;
  }
  return sum;
}

struct GbwfResult {
  PowerSchedule p1, p2;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_history;  // after each full iteration
  std::vector<double> delta_history;      // sum |p - p_prev| per iteration
};

/// Alternating generalized backward water-filling. Node 1 starts from its
/// single-user directional water-filling schedule (node 2 silent); each
/// iteration re-solves node 2 against node 1 and then node 1 against node 2
/// until the schedules move less than eps in total.
inline GbwfResult iterative_gbwf(const EnergyTrace& e1, const EnergyTrace& e2,
                                 const SystemParams& params, double eps = 1e-6,
                                 int max_iter = 500) {
  detail::check_trace(e1, "iterative_gbwf");
  detail::check_trace(e2, "iterative_gbwf");
  if (e1.size() != e2.size())
    throw std::invalid_argument("iterative_gbwf: trace length mismatch");
  params.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("iterative_gbwf: eps must be > 0");

  GbwfResult res;
  res.p1 = directional_wf_single(e1).power;
  res.p2.assign(e2.size(), 0.0);
  res.objective_history.push_back(offline_objective(res.p1, res.p2, params));

  for (int l = 1; l <= max_iter; ++l) {
    const PowerSchedule p2_next = backward_wf_pass(2, e2, res.p1, params);
    const PowerSchedule p1_next = backward_wf_pass(1, e1, p2_next, params);
    double delta = 0.0;
    for (std::size_t t = 0; t < e1.size(); ++t)
      delta += std::abs(p1_next[t] - res.p1[t]) + std::abs(p2_next[t] - res.p2[t]);
    res.p1 = p1_next;
    res.p2 = p2_next;
    res.iterations = l;
    res.objective = offline_objective(res.p1, res.p2, params);
    res.objective_history.push_back(res.objective);
    res.delta_history.push_back(delta);
    if (delta <= eps) return res;
  }
  std::ostringstream msg;
  msg << "iterative_gbwf: no convergence after " << max_iter
      << " iterations (last delta " << res.delta_history.back() << ")";
  throw SolverError(msg.str());
}

// ---------------------------------------------------------------------------
// Structure verification (depletions, level jumps, cross-node response)
// ---------------------------------------------------------------------------

struct StructureBand {
  int start, end;
  double level;
};

struct StructureViolation {
  int node;  // 1 or 2
  int slot;  // 1-based
  std::string what;
};

struct StructureReport {
  std::vector<StructureBand> bands1, bands2;
  std::vector<int> depletion1, depletion2;  // 1-based slots
  std::vector<StructureViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks the optimality structure of a schedule pair: levels constant
/// within bands and jumping only upward at the node's own depletion slots;
/// power rising across own depletions and falling across the other node's.
inline StructureReport verify_structure(const PowerSchedule& p1,
                                        const PowerSchedule& p2,
                                        const EnergyTrace& e1,
                                        const EnergyTrace& e2,
                                        const SystemParams& params,
                                        double tol = 1e-6) {
  const int T = static_cast<int>(p1.size());
  if (p2.size() != p1.size() || e1.size() != p1.size() || e2.size() != p1.size())
    throw std::invalid_argument("verify_structure: length mismatch");
  StructureReport rep;

  const auto analyze = [&](int node, const PowerSchedule& p, const EnergyTrace& e,
                           const PowerSchedule& other,
                           std::vector<StructureBand>& bands,
                           std::vector<int>& depletion) {
    double cum = 0.0;
    std::vector<bool> depleted(T + 1, false);
    const double e_scale = std::max(1.0, std::accumulate(e.begin(), e.end(), 0.0));
    for (int t = 1; t <= T; ++t) {
      cum += e[t - 1] - p[t - 1];
      if (cum < -tol * e_scale)
        rep.violations.push_back({node, t, "energy causality violated"});
      if (std::abs(cum) <= tol * e_scale) {
        depleted[t] = true;
        depletion.push_back(t);
      }
    }
    const std::vector<double> z = water_levels(node, p, other, params);
    const double z_scale =
        std::max(1.0, *std::max_element(z.begin(), z.end()));
    int start = 1;
    for (int t = 1; t < T; ++t) {
      const double jump = z[t] - z[t - 1];
      if (std::abs(jump) <= tol * z_scale) continue;
      if (jump < 0.0)
        rep.violations.push_back({node, t, "water level decreases over time"});
      else if (!depleted[t])
        rep.violations.push_back(
            {node, t, "water level jumps without buffer depletion"});
      double lvl = 0.0;
      for (int s = start; s <= t; ++s) lvl += z[s - 1];
      bands.push_back({start, t, lvl / (t - start + 1)});
      start = t + 1;
    }
    double lvl = 0.0;
    for (int s = start; s <= T; ++s) lvl += z[s - 1];
    bands.push_back({start, T, lvl / (T - start + 1)});
    return depleted;
  };

  const auto dep1 = analyze(1, p1, e1, p2, rep.bands1, rep.depletion1);
  const auto dep2 = analyze(2, p2, e2, p1, rep.bands2, rep.depletion2);

  const auto cross_checks = [&](int node, const PowerSchedule& p,
                                const std::vector<bool>& own,
                                const std::vector<bool>& other) {
    for (int t = 1; t < T; ++t) {
      if (own[t] && !other[t] && p[t] < p[t - 1] - tol)
        rep.violations.push_back(
            {node, t, "power drops across own depletion slot"});
      if (other[t] && !own[t] && p[t] > p[t - 1] + tol)
        rep.violations.push_back(
            {node, t, "power rises across the other node's depletion slot"});
    }
  };
  cross_checks(1, p1, dep1, dep2);
  cross_checks(2, p2, dep2, dep1);
  return rep;
}

/// Closed-form slot powers for perfectly correlated sources, given the two
/// water levels. The bracket clamps at zero.
inline std::pair<double, double> eta_one_closed_form(double nu1, double nu2,
                                                     double h1, double h2) {
  if (!(nu1 > 0.0 && nu2 > 0.0))
    throw std::domain_error("eta_one_closed_form: water levels must be > 0");
  const double a1 = std::cbrt(h1 * h1 * nu1 * nu1 / (h2 * nu2)) - 1.0;
  const double a2 = std::cbrt(h2 * h2 * nu2 * nu2 / (h1 * nu1)) - 1.0;
  return {std::max(0.0, a1) / h1, std::max(0.0, a2) / h2};
}

// ---------------------------------------------------------------------------
// Reference oracles
// ---------------------------------------------------------------------------

enum class OracleMode { exhaustive, descent };

struct OfflineOracleResult {
  PowerSchedule p1, p2;
  double objective = 0.0;
};

namespace detail {

// All causal quantized schedules for one node: per-slot allocations in units
// of delta whose prefix sums never exceed the prefix arrivals.
inline void enumerate_causal(const EnergyTrace& e, double delta, int slot,
                             std::vector<int>& quanta, double spent,
                             double cum_e,
                             const std::function<void(const std::vector<int>&)>& emit) {
  const int T = static_cast<int>(e.size());
  const double cum_here = cum_e + e[slot];
  const int budget = static_cast<int>((cum_here - spent) / delta + 1e-9);
  if (slot + 1 == T) {
    for (int a = 0; a <= budget; ++a) {
      quanta[slot] = a;
      emit(quanta);
    }
    return;
  }
  for (int a = 0; a <= budget; ++a) {
    quanta[slot] = a;
    enumerate_causal(e, delta, slot + 1, quanta, spent + a * delta, cum_here, emit);
  }
}

// 1-D minimizer of a convex function on [lo, hi] by golden-section search.
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Reference solver kept independent of the water-filling path.
///
/// exhaustive: quantizes each node's total energy into `grid` units and
/// searches every causal schedule pair (T <= 6). The returned objective is
/// the grid minimum; it upper-bounds the true optimum by O(1/grid).
///
/// descent: feasible coordinate descent on adjacent-slot energy transfers,
/// per node in alternation, each 1-D move solved by golden section under
/// the causality caps, until a full sweep moves less than 1e-8 energy.
inline OfflineOracleResult offline_oracle(const EnergyTrace& e1,
                                          const EnergyTrace& e2,
                                          const SystemParams& params,
                                          OracleMode mode, int grid = 12) {
  detail::check_trace(e1, "offline_oracle");
  detail::check_trace(e2, "offline_oracle");
  if (e1.size() != e2.size())
    throw std::invalid_argument("offline_oracle: trace length mismatch");
  params.validate();
  const int T = static_cast<int>(e1.size());

  OfflineOracleResult best;
  if (mode == OracleMode::exhaustive) {
    if (T > 6)
      throw std::invalid_argument("offline_oracle: exhaustive mode requires T <= 6");
    if (grid < 2) throw std::invalid_argument("offline_oracle: grid too coarse");
    const double total1 = std::accumulate(e1.begin(), e1.end(), 0.0);
    const double total2 = std::accumulate(e2.begin(), e2.end(), 0.0);
    const double d1 = total1 > 0.0 ? total1 / grid : 1.0;
    const double d2 = total2 > 0.0 ? total2 / grid : 1.0;

    // Per-slot distortion lookup on the quantized action lattice.
    std::vector<std::vector<double>> dist(
        static_cast<std::size_t>(grid) + 1,
        std::vector<double>(static_cast<std::size_t>(grid) + 1, 0.0));
    for (int a = 0; a <= grid; ++a)
      for (int b = 0; b <= grid; ++b) {
        const RatePair r{channel_rate(a * d1, params.h1),
                         channel_rate(b * d2, params.h2)};
        dist[a][b] = min_weighted_distortion(r, params).value;
      }

    std::vector<std::vector<int>> all1, all2;
    std::vector<int> q(static_cast<std::size_t>(T), 0);
    detail::enumerate_causal(e1, d1, 0, q, 0.0, 0.0,
                             [&](const std::vector<int>& v) { all1.push_back(v); });
    detail::enumerate_causal(e2, d2, 0, q, 0.0, 0.0,
                             [&](const std::vector<int>& v) { all2.push_back(v); });

    double best_obj = std::numeric_limits<double>::infinity();
    const std::vector<int>* b1 = nullptr;
    const std::vector<int>* b2 = nullptr;
    for (const auto& s1 : all1)
      for (const auto& s2 : all2) {
        double obj = 0.0;
        for (int t = 0; t < T; ++t) obj += dist[s1[t]][s2[t]];
        if (obj < best_obj) {
          best_obj = obj;
          b1 = &s1;
          b2 = &s2;
        }
      }
    best.objective = best_obj;
    best.p1.resize(T);
    best.p2.resize(T);
    for (int t = 0; t < T; ++t) {
      best.p1[t] = (*b1)[t] * d1;
      best.p2[t] = (*b2)[t] * d2;
    }
    return best;
  }

  // Descent mode. Start from the greedy (spend-on-arrival) point, which is
  // feasible and independent of the water-filling initialization.
  best.p1 = e1;
  best.p2 = e2;
  const auto slot_cost = [&](int node, int t, double p_this) {
    const double q1 = (node == 1) ? p_this : best.p1[t];
    const double q2 = (node == 1) ? best.p2[t] : p_this;
    const RatePair r{channel_rate(q1, params.h1), channel_rate(q2, params.h2)};
    return min_weighted_distortion(r, params).value;
  };
  const double move_tol = 1e-8;
  const int max_sweeps = 20000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_move = 0.0;
    for (int node = 1; node <= 2; ++node) {
      PowerSchedule& p = (node == 1) ? best.p1 : best.p2;
      const EnergyTrace& e = (node == 1) ? e1 : e2;
      double slack = 0.0;  // cumulative unspent energy before slot t+1
      for (int t = 0; t + 1 < T; ++t) {
        slack += e[t] - p[t];
        // Transfer delta from slot t to t+1 (delta < 0 pulls energy back,
        // bounded by the slack so causality is preserved).
        const double lo = -std::min(p[t + 1], std::max(0.0, slack));
        const double hi = p[t];
        if (hi - lo > 1e-14) {
          const auto f = [&](double delta) {
            return slot_cost(node, t, p[t] - delta) +
                   slot_cost(node, t + 1, p[t + 1] + delta);
          };
          const double delta = detail::golden_min(f, lo, hi, 1e-12);
          if (f(delta) < f(0.0)) {
            p[t] -= delta;
            p[t + 1] += delta;
            slack += delta;
            max_move = std::max(max_move, std::abs(delta));
          }
        }
      }
    }
    if (max_move < move_tol) break;
  }
  best.objective = offline_objective(best.p1, best.p2, params);
  return best;
}

}  // namespace ehpc
