// Reference power control policies: greedy (spend everything on arrival)
// and save-and-forward (bank for a sublinear prefix, then smooth the
// balance over the remaining slots). Both come in trace-driven and
// state-driven forms.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ehpc/offline.hpp"
#include "ehpc/online.hpp"

namespace ehpc {

/// Trace-driven greedy: spend each slot's arrival in that slot.
inline PowerSchedule greedy_schedule(const EnergyTrace& e) {
  detail::check_trace(e, "greedy_schedule");
  return e;
}

/// State-driven greedy: empty both buffers every slot.
inline PolicyTable greedy_policy(const OnlineModel& m) {
  m.validate();
  PolicyTable rho;
  rho.action.resize(m.num_states());
  for (int s = 1; s <= m.num_states(); ++s) rho.action[s - 1] = decode_state(s, m.L2);
  return rho;
}

/// Save-and-forward configuration. save_slots < 0 selects the default
/// rule h(T) = ceil(sqrt(T)), which is sublinear in the horizon.
struct SaveForwardSpec {
  int save_slots = -1;
  double mean_arrival = 0.0;  // expected per-slot harvest, used for smoothing
};

inline int save_slots_for_horizon(int T, const SaveForwardSpec& spec) {
  const int h = spec.save_slots >= 0
                    ? spec.save_slots
                    : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(T))));
  if (h >= T)
    throw std::invalid_argument("save_and_forward: saving phase must be shorter than the horizon");
  return h;
}

/// Banks everything for the first h(T) slots, then levels the remaining
/// transmission: each slot spends (banked + expected future arrivals)
/// spread evenly over the slots left, clamped to what is actually banked
/// so causality holds for every realization.
inline PowerSchedule save_and_forward(const EnergyTrace& e,
                                      const SaveForwardSpec& spec) {
  detail::check_trace(e, "save_and_forward");
  const int T = static_cast<int>(e.size());
  if (T < 4) throw std::invalid_argument("save_and_forward: horizon must be >= 4");
  const int h = save_slots_for_horizon(T, spec);

  PowerSchedule p(T, 0.0);
  double banked = 0.0;
  for (int t = 1; t <= T; ++t) {
    banked += e[t - 1];
    if (t <= h) continue;
    const int remaining = T - t + 1;
    const double target =
        (banked + (remaining - 1) * spec.mean_arrival) / remaining;
    p[t - 1] = std::clamp(target, 0.0, banked);
    banked -= p[t - 1];
  }
  return p;
}

}  // namespace ehpc
