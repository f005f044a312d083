// File output for solver results: CSV tables with a documented column
// schema and JSON documents carrying a schema-version field.
#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehpc/offline.hpp"
#include "ehpc/online.hpp"
#include "ehpc/sim.hpp"

namespace ehpc::io {

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trippable decimal form of a double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

/// Columns: slot,p1,p2,r1,r2,D1,D2,weighted_D
inline void write_schedule_csv(const std::string& path, const PowerSchedule& p1,
                               const PowerSchedule& p2,
                               const SystemParams& params) {
  auto out = open_out(path);
  out << "slot,p1,p2,r1,r2,D1,D2,weighted_D\n";
  for (std::size_t t = 0; t < p1.size(); ++t) {
    const RatePair r{channel_rate(p1[t], params.h1), channel_rate(p2[t], params.h2)};
    const MinDistortion d = min_weighted_distortion(r, params);
    out << (t + 1) << ',' << fmt(p1[t]) << ',' << fmt(p2[t]) << ',' << fmt(r.r1)
        << ',' << fmt(r.r2) << ',' << fmt(d.point.d1) << ',' << fmt(d.point.d2)
        << ',' << fmt(d.value) << '\n';
  }
}

/// Columns: s,i,j,p1,p2,v,pi
inline void write_policy_csv(const std::string& path, const PolicyTable& rho,
                             const std::vector<double>& v,
                             const std::vector<double>& pi, int L2) {
  auto out = open_out(path);
  out << "s,i,j,p1,p2,v,pi\n";
  for (std::size_t k = 0; k < rho.action.size(); ++k) {
    const int s = static_cast<int>(k) + 1;
    const auto [i, j] = decode_state(s, L2);
    out << s << ',' << i << ',' << j << ',' << rho.action[k].first << ','
        << rho.action[k].second << ',' << fmt(v[k]) << ',' << fmt(pi[k]) << '\n';
  }
}

/// Columns: iter,delta_abs,delta_sup
inline void write_trace_csv(const std::string& path,
                            const std::vector<std::pair<double, double>>& trace) {
  auto out = open_out(path);
  out << "iter,delta_abs,delta_sup\n";
  for (std::size_t k = 0; k < trace.size(); ++k)
    out << (k + 1) << ',' << fmt(trace[k].first) << ',' << fmt(trace[k].second)
        << '\n';
}

/// Columns: policy,sqrt_eta,run,mean_distortion
struct EpisodeRow {
  std::string policy;
  double sqrt_eta;
  int run;
  double mean_distortion;
};

inline void write_episodes_csv(const std::string& path,
                               const std::vector<EpisodeRow>& rows) {
  auto out = open_out(path);
  out << "policy,sqrt_eta,run,mean_distortion\n";
  for (const auto& r : rows)
    out << r.policy << ',' << fmt(r.sqrt_eta) << ',' << r.run << ','
        << fmt(r.mean_distortion) << '\n';
}

inline nlohmann::json online_solution_json(const ValueIterationResult& res,
                                           const std::vector<double>& pi,
                                           double expected) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["iterations"] = res.iterations;
  j["residual_sup"] = res.residual_sup;
  j["expected_distortion"] = expected;
  j["v"] = res.v;
  j["pi"] = pi;
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& [p1, p2] : res.policy.action) actions.push_back({p1, p2});
  j["policy"] = std::move(actions);
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& [dabs, dsup] : res.trace) tr.push_back({dabs, dsup});
  j["error_trace"] = std::move(tr);
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

/// One JSON object per slot: {"slot":..,"s":..,"p1":..,"p2":..,
/// "distortion":..} plus "cost" when the episode carried a cost vector.
inline void write_episode_jsonl(const std::string& path,
                                const EpisodeResult& ep) {
  auto out = open_out(path);
  for (std::size_t k = 0; k < ep.slots.size(); ++k) {
    nlohmann::json j{{"slot", k + 1},
                     {"s", ep.slots[k].s},
                     {"p1", ep.slots[k].p1},
                     {"p2", ep.slots[k].p2},
                     {"distortion", ep.slots[k].distortion}};
    if (ep.has_cost) j["cost"] = ep.slots[k].cost;
    out << j.dump() << '\n';
  }
}

}  // namespace ehpc::io
