// Online power control as a discounted-blend Markov decision process on the
// joint energy-buffer state: uniform-harvest transition kernels, the
// per-state cost minimization operator, value iteration to its fixed point,
// exact stationary-policy evaluation, stationary distributions and buffer
// overflow probabilities.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ehpc/errors.hpp"
#include "ehpc/linalg.hpp"
#include "ehpc/model.hpp"

namespace ehpc {

/// Quantized online problem instance. Buffer levels are counted in energy
/// quanta of size delta; harvests are uniform integers in {1..emax}.
struct OnlineModel {
  int L1, L2;          // buffer capacities in quanta
  int e1max, e2max;    // per-slot harvest maxima in quanta
  double alpha;        // cost blend weight, in (0, 1)
  double delta;        // quantum size in energy units
  SystemParams params;

  int num_states() const { return L1 * L2; }

  void validate() const {
    if (L1 < 1 || L2 < 1)
      throw std::invalid_argument("OnlineModel: buffer capacities must be >= 1");
    if (e1max < 1 || e2max < 1)
      throw std::invalid_argument("OnlineModel: harvest maxima must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("OnlineModel: alpha must lie in (0, 1)");
    if (!(delta > 0.0))
      throw std::invalid_argument("OnlineModel: delta must be > 0");
    params.validate();
  }
};

/// Flattened 1-based state index: s = (i - 1) * L2 + j for buffer pair (i, j).
inline int encode_state(int i, int j, int L2) { return (i - 1) * L2 + j; }

inline std::pair<int, int> decode_state(int s, int L2) {
  const int i = (s + L2 - 1) / L2;
  return {i, s - (i - 1) * L2};
}

/// Stationary policy: one positive integer action pair per state.
struct PolicyTable {
  std::vector<std::pair<int, int>> action;  // index s - 1

  void validate(const OnlineModel& m) const {
    if (static_cast<int>(action.size()) != m.num_states())
      throw std::invalid_argument("PolicyTable: wrong number of states");
    for (int s = 1; s <= m.num_states(); ++s) {
      const auto [i, j] = decode_state(s, m.L2);
      const auto [p1, p2] = action[s - 1];
      if (p1 < 1 || p1 > i || p2 < 1 || p2 > j)
        throw std::invalid_argument("PolicyTable: infeasible action at state " +
                                    std::to_string(s));
    }
  }
};

/// Feasible actions at state s: every integer pair in {1..i} x {1..j}.
inline std::vector<std::pair<int, int>> feasible_actions(int s,
                                                         const OnlineModel& m) {
  if (s < 1 || s > m.num_states())
    throw std::domain_error("feasible_actions: state out of range");
  const auto [i, j] = decode_state(s, m.L2);
  std::vector<std::pair<int, int>> acts;
  acts.reserve(static_cast<std::size_t>(i) * j);
  for (int p1 = 1; p1 <= i; ++p1)
    for (int p2 = 1; p2 <= j; ++p2) acts.emplace_back(p1, p2);
  return acts;
}

/// Distribution of the next buffer level when spending p from level i under
/// a uniform {1..emax} harvest, clipped at L_cap. Built by enumerating each
/// harvest outcome, which is the ground truth the closed-form cap mass is
/// tested against.
inline std::vector<std::pair<int, double>> node_transition(int i, int p,
                                                           int emax, int L_cap) {
  if (emax < 1 || L_cap < 1 || p < 1 || p > i || i > L_cap)
    throw std::domain_error("node_transition: need 1 <= p <= i <= L_cap, emax >= 1");
  std::vector<int> count(static_cast<std::size_t>(L_cap) + 1, 0);
  for (int e = 1; e <= emax; ++e) ++count[std::min(i - p + e, L_cap)];
  std::vector<std::pair<int, double>> dist;
  for (int level = 1; level <= L_cap; ++level)
    if (count[level] > 0)
      dist.emplace_back(level, static_cast<double>(count[level]) / emax);
  return dist;
}

/// Probability that a harvest from level i spending p is clipped by the
/// buffer cap (energy actually discarded, the strict-overshoot event).
inline double overflow_mass(int i, int p, int emax, int L_cap) {
  if (emax < 1 || L_cap < 1 || p < 1 || p > i || i > L_cap)
    throw std::domain_error("overflow_mass: need 1 <= p <= i <= L_cap, emax >= 1");
  int n = 0;
  for (int e = 1; e <= emax; ++e)
    if (i - p + e > L_cap) ++n;
  return static_cast<double>(n) / emax;
}

/// Row-stochastic state transition matrix, row-major.
struct TransferMatrix {
  int n = 0;
  std::vector<double> q;

  double at(int s, int t) const { return q[(s - 1) * static_cast<std::size_t>(n) + (t - 1)]; }
};

inline TransferMatrix transfer_matrix(const PolicyTable& rho,
                                      const OnlineModel& m) {
  m.validate();
  rho.validate(m);
  const int L = m.num_states();
  TransferMatrix P;
  P.n = L;
  P.q.assign(static_cast<std::size_t>(L) * L, 0.0);
  for (int s = 1; s <= L; ++s) {
    const auto [i, j] = decode_state(s, m.L2);
    const auto [p1, p2] = rho.action[s - 1];
    const auto d1 = node_transition(i, p1, m.e1max, m.L1);
    const auto d2 = node_transition(j, p2, m.e2max, m.L2);
    for (const auto& [i2, q1] : d1)
      for (const auto& [j2, q2] : d2)
        P.q[(s - 1) * static_cast<std::size_t>(L) + (encode_state(i2, j2, m.L2) - 1)] =
            q1 * q2;
  }
  return P;
}

/// Weighted-sum distortion of one action pair (quanta converted to power
/// through the quantum size).
inline double state_distortion(int p1, int p2, const OnlineModel& m) {
  if (p1 < 1 || p2 < 1)
    throw std::domain_error("state_distortion: actions must be positive integers");
  const RatePair r{channel_rate(p1 * m.delta, m.params.h1),
                   channel_rate(p2 * m.delta, m.params.h2)};
  return min_weighted_distortion(r, m.params).value;
}

/// Distortion of every action pair, precomputed once per model.
struct DistortionTable {
  int L1 = 0, L2 = 0;
  std::vector<double> d;  // (p1 - 1) * L2 + (p2 - 1)

  double at(int p1, int p2) const {
    return d[(p1 - 1) * static_cast<std::size_t>(L2) + (p2 - 1)];
  }
};

inline DistortionTable make_distortion_table(const OnlineModel& m) {
  m.validate();
  DistortionTable t;
  t.L1 = m.L1;
  t.L2 = m.L2;
  t.d.resize(static_cast<std::size_t>(m.L1) * m.L2);
  for (int p1 = 1; p1 <= m.L1; ++p1)
    for (int p2 = 1; p2 <= m.L2; ++p2)
      t.d[(p1 - 1) * static_cast<std::size_t>(m.L2) + (p2 - 1)] =
          state_distortion(p1, p2, m);
  return t;
}

struct BellmanResult {
  std::vector<double> v;
  PolicyTable policy;
};

/// One application of the cost operator: per state, the minimum over
/// feasible actions of (1 - alpha) * distortion + alpha * expected next
/// cost. Ties break to the lexicographically smallest (p1, p2). The
/// expectation is evaluated through a post-spend table W(a, b) =
/// E[v(min(a + e1, L1), min(b + e2, L2))], accumulated in fixed harvest
/// order so results do not depend on scheduling.
inline BellmanResult bellman_T(const std::vector<double>& v,
                               const OnlineModel& m,
                               const DistortionTable& dtab) {
  const int L1 = m.L1, L2 = m.L2;
  if (static_cast<int>(v.size()) != m.num_states())
    throw std::invalid_argument("bellman_T: cost vector has wrong length");

  // u[a][j'] = E_{e1} v(min(a + e1, L1), j'), a = post-spend level of node 1.
  std::vector<double> u(static_cast<std::size_t>(L1) * L2, 0.0);
  for (int a = 0; a < L1; ++a)
    for (int j2 = 1; j2 <= L2; ++j2) {
      double s = 0.0;
      for (int e = 1; e <= m.e1max; ++e) {
        const int i2 = std::min(a + e, L1);
        s += v[encode_state(i2, j2, L2) - 1];
      }
      u[a * static_cast<std::size_t>(L2) + (j2 - 1)] = s / m.e1max;
    }
  // w[a][b] = E_{e2} u[a][min(b + e2, L2)].
  std::vector<double> w(static_cast<std::size_t>(L1) * L2, 0.0);
  for (int a = 0; a < L1; ++a)
    for (int b = 0; b < L2; ++b) {
      double s = 0.0;
      for (int e = 1; e <= m.e2max; ++e) {
        const int j2 = std::min(b + e, L2);
        s += u[a * static_cast<std::size_t>(L2) + (j2 - 1)];
      }
      w[a * static_cast<std::size_t>(L2) + b] = s / m.e2max;
    }

  BellmanResult out;
  out.v.resize(m.num_states());
  out.policy.action.resize(m.num_states());
  const double ab = 1.0 - m.alpha;
  for (int i = 1; i <= L1; ++i)
    for (int j = 1; j <= L2; ++j) {
      double best = std::numeric_limits<double>::infinity();
      std::pair<int, int> arg{1, 1};
      for (int p1 = 1; p1 <= i; ++p1)
        for (int p2 = 1; p2 <= j; ++p2) {
          const double val =
              ab * dtab.at(p1, p2) +
              m.alpha * w[(i - p1) * static_cast<std::size_t>(L2) + (j - p2)];
          if (val < best) {
            best = val;
            arg = {p1, p2};
          }
        }
      const int s = encode_state(i, j, L2);
      out.v[s - 1] = best;
      out.policy.action[s - 1] = arg;
    }
  return out;
}

inline BellmanResult bellman_T(const std::vector<double>& v,
                               const OnlineModel& m) {
  return bellman_T(v, m, make_distortion_table(m));
}

struct ValueIterationResult {
  std::vector<double> v;
  PolicyTable policy;
  int iterations = 0;
  double residual_sup = 0.0;  // ||T(v) - v||_inf at the returned v
  std::vector<std::pair<double, double>> trace;  // (sum |dv|, sup |dv|) per step
};

/// Iterates the cost operator from v0 (zero by default) until the summed
/// absolute update drops to eps. The per-step sup error contracts by at
/// least alpha, which bounds the iteration count up front.
inline ValueIterationResult value_iteration(const OnlineModel& m,
                                            double eps = 1e-3,
                                            std::vector<double> v0 = {}) {
  m.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("value_iteration: eps must be > 0");
  const int L = m.num_states();
  if (v0.empty()) v0.assign(L, 0.0);
  if (static_cast<int>(v0.size()) != L)
    throw std::invalid_argument("value_iteration: v0 has wrong length");
  const DistortionTable dtab = make_distortion_table(m);

  ValueIterationResult res;
  std::vector<double> v = std::move(v0);
  long max_iter = 0;
  for (long l = 1;; ++l) {
    BellmanResult step = bellman_T(v, m, dtab);
    double dabs = 0.0, dsup = 0.0;
    for (int s = 0; s < L; ++s) {
      const double d = std::abs(step.v[s] - v[s]);
      dabs += d;
      dsup = std::max(dsup, d);
    }
    v = std::move(step.v);
    res.policy = std::move(step.policy);
    res.trace.emplace_back(dabs, dsup);
    res.iterations = static_cast<int>(l);
    if (dabs <= eps) break;
    if (l == 1) {
      max_iter =
          static_cast<long>(std::ceil(std::log(eps / dabs) / std::log(m.alpha))) +
          100;
    } else if (l >= max_iter) {
      std::ostringstream msg;
      msg << "value_iteration: no convergence after " << l
          << " iterations (last update " << dabs << ")";
      throw SolverError(msg.str());
    }
  }
  const BellmanResult fixed = bellman_T(v, m, dtab);
  for (int s = 0; s < L; ++s)
    res.residual_sup = std::max(res.residual_sup, std::abs(fixed.v[s] - v[s]));
  res.v = std::move(v);
  return res;
}

/// Exact cost vector of a stationary policy: solves
/// (I - alpha P) v = (1 - alpha) d.
inline std::vector<double> policy_value_exact(const PolicyTable& rho,
                                              const OnlineModel& m) {
  m.validate();
  rho.validate(m);
  const int L = m.num_states();
  const TransferMatrix P = transfer_matrix(rho, m);
  const DistortionTable dtab = make_distortion_table(m);

  std::vector<double> a(static_cast<std::size_t>(L) * L, 0.0);
  std::vector<double> b(L, 0.0);
  for (int s = 1; s <= L; ++s) {
    for (int t = 1; t <= L; ++t)
      a[(s - 1) * static_cast<std::size_t>(L) + (t - 1)] =
          (s == t ? 1.0 : 0.0) - m.alpha * P.at(s, t);
    const auto [p1, p2] = rho.action[s - 1];
    b[s - 1] = (1.0 - m.alpha) * dtab.at(p1, p2);
  }
  std::vector<double> v = linalg::solve_dense(a, b);

  // alpha < 1 makes the system diagonally dominant; a bad residual means an
  // internal bug, not an unlucky instance.
  double resid = 0.0;
  for (int s = 1; s <= L; ++s) {
    double row = b[s - 1];
    for (int t = 1; t <= L; ++t)
      row -= ((s == t ? 1.0 : 0.0) - m.alpha * P.at(s, t)) * v[t - 1];
    resid = std::max(resid, std::abs(row));
  }
  if (resid > 1e-10)
    throw std::logic_error("policy_value_exact: linear solve residual too large");
  return v;
}

namespace detail {

// Strongly connected components of the support graph (Kosaraju). Used to
// reject chains with more than one closed class before a stationary solve.
inline int count_closed_classes(const TransferMatrix& P) {
  const int n = P.n;
  std::vector<std::vector<int>> fwd(n), rev(n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      if (P.q[s * static_cast<std::size_t>(n) + t] > 0.0) {
        fwd[s].push_back(t);
        rev[t].push_back(s);
      }
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  for (int s0 = 0; s0 < n; ++s0) {
    if (seen[s0]) continue;
    // Iterative post-order DFS.
    std::vector<std::pair<int, std::size_t>> stack{{s0, 0}};
    seen[s0] = 1;
    while (!stack.empty()) {
      auto& [u, k] = stack.back();
      if (k < fwd[u].size()) {
        const int nxt = fwd[u][k++];
        if (!seen[nxt]) {
          seen[nxt] = 1;
          stack.emplace_back(nxt, 0);
        }
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
  }
  std::vector<int> comp(n, -1);
  int ncomp = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp[*it] >= 0) continue;
    std::vector<int> stack{*it};
    comp[*it] = ncomp;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int w : rev[u])
        if (comp[w] < 0) {
          comp[w] = ncomp;
          stack.push_back(w);
        }
    }
    ++ncomp;
  }
  std::vector<char> closed(ncomp, 1);
  for (int s = 0; s < n; ++s)
    for (int t : fwd[s])
      if (comp[s] != comp[t]) closed[comp[s]] = 0;
  int k = 0;
  for (char c : closed) k += c;
  return k;
}

}  // namespace detail

/// Power-iteration fallback for the stationary vector.
inline std::vector<double> stationary_distribution_power(const TransferMatrix& P,
                                                         double tol = 1e-12,
                                                         long max_iter = 2000000) {
  const int n = P.n;
  std::vector<double> pi(n, 1.0 / n), next(n, 0.0);
  for (long it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < n; ++s) {
      const double ps = pi[s];
      if (ps == 0.0) continue;
      const double* row = &P.q[s * static_cast<std::size_t>(n)];
      for (int t = 0; t < n; ++t) next[t] += ps * row[t];
    }
    double sum = 0.0, diff = 0.0;
    for (int t = 0; t < n; ++t) sum += next[t];
    for (int t = 0; t < n; ++t) {
      next[t] /= sum;
      diff = std::max(diff, std::abs(next[t] - pi[t]));
    }
    pi.swap(next);
    if (diff <= tol) return pi;
  }
  throw SolverError("stationary_distribution_power: no convergence");
}

/// Stationary distribution of a row-stochastic matrix via the rank-one
/// shifted identity pi (I - P + ones) = ones, with a power-iteration
/// fallback when the solve comes back inaccurate. Chains with several
/// closed recurrent classes are rejected as ambiguous.
inline std::vector<double> stationary_distribution(const TransferMatrix& P) {
  const int n = P.n;
  if (n < 1) throw std::invalid_argument("stationary_distribution: empty matrix");
  for (int s = 0; s < n; ++s) {
    double row = 0.0;
    for (int t = 0; t < n; ++t) row += P.q[s * static_cast<std::size_t>(n) + t];
    if (std::abs(row - 1.0) > 1e-9)
      throw std::invalid_argument("stationary_distribution: matrix is not row-stochastic");
  }
  if (detail::count_closed_classes(P) != 1)
    throw std::domain_error(
        "stationary_distribution: chain has multiple closed classes, "
        "stationary vector is ambiguous");

  // Solve transposed: (I - P + ones)^T pi^T = 1^T.
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      a[t * static_cast<std::size_t>(n) + s] =
          (s == t ? 1.0 : 0.0) - P.q[s * static_cast<std::size_t>(n) + t] + 1.0;
  std::vector<double> pi = linalg::solve_dense(std::move(a), std::vector<double>(n, 1.0));

  double resid = 0.0, sum = 0.0;
  for (int t = 0; t < n; ++t) {
    double col = 0.0;
    for (int s = 0; s < n; ++s) col += pi[s] * P.q[s * static_cast<std::size_t>(n) + t];
    resid = std::max(resid, std::abs(col - pi[t]));
    sum += pi[t];
  }
  if (resid <= 1e-10 && std::abs(sum - 1.0) <= 1e-10) {
    for (double& p : pi) p = std::max(p, 0.0);
    return pi;
  }
  return stationary_distribution_power(P);
}

/// Long-run expected weighted-sum distortion of the converged policy:
/// the stationary average of the cost vector.
inline double expected_distortion(const std::vector<double>& v_star,
                                  const PolicyTable& rho_star,
                                  const OnlineModel& m) {
  if (static_cast<int>(v_star.size()) != m.num_states())
    throw std::invalid_argument("expected_distortion: cost vector length mismatch");
  const TransferMatrix P = transfer_matrix(rho_star, m);
  const std::vector<double> pi = stationary_distribution(P);
  double sum = 0.0;
  for (int s = 0; s < m.num_states(); ++s) sum += pi[s] * v_star[s];
  return sum;
}

/// Stationary probability that a harvest is clipped, per node.
inline std::pair<double, double> overflow_probability(const PolicyTable& rho,
                                                      const OnlineModel& m) {
  m.validate();
  rho.validate(m);
  const TransferMatrix P = transfer_matrix(rho, m);
  const std::vector<double> pi = stationary_distribution(P);
  double q1 = 0.0, q2 = 0.0;
  for (int s = 1; s <= m.num_states(); ++s) {
    const auto [i, j] = decode_state(s, m.L2);
    const auto [p1, p2] = rho.action[s - 1];
    q1 += pi[s - 1] * overflow_mass(i, p1, m.e1max, m.L1);
    q2 += pi[s - 1] * overflow_mass(j, p2, m.e2max, m.L2);
  }
  return {q1, q2};
}

}  // namespace ehpc
