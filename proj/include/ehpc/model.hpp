// Rate-distortion core for two correlated Gaussian sources sent over
// independent AWGN channels: achievable distortion region bounds, the
// closed-form minimum weighted-sum distortion with its two boundary
// branches, and a brute-force grid oracle over the region.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ehpc {

inline constexpr double kLn2 = std::numbers::ln2;

/// Static problem instance: source correlation, distortion weights and
/// channel power gains (noise variance normalized to 1).
struct SystemParams {
  double eta;       // squared correlation coefficient, in [0, 1]
  double w1, w2;    // distortion weights, w1 + w2 = 1 and w1 < w2
  double h1, h2;    // channel power gains, > 0

  double eta_bar() const { return 1.0 - eta; }

  // Throws std::invalid_argument on any violated constraint. The solver
  // derivations assume w1 < w2; callers wanting the symmetric case must
  // relabel the nodes instead of relying on a hidden swap here.
  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0))
      throw std::invalid_argument("SystemParams: eta must lie in [0, 1]");
    if (!(w1 > 0.0) || !(w2 > 0.0))
      throw std::invalid_argument("SystemParams: weights must be positive");
    if (std::abs(w1 + w2 - 1.0) > 1e-12)
      throw std::invalid_argument("SystemParams: weights must sum to 1");
    if (!(w1 < w2))
      throw std::invalid_argument(
          "SystemParams: w1 < w2 required (relabel nodes for the symmetric case)");
    if (!(h1 > 0.0) || !(h2 > 0.0))
      throw std::invalid_argument("SystemParams: channel gains must be positive");
  }
};

/// Coding rates of the two sources, bits per sample.
struct RatePair {
  double r1 = 0.0;
  double r2 = 0.0;
};

/// A mean-squared distortion pair.
struct DistortionPoint {
  double d1 = 1.0;
  double d2 = 1.0;
};

/// The five region bounds induced by a rate pair.
struct DistortionBounds {
  double d1min, d2min, d12min, d1max, d2max;
};

/// Shannon rate of one AWGN channel at transmit power p and gain h.
inline double channel_rate(double p, double h) {
  if (!(p >= 0.0)) throw std::domain_error("channel_rate: power must be >= 0");
  if (!(h > 0.0)) throw std::domain_error("channel_rate: gain must be > 0");
  return 0.5 * std::log1p(h * p) / kLn2;
}

/// Inverse of channel_rate: the power that supports rate r on gain h.
inline double power_for_rate(double r, double h) {
  if (!(r >= 0.0)) throw std::domain_error("power_for_rate: rate must be >= 0");
  if (!(h > 0.0)) throw std::domain_error("power_for_rate: gain must be > 0");
  return std::expm1(2.0 * r * kLn2) / h;
}

/// Region bounds at a rate pair. With x = 2^(-2 r1), y = 2^(-2 r2):
///   d1min  = (eta_bar + eta y) x          d1max = eta_bar + eta y
///   d2min  = (eta_bar + eta x) y          d2max = eta_bar + eta x
///   d12min = (eta_bar + eta x y) x y
inline DistortionBounds distortion_bounds(const RatePair& r, double eta) {
  if (!(r.r1 >= 0.0 && r.r2 >= 0.0))
    throw std::domain_error("distortion_bounds: rates must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::domain_error("distortion_bounds: eta must lie in [0, 1]");
  const double eb = 1.0 - eta;
  const double x = std::exp2(-2.0 * r.r1);
  const double y = std::exp2(-2.0 * r.r2);
  DistortionBounds b;
  b.d1max = eb + eta * y;
  b.d2max = eb + eta * x;
  b.d1min = b.d1max * x;
  b.d2min = b.d2max * y;
  b.d12min = (eb + eta * x * y) * x * y;
  return b;
}

/// Where the weighted-sum optimum sits on the region boundary. The curved
/// segment D1*D2 = d12min runs between two corners: corner C, where D1 hits
/// its point-to-point floor d1min, and corner D, where D2 hits d2min. The
/// line slope -w1/w2 selects the tangency on the curve when it lies between
/// the corners and the nearer corner otherwise.
enum class DistortionBranch { curve, corner_c, corner_d };

namespace detail {

// Denominator of the corner-D threshold; strictly positive for every
// admissible (w, eta) with x in (0, 1] (checked, not assumed).
inline double branch_denominator(double x, const SystemParams& p) {
  const double eb = p.eta_bar();
  const double t = eb + p.eta * x;
  return p.w2 * t * t - p.w1 * p.eta * x * x;
}

// Branch selection in multiplicative form (no logarithms):
//   corner D  iff r2 < g(r1), i.e. y * den > w1 * eta_bar * x;
//   corner C  iff the curve tangency falls below d1min, i.e.
//               w2 * (eta_bar + eta x y) * y < w1 * (eta_bar + eta y)^2 * x;
//   curve     otherwise. The two corner conditions exclude each other
//   because d1min * d2min <= d12min.
inline DistortionBranch select_branch(double x, double y,
                                      const SystemParams& p) {
  const double eb = p.eta_bar();
  if (p.eta == 1.0) return DistortionBranch::corner_d;  // degenerate region
  const double den = branch_denominator(x, p);
  if (!(den > 0.0))
    throw std::domain_error("branch threshold degenerate: non-positive denominator");
  if (y * den > p.w1 * eb * x) return DistortionBranch::corner_d;
  const double u = eb + p.eta * x * y;
  const double ty = eb + p.eta * y;
  if (p.w2 * u * y < p.w1 * ty * ty * x) return DistortionBranch::corner_c;
  return DistortionBranch::curve;
}

}  // namespace detail

/// Rate threshold g(r1) separating the curve-segment optimum (r2 >= g)
/// from the corner-point optimum (r2 < g). Returns +infinity when the
/// sources are perfectly correlated (eta = 1), where the corner always wins.
inline double g_threshold(double r1, const SystemParams& params) {
  params.validate();
  if (!(r1 >= 0.0)) throw std::domain_error("g_threshold: rate must be >= 0");
  const double x = std::exp2(-2.0 * r1);
  const double den = detail::branch_denominator(x, params);
  if (!(den > 0.0))
    throw std::domain_error("g_threshold: non-positive denominator");
  const double num = params.w1 * params.eta_bar() * x;
  if (num == 0.0) return std::numeric_limits<double>::infinity();
  return -0.5 * std::log(num / den) / kLn2;
}

/// Minimum weighted-sum distortion at a rate pair, with the achieving point.
struct MinDistortion {
  double value;            // w1*d1 + w2*d2 at the optimum (exact in the point)
  DistortionPoint point;   // the achieving (D1, D2)
  DistortionBranch branch;
};

inline MinDistortion min_weighted_distortion(const RatePair& r,
                                             const SystemParams& params) {
  params.validate();
  if (!(r.r1 >= 0.0 && r.r2 >= 0.0))
    throw std::domain_error("min_weighted_distortion: rates must be >= 0");

  MinDistortion out;
  if (params.eta == 1.0) {
    // Perfectly correlated sources: the region collapses and both
    // distortions equal 2^(-2 (r1 + r2)).
    const double d = std::exp2(-2.0 * (r.r1 + r.r2));
    out.point = {d, d};
    out.branch = DistortionBranch::corner_d;
  } else {
    const DistortionBounds b = distortion_bounds(r, params.eta);
    const double x = std::exp2(-2.0 * r.r1);
    const double y = std::exp2(-2.0 * r.r2);
    out.branch = detail::select_branch(x, y, params);
    switch (out.branch) {
      case DistortionBranch::curve:
        out.point.d1 = std::sqrt(params.w2 * b.d12min / params.w1);
        out.point.d2 = std::sqrt(params.w1 * b.d12min / params.w2);
        break;
      case DistortionBranch::corner_d:
        out.point.d2 = b.d2min;
        out.point.d1 = b.d12min / b.d2min;
        break;
      case DistortionBranch::corner_c:
        out.point.d1 = b.d1min;
        out.point.d2 = b.d12min / b.d1min;
        break;
    }
  }
  // The value is formed from the point so that w1*d1 + w2*d2 == value holds
  // bit-exactly for downstream consistency checks.
  out.value = params.w1 * out.point.d1 + params.w2 * out.point.d2;
  return out;
}

/// Membership test against the five region inequalities at tolerance tol.
inline bool region_contains(const DistortionPoint& pt, const RatePair& r,
                            double eta, double tol = 1e-12) {
  const DistortionBounds b = distortion_bounds(r, eta);
  return pt.d1 >= b.d1min - tol && pt.d2 >= b.d2min - tol &&
         pt.d1 <= b.d1max + tol && pt.d2 <= b.d2max + tol &&
         pt.d1 * pt.d2 >= b.d12min - tol;
}

/// Independent grid oracle for min_weighted_distortion: scans a
/// grid_n x grid_n lattice over the bounding box of the region, keeps the
/// feasible minimum and refines once around it at 10x resolution.
inline double brute_force_min_distortion(const RatePair& r,
                                         const SystemParams& params,
                                         int grid_n) {
  params.validate();
  if (grid_n < 1000)
    throw std::invalid_argument("brute_force_min_distortion: grid_n must be >= 1000");
  const DistortionBounds b = distortion_bounds(r, params.eta);
  const double feas_tol = 1e-12;

  const double range1 = b.d1max - b.d1min;
  const double range2 = b.d2max - b.d2min;
  const double step1 = range1 / (grid_n - 1);
  const double step2 = range2 / (grid_n - 1);

  double best = std::numeric_limits<double>::infinity();
  double best1 = b.d1min, best2 = b.d2min;
  for (int i = 0; i < grid_n; ++i) {
    const double d1 = b.d1min + i * step1;
    for (int j = 0; j < grid_n; ++j) {
      const double d2 = b.d2min + j * step2;
      if (d1 * d2 < b.d12min - feas_tol) continue;
      const double val = params.w1 * d1 + params.w2 * d2;
      if (val < best) {
        best = val;
        best1 = d1;
        best2 = d2;
      }
      // Feasibility is upward closed in d2 and the objective increases with
      // it, so the first feasible row settles this column.
      break;
    }
  }
  if (!std::isfinite(best))
    throw std::logic_error("brute_force_min_distortion: empty feasible grid");

  // One refinement pass around the coarse minimizer at 10x resolution.
  const double fine1 = step1 / 10.0, fine2 = step2 / 10.0;
  for (int i = -15; i <= 15; ++i) {
    const double d1 = std::clamp(best1 + i * fine1, b.d1min, b.d1max);
    for (int j = -15; j <= 15; ++j) {
      const double d2 = std::clamp(best2 + j * fine2, b.d2min, b.d2max);
      if (d1 * d2 < b.d12min - feas_tol) continue;
      best = std::min(best, params.w1 * d1 + params.w2 * d2);
    }
  }
  return best;
}

}  // namespace ehpc
