#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "ehpc/offline.hpp"

using namespace ehpc;

namespace {

const SystemParams kPaper{0.7, 0.3, 0.7, 0.8, 0.5};
const EnergyTrace kE1{5, 6, 2, 4, 9, 2, 10, 8, 6, 7};
const EnergyTrace kE2{5, 10, 2, 9, 10, 9, 2, 4, 5, 9};

bool causal(const PowerSchedule& p, const EnergyTrace& e, double tol = 1e-9) {
  double slack = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    slack += e[t] - p[t];
    if (slack < -tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("directional water-filling reproduces the reference bands") {
  const DirectionalWfResult r = directional_wf_single(kE1);
  REQUIRE(r.bands.size() == 3);
  CHECK(r.bands[0].start == 1);
  CHECK(r.bands[0].end == 4);
  CHECK(r.bands[0].power == 4.25);
  CHECK(r.bands[1].start == 5);
  CHECK(r.bands[1].end == 6);
  CHECK(r.bands[1].power == 5.5);
  CHECK(r.bands[2].start == 7);
  CHECK(r.bands[2].end == 10);
  CHECK(r.bands[2].power == 7.75);
  for (int t = 0; t < 4; ++t) CHECK(r.power[t] == 4.25);
  CHECK(causal(r.power, kE1, 1e-12));
}

TEST_CASE("directional water-filling degenerate traces") {
  const EnergyTrace flat(6, 3.5);
  const DirectionalWfResult c = directional_wf_single(flat);
  REQUIRE(c.bands.size() == 1);
  for (double p : c.power) CHECK(p == 3.5);

  EnergyTrace late(5, 0.0);
  late.back() = 7.0;
  const DirectionalWfResult l = directional_wf_single(late);
  for (int t = 0; t < 4; ++t) CHECK(l.power[t] == 0.0);
  CHECK(l.power[4] == 7.0);

  const DirectionalWfResult z = directional_wf_single(EnergyTrace(4, 0.0));
  for (double p : z.power) CHECK(p == 0.0);
}

TEST_CASE("multipliers at full-variance point and sign properties") {
  const KktMultipliers m = kkt_multipliers(1.0, 1.0, kPaper);
  CHECK(m.branch == DistortionBranch::corner_d);
  CHECK_THAT(m.lambda3, Catch::Matchers::WithinRel(kPaper.w1 * kLn2, 1e-14));
  CHECK_THAT(m.lambda2, Catch::Matchers::WithinAbs(kPaper.w2 - kPaper.w1, 1e-14));
  CHECK(m.lambda1 == 0.0);

  // Branch at x = y = 1/4: r2 = 1 sits below g(1), so the corner is active.
  const KktMultipliers q = kkt_multipliers(0.25, 0.25, kPaper);
  CHECK(g_threshold(1.0, kPaper) > 1.0);
  CHECK(q.branch == DistortionBranch::corner_d);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(1e-4, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double x = unit(rng), y = unit(rng);
    const KktMultipliers mm = kkt_multipliers(x, y, kPaper);
    CHECK(mm.lambda1 >= 0.0);
    CHECK(mm.lambda2 >= 0.0);
    CHECK(mm.lambda3 > 0.0);
  }
}

TEST_CASE("multipliers satisfy stationarity in the distortion pair") {
  // w1 - lambda1 - lambda3 / (D1 ln2) = 0 and
  // w2 - lambda2 - lambda3 / (D2 ln2) = 0 at the achieving point.
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> rate(0.0, 3.0), eta_d(0.05, 0.95);
  for (int k = 0; k < 2000; ++k) {
    SystemParams p = kPaper;
    p.eta = eta_d(rng);
    const RatePair r{rate(rng), rate(rng)};
    const double x = std::exp2(-2.0 * r.r1), y = std::exp2(-2.0 * r.r2);
    const KktMultipliers m = kkt_multipliers(x, y, p);
    const MinDistortion d = min_weighted_distortion(r, p);
    CHECK_THAT(p.w1 - m.lambda1 - m.lambda3 / (d.point.d1 * kLn2),
               Catch::Matchers::WithinAbs(0.0, 1e-11));
    CHECK_THAT(p.w2 - m.lambda2 - m.lambda3 / (d.point.d2 * kLn2),
               Catch::Matchers::WithinAbs(0.0, 1e-11));
  }
}

TEST_CASE("water level rises with own power and is branch continuous") {
  // The level is the reciprocal of a stationarity expression that shrinks
  // as the node's own power grows; bisection relies on this direction.
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> pw(0.0, 20.0), delta(1e-6, 5.0);
  for (int k = 0; k < 1000; ++k) {
    const int node = 1 + (k & 1);
    const double p = pw(rng), d = delta(rng), other = pw(rng);
    CHECK(water_level(node, p + d, other, kPaper) >
          water_level(node, p, other, kPaper));
  }

  const double z0 = water_level(1, 0.0, 0.0, kPaper);
  CHECK(z0 > 0.0);
  // lambda3 = w1 ln2 and lambda2 = w2 - w1 at zero powers give
  // 1 / (h1 * (lambda2*eta + lambda3*eta/ln2 + lambda3/ln2)).
  const double expect =
      1.0 / (kPaper.h1 * ((kPaper.w2 - kPaper.w1) * kPaper.eta +
                          kPaper.w1 * kPaper.eta + kPaper.w1));
  CHECK_THAT(z0, Catch::Matchers::WithinRel(expect, 1e-12));

  // Continuity across the corner-D/curve boundary.
  for (double r1 : {0.2, 0.8, 1.6}) {
    const double g = g_threshold(r1, kPaper);
    const double p1 = power_for_rate(r1, kPaper.h1);
    const double p2lo = power_for_rate(std::max(0.0, g - 1e-9), kPaper.h2);
    const double p2hi = power_for_rate(g + 1e-9, kPaper.h2);
    CHECK_THAT(water_level(1, p1, p2lo, kPaper),
               Catch::Matchers::WithinRel(water_level(1, p1, p2hi, kPaper), 1e-6));
    CHECK_THAT(water_level(2, p2lo, p1, kPaper),
               Catch::Matchers::WithinRel(water_level(2, p2hi, p1, kPaper), 1e-6));
  }
}

TEST_CASE("backward pass base cases") {
  CHECK(backward_wf_pass(1, {4.0}, {0.0}, kPaper) == PowerSchedule{4.0});

  const PowerSchedule p = backward_wf_pass(2, {0.0, 6.0}, {1.0, 1.0}, kPaper);
  CHECK(p[0] == 0.0);
  CHECK_THAT(p[1], Catch::Matchers::WithinRel(6.0, 1e-12));
}

TEST_CASE("backward pass yields causal non-decreasing levels") {
  const PowerSchedule p1 = directional_wf_single(kE1).power;
  const PowerSchedule p2 = backward_wf_pass(2, kE2, p1, kPaper);
  CHECK(causal(p2, kE2));
  const std::vector<double> z = water_levels(2, p2, p1, kPaper);
  for (std::size_t t = 0; t + 1 < z.size(); ++t)
    CHECK(z[t + 1] >= z[t] - 1e-8 * std::max(1.0, z[t]));
  // Everything is spent by the end.
  const double total_p = std::accumulate(p2.begin(), p2.end(), 0.0);
  const double total_e = std::accumulate(kE2.begin(), kE2.end(), 0.0);
  CHECK_THAT(total_p, Catch::Matchers::WithinRel(total_e, 1e-9));
}

TEST_CASE("level equalization is bisection-tight within bands") {
  // Consecutive slots either share a band level to the bisection tolerance
  // or sit across a genuine band boundary; nothing in between.
  const PowerSchedule p1 = directional_wf_single(kE1).power;
  const PowerSchedule p2 = backward_wf_pass(2, kE2, p1, kPaper);
  const std::vector<double> z = water_levels(2, p2, p1, kPaper);
  for (std::size_t t = 0; t + 1 < z.size(); ++t) {
    if (p2[t] == 0.0 || p2[t + 1] == 0.0) continue;
    const double gap = std::abs(z[t + 1] - z[t]);
    const double scale = std::max(1.0, z[t]);
    if (gap < 1e-6 * scale) CHECK(gap <= 1e-10 * scale);
  }
}

TEST_CASE("alternating solver on the reference instance") {
  const GbwfResult res = iterative_gbwf(kE1, kE2, kPaper, 1e-6);
  CHECK(res.iterations <= 50);
  CHECK(causal(res.p1, kE1));
  CHECK(causal(res.p2, kE2));
  for (std::size_t k = 0; k + 1 < res.objective_history.size(); ++k)
    CHECK(res.objective_history[k + 1] <= res.objective_history[k] + 1e-9);

  // While one node's single-user schedule is flat, the joint schedules move
  // against each other: the node drifts down, the other drifts up.
  const auto check_bands = [&](const std::vector<DwfBand>& bands,
                               const PowerSchedule& own,
                               const PowerSchedule& other) {
    for (const auto& b : bands)
      for (int t = b.start; t < b.end; ++t) {
        CHECK(own[t] <= own[t - 1] + 1e-7);
        CHECK(other[t] >= other[t - 1] - 1e-7);
      }
  };
  check_bands(directional_wf_single(kE1).bands, res.p1, res.p2);
  check_bands(directional_wf_single(kE2).bands, res.p2, res.p1);
}

TEST_CASE("alternating solver on a symmetric instance") {
  SystemParams p = kPaper;
  p.w1 = 0.49;
  p.w2 = 0.51;
  p.h2 = p.h1;
  const GbwfResult res = iterative_gbwf(kE1, kE1, p, 1e-8);
  for (std::size_t t = 0; t < res.p1.size(); ++t)
    CHECK_THAT(res.p1[t], Catch::Matchers::WithinAbs(res.p2[t], 1e-3));
}

TEST_CASE("alternating solver spends everything on a single slot") {
  const GbwfResult res = iterative_gbwf({3.0}, {5.0}, kPaper, 1e-9);
  CHECK_THAT(res.p1[0], Catch::Matchers::WithinRel(3.0, 1e-9));
  CHECK_THAT(res.p2[0], Catch::Matchers::WithinRel(5.0, 1e-9));
}

TEST_CASE("structure verification passes on solved instances") {
  const GbwfResult res = iterative_gbwf(kE1, kE2, kPaper, 1e-8);
  const StructureReport rep =
      verify_structure(res.p1, res.p2, kE1, kE2, kPaper, 1e-5);
  for (const auto& v : rep.violations)
    INFO("node " << v.node << " slot " << v.slot << ": " << v.what);
  CHECK(rep.ok());
  // The final slot always depletes both buffers.
  REQUIRE_FALSE(rep.depletion1.empty());
  REQUIRE_FALSE(rep.depletion2.empty());
  CHECK(rep.depletion1.back() == 10);
  CHECK(rep.depletion2.back() == 10);

  // Constant arrivals: the optimum spends exactly the arrival each slot, so
  // the cumulative slack is zero everywhere and the level never jumps.
  const GbwfResult flat =
      iterative_gbwf(EnergyTrace(6, 4.0), EnergyTrace(6, 5.0), kPaper, 1e-8);
  const StructureReport frep = verify_structure(
      flat.p1, flat.p2, EnergyTrace(6, 4.0), EnergyTrace(6, 5.0), kPaper, 1e-5);
  CHECK(frep.ok());
  CHECK(frep.bands1.size() == 1);
  CHECK(frep.bands2.size() == 1);
  CHECK(frep.depletion1.back() == 6);
  CHECK(frep.depletion2.back() == 6);
}

TEST_CASE("band-averaged levels are piecewise constant and non-decreasing") {
  const GbwfResult res = iterative_gbwf(kE1, kE2, kPaper, 1e-8);
  const StructureReport rep =
      verify_structure(res.p1, res.p2, kE1, kE2, kPaper, 1e-5);
  const WaterLevels w1 =
      make_water_levels(1, res.p1, res.p2, kPaper, rep.depletion1);
  REQUIRE(w1.nu.size() == res.p1.size());
  for (std::size_t t = 0; t + 1 < w1.nu.size(); ++t)
    CHECK(w1.nu[t + 1] >= w1.nu[t] - 1e-8);
  // With positive powers the per-slot level sits on the band level.
  for (std::size_t t = 0; t < w1.nu.size(); ++t)
    CHECK_THAT(w1.zeta[t], Catch::Matchers::WithinRel(w1.nu[t], 1e-6));
}

TEST_CASE("structure verification flags a perturbed schedule") {
  GbwfResult res = iterative_gbwf(kE1, kE2, kPaper, 1e-8);
  // Swapping within the last band moves the smaller power earlier: prefixes
  // only drop, so the schedule stays causal, but the level order breaks.
  std::swap(res.p1[6], res.p1[9]);
  REQUIRE(causal(res.p1, kE1));
  const StructureReport rep =
      verify_structure(res.p1, res.p2, kE1, kE2, kPaper, 1e-5);
  CHECK_FALSE(rep.ok());
}

TEST_CASE("perfect-correlation closed form") {
  const auto [p1z, p2z] = eta_one_closed_form(1.0, 0.8 * 0.8 / 0.5, 0.8, 0.5);
  CHECK(p1z == 0.0);  // h1^2 nu1^2 == h2 nu2 puts the bracket at zero
  (void)p2z;

  double prev = 0.0;
  for (double nu1 : {0.5, 1.0, 2.0, 4.0}) {
    const double p1 = eta_one_closed_form(nu1, 1.0, 0.8, 0.5).first;
    CHECK(p1 >= prev);
    prev = p1;
  }
  prev = 1e9;
  for (double nu2 : {0.5, 1.0, 2.0, 4.0}) {
    const double p1 = eta_one_closed_form(4.0, nu2, 0.8, 0.5).first;
    CHECK(p1 <= prev);
    prev = p1;
  }
  CHECK_THROWS_AS(eta_one_closed_form(0.0, 1.0, 0.8, 0.5), std::domain_error);
}

TEST_CASE("solver output matches the perfect-correlation closed form") {
  SystemParams p = kPaper;
  p.eta = 1.0;
  const EnergyTrace e1{4, 2, 6, 3}, e2{3, 5, 2, 4};
  const GbwfResult res = iterative_gbwf(e1, e2, p, 1e-10);
  for (std::size_t t = 0; t < e1.size(); ++t) {
    REQUIRE(res.p1[t] > 0.0);
    REQUIRE(res.p2[t] > 0.0);
    const double nu1 = water_level(1, res.p1[t], res.p2[t], p);
    const double nu2 = water_level(2, res.p2[t], res.p1[t], p);
    const auto [c1, c2] = eta_one_closed_form(nu1, nu2, p.h1, p.h2);
    CHECK_THAT(c1, Catch::Matchers::WithinAbs(res.p1[t], 1e-6));
    CHECK_THAT(c2, Catch::Matchers::WithinAbs(res.p2[t], 1e-6));
  }
}

TEST_CASE("exhaustive oracle brackets the solver objective") {
  // Single slot: everything is spent, both routes agree tightly.
  const OfflineOracleResult one =
      offline_oracle({2.0}, {3.0}, kPaper, OracleMode::exhaustive, 16);
  const GbwfResult gone = iterative_gbwf({2.0}, {3.0}, kPaper, 1e-9);
  CHECK(gone.objective <= one.objective + 1e-9);

  const std::vector<std::pair<EnergyTrace, EnergyTrace>> toys = {
      {{1.0, 2.0, 1.0}, {2.0, 1.0, 2.0}},
      {{3.0, 0.5, 2.0}, {0.5, 3.0, 1.0}},
      {{0.0, 2.0, 4.0}, {4.0, 0.0, 1.0}},
  };
  for (const auto& [e1, e2] : toys) {
    const OfflineOracleResult ex =
        offline_oracle(e1, e2, kPaper, OracleMode::exhaustive, 14);
    const GbwfResult g = iterative_gbwf(e1, e2, kPaper, 1e-9);
    CHECK(g.objective <= ex.objective + 1e-9);
    CHECK(ex.objective - g.objective <= 0.05);  // grid slack at 14 levels
    CHECK(causal(ex.p1, e1));
    CHECK(causal(ex.p2, e2));
  }
}

TEST_CASE("descent oracle agrees with the solver on the reference instance") {
  const GbwfResult g = iterative_gbwf(kE1, kE2, kPaper, 1e-8);
  const OfflineOracleResult d =
      offline_oracle(kE1, kE2, kPaper, OracleMode::descent);
  CHECK(std::abs(d.objective - g.objective) / g.objective <= 1e-4);
  CHECK(causal(d.p1, kE1));
  CHECK(causal(d.p2, kE2));
}

TEST_CASE("solver rejects bad inputs") {
  CHECK_THROWS_AS(iterative_gbwf({1.0, 2.0}, {1.0}, kPaper, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(iterative_gbwf({-1.0}, {1.0}, kPaper, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(offline_oracle({1, 1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1, 1},
                                 kPaper, OracleMode::exhaustive),
                  std::invalid_argument);
}
