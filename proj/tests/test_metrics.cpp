#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pshield/metrics.hpp"
#include "pshield/rng.hpp"

using namespace pshield;

namespace {

CurvePoint pt(double l1, double delta, double adv, double beta = 0.0,
              std::uint64_t seed = 0) {
  CurvePoint p;
  p.defense = "dcp";
  p.beta = beta;
  p.seed = seed;
  p.mean_l1 = l1;
  p.delta_def_err_pct = delta;
  p.adv_err_pct = adv;
  p.def_err_pct = delta + 3.0;
  return p;
}

// O(n^2) dominance scan, the independent route for the frontier tests.
std::vector<std::size_t> brute_force_frontier(const std::vector<CurvePoint>& pts,
                                              ParetoAxis axis) {
  auto x = [axis](const CurvePoint& p) {
    return axis == ParetoAxis::DefenderError ? p.def_err_pct : p.mean_l1;
  };
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (j == i) continue;
      const bool weakly = x(pts[j]) <= x(pts[i]) &&
                          pts[j].adv_err_pct >= pts[i].adv_err_pct;
      const bool strictly = x(pts[j]) < x(pts[i]) ||
                            pts[j].adv_err_pct > pts[i].adv_err_pct;
      dominated = weakly && strictly;
    }
    if (!dominated) keep.push_back(i);
  }
  return keep;
}

}  // namespace

TEST_CASE("constrained_max") {
  const std::vector<double> limits{1.0, 2.0, 5.0};

  SUBCASE("empty feasible set falls back to the undefended value") {
    const std::vector<CurvePoint> pts{pt(1.5, 0.5, 90.0)};
    const auto out = constrained_max(pts, 0.9, limits, 34.5);
    for (double v : out) CHECK(v == 34.5);
  }
  SUBCASE("maxima are non-decreasing in the limit") {
    const std::vector<CurvePoint> pts{
        pt(0.5, 0.8, 40.0), pt(0.6, 1.5, 48.0), pt(0.7, 4.0, 55.0),
        pt(0.8, 6.0, 70.0),  // violates every limit
    };
    const auto out = constrained_max(pts, 0.9, limits, 30.0);
    CHECK(out[0] == 40.0);
    CHECK(out[1] == 48.0);
    CHECK(out[2] == 55.0);
    CHECK(std::is_sorted(out.begin(), out.end()));
  }
  SUBCASE("hand fixture matches an exhaustive scan") {
    const std::vector<CurvePoint> pts{
        pt(0.30, 0.4, 41.0), pt(0.85, 1.9, 52.0), pt(0.95, 0.2, 88.0),
        pt(0.40, 2.1, 66.0), pt(0.89, 1.2, 47.0),
    };
    const auto out = constrained_max(pts, 0.9, std::vector<double>{2.0}, 30.0);
    // feasible under (l1<=0.9, delta<=2): 41, 52, 47 -> max 52
    CHECK(out[0] == 52.0);
  }
  SUBCASE("monotone in budget and limit on random clouds") {
    Rng rng(99);
    for (int cloud = 0; cloud < 300; ++cloud) {
      std::vector<CurvePoint> pts;
      const std::size_t n = 3 + rng.index(40);
      for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(pt(2.0 * rng.unit(), -1.0 + 7.0 * rng.unit(),
                         100.0 * rng.unit()));
      }
      const double undef = 100.0 * rng.unit();
      const std::vector<double> lims{0.5, 1.0, 2.0, 5.0};
      const auto a = constrained_max(pts, 0.6, lims, undef);
      const auto b = constrained_max(pts, 1.2, lims, undef);
      for (std::size_t i = 0; i < lims.size(); ++i) {
        // larger budget only widens the feasible set
        if (a[i] != undef) CHECK(b[i] >= a[i]);
        if (i > 0 && a[i - 1] != undef) CHECK(a[i] >= a[i - 1]);
      }
    }
  }
  SUBCASE("order independence") {
    std::vector<CurvePoint> pts{pt(0.3, 0.5, 40.0), pt(0.5, 1.0, 50.0),
                                pt(0.7, 3.0, 60.0)};
    const auto before = constrained_max(pts, 0.9, limits, 20.0);
    std::reverse(pts.begin(), pts.end());
    CHECK(constrained_max(pts, 0.9, limits, 20.0) == before);
  }
  CHECK_THROWS_AS(constrained_max({}, 0.9, limits, 1.0), ParamError);
}

TEST_CASE("pareto_curve") {
  SUBCASE("single point survives") {
    const std::vector<CurvePoint> pts{pt(0.4, 1.0, 50.0)};
    CHECK(pareto_curve(pts, ParetoAxis::MeanL1).size() == 1);
  }
  SUBCASE("dominated point excluded") {
    std::vector<CurvePoint> pts;
    CurvePoint a = pt(0.0, 0.0, 45.0);
    a.mean_l1 = 0.4;
    CurvePoint b = pt(0.0, 0.0, 40.0);
    b.mean_l1 = 0.5;  // dominated: worse x, lower error
    pts = {a, b};
    const auto front = pareto_curve(pts, ParetoAxis::MeanL1);
    REQUIRE(front.size() == 1);
    CHECK(front[0].adv_err_pct == 45.0);
  }
  SUBCASE("six point fixture equals the brute-force frontier") {
    std::vector<CurvePoint> pts;
    const double data[6][2] = {{0.1, 20}, {0.2, 35}, {0.25, 30},
                               {0.4, 50}, {0.5, 50}, {0.9, 48}};
    for (const auto& d : data) {
      CurvePoint p = pt(d[0], 0.0, d[1]);
      p.def_err_pct = d[0] * 10;
      pts.push_back(p);
    }
    const auto front = pareto_curve(pts, ParetoAxis::MeanL1);
    const auto expect = brute_force_frontier(pts, ParetoAxis::MeanL1);
    REQUIRE(front.size() == expect.size());
    for (std::size_t i = 0; i < front.size(); ++i) {
      CHECK(front[i].mean_l1 == pts[expect[i]].mean_l1);
      CHECK(front[i].adv_err_pct == pts[expect[i]].adv_err_pct);
    }
  }
  SUBCASE("matches brute force on random clouds, mutually non-dominated") {
    Rng rng(7);
    for (int cloud = 0; cloud < 60; ++cloud) {
      std::vector<CurvePoint> pts;
      const std::size_t n = 2 + rng.index(499);
      for (std::size_t i = 0; i < n; ++i) {
        // quantized values so ties actually occur
        CurvePoint p = pt(0.1 * static_cast<double>(rng.index(10)), 0.0,
                          5.0 * static_cast<double>(rng.index(20)),
                          0.1 * static_cast<double>(rng.index(5)), rng.index(3));
        p.def_err_pct = p.mean_l1 * 7.0;
        pts.push_back(p);
      }
      for (const ParetoAxis axis :
           {ParetoAxis::MeanL1, ParetoAxis::DefenderError}) {
        const auto front = pareto_curve(pts, axis);
        const auto expect = brute_force_frontier(pts, axis);
        CHECK(front.size() == expect.size());
        // mutual non-domination within the returned frontier
        const auto again = brute_force_frontier(front, axis);
        CHECK(again.size() == front.size());
        // sorted by x with deterministic tie-breaks
        for (std::size_t i = 1; i < front.size(); ++i) {
          const double xa = axis == ParetoAxis::MeanL1 ? front[i - 1].mean_l1
                                                       : front[i - 1].def_err_pct;
          const double xb =
              axis == ParetoAxis::MeanL1 ? front[i].mean_l1 : front[i].def_err_pct;
          CHECK(xa <= xb);
        }
      }
    }
  }
  SUBCASE("order independence") {
    Rng rng(8);
    std::vector<CurvePoint> pts;
    for (int i = 0; i < 50; ++i) {
      pts.push_back(pt(2.0 * rng.unit(), 0.0, 100.0 * rng.unit(),
                       0.1 * static_cast<double>(rng.index(16)), rng.index(5)));
    }
    const auto front = pareto_curve(pts, ParetoAxis::MeanL1);
    std::vector<CurvePoint> shuffled = pts;
    rng.shuffle(shuffled);
    const auto front2 = pareto_curve(shuffled, ParetoAxis::MeanL1);
    REQUIRE(front.size() == front2.size());
    for (std::size_t i = 0; i < front.size(); ++i) {
      CHECK(front[i].mean_l1 == front2[i].mean_l1);
      CHECK(front[i].adv_err_pct == front2[i].adv_err_pct);
      CHECK(front[i].beta == front2[i].beta);
      CHECK(front[i].seed == front2[i].seed);
    }
  }
}

TEST_CASE("latency_summary") {
  SUBCASE("identical arrays give ratio 1") {
    std::vector<std::uint64_t> ns(200);
    for (std::size_t i = 0; i < ns.size(); ++i) ns[i] = 1000 + i;
    const std::vector<LatencySample> samples{{"none", ns}, {"dcp", ns}};
    const auto out = latency_summary(samples);
    REQUIRE(out.size() == 2);
    CHECK(out[0].overhead_ratio == doctest::Approx(1.0));
    CHECK(out[1].overhead_ratio == doctest::Approx(1.0));
  }
  SUBCASE("median of 1..100 is 50.5; p99 is nearest-rank") {
    std::vector<std::uint64_t> ns(100);
    for (std::size_t i = 0; i < 100; ++i) ns[i] = i + 1;
    const std::vector<LatencySample> samples{{"none", ns}};
    const auto out = latency_summary(samples);
    CHECK(out[0].median_ns == 50.5);
    CHECK(out[0].p99_ns == 99.0);  // ceil(0.99*100) = 99th of 1..100
    CHECK(out[0].mean_ns == doctest::Approx(50.5));
  }
  SUBCASE("recomputation with an independent percentile implementation") {
    Rng rng(12);
    std::vector<std::uint64_t> ns(1037);
    for (auto& v : ns) v = 500 + rng.index(100000);
    const std::vector<LatencySample> samples{{"none", ns}};
    const auto out = latency_summary(samples);
    // independent nearest-rank: index ceil(p/100 * n) in 1-based sorted order
    std::vector<std::uint64_t> sorted = ns;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.99 * 1037.0));
    CHECK(out[0].p99_ns == static_cast<double>(sorted[rank - 1]));
  }
  SUBCASE("insufficient samples") {
    std::vector<std::uint64_t> tiny(99, 5);
    const std::vector<LatencySample> samples{{"none", tiny}};
    CHECK_THROWS_AS(latency_summary(samples), InsufficientSamplesError);
  }
  SUBCASE("missing baseline") {
    std::vector<std::uint64_t> ns(150, 5);
    const std::vector<LatencySample> samples{{"dcp", ns}};
    CHECK_THROWS_AS(latency_summary(samples), ParamError);
  }
}
