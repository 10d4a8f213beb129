#include "pshield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pshield {

std::vector<double> constrained_max(std::span<const CurvePoint> points,
                                    double l1_budget,
                                    std::span<const double> delta_limits_pct,
                                    double undefended_adv_err_pct) {
  if (points.empty()) throw ParamError("constrained_max: no points");
  std::vector<double> out;
  out.reserve(delta_limits_pct.size());
  for (double limit : delta_limits_pct) {
    if (!(limit > 0.0)) throw ParamError("constrained_max: limits must be > 0");
    double best = undefended_adv_err_pct;
    bool feasible = false;
    for (const auto& p : points) {
      if (p.mean_l1 <= l1_budget && p.delta_def_err_pct <= limit) {
        best = feasible ? std::max(best, p.adv_err_pct) : p.adv_err_pct;
        feasible = true;
      }
    }
    out.push_back(best);
  }
  return out;
}

namespace {

double axis_value(const CurvePoint& p, ParetoAxis axis) {
  return axis == ParetoAxis::DefenderError ? p.def_err_pct : p.mean_l1;
}

}  // namespace

std::vector<CurvePoint> pareto_curve(std::span<const CurvePoint> points,
                                     ParetoAxis axis) {
  if (points.empty()) throw ParamError("pareto_curve: no points");

  std::vector<CurvePoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [axis](const CurvePoint& a, const CurvePoint& b) {
              const double xa = axis_value(a, axis);
              const double xb = axis_value(b, axis);
              if (xa != xb) return xa < xb;
              if (a.adv_err_pct != b.adv_err_pct)
                return a.adv_err_pct > b.adv_err_pct;
              if (a.beta != b.beta) return a.beta < b.beta;
              return a.seed < b.seed;
            });

  // Sweep groups of equal x left to right; a group's maximum survives iff it
  // strictly beats everything at smaller x.
  std::vector<CurvePoint> frontier;
  double running_max = -1.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    double gmax = sorted[i].adv_err_pct;
    while (j < sorted.size() &&
           axis_value(sorted[j], axis) == axis_value(sorted[i], axis)) {
      gmax = std::max(gmax, sorted[j].adv_err_pct);
      ++j;
    }
    if (gmax > running_max) {
      for (std::size_t k = i; k < j; ++k) {
        if (sorted[k].adv_err_pct == gmax) frontier.push_back(sorted[k]);
      }
      running_max = gmax;
    }
    i = j;
  }
  return frontier;
}

double nearest_rank_percentile(std::vector<std::uint64_t> values, double pct) {
  if (values.empty()) throw ParamError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::max<std::size_t>(1, std::min<std::size_t>(rank, values.size()));
  return static_cast<double>(values[rank - 1]);
}

double midpoint_median(std::vector<std::uint64_t> values) {
  if (values.empty()) throw ParamError("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return 0.5 * (static_cast<double>(values[n / 2 - 1]) +
                static_cast<double>(values[n / 2]));
}

std::vector<LatencySummary> latency_summary(
    std::span<const LatencySample> samples) {
  if (samples.empty()) throw ParamError("latency_summary: no samples");
  double baseline_mean = 0.0;
  bool have_baseline = false;

  std::vector<LatencySummary> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.ns.size() < 100) {
      throw InsufficientSamplesError(
          "latency_summary: defense '" + s.defense + "' has " +
          std::to_string(s.ns.size()) + " samples, need >= 100");
    }
    LatencySummary sum;
    sum.defense = s.defense;
    sum.samples = s.ns.size();
    double total = 0.0;
    for (std::uint64_t v : s.ns) total += static_cast<double>(v);
    sum.mean_ns = total / static_cast<double>(s.ns.size());
    sum.median_ns = midpoint_median(s.ns);
    sum.p99_ns = nearest_rank_percentile(s.ns, 99.0);
    if (s.defense == "none") {
      baseline_mean = sum.mean_ns;
      have_baseline = true;
    }
    out.push_back(std::move(sum));
  }
  if (!have_baseline) {
    throw ParamError("latency_summary: need a 'none' baseline entry");
  }
  for (auto& s : out) {
    s.overhead_ratio = baseline_mean > 0.0 ? s.mean_ns / baseline_mean : 1.0;
  }
  return out;
}

}  // namespace pshield
