#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pshield/errors.hpp"

namespace pshield {

// One row of the results table: a (defense, beta, seed, budget) cell with its
// measured errors (in percent), perturbation distances, and latency.
struct CurvePoint {
  std::string defense;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
  double adv_err_pct = 0.0;
  double def_err_pct = 0.0;
  // signed difference vs the undefended defender error; negative when the
  // perturbation accidentally helps, and a <= limit constraint still admits it
  double delta_def_err_pct = 0.0;
  double mean_l1 = 0.0;
  double max_l1 = 0.0;
  double mean_latency_ns = 0.0;
  std::uint64_t queries = 0;
};

// Maximum adversary error over points satisfying mean_l1 <= l1_budget and
// delta_def_err_pct <= limit, one entry per limit. An empty feasible set
// falls back to the undefended adversary error.
std::vector<double> constrained_max(std::span<const CurvePoint> points,
                                    double l1_budget,
                                    std::span<const double> delta_limits_pct,
                                    double undefended_adv_err_pct);

enum class ParetoAxis { DefenderError, MeanL1 };

// Non-dominated subset (maximize adv_err_pct, minimize the x axis), sorted by
// x with ties broken by beta then seed. Output is order-independent of the
// input ordering.
std::vector<CurvePoint> pareto_curve(std::span<const CurvePoint> points,
                                     ParetoAxis axis);

struct LatencySample {
  std::string defense;
  std::vector<std::uint64_t> ns;
};

// Per-defense latency digest. All values in nanoseconds: the table emitters
// format milliseconds at 3 decimals. Median is the classic midpoint rule;
// p99 is nearest-rank.
struct LatencySummary {
  std::string defense;
  std::size_t samples = 0;
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double p99_ns = 0.0;
  double overhead_ratio = 1.0;  // mean / NoDefense mean
};

// Requires >= 100 recorded queries per defense (InsufficientSamplesError
// otherwise) and a "none" baseline entry for the overhead ratios.
std::vector<LatencySummary> latency_summary(
    std::span<const LatencySample> samples);

double nearest_rank_percentile(std::vector<std::uint64_t> sorted_or_not,
                               double pct);
double midpoint_median(std::vector<std::uint64_t> values);

}  // namespace pshield
