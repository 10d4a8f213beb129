#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pshield/simplex.hpp"

namespace pshield {

// Knobs shared by the perturbation defenses. tau is optional: when unset,
// the DCP rule derives it as min(beta, 1) and AM falls back to 0.5.
struct DefenseConfig {
  double beta = 0.0;     // perturbation magnitude, swept over [0, 1.5]
  double gamma = 0.2;    // reverse-sigmoid convergence constant
  double nu = 1000.0;    // detector sharpness
  std::optional<double> tau;  // detector threshold override
  double coeff_a = 1.0;  // linear-combination coefficients of the
  double coeff_b = 0.0;  // general perturbation form
  int top_k = 1;         // TopKTruncate only
  std::uint64_t noise_seed = 0;  // RandomNoise only

  void validate() const;  // throws ConfigError on out-of-range values

  double dcp_tau() const;  // tau override or min(beta, 1)
  double am_tau() const;   // tau override or 0.5
};

enum class DefenseKind {
  NoDefense,
  RandomNoise,
  TopKTruncate,
  HardLabel,
  ReverseSigmoid,
  AdaptiveMisinformation,
  DCP,
};

std::string_view defense_name(DefenseKind kind);
DefenseKind defense_from_name(std::string_view name);  // throws ConfigError

// r(y) = S(gamma * S^-1(y)) - 1/2 applied elementwise; every entry lands in
// (-1/2, 1/2). Posterior entries are clamped before the logit (see simplex).
RawScoreVector rs_noise(const ProbabilityVector& y, double gamma);

// alpha = S(nu * (y_max - tau)): saturates toward 1 when y_max > tau and
// toward 0 otherwise.
double detector_alpha(double y_max, double tau, double nu);

// y' = N(a*y + b*r), the general perturbation form every defense below
// instantiates.
ProbabilityVector apply_general(const ProbabilityVector& y,
                                const RawScoreVector& r, double a, double b);

// Reverse-sigmoid baseline: y' = N(y - beta * r(y)). beta = 0 returns the
// input unchanged.
ProbabilityVector rs_defend(const ProbabilityVector& y,
                            const DefenseConfig& cfg);

// Adaptive-misinformation baseline: y' = N((1-alpha)*y + alpha*y_mis) where
// y_mis comes from the misinformation classifier for the same query.
ProbabilityVector am_defend(const ProbabilityVector& y,
                            const ProbabilityVector& y_mis,
                            const DefenseConfig& cfg);

// The gated perturbation rule: y' = N(y - beta * alpha * r(y)) with alpha
// evaluated at the clean posterior's maximum. beta = 0 short-circuits before
// normalization so the identity at the sweep origin is exact.
ProbabilityVector dcp_defend(const ProbabilityVector& y,
                             const DefenseConfig& cfg);

// y' = N(y + magnitude * u), u seeded uniform in [-1,1]^K. Deterministic per
// seed; the generator and mapping are pinned (see rng.hpp).
ProbabilityVector random_noise_defend(const ProbabilityVector& y,
                                      double magnitude, std::uint64_t rng_seed);

// Keep the k largest entries (ties toward the lower index) and renormalize.
ProbabilityVector topk_truncate_defend(const ProbabilityVector& y, int k);

// One-hot at the argmax.
ProbabilityVector hard_label_defend(const ProbabilityVector& y);

// Per-posterior application of a defense at a given beta; sample_index keys
// any per-sample randomness.
using DefendAtBeta = std::function<ProbabilityVector(
    const ProbabilityVector& y, double beta, std::size_t sample_index)>;

inline constexpr double kBetaGridStep = 0.05;
inline constexpr double kBetaGridMax = 1.5;

// Largest beta on the 0:0.05:1.5 grid whose mean l1 perturbation over the
// sample stays within l1_budget; 0 when no grid point qualifies. Full grid
// scan: mean l1 need not be monotone across a heterogeneous sample.
double calibrate_beta(const DefendAtBeta& defend,
                      std::span<const ProbabilityVector> sample,
                      double l1_budget);

// Convenience overload for the beta-parameterized kinds. AM is rejected with
// ParamError: its perturbation needs per-query misinformation posteriors,
// which a bare posterior sample cannot supply (use the callable overload).
double calibrate_beta(DefenseKind kind, const DefenseConfig& base,
                      std::span<const ProbabilityVector> sample,
                      double l1_budget);

// Source of misinformation posteriors for AM, type-erased so this module
// does not depend on any particular classifier.
using MisinfoFn =
    std::function<ProbabilityVector(std::span<const double> features)>;

// Uniform front door over the defense catalog: one object per configured
// defense, applied per query. Pure given (input, config, query_index).
class Defense {
 public:
  Defense(DefenseKind kind, DefenseConfig cfg);
  Defense(DefenseKind kind, DefenseConfig cfg, MisinfoFn misinfo);

  // x is only read by AdaptiveMisinformation; query_index seeds RandomNoise.
  ProbabilityVector apply(std::span<const double> x,
                          const ProbabilityVector& clean,
                          std::uint64_t query_index) const;

  DefenseKind kind() const { return kind_; }
  const DefenseConfig& config() const { return cfg_; }
  std::string_view name() const { return defense_name(kind_); }

  Defense with_beta(double beta) const;

 private:
  DefenseKind kind_;
  DefenseConfig cfg_;
  MisinfoFn misinfo_;
};

}  // namespace pshield
