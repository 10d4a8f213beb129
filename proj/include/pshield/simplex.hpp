#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pshield/errors.hpp"

namespace pshield {

/// A point on the K-class probability simplex: entries in [0,1] summing to 1
/// within 1e-9, K >= 2. Validated at construction; immutable afterwards.
class ProbabilityVector {
 public:
  explicit ProbabilityVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const ProbabilityVector& other) const = default;

 private:
  std::vector<double> values_;
};

/// Unconstrained finite scores, e.g. the combination a*y + b*r before the
/// sum-to-one normalizer, or logit-space quantities.
class RawScoreVector {
 public:
  explicit RawScoreVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct ArgmaxResult {
  std::size_t index;  // ties broken toward the lowest index
  double value;       // y_max
};

// Logistic function 1/(1+e^-z), evaluated as 0.5*(1+tanh(z/2)) so it
// saturates cleanly instead of overflowing for |z| up to 1e4 and beyond.
double sigmoid(double z);

// log(y/(1-y)). Inputs are clamped into [1e-7, 1-1e-7] first because the
// defenses feed in posteriors that can be exactly 0 or 1. Values outside
// [0,1] are rejected with DomainError before clamping.
double reverse_sigmoid(double y);

// Sum-to-one normalizer: clips negative entries to zero, then divides by the
// sum. Throws DegenerateError if the post-clip sum is below 1e-12.
ProbabilityVector normalize(const RawScoreVector& scores);

// Sum of |y'_i - y_i|; always in [0, 2] for simplex points.
double l1_distance(const ProbabilityVector& y, const ProbabilityVector& y_prime);

ArgmaxResult argmax(const ProbabilityVector& y);

// Clamp bound shared by reverse_sigmoid and the defenses.
inline constexpr double kLogitClamp = 1e-7;

}  // namespace pshield
