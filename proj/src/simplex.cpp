#include "pshield/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pshield {

namespace {

void require_finite(std::span<const double> values, const char* who) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(who) + ": non-finite entry");
    }
  }
}

}  // namespace

ProbabilityVector::ProbabilityVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw ShapeError("ProbabilityVector: need K >= 2, got K=" +
                     std::to_string(values_.size()));
  }
  double sum = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {  // also rejects NaN
      throw DomainError("ProbabilityVector: entry " + std::to_string(v) +
                        " outside [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError("ProbabilityVector: entries sum to " +
                      std::to_string(sum) + ", expected 1 within 1e-9");
  }
}

RawScoreVector::RawScoreVector(std::vector<double> values)
    : values_(std::move(values)) {
  require_finite(values_, "RawScoreVector");
}

double sigmoid(double z) {
  return 0.5 * (1.0 + std::tanh(0.5 * z));
}

double reverse_sigmoid(double y) {
  if (!(y >= 0.0 && y <= 1.0)) {
    throw DomainError("reverse_sigmoid: input " + std::to_string(y) +
                      " outside [0,1]");
  }
  const double c = std::clamp(y, kLogitClamp, 1.0 - kLogitClamp);
  return std::log(c / (1.0 - c));
}

ProbabilityVector normalize(const RawScoreVector& scores) {
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::max(scores[i], 0.0);
    sum += out[i];
  }
  if (sum < 1e-12) {
    throw DegenerateError("normalize: post-clip sum " + std::to_string(sum) +
                          " below 1e-12, vector is unusable");
  }
  for (double& v : out) v /= sum;
  return ProbabilityVector(std::move(out));
}

double l1_distance(const ProbabilityVector& y, const ProbabilityVector& y_prime) {
  if (y.size() != y_prime.size()) {
    throw ShapeError("l1_distance: K mismatch (" + std::to_string(y.size()) +
                     " vs " + std::to_string(y_prime.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += std::abs(y_prime[i] - y[i]);
  }
  return sum;
}

ArgmaxResult argmax(const ProbabilityVector& y) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (y[i] > y[best]) best = i;
  }
  return {best, y[best]};
}

}  // namespace pshield
