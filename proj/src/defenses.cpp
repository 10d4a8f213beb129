#include "pshield/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pshield/errors.hpp"
#include "pshield/rng.hpp"

namespace pshield {

void DefenseConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 10.0)) {
    throw ConfigError("defense.beta: " + std::to_string(beta) +
                      " outside [0, 10]");
  }
  if (!(gamma > 0.0 && gamma <= 10.0)) {
    throw ConfigError("defense.gamma: " + std::to_string(gamma) +
                      " outside (0, 10]");
  }
  if (!(nu > 0.0 && nu <= 1e6)) {
    throw ConfigError("defense.nu: " + std::to_string(nu) +
                      " outside (0, 1e6]");
  }
  if (tau && !(*tau >= 0.0 && *tau <= 1.0)) {
    throw ConfigError("defense.tau: " + std::to_string(*tau) +
                      " outside [0, 1]");
  }
  if (!(coeff_a <= 1.0) || !(coeff_b <= 1.0)) {
    throw ConfigError("defense.coeff_a/coeff_b must be <= 1");
  }
  if (top_k < 1) {
    throw ConfigError("defense.top_k: must be >= 1");
  }
}

double DefenseConfig::dcp_tau() const {
  return tau ? *tau : std::min(beta, 1.0);
}

double DefenseConfig::am_tau() const { return tau ? *tau : 0.5; }

std::string_view defense_name(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::NoDefense: return "none";
    case DefenseKind::RandomNoise: return "noise";
    case DefenseKind::TopKTruncate: return "topk";
    case DefenseKind::HardLabel: return "hard";
    case DefenseKind::ReverseSigmoid: return "rs";
    case DefenseKind::AdaptiveMisinformation: return "am";
    case DefenseKind::DCP: return "dcp";
  }
  return "unknown";
}

DefenseKind defense_from_name(std::string_view name) {
  if (name == "none") return DefenseKind::NoDefense;
  if (name == "noise") return DefenseKind::RandomNoise;
  if (name == "topk") return DefenseKind::TopKTruncate;
  if (name == "hard") return DefenseKind::HardLabel;
  if (name == "rs") return DefenseKind::ReverseSigmoid;
  if (name == "am") return DefenseKind::AdaptiveMisinformation;
  if (name == "dcp") return DefenseKind::DCP;
  throw ConfigError("unknown defense name '" + std::string(name) + "'");
}

RawScoreVector rs_noise(const ProbabilityVector& y, double gamma) {
  if (!(gamma > 0.0)) {
    throw ParamError("rs_noise: gamma must be > 0");
  }
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    r[i] = sigmoid(gamma * reverse_sigmoid(y[i])) - 0.5;
  }
  return RawScoreVector(std::move(r));
}

double detector_alpha(double y_max, double tau, double nu) {
  return sigmoid(nu * (y_max - tau));
}

ProbabilityVector apply_general(const ProbabilityVector& y,
                                const RawScoreVector& r, double a, double b) {
  if (y.size() != r.size()) {
    throw ShapeError("apply_general: K mismatch (" + std::to_string(y.size()) +
                     " vs " + std::to_string(r.size()) + ")");
  }
  std::vector<double> combined(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    combined[i] = a * y[i] + b * r[i];
  }
  return normalize(RawScoreVector(std::move(combined)));
}

ProbabilityVector rs_defend(const ProbabilityVector& y,
                            const DefenseConfig& cfg) {
  if (cfg.beta == 0.0) return y;
  return apply_general(y, rs_noise(y, cfg.gamma), 1.0, -cfg.beta);
}

ProbabilityVector am_defend(const ProbabilityVector& y,
                            const ProbabilityVector& y_mis,
                            const DefenseConfig& cfg) {
  if (y.size() != y_mis.size()) {
    throw ShapeError("am_defend: K mismatch (" + std::to_string(y.size()) +
                     " vs " + std::to_string(y_mis.size()) + ")");
  }
  const double alpha = detector_alpha(argmax(y).value, cfg.am_tau(), cfg.nu);
  std::vector<double> mis(y_mis.values().begin(), y_mis.values().end());
  return apply_general(y, RawScoreVector(std::move(mis)), 1.0 - alpha, alpha);
}

ProbabilityVector dcp_defend(const ProbabilityVector& y,
                             const DefenseConfig& cfg) {
  if (cfg.beta == 0.0) return y;
  const double alpha = detector_alpha(argmax(y).value, cfg.dcp_tau(), cfg.nu);
  return apply_general(y, rs_noise(y, cfg.gamma), 1.0, -cfg.beta * alpha);
}

ProbabilityVector random_noise_defend(const ProbabilityVector& y,
                                      double magnitude,
                                      std::uint64_t rng_seed) {
  if (magnitude < 0.0) {
    throw ParamError("random_noise_defend: magnitude must be >= 0");
  }
  if (magnitude == 0.0) return y;
  Rng rng(rng_seed);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] + magnitude * rng.uniform(-1.0, 1.0);
  }
  return normalize(RawScoreVector(std::move(out)));
}

ProbabilityVector topk_truncate_defend(const ProbabilityVector& y, int k) {
  const int n = static_cast<int>(y.size());
  if (k < 1 || k > n) {
    throw ParamError("topk_truncate_defend: k=" + std::to_string(k) +
                     " outside [1, " + std::to_string(n) + "]");
  }
  if (k == n) return y;
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (y[a] != y[b]) return y[a] > y[b];
                      return a < b;
                    });
  std::vector<double> out(y.size(), 0.0);
  for (int i = 0; i < k; ++i) out[order[i]] = y[order[i]];
  return normalize(RawScoreVector(std::move(out)));
}

ProbabilityVector hard_label_defend(const ProbabilityVector& y) {
  std::vector<double> out(y.size(), 0.0);
  out[argmax(y).index] = 1.0;
  return ProbabilityVector(std::move(out));
}

double calibrate_beta(const DefendAtBeta& defend,
                      std::span<const ProbabilityVector> sample,
                      double l1_budget) {
  if (sample.empty()) {
    throw ParamError("calibrate_beta: empty posterior sample");
  }
  if (!(l1_budget > 0.0 && l1_budget <= 2.0)) {
    throw ParamError("calibrate_beta: l1_budget outside (0, 2]");
  }
  double best = 0.0;
  bool any = false;
  const int steps = static_cast<int>(std::lround(kBetaGridMax / kBetaGridStep));
  for (int i = 0; i <= steps; ++i) {
    const double beta = i * kBetaGridStep;
    double total = 0.0;
    for (std::size_t s = 0; s < sample.size(); ++s) {
      total += l1_distance(sample[s], defend(sample[s], beta, s));
    }
    if (total / static_cast<double>(sample.size()) <= l1_budget) {
      best = beta;
      any = true;
    }
  }
  return any ? best : 0.0;
}

double calibrate_beta(DefenseKind kind, const DefenseConfig& base,
                      std::span<const ProbabilityVector> sample,
                      double l1_budget) {
  if (kind == DefenseKind::AdaptiveMisinformation) {
    throw ParamError(
        "calibrate_beta: AM needs per-query misinformation posteriors; use "
        "the callable overload");
  }
  Defense proto(kind, base);
  DefendAtBeta defend = [&proto](const ProbabilityVector& y, double beta,
                                 std::size_t idx) {
    return proto.with_beta(beta).apply({}, y, idx);
  };
  return calibrate_beta(defend, sample, l1_budget);
}

Defense::Defense(DefenseKind kind, DefenseConfig cfg)
    : kind_(kind), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (kind_ == DefenseKind::AdaptiveMisinformation) {
    throw ParamError("Defense: AdaptiveMisinformation needs a misinfo source");
  }
}

Defense::Defense(DefenseKind kind, DefenseConfig cfg, MisinfoFn misinfo)
    : kind_(kind), cfg_(std::move(cfg)), misinfo_(std::move(misinfo)) {
  cfg_.validate();
  if (kind_ == DefenseKind::AdaptiveMisinformation && !misinfo_) {
    throw ParamError("Defense: AdaptiveMisinformation needs a misinfo source");
  }
}

ProbabilityVector Defense::apply(std::span<const double> x,
                                 const ProbabilityVector& clean,
                                 std::uint64_t query_index) const {
  switch (kind_) {
    case DefenseKind::NoDefense:
      return clean;
    case DefenseKind::RandomNoise:
      return random_noise_defend(clean, cfg_.beta,
                                 mix_seed(cfg_.noise_seed, query_index));
    case DefenseKind::TopKTruncate:
      return topk_truncate_defend(clean, cfg_.top_k);
    case DefenseKind::HardLabel:
      return hard_label_defend(clean);
    case DefenseKind::ReverseSigmoid:
      return rs_defend(clean, cfg_);
    case DefenseKind::AdaptiveMisinformation:
      return am_defend(clean, misinfo_(x), cfg_);
    case DefenseKind::DCP:
      return dcp_defend(clean, cfg_);
  }
  throw ParamError("Defense: unknown kind");
}

Defense Defense::with_beta(double beta) const {
  Defense copy(*this);
  copy.cfg_.beta = beta;
  return copy;
}

}  // namespace pshield
