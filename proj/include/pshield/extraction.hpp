#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pshield/dataset.hpp"
#include "pshield/defenses.hpp"
#include "pshield/models.hpp"

namespace pshield {

// Attacker transfer set: queries paired with the (possibly perturbed)
// posteriors the prediction API returned for them.
struct TransferSet {
  FeatureMatrix queries;
  std::vector<ProbabilityVector> targets;

  std::size_t size() const { return targets.size(); }
};

// The only surface attack code receives. Keeping the victim behind this
// interface is what enforces attacker isolation: no weights, no training
// labels, no clean posteriors.
class QueryOracle {
 public:
  virtual ~QueryOracle() = default;
  virtual ProbabilityVector answer_query(std::span<const double> x) = 0;
};

struct DefenderEval {
  double defender_error = 0.0;
  double mean_l1 = 0.0;
  double max_l1 = 0.0;
};

// Victim + defense behind the prediction API. Counts queries and records the
// wall-clock of forward+defense per query (attacker-side work excluded).
class DefendedOracle final : public QueryOracle {
 public:
  DefendedOracle(const DenseClassifier& victim, Defense defense);

  ProbabilityVector answer_query(std::span<const double> x) override;

  std::uint64_t query_count() const { return queries_; }
  const std::vector<std::uint64_t>& latencies_ns() const { return latency_ns_; }
  double mean_latency_ns() const;

  // Defender-side measurement pass over a labeled test set; untimed and not
  // counted against the attacker's query tally.
  DefenderEval evaluate_defender(const LabeledDataset& test) const;

  const Defense& defense() const { return defense_; }
  const DenseClassifier& victim() const { return *victim_; }

 private:
  const DenseClassifier* victim_;
  Defense defense_;
  std::uint64_t queries_ = 0;
  std::vector<std::uint64_t> latency_ns_;
};

// Answers the first `budget` pool entries through the oracle. The pool is
// pre-shuffled at creation, so budgets nest.
TransferSet build_transfer_set(QueryOracle& oracle, const QueryPool& pool,
                               std::size_t budget);

struct AdversarySpec {
  std::vector<std::size_t> hidden{32};
};

struct AttackOutcome {
  double adversary_error = 0.0;
  double defender_error = 0.0;
  double mean_l1 = 0.0;
  double max_l1 = 0.0;
  std::uint64_t queries_used = 0;
  double mean_latency_ns = 0.0;
};

// One full KnockoffNets-style extraction: build the transfer set through the
// oracle, fit the surrogate on the soft targets, score everything on the
// victim's test set. The adversary's init and shuffle order derive from
// train_cfg.seed only, so equal-seed cells stay comparable across defenses.
AttackOutcome run_knockoff(DefendedOracle& oracle, const QueryPool& pool,
                           std::size_t budget, const AdversarySpec& adversary,
                           const TrainConfig& train_cfg,
                           const LabeledDataset& test_set);

// Everything a sweep cell needs besides (beta, seed).
struct SweepScenario {
  const DenseClassifier* victim = nullptr;
  const DenseClassifier* misinfo = nullptr;  // only for AM
  const QueryPool* pool = nullptr;
  const LabeledDataset* test = nullptr;
  DefenseKind kind = DefenseKind::NoDefense;
  DefenseConfig defense_template;
  AdversarySpec adversary;
  TrainConfig adversary_train;  // seed field overridden per cell
  std::size_t budget = 0;
};

struct SweepOutcome {
  double beta = 0.0;
  std::uint64_t seed = 0;
  AttackOutcome outcome;
  bool failed = false;
  std::string error;
};

// Builds the Defense instance a scenario implies at a given beta.
Defense make_defense(const SweepScenario& scenario, double beta);

// One run_knockoff per (beta, seed), deterministic per key. Outcomes are
// handed to on_done as cells finish (any thread, serialized by the caller's
// sink) and also returned in grid order. jobs <= 1 runs serially.
std::vector<SweepOutcome> sweep_beta(
    const SweepScenario& scenario, std::span<const double> beta_grid,
    std::span<const std::uint64_t> seeds, int jobs,
    const std::function<void(const SweepOutcome&)>& on_done = {},
    bool fail_fast = false);

}  // namespace pshield
