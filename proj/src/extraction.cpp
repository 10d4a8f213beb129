#include "pshield/extraction.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "pshield/rng.hpp"

namespace pshield {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point t0, Clock::time_point t1) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

}  // namespace

DefendedOracle::DefendedOracle(const DenseClassifier& victim, Defense defense)
    : victim_(&victim), defense_(std::move(defense)) {}

ProbabilityVector DefendedOracle::answer_query(std::span<const double> x) {
  const auto t0 = Clock::now();
  ProbabilityVector clean = victim_->forward(x);
  ProbabilityVector defended = defense_.apply(x, clean, queries_);
  const auto t1 = Clock::now();
  latency_ns_.push_back(elapsed_ns(t0, t1));
  ++queries_;
  return defended;
}

double DefendedOracle::mean_latency_ns() const {
  if (latency_ns_.empty()) return 0.0;
  double sum = 0.0;
  for (std::uint64_t v : latency_ns_) sum += static_cast<double>(v);
  return sum / static_cast<double>(latency_ns_.size());
}

DefenderEval DefendedOracle::evaluate_defender(const LabeledDataset& test) const {
  if (test.size() == 0) throw ParamError("evaluate_defender: empty test set");
  DefenderEval out;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto x = test.features.row(i);
    const ProbabilityVector clean = victim_->forward(x);
    const ProbabilityVector defended = defense_.apply(x, clean, i);
    if (static_cast<int>(argmax(defended).index) != test.labels[i]) ++wrong;
    const double d = l1_distance(clean, defended);
    out.mean_l1 += d;
    out.max_l1 = std::max(out.max_l1, d);
  }
  out.mean_l1 /= static_cast<double>(test.size());
  out.defender_error =
      static_cast<double>(wrong) / static_cast<double>(test.size());
  return out;
}

TransferSet build_transfer_set(QueryOracle& oracle, const QueryPool& pool,
                               std::size_t budget) {
  if (budget > pool.size()) {
    throw BudgetError("build_transfer_set: budget " + std::to_string(budget) +
                      " exceeds pool size " + std::to_string(pool.size()));
  }
  TransferSet ts;
  ts.queries = FeatureMatrix(pool.dim());
  ts.targets.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) {
    const auto x = pool.features.row(i);
    ts.targets.push_back(oracle.answer_query(x));
    ts.queries.push_row(x);
  }
  return ts;
}

AttackOutcome run_knockoff(DefendedOracle& oracle, const QueryPool& pool,
                           std::size_t budget, const AdversarySpec& adversary,
                           const TrainConfig& train_cfg,
                           const LabeledDataset& test_set) {
  // Attacker side: sees only the QueryOracle surface plus the pool.
  QueryOracle& api = oracle;
  const TransferSet transfer = build_transfer_set(api, pool, budget);

  DenseClassifier surrogate(pool.dim(), adversary.hidden,
                            test_set.num_classes);
  surrogate.init_uniform(mix_seed(train_cfg.seed, 0xadf0));
  if (transfer.size() > 0) {
    train(surrogate, transfer.queries, transfer.targets, train_cfg);
  }

  AttackOutcome out;
  out.adversary_error = evaluate_error(surrogate, test_set);
  out.queries_used = oracle.query_count();
  out.mean_latency_ns = oracle.mean_latency_ns();

  const DefenderEval def = oracle.evaluate_defender(test_set);
  out.defender_error = def.defender_error;
  out.mean_l1 = def.mean_l1;
  out.max_l1 = def.max_l1;
  return out;
}

Defense make_defense(const SweepScenario& scenario, double beta) {
  DefenseConfig cfg = scenario.defense_template;
  cfg.beta = beta;
  if (scenario.kind == DefenseKind::AdaptiveMisinformation) {
    if (scenario.misinfo == nullptr) {
      throw ParamError("sweep: AM scenario without a misinformation model");
    }
    const DenseClassifier* mis = scenario.misinfo;
    return Defense(scenario.kind, cfg,
                   [mis](std::span<const double> x) { return mis->forward(x); });
  }
  return Defense(scenario.kind, cfg);
}

std::vector<SweepOutcome> sweep_beta(
    const SweepScenario& scenario, std::span<const double> beta_grid,
    std::span<const std::uint64_t> seeds, int jobs,
    const std::function<void(const SweepOutcome&)>& on_done, bool fail_fast) {
  if (beta_grid.empty() || seeds.empty()) {
    throw ParamError("sweep_beta: empty beta grid or seed list");
  }
  const std::size_t n_cells = beta_grid.size() * seeds.size();
  std::vector<SweepOutcome> results(n_cells);

  std::mutex sink_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto run_cell = [&](std::size_t idx) {
    const double beta = beta_grid[idx / seeds.size()];
    const std::uint64_t seed = seeds[idx % seeds.size()];
    SweepOutcome& slot = results[idx];
    slot.beta = beta;
    slot.seed = seed;
    try {
      DefendedOracle oracle(*scenario.victim, make_defense(scenario, beta));
      TrainConfig cell_cfg = scenario.adversary_train;
      cell_cfg.seed = seed;
      slot.outcome = run_knockoff(oracle, *scenario.pool, scenario.budget,
                                  scenario.adversary, cell_cfg, *scenario.test);
    } catch (const std::exception& e) {
      slot.failed = true;
      slot.error = e.what();
      if (fail_fast) abort.store(true);
    }
    if (on_done) {
      std::lock_guard<std::mutex> lock(sink_mutex);
      on_done(slot);
    }
  };

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= n_cells) break;
      run_cell(idx);
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  if (fail_fast) {
    for (const auto& r : results) {
      if (r.failed) throw Error("sweep cell (beta=" + std::to_string(r.beta) +
                                ", seed=" + std::to_string(r.seed) +
                                ") failed: " + r.error);
    }
  }
  return results;
}

}  // namespace pshield
