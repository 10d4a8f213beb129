#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pshield/datagen.hpp"
#include "pshield/defenses.hpp"
#include "pshield/models.hpp"

namespace pshield {

// Environment variable consulted for the seed list when neither the config
// file nor the flags provide one.
inline constexpr const char* kSeedEnvVar = "POSTERIOR_SHIELD_SEED";

struct VictimConfig {
  std::vector<std::size_t> hidden{16};
  TrainConfig train;
};

struct AdversaryConfig {
  std::vector<std::size_t> hidden{32};
  TrainConfig train;
};

struct PoolConfig {
  PoolMode mode = PoolMode::InDistribution;
  std::size_t size = 4000;
  std::uint64_t seed = 7;
};

struct DefenseEntry {
  DefenseKind kind = DefenseKind::NoDefense;
  DefenseConfig cfg;  // template; beta filled per sweep cell
};

struct BenchConfig {
  double beta = 0.5;   // rs/dcp magnitude while timing (0 would short-circuit)
  std::size_t queries = 10000;
  std::size_t warmup = 100;
  std::size_t batch = 256;  // fixed input batch cycled in order
};

// Fully materialized experiment description. Every field has a default, so a
// minimal config (dataset + one defense) is runnable, and the effective()
// echo lists every parameter the run will use.
struct ExperimentConfig {
  DatasetSpec dataset;
  VictimConfig victim;
  AdversaryConfig adversary;
  PoolConfig pool;
  std::vector<DefenseEntry> defenses;
  std::vector<double> beta_grid;          // default 0:0.1:1.5
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> budgets{2000};
  double l1_budget = 0.9;
  std::vector<double> delta_limits_pct{1.0, 2.0, 5.0};
  int jobs = 1;
  bool fail_fast = false;
  bool record_latency = false;
  bool allow_extended_beta = false;
  BenchConfig bench;
  std::string out_dir = "out";

  // Flat (key, value) echo of every effective parameter, in stable order.
  std::vector<std::pair<std::string, std::string>> effective() const;
  // INI serialization of effective(); parsing it back yields an identical
  // config.
  std::string to_ini() const;

  bool operator==(const ExperimentConfig& other) const {
    return effective() == other.effective();
  }

  void validate() const;  // throws ConfigError with the offending key path
};

// Raw `key = value` document with [section] headers flattened to dotted
// keys. Throws ParseError with line numbers on malformed lines.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// File + flag-override entry points. Overrides use dotted keys and win over
// file values; unknown keys raise UnknownKeyError in strict mode (overrides
// are always checked).
ExperimentConfig parse_config(
    const std::string& path,
    const std::map<std::string, std::string>& overrides = {},
    bool strict = false);
ExperimentConfig config_from_text(
    const std::string& text,
    const std::map<std::string, std::string>& overrides = {},
    bool strict = false);

}  // namespace pshield
