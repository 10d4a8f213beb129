#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pshield/config.hpp"
#include "pshield/extraction.hpp"
#include "pshield/metrics.hpp"

namespace pshield {

inline constexpr const char* kToolName = "posterior-shield";
inline constexpr const char* kToolVersion = "0.1.0";

// Maximum adversary error per delta-defender-error limit, one table per
// query budget (the constrained-extraction protocol).
struct ConstrainedMaxTable {
  std::uint64_t budget = 0;
  double l1_budget = 0.0;
  std::vector<double> limits_pct;
  std::vector<std::string> defenses;
  std::vector<std::vector<double>> max_adv_err_pct;  // [defense][limit]
  double undefended_adv_err_pct = 0.0;
};

struct ParetoSet {
  std::string defense;
  std::string axis;  // "def_err_pct" or "mean_l1"
  std::vector<CurvePoint> frontier;
};

struct CellError {
  std::string defense;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
  std::string message;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string config_text;  // effective INI snapshot; round-trips
  double victim_test_err_pct = 0.0;
  double victim_train_err_pct = 0.0;
  std::vector<CurvePoint> points;
  std::vector<ConstrainedMaxTable> tables;
  std::vector<ParetoSet> pareto;
  std::vector<LatencySummary> latency;
  std::vector<CellError> errors;
  std::string started_utc;
  double elapsed_seconds = 0.0;
};

struct VictimBundle {
  DenseClassifier model;
  TrainTestSplit data;
  double test_error = 0.0;
  double train_error = 0.0;
};

// Trains the victim described by cfg on its dataset.
VictimBundle prepare_victim(const ExperimentConfig& cfg);

// Full protocol: trains the victim (and the misinformation model when AM is
// listed), builds the pool, sweeps every (defense, budget, beta, seed) cell,
// aggregates, and writes report.json / points.csv / tables.md to
// cfg.out_dir. Progress lines (best effort, not part of any determinism
// guarantee) go to *progress when given.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                std::ostream* progress = nullptr);

// 100+ warmup then cfg.bench.queries timed single-query calls per defense on
// a fixed input order; always includes the NoDefense baseline row. Writes
// latency.csv to cfg.out_dir.
std::vector<LatencySummary> bench_latency(const ExperimentConfig& cfg,
                                          std::ostream* progress = nullptr);

// One gnuplot-ready TSV per (figure, defense) under <out_dir>/plots; columns
// x <TAB> y <TAB> seed. Throws EmptyReportError when the report has no
// points.
void emit_plot_data(const ExperimentReport& report, const std::string& out_dir);

void write_points_csv(std::span<const CurvePoint> points,
                      const std::string& path);
void write_latency_csv(std::span<const LatencySummary> rows,
                       const std::string& path);
void write_report_json(const ExperimentReport& report, const std::string& path);
void write_tables_md(const ExperimentReport& report, const std::string& path);

// Reads back points + config from report.json (enough for plot emission).
ExperimentReport load_report_json(const std::string& path);

// Whether a defense kind's output actually depends on beta. Kinds that
// ignore beta are computed once per seed and replicated across the grid.
bool kind_uses_beta(DefenseKind kind);

}  // namespace pshield
