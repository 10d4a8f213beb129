#include "pshield/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "pshield/rng.hpp"

namespace pshield {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Shortest decimal that parses back to the same double (CSV/TSV cells);
// integral values print without an exponent.
std::string fmt_exact(double v) {
  char buf[40];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

DenseClassifier train_victim_model(const ExperimentConfig& cfg,
                                   const LabeledDataset& train_set) {
  DenseClassifier victim(train_set.dim(), cfg.victim.hidden,
                         train_set.num_classes);
  victim.init_uniform(mix_seed(cfg.victim.train.seed, 0x5eed));
  train(victim, train_set, cfg.victim.train);
  return victim;
}

std::optional<DenseClassifier> maybe_train_misinfo(
    const ExperimentConfig& cfg, const LabeledDataset& train_set) {
  const bool wants_am =
      std::any_of(cfg.defenses.begin(), cfg.defenses.end(), [](const auto& d) {
        return d.kind == DefenseKind::AdaptiveMisinformation;
      });
  if (!wants_am) return std::nullopt;
  TrainConfig mis_cfg = cfg.victim.train;
  mis_cfg.seed = mix_seed(cfg.victim.train.seed, 0x315f0);
  return train_misinformation(train_set, cfg.victim.hidden, mis_cfg,
                              mix_seed(mis_cfg.seed, 0x5eed));
}

}  // namespace

bool kind_uses_beta(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::RandomNoise:
    case DefenseKind::ReverseSigmoid:
    case DefenseKind::DCP:
      return true;
    default:
      return false;
  }
}

VictimBundle prepare_victim(const ExperimentConfig& cfg) {
  VictimBundle out{.model = DenseClassifier(1, {}, 2),
                   .data = make_dataset(cfg.dataset)};
  out.model = train_victim_model(cfg, out.data.train);
  out.test_error = evaluate_error(out.model, out.data.test);
  out.train_error = evaluate_error(out.model, out.data.train);
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                std::ostream* progress) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.config = cfg;
  report.config_text = cfg.to_ini();
  report.started_utc = utc_now();

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream probe(fs::path(cfg.out_dir) / ".write_probe");
    if (!probe) throw ConfigError("output.dir: not writable: " + cfg.out_dir);
  }
  fs::remove(fs::path(cfg.out_dir) / ".write_probe");

  VictimBundle victim = prepare_victim(cfg);
  report.victim_test_err_pct = victim.test_error * 100.0;
  report.victim_train_err_pct = victim.train_error * 100.0;
  if (progress) {
    *progress << "victim trained: test error "
              << fmt("%.2f", report.victim_test_err_pct) << "%\n";
  }

  const auto misinfo = maybe_train_misinfo(cfg, victim.data.train);
  const QueryPool pool = make_query_pool(cfg.dataset, victim.data.train,
                                         cfg.pool.size, cfg.pool.mode,
                                         cfg.pool.seed);

  const double undefended_def_pct = report.victim_test_err_pct;

  for (const auto& entry : cfg.defenses) {
    const std::string name{defense_name(entry.kind)};
    for (std::size_t budget : cfg.budgets) {
      SweepScenario scenario;
      scenario.victim = &victim.model;
      scenario.misinfo = misinfo ? &*misinfo : nullptr;
      scenario.pool = &pool;
      scenario.test = &victim.data.test;
      scenario.kind = entry.kind;
      scenario.defense_template = entry.cfg;
      scenario.adversary.hidden = cfg.adversary.hidden;
      scenario.adversary_train = cfg.adversary.train;
      scenario.budget = budget;

      // beta-independent defenses answer identically at every beta; run the
      // seeds once and replicate the outcomes across the grid.
      const bool replicate = !kind_uses_beta(entry.kind);
      const std::vector<double> grid_one{cfg.beta_grid.front()};
      const std::span<const double> grid =
          replicate ? std::span<const double>(grid_one) : cfg.beta_grid;

      // live cell counter only when stderr is a terminal; logs get one
      // line per (defense, budget) instead
      const bool live = progress != nullptr && isatty(STDERR_FILENO);
      std::size_t done = 0;
      auto on_done = [&](const SweepOutcome&) {
        ++done;
        if (live) {
          *progress << "  " << name << " budget=" << budget << " cell " << done
                    << "/" << grid.size() * cfg.seeds.size() << "\r";
          progress->flush();
        }
      };
      const auto outcomes = sweep_beta(scenario, grid, cfg.seeds, cfg.jobs,
                                       on_done, cfg.fail_fast);
      if (live) *progress << "\n";
      if (progress && !live) {
        *progress << "  " << name << " budget=" << budget << ": " << done
                  << " cells done\n";
      }

      for (std::size_t bi = 0; bi < cfg.beta_grid.size(); ++bi) {
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
          const auto& cell = replicate
                                 ? outcomes[si]
                                 : outcomes[bi * cfg.seeds.size() + si];
          if (cell.failed) {
            report.errors.push_back({name, cfg.beta_grid[bi], cell.seed,
                                     budget, cell.error});
            continue;
          }
          CurvePoint p;
          p.defense = name;
          p.beta = cfg.beta_grid[bi];
          p.seed = cell.seed;
          p.budget = budget;
          p.adv_err_pct = cell.outcome.adversary_error * 100.0;
          p.def_err_pct = cell.outcome.defender_error * 100.0;
          p.delta_def_err_pct = p.def_err_pct - undefended_def_pct;
          p.mean_l1 = cell.outcome.mean_l1;
          p.max_l1 = cell.outcome.max_l1;
          p.mean_latency_ns =
              cfg.record_latency ? cell.outcome.mean_latency_ns : 0.0;
          p.queries = cell.outcome.queries_used;
          report.points.push_back(std::move(p));
        }
      }
    }
  }

  // Constrained-extraction tables: per budget, per defense, max adversary
  // error under the l1 budget and each delta-defender-error limit. The
  // undefended reference is the median NoDefense adversary error at that
  // budget (falling back to beta=0 rows of a beta-scaled defense, which are
  // identical by the short-circuit rule).
  for (std::size_t budget : cfg.budgets) {
    std::vector<double> undef;
    for (const auto& p : report.points) {
      if (p.budget != budget) continue;
      if (p.defense == "none" ||
          (p.beta == 0.0 &&
           kind_uses_beta(defense_from_name(p.defense)))) {
        undef.push_back(p.adv_err_pct);
      }
    }
    if (undef.empty()) {
      report.errors.push_back(
          {"(tables)", 0.0, 0, budget,
           "no undefended reference rows; constrained-max table skipped"});
      continue;
    }
    ConstrainedMaxTable table;
    table.budget = budget;
    table.l1_budget = cfg.l1_budget;
    table.limits_pct = cfg.delta_limits_pct;
    table.undefended_adv_err_pct = median_of(undef);
    for (const auto& entry : cfg.defenses) {
      const std::string name{defense_name(entry.kind)};
      std::vector<CurvePoint> pts;
      for (const auto& p : report.points) {
        if (p.defense == name && p.budget == budget) pts.push_back(p);
      }
      if (pts.empty()) continue;
      table.defenses.push_back(name);
      table.max_adv_err_pct.push_back(
          constrained_max(pts, cfg.l1_budget, cfg.delta_limits_pct,
                          table.undefended_adv_err_pct));
    }
    report.tables.push_back(std::move(table));
  }

  for (const auto& entry : cfg.defenses) {
    const std::string name{defense_name(entry.kind)};
    std::vector<CurvePoint> pts;
    for (const auto& p : report.points) {
      if (p.defense == name) pts.push_back(p);
    }
    if (pts.empty()) continue;
    report.pareto.push_back(
        {name, "def_err_pct", pareto_curve(pts, ParetoAxis::DefenderError)});
    report.pareto.push_back(
        {name, "mean_l1", pareto_curve(pts, ParetoAxis::MeanL1)});
  }

  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  write_points_csv(report.points, (fs::path(cfg.out_dir) / "points.csv").string());
  write_report_json(report, (fs::path(cfg.out_dir) / "report.json").string());
  write_tables_md(report, (fs::path(cfg.out_dir) / "tables.md").string());
  return report;
}

std::vector<LatencySummary> bench_latency(const ExperimentConfig& cfg,
                                          std::ostream* progress) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  VictimBundle victim = prepare_victim(cfg);
  const auto misinfo = maybe_train_misinfo(cfg, victim.data.train);
  const QueryPool pool =
      make_query_pool(cfg.dataset, victim.data.train,
                      std::max(cfg.pool.size, cfg.bench.batch), cfg.pool.mode,
                      cfg.pool.seed);

  // NoDefense baseline row first, then the configured defenses.
  std::vector<DefenseEntry> entries;
  entries.push_back({DefenseKind::NoDefense, DefenseConfig{}});
  for (const auto& e : cfg.defenses) {
    if (e.kind != DefenseKind::NoDefense) entries.push_back(e);
  }

  std::vector<LatencySample> samples;
  for (const auto& entry : entries) {
    SweepScenario scenario;
    scenario.victim = &victim.model;
    scenario.misinfo = misinfo ? &*misinfo : nullptr;
    scenario.kind = entry.kind;
    scenario.defense_template = entry.cfg;
    const Defense defense = make_defense(scenario, cfg.bench.beta);

    {
      DefendedOracle warm(victim.model, defense);
      for (std::size_t i = 0; i < cfg.bench.warmup; ++i) {
        warm.answer_query(pool.features.row(i % cfg.bench.batch));
      }
    }
    DefendedOracle timed(victim.model, defense);
    for (std::size_t i = 0; i < cfg.bench.queries; ++i) {
      timed.answer_query(pool.features.row(i % cfg.bench.batch));
    }
    samples.push_back({std::string(defense_name(entry.kind)),
                       timed.latencies_ns()});
    if (progress) {
      *progress << "bench " << defense_name(entry.kind) << ": mean "
                << fmt("%.1f", timed.mean_latency_ns()) << " ns/query\n";
    }
  }

  auto summary = latency_summary(samples);
  write_latency_csv(summary, (fs::path(cfg.out_dir) / "latency.csv").string());
  return summary;
}

void write_points_csv(std::span<const CurvePoint> points,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "defense,beta,seed,budget,adv_err_pct,def_err_pct,delta_def_err_pct,"
         "mean_l1,max_l1,mean_latency_ns,queries\n";
  for (const auto& p : points) {
    out << p.defense << ',' << fmt_exact(p.beta) << ',' << p.seed << ','
        << p.budget << ',' << fmt("%.4f", p.adv_err_pct) << ','
        << fmt("%.4f", p.def_err_pct) << ','
        << fmt("%.4f", p.delta_def_err_pct) << ',' << fmt("%.6f", p.mean_l1)
        << ',' << fmt("%.6f", p.max_l1) << ','
        << fmt("%.0f", p.mean_latency_ns) << ',' << p.queries << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_latency_csv(std::span<const LatencySummary> rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "defense,queries,mean_ms,median_ms,p99_ms,overhead_ratio\n";
  for (const auto& r : rows) {
    out << r.defense << ',' << r.samples << ','
        << fmt("%.6f", r.mean_ns / 1e6) << ',' << fmt("%.6f", r.median_ns / 1e6)
        << ',' << fmt("%.6f", r.p99_ns / 1e6) << ','
        << fmt("%.3f", r.overhead_ratio) << '\n';
  }
}

namespace {

ordered_json point_to_json(const CurvePoint& p) {
  ordered_json j;
  j["defense"] = p.defense;
  j["beta"] = p.beta;
  j["seed"] = p.seed;
  j["budget"] = p.budget;
  j["adv_err_pct"] = p.adv_err_pct;
  j["def_err_pct"] = p.def_err_pct;
  j["delta_def_err_pct"] = p.delta_def_err_pct;
  j["mean_l1"] = p.mean_l1;
  j["max_l1"] = p.max_l1;
  j["mean_latency_ns"] = p.mean_latency_ns;
  j["queries"] = p.queries;
  return j;
}

CurvePoint point_from_json(const ordered_json& j) {
  CurvePoint p;
  p.defense = j.at("defense").get<std::string>();
  p.beta = j.at("beta").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.budget = j.at("budget").get<std::uint64_t>();
  p.adv_err_pct = j.at("adv_err_pct").get<double>();
  p.def_err_pct = j.at("def_err_pct").get<double>();
  p.delta_def_err_pct = j.at("delta_def_err_pct").get<double>();
  p.mean_l1 = j.at("mean_l1").get<double>();
  p.max_l1 = j.at("max_l1").get<double>();
  p.mean_latency_ns = j.at("mean_latency_ns").get<double>();
  p.queries = j.at("queries").get<std::uint64_t>();
  return p;
}

}  // namespace

void write_report_json(const ExperimentReport& report,
                       const std::string& path) {
  ordered_json j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["rng"] = kRngAlgorithm;
  ordered_json cfg_obj;
  for (const auto& [k, v] : report.config.effective()) cfg_obj[k] = v;
  j["config"] = cfg_obj;
  j["config_ini"] = report.config_text;
  j["victim"] = {{"test_err_pct", report.victim_test_err_pct},
                 {"train_err_pct", report.victim_train_err_pct}};
  j["points"] = ordered_json::array();
  for (const auto& p : report.points) j["points"].push_back(point_to_json(p));
  j["constrained_max"] = ordered_json::array();
  for (const auto& t : report.tables) {
    ordered_json tj;
    tj["budget"] = t.budget;
    tj["l1_budget"] = t.l1_budget;
    tj["delta_limits_pct"] = t.limits_pct;
    tj["undefended_adv_err_pct"] = t.undefended_adv_err_pct;
    tj["defenses"] = t.defenses;
    tj["max_adv_err_pct"] = t.max_adv_err_pct;
    j["constrained_max"].push_back(tj);
  }
  j["pareto"] = ordered_json::array();
  for (const auto& ps : report.pareto) {
    ordered_json pj;
    pj["defense"] = ps.defense;
    pj["axis"] = ps.axis;
    pj["frontier"] = ordered_json::array();
    for (const auto& p : ps.frontier) pj["frontier"].push_back(point_to_json(p));
    j["pareto"].push_back(pj);
  }
  j["latency"] = ordered_json::array();
  for (const auto& l : report.latency) {
    j["latency"].push_back({{"defense", l.defense},
                            {"samples", l.samples},
                            {"mean_ns", l.mean_ns},
                            {"median_ns", l.median_ns},
                            {"p99_ns", l.p99_ns},
                            {"overhead_ratio", l.overhead_ratio}});
  }
  j["errors"] = ordered_json::array();
  for (const auto& e : report.errors) {
    j["errors"].push_back({{"defense", e.defense},
                           {"beta", e.beta},
                           {"seed", e.seed},
                           {"budget", e.budget},
                           {"message", e.message}});
  }
  j["wallclock"] = {{"started_utc", report.started_utc},
                    {"elapsed_seconds", report.elapsed_seconds}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << j.dump(2) << '\n';
}

ExperimentReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  ExperimentReport report;
  report.config_text = j.at("config_ini").get<std::string>();
  report.config = config_from_text(report.config_text);
  report.victim_test_err_pct = j.at("victim").at("test_err_pct").get<double>();
  report.victim_train_err_pct =
      j.at("victim").at("train_err_pct").get<double>();
  for (const auto& pj : j.at("points")) {
    report.points.push_back(point_from_json(pj));
  }
  return report;
}

void write_tables_md(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "# Extraction results\n\n";
  out << "Victim test error: " << fmt("%.2f", report.victim_test_err_pct)
      << "% (train " << fmt("%.2f", report.victim_train_err_pct) << "%)\n";
  for (const auto& t : report.tables) {
    out << "\n## Max adversary error, budget " << t.budget << " (l1 <= "
        << fmt("%.2f", t.l1_budget) << ")\n\n";
    out << "| defense |";
    for (double l : t.limits_pct) out << " d<=" << fmt("%.0f", l) << "% |";
    out << "\n|---|";
    for (std::size_t i = 0; i < t.limits_pct.size(); ++i) out << "---|";
    out << "\n| (no defense) |";
    for (std::size_t i = 0; i < t.limits_pct.size(); ++i) {
      out << ' ' << fmt("%.2f", t.undefended_adv_err_pct) << " |";
    }
    out << '\n';
    for (std::size_t d = 0; d < t.defenses.size(); ++d) {
      out << "| " << t.defenses[d] << " |";
      for (double v : t.max_adv_err_pct[d]) out << ' ' << fmt("%.2f", v) << " |";
      out << '\n';
    }
  }
  if (!report.latency.empty()) {
    out << "\n## Inference latency per query\n\n";
    out << "| defense | mean (ms) | median (ms) | p99 (ms) | overhead |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& l : report.latency) {
      out << "| " << l.defense << " | " << fmt("%.3f", l.mean_ns / 1e6)
          << " | " << fmt("%.3f", l.median_ns / 1e6) << " | "
          << fmt("%.3f", l.p99_ns / 1e6) << " | "
          << fmt("%.2f", l.overhead_ratio) << "x |\n";
    }
  }
  if (!report.errors.empty()) {
    out << "\n## Errors\n\n";
    for (const auto& e : report.errors) {
      out << "- " << e.defense << " beta=" << fmt_exact(e.beta) << " seed="
          << e.seed << " budget=" << e.budget << ": " << e.message << '\n';
    }
  }
}

void emit_plot_data(const ExperimentReport& report,
                    const std::string& out_dir) {
  if (report.points.empty()) {
    throw EmptyReportError("emit_plot_data: report has no points");
  }
  const fs::path dir = fs::path(out_dir) / "plots";
  fs::create_directories(dir);

  struct Figure {
    const char* name;
    double (*x)(const CurvePoint&);
  };
  const Figure figures[] = {
      {"results", [](const CurvePoint& p) { return p.def_err_pct; }},
      {"l1", [](const CurvePoint& p) { return p.mean_l1; }},
      {"queries",
       [](const CurvePoint& p) { return static_cast<double>(p.queries); }},
  };

  std::vector<std::string> defenses;
  for (const auto& p : report.points) {
    if (std::find(defenses.begin(), defenses.end(), p.defense) ==
        defenses.end()) {
      defenses.push_back(p.defense);
    }
  }

  for (const auto& fig : figures) {
    for (const auto& name : defenses) {
      struct Row {
        double x, y;
        std::uint64_t seed;
      };
      std::vector<Row> rows;
      for (const auto& p : report.points) {
        if (p.defense == name) rows.push_back({fig.x(p), p.adv_err_pct, p.seed});
      }
      std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.seed < b.seed;
      });
      const fs::path file = dir / (std::string(fig.name) + "_" + name + ".tsv");
      std::ofstream out(file);
      if (!out) throw IoError("cannot write: " + file.string());
      out << "# x\ty\tseed\n";
      for (const auto& r : rows) {
        out << fmt_exact(r.x) << '\t' << fmt_exact(r.y) << '\t' << r.seed
            << '\n';
      }
    }
  }
}

}  // namespace pshield
