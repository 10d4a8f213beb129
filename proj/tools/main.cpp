#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pshield/config.hpp"
#include "pshield/experiment.hpp"
#include "pshield/rng.hpp"
#include "pshield/selftest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;
constexpr int kExitSelftestFailure = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;  // key=value overrides
  std::string seed;
  int jobs = 0;
  bool strict = false;
  bool fail_fast = false;
  bool record_latency = false;
  bool allow_extended_beta = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_path,
                  "experiment config file (omit to configure entirely via "
                  "--set flags)");
  cmd->add_option("-o,--out", o.out_dir, "output directory (overrides config)");
  cmd->add_option("--set", o.sets,
                  "override a config key, e.g. --set sweep.l1_budget=0.5");
  cmd->add_option("--seed", o.seed, "override the sweep seed list");
  cmd->add_option("--jobs", o.jobs, "parallel sweep cells");
  cmd->add_flag("--strict", o.strict, "reject unknown config keys");
  cmd->add_flag("--fail-fast", o.fail_fast, "abort on the first failing cell");
  cmd->add_flag("--record-latency", o.record_latency,
                "record wall-clock latency into points.csv (makes the file "
                "non-reproducible between runs)");
  cmd->add_flag("--allow-extended-beta", o.allow_extended_beta,
                "allow beta values above 1.5");
}

std::map<std::string, std::string> overrides_from(const CommonOpts& o,
                                                  const CLI::App* cmd) {
  std::map<std::string, std::string> ov;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw pshield::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    ov[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!o.seed.empty()) ov["sweep.seeds"] = o.seed;
  if (cmd->count("--jobs")) ov["sweep.jobs"] = std::to_string(o.jobs);
  if (!o.out_dir.empty()) ov["output.dir"] = o.out_dir;
  if (cmd->count("--fail-fast")) ov["sweep.fail_fast"] = "true";
  if (cmd->count("--record-latency")) ov["sweep.record_latency"] = "true";
  if (cmd->count("--allow-extended-beta"))
    ov["sweep.allow_extended_beta"] = "true";
  return ov;
}

pshield::ExperimentConfig load_config(const CommonOpts& o, const CLI::App* cmd) {
  const auto overrides = overrides_from(o, cmd);
  if (o.config_path.empty()) {
    return pshield::config_from_text("", overrides, o.strict);
  }
  return pshield::parse_config(o.config_path, overrides, o.strict);
}

int cmd_run(const CommonOpts& o, const CLI::App* cmd) {
  const auto cfg = load_config(o, cmd);
  pshield::ExperimentReport report;
  try {
    report = pshield::run_experiment(cfg, &std::cerr);
  } catch (const std::exception& e) {
    // leave a structured record of the abort next to any partial outputs
    report.config = cfg;
    report.config_text = cfg.to_ini();
    report.errors.push_back({"(run)", 0.0, 0, 0, e.what()});
    try {
      pshield::write_report_json(report, cfg.out_dir + "/report.json");
    } catch (const std::exception&) {
    }
    throw;
  }
  std::cout << "wrote " << cfg.out_dir << "/points.csv ("
            << report.points.size() << " rows), report.json, tables.md\n";
  if (!report.errors.empty()) {
    std::cout << report.errors.size()
              << " cell(s) failed; see report.json errors\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_bench(const CommonOpts& o, const CLI::App* cmd) {
  const auto cfg = load_config(o, cmd);
  const auto summary = pshield::bench_latency(cfg, &std::cerr);
  std::printf("%-8s %10s %12s %12s %12s %10s\n", "defense", "queries",
              "mean_ms", "median_ms", "p99_ms", "overhead");
  for (const auto& s : summary) {
    std::printf("%-8s %10zu %12.6f %12.6f %12.6f %9.2fx\n", s.defense.c_str(),
                s.samples, s.mean_ns / 1e6, s.median_ns / 1e6, s.p99_ns / 1e6,
                s.overhead_ratio);
  }
  std::cout << "wrote " << cfg.out_dir << "/latency.csv\n";
  return kExitOk;
}

int cmd_plot_data(const std::string& report_path, const std::string& out_dir) {
  const auto report = pshield::load_report_json(report_path);
  const std::string dir = out_dir.empty() ? report.config.out_dir : out_dir;
  pshield::emit_plot_data(report, dir);
  std::cout << "wrote plot TSVs under " << dir << "/plots\n";
  return kExitOk;
}

int cmd_calibrate(const CommonOpts& o, const CLI::App* cmd,
                  const std::string& defense_name_arg, double l1_budget_arg) {
  auto cfg = load_config(o, cmd);
  const double budget = l1_budget_arg > 0.0 ? l1_budget_arg : cfg.l1_budget;
  const auto kind = pshield::defense_from_name(defense_name_arg);

  pshield::DefenseConfig tpl;
  for (const auto& d : cfg.defenses) {
    if (d.kind == kind) tpl = d.cfg;
  }

  const auto victim = pshield::prepare_victim(cfg);
  std::vector<pshield::ProbabilityVector> sample;
  sample.reserve(victim.data.test.size());
  for (std::size_t i = 0; i < victim.data.test.size(); ++i) {
    sample.push_back(victim.model.forward(victim.data.test.features.row(i)));
  }

  double beta = 0.0;
  if (kind == pshield::DefenseKind::AdaptiveMisinformation) {
    // AM needs the misinformation posterior for the same query; recover the
    // query features through the sample index.
    pshield::TrainConfig mis_cfg = cfg.victim.train;
    mis_cfg.seed = pshield::mix_seed(cfg.victim.train.seed, 0x315f0);
    const auto misinfo = pshield::train_misinformation(
        victim.data.train, cfg.victim.hidden, mis_cfg,
        pshield::mix_seed(mis_cfg.seed, 0x5eed));
    const auto& test = victim.data.test;
    auto defend = [&](const pshield::ProbabilityVector& y, double b,
                      std::size_t idx) {
      pshield::DefenseConfig c = tpl;
      c.beta = b;
      return pshield::am_defend(y, misinfo.forward(test.features.row(idx)), c);
    };
    beta = pshield::calibrate_beta(defend, sample, budget);
  } else {
    beta = pshield::calibrate_beta(kind, tpl, sample, budget);
  }
  std::printf("defense=%s l1_budget=%g beta=%g\n", defense_name_arg.c_str(),
              budget, beta);
  return kExitOk;
}

int cmd_selftest(std::uint64_t seed, std::size_t samples) {
  const auto results = pshield::run_formula_suite(seed, samples);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-42s %s  (%s)\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? kExitOk : kExitSelftestFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perturbation defenses against model extraction: experiment "
               "runner"};
  app.require_subcommand(1);

  CommonOpts run_opts, bench_opts, cal_opts;
  auto* run = app.add_subcommand("run", "run the full extraction experiment");
  add_common(run, run_opts);
  auto* bench = app.add_subcommand("bench", "per-query latency benchmark");
  add_common(bench, bench_opts);

  std::string report_path = "out/report.json", plot_dir;
  auto* plot = app.add_subcommand("plot-data", "emit gnuplot TSVs from a report");
  plot->add_option("-r,--report", report_path, "report.json path");
  plot->add_option("-o,--out", plot_dir, "output directory");

  std::string cal_defense = "dcp";
  double cal_budget = 0.0;
  auto* cal = app.add_subcommand(
      "calibrate", "largest beta whose mean l1 stays within budget");
  add_common(cal, cal_opts);
  cal->add_option("--defense", cal_defense, "defense to calibrate");
  cal->add_option("--l1-budget", cal_budget, "l1 budget (default from config)");

  std::uint64_t st_seed = 2024;
  std::size_t st_samples = 10000;
  auto* st = app.add_subcommand("selftest", "run the formula invariant suite");
  st->add_option("--seed", st_seed, "suite seed");
  st->add_option("--samples", st_samples, "samples per defense");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts, run);
    if (bench->parsed()) return cmd_bench(bench_opts, bench);
    if (plot->parsed()) return cmd_plot_data(report_path, plot_dir);
    if (cal->parsed()) return cmd_calibrate(cal_opts, cal, cal_defense, cal_budget);
    if (st->parsed()) return cmd_selftest(st_seed, st_samples);
  } catch (const pshield::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}
