// Acceptance suite: one line per criterion, nonzero exit if a hard criterion
// fails. Criterion 6 is a trend claim and reports SOFT-FAIL without gating.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pshield/config.hpp"
#include "pshield/experiment.hpp"
#include "pshield/rng.hpp"
#include "pshield/selftest.hpp"

using namespace pshield;
namespace fs = std::filesystem;

#ifndef PSHIELD_SOURCE_DIR
#define PSHIELD_SOURCE_DIR "."
#endif
#ifndef PSHIELD_CLI
#define PSHIELD_CLI ""
#endif

namespace {

int g_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void report(int id, bool pass, bool soft, const std::string& title,
            const std::string& detail, double elapsed) {
  std::printf("[%2d] %-9s %-38s %s (%.1fs)\n", id,
              pass ? "PASS" : (soft ? "SOFT-FAIL" : "FAIL"), title.c_str(),
              detail.c_str(), elapsed);
  std::fflush(stdout);
  if (!pass && !soft) ++g_failures;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::string num(double v, const char* f = "%.2f") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

ExperimentConfig blobs_config() {
  return parse_config(std::string(PSHIELD_SOURCE_DIR) + "/configs/blobs.ini");
}

ExperimentConfig bench_config() {
  return parse_config(std::string(PSHIELD_SOURCE_DIR) + "/configs/bench.ini");
}

// Shared state across the scenario criteria.
struct Scenario {
  ExperimentConfig cfg;
  VictimBundle victim;
  QueryPool pool;
  double undefended_adv_err_pct = 0.0;  // filled by criterion 4

  SweepScenario sweep(DefenseKind kind, const DefenseConfig& tpl,
                      std::size_t budget) const {
    SweepScenario s;
    s.victim = &victim.model;
    s.pool = &pool;
    s.test = &victim.data.test;
    s.kind = kind;
    s.defense_template = tpl;
    s.adversary.hidden = cfg.adversary.hidden;
    s.adversary_train = cfg.adversary.train;
    s.budget = budget;
    return s;
  }
};

std::vector<double> adv_errs(const std::vector<SweepOutcome>& outs,
                             std::size_t beta_idx, std::size_t n_seeds) {
  std::vector<double> v;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    v.push_back(outs[beta_idx * n_seeds + s].outcome.adversary_error * 100.0);
  }
  return v;
}

// --- criteria ------------------------------------------------------------

void c1_formula_suite() {
  Timer t;
  const auto results = run_formula_suite(2024, 10000);
  bool pass = true;
  std::string failing;
  for (const auto& r : results) {
    if (!r.pass) {
      pass = false;
      failing += (failing.empty() ? "" : "; ") + r.name;
    }
  }
  const double el = t.seconds();
  report(1, pass && el < 10.0, false, "formula suite (10k inputs/defense)",
         pass ? "all checks green" : "failing: " + failing, el);
  if (!pass) {
    std::printf("     full check list:\n");
    for (const auto& r : results) {
      std::printf("       %-42s %s  (%s)\n", r.name.c_str(),
                  r.pass ? "pass" : "FAIL", r.detail.c_str());
    }
  }
}

void c2_gradient_check() {
  Timer t;
  FeatureMatrix X(4);
  X.push_row(std::vector<double>{0.3, -1.2, 0.7, 0.1});
  X.push_row(std::vector<double>{1.1, 0.4, -0.6, -0.9});
  X.push_row(std::vector<double>{-0.2, 0.8, 0.5, 1.3});
  X.push_row(std::vector<double>{0.0, -0.5, 1.9, -1.1});
  X.push_row(std::vector<double>{0.6, 0.6, -1.4, 0.2});
  X.push_row(std::vector<double>{-0.8, 0.1, 0.2, 0.9});
  std::vector<ProbabilityVector> T;
  T.emplace_back(std::vector<double>{1, 0, 0});
  T.emplace_back(std::vector<double>{0, 1, 0});
  T.emplace_back(std::vector<double>{0, 0, 1});
  T.emplace_back(std::vector<double>{0.2, 0.5, 0.3});
  T.emplace_back(std::vector<double>{0.6, 0.2, 0.2});
  T.emplace_back(std::vector<double>{0.1, 0.1, 0.8});

  double worst = 0.0;
  int seed = 41;
  for (const auto& hidden : {std::vector<std::size_t>{}, {16}, {32, 16}}) {
    DenseClassifier m(4, hidden, 3);
    m.init_uniform(static_cast<std::uint64_t>(seed++));
    worst = std::max(worst, gradient_check(m, X, T));
  }
  const double el = t.seconds();
  report(2, worst < 1e-4 && el < 5.0, false,
         "gradient check, three architectures",
         "max relative error " + num(worst, "%.2e"), el);
}

Scenario c3_victim_gate() {
  Timer t;
  Scenario sc{blobs_config(), VictimBundle{DenseClassifier(1, {}, 2), {}},
              QueryPool{}};
  sc.victim = prepare_victim(sc.cfg);
  sc.pool = make_query_pool(sc.cfg.dataset, sc.victim.data.train,
                            sc.cfg.pool.size, sc.cfg.pool.mode,
                            sc.cfg.pool.seed);
  const double el = t.seconds();
  const double err_pct = sc.victim.test_error * 100.0;
  report(3, sc.victim.test_error <= 0.05 && el < 30.0, false,
         "victim quality gate (blobs K=5)",
         "victim test error " + num(err_pct) + "%", el);
  return sc;
}

void c4_undefended_extraction(Scenario& sc) {
  Timer t;
  const std::vector<double> grid{0.0};
  const auto outs = sweep_beta(sc.sweep(DefenseKind::NoDefense, {}, 2000),
                               grid, sc.cfg.seeds, 1);
  const double med = median(adv_errs(outs, 0, sc.cfg.seeds.size()));
  sc.undefended_adv_err_pct = med;
  const double victim_pct = sc.victim.test_error * 100.0;
  const double gap = std::abs(med - victim_pct);
  const double el = t.seconds();
  report(4, gap <= 5.0 && el < 120.0, false, "undefended extraction succeeds",
         "median adversary " + num(med) + "% vs victim " + num(victim_pct) +
             "% (gap " + num(gap) + ")",
         el);
}

void c5_dcp_effectiveness(Scenario& sc) {
  Timer t;
  DefenseConfig tpl;
  for (const auto& d : sc.cfg.defenses) {
    if (d.kind == DefenseKind::DCP) tpl = d.cfg;
  }
  const auto outs = sweep_beta(sc.sweep(DefenseKind::DCP, tpl, 2000),
                               sc.cfg.beta_grid, sc.cfg.seeds, 1);
  const std::size_t ns = sc.cfg.seeds.size();

  bool found = false;
  double best_lift = -1e9;
  std::string best_row;
  for (std::size_t bi = 0; bi < sc.cfg.beta_grid.size(); ++bi) {
    std::vector<double> dd, l1;
    for (std::size_t s = 0; s < ns; ++s) {
      const auto& o = outs[bi * ns + s].outcome;
      dd.push_back(o.defender_error * 100.0 - sc.victim.test_error * 100.0);
      l1.push_back(o.mean_l1);
    }
    const auto errs = adv_errs(outs, bi, ns);
    const double med_err = median(errs);
    const double lift = med_err - sc.undefended_adv_err_pct;
    const bool feasible = median(dd) <= 1.0 && median(l1) <= 0.9;
    if (feasible && lift > best_lift) {
      best_lift = lift;
      best_row = "beta=" + num(sc.cfg.beta_grid[bi], "%.1f") + " lift=" +
                 num(lift) + " (dDef=" + num(median(dd)) + ", l1=" +
                 num(median(l1), "%.3f") + ", per-seed err " +
                 num(*std::min_element(errs.begin(), errs.end())) + ".." +
                 num(*std::max_element(errs.begin(), errs.end())) + ")";
    }
    if (feasible && lift >= 10.0) found = true;
  }
  const double el = t.seconds();
  report(5, found && el < 600.0, false, "DCP effectiveness (+10pt lift)",
         best_lift > -1e9 ? "best feasible " + best_row
                          : "no feasible beta on the grid",
         el);
  if (!found) {
    std::printf("     per-beta medians (budget 2000, %zu seeds):\n", ns);
    for (std::size_t bi = 0; bi < sc.cfg.beta_grid.size(); ++bi) {
      std::vector<double> dd, l1;
      for (std::size_t s = 0; s < ns; ++s) {
        const auto& o = outs[bi * ns + s].outcome;
        dd.push_back(o.defender_error * 100.0 - sc.victim.test_error * 100.0);
        l1.push_back(o.mean_l1);
      }
      std::printf("       beta=%4.1f adv=%6.2f%% dDef=%5.2f l1=%5.3f\n",
                  sc.cfg.beta_grid[bi], median(adv_errs(outs, bi, ns)),
                  median(dd), median(l1));
    }
  }
}

void c6_dcp_vs_rs(Scenario& sc) {
  Timer t;
  // calibrate both defenses to the same mean-l1 targets on the victim's
  // test posteriors, then compare median adversary errors
  std::vector<ProbabilityVector> sample;
  const auto& test = sc.victim.data.test;
  for (std::size_t i = 0; i < test.size(); ++i) {
    sample.push_back(sc.victim.model.forward(test.features.row(i)));
  }
  int wins = 0;
  std::string table;
  for (double target : {0.3, 0.6, 0.9}) {
    const double b_dcp =
        calibrate_beta(DefenseKind::DCP, DefenseConfig{}, sample, target);
    const double b_rs = calibrate_beta(DefenseKind::ReverseSigmoid,
                                       DefenseConfig{}, sample, target);
    const std::vector<double> gd{b_dcp}, gr{b_rs};
    const auto od =
        sweep_beta(sc.sweep(DefenseKind::DCP, {}, 2000), gd, sc.cfg.seeds, 1);
    const auto orr = sweep_beta(sc.sweep(DefenseKind::ReverseSigmoid, {}, 2000),
                                gr, sc.cfg.seeds, 1);
    const double m_dcp = median(adv_errs(od, 0, sc.cfg.seeds.size()));
    const double m_rs = median(adv_errs(orr, 0, sc.cfg.seeds.size()));
    wins += (m_dcp >= m_rs);
    table += "l1<=" + num(target, "%.1f") + ": dcp(b=" + num(b_dcp, "%.2f") +
             ")=" + num(m_dcp) + "% rs(b=" + num(b_rs, "%.2f") + ")=" +
             num(m_rs) + "%  ";
  }
  const bool pass = wins >= 2;
  report(6, pass, true, "DCP >= RS at matched l1 (soft gate)",
         "wins " + std::to_string(wins) + "/3", t.seconds());
  std::printf("     %s\n", table.c_str());
}

void c7_query_budget_trend(Scenario& sc) {
  Timer t;
  const std::vector<double> grid{0.0};
  const auto small = sweep_beta(sc.sweep(DefenseKind::NoDefense, {}, 200),
                                grid, sc.cfg.seeds, 1);
  const double med_small = median(adv_errs(small, 0, sc.cfg.seeds.size()));
  const double med_large = sc.undefended_adv_err_pct;  // budget 2000
  const double el = t.seconds();
  report(7, med_small >= med_large - 1.0 && el < 300.0, false,
         "query-budget trend (200 vs 2000)",
         "median err " + num(med_small) + "% @200 vs " + num(med_large) +
             "% @2000",
         el);
}

void c8_latency_overhead() {
  Timer t;
  auto cfg = bench_config();
  cfg.out_dir = "/tmp/pshield_acc_bench";
  const auto summary = bench_latency(cfg);
  double none_mean = 0, dcp_mean = 0, am_mean = 0;
  double none_med = 0, dcp_med = 0, rs_med = 0;
  for (const auto& s : summary) {
    if (s.defense == "none") {
      none_mean = s.mean_ns;
      none_med = s.median_ns;
    }
    if (s.defense == "dcp") {
      dcp_mean = s.mean_ns;
      dcp_med = s.median_ns;
    }
    if (s.defense == "rs") rs_med = s.median_ns;
    if (s.defense == "am") am_mean = s.mean_ns;
  }
  const double dcp_over = dcp_mean / none_mean - 1.0;
  // medians for the dcp-vs-rs comparison: per-query means wobble with
  // scheduler noise while the medians sit still across runs
  const double dcp_med_over = dcp_med / none_med - 1.0;
  const double rs_med_over = rs_med / none_med - 1.0;
  const bool pass = dcp_over < 0.20 && dcp_med_over <= 2.0 * rs_med_over &&
                    am_mean > dcp_mean && dcp_med_over < 0.20;
  report(8, pass && t.seconds() < 60.0, false, "latency overhead at K=100",
         "dcp mean +" + num(dcp_over * 100.0, "%.1f") + "%, median +" +
             num(dcp_med_over * 100.0, "%.1f") + "% vs rs median +" +
             num(rs_med_over * 100.0, "%.1f") + "%, am/dcp " +
             num(am_mean / dcp_mean, "%.2f") + "x",
         t.seconds());
}

void c9_constrained_max() {
  Timer t;
  auto mk = [](double l1, double delta, double adv) {
    CurvePoint p;
    p.defense = "dcp";
    p.mean_l1 = l1;
    p.delta_def_err_pct = delta;
    p.adv_err_pct = adv;
    return p;
  };
  const std::vector<CurvePoint> fixture{
      mk(0.30, 0.4, 41.0), mk(0.85, 1.9, 52.0), mk(0.95, 0.2, 88.0),
      mk(0.40, 2.1, 66.0), mk(0.89, 1.2, 47.0)};
  const std::vector<double> limits{1.0, 2.0, 5.0};
  const auto got = constrained_max(fixture, 0.9, limits, 30.0);
  // exhaustive scan, the independent route
  std::vector<double> expect;
  for (double lim : limits) {
    double best = 30.0;
    bool any = false;
    for (const auto& p : fixture) {
      if (p.mean_l1 <= 0.9 && p.delta_def_err_pct <= lim) {
        best = any ? std::max(best, p.adv_err_pct) : p.adv_err_pct;
        any = true;
      }
    }
    expect.push_back(best);
  }
  bool pass = got == expect;

  // monotone in both the budget and the limit over random clouds
  Rng rng(4242);
  for (int cloud = 0; cloud < 1000 && pass; ++cloud) {
    std::vector<CurvePoint> pts;
    const std::size_t n = 2 + rng.index(30);
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back(
          mk(2.0 * rng.unit(), -1.0 + 7.0 * rng.unit(), 100.0 * rng.unit()));
    }
    const std::vector<double> lims{0.5, 1.0, 2.0, 5.0};
    const auto tight = constrained_max(pts, 0.5, lims, 0.0);
    const auto loose = constrained_max(pts, 1.5, lims, 0.0);
    for (std::size_t i = 0; i < lims.size(); ++i) {
      pass = pass && loose[i] >= tight[i];
      if (i > 0) pass = pass && tight[i] >= tight[i - 1];
    }
  }
  report(9, pass, false, "constrained-max table machinery",
         pass ? "fixture exact; monotone on 1000 clouds" : "mismatch",
         t.seconds());
}

void c10_determinism() {
  Timer t;
  const std::string cli = PSHIELD_CLI;
  const std::string cfg_path =
      std::string(PSHIELD_SOURCE_DIR) + "/configs/blobs.ini";
  const std::string d1 = "/tmp/pshield_acc_det1";
  const std::string d2 = "/tmp/pshield_acc_det2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  bool pass = false;
  std::string detail;
  if (cli.empty()) {
    detail = "cli path not configured";
  } else {
    const std::string base = "\"" + cli + "\" run -c \"" + cfg_path + "\" -o ";
    const int rc1 = std::system((base + d1 + " >/dev/null 2>&1").c_str());
    const int rc2 = std::system((base + d2 + " >/dev/null 2>&1").c_str());
    if (rc1 == 0 && rc2 == 0) {
      std::ifstream a(d1 + "/points.csv"), b(d2 + "/points.csv");
      std::stringstream sa, sb;
      sa << a.rdbuf();
      sb << b.rdbuf();
      pass = !sa.str().empty() && sa.str() == sb.str();
      detail = pass ? "points.csv byte-identical across runs"
                    : "points.csv differs";
    } else {
      detail = "run exited nonzero";
    }
  }
  report(10, pass, false, "determinism of the run subcommand", detail,
         t.seconds());
}

}  // namespace

int main() {
  std::printf("acceptance suite, %s %s\n", kToolName, kToolVersion);
  c1_formula_suite();
  c2_gradient_check();
  Scenario sc = c3_victim_gate();
  c4_undefended_extraction(sc);
  c5_dcp_effectiveness(sc);
  c6_dcp_vs_rs(sc);
  c7_query_budget_trend(sc);
  c8_latency_overhead();
  c9_constrained_max();
  c10_determinism();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all hard criteria passed\n");
  return 0;
}
