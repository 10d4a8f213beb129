#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pshield/experiment.hpp"

using namespace pshield;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tiny_config(const std::string& out_dir) {
  return
      "[dataset]\n"
      "generator = blobs\n"
      "classes = 3\n"
      "per_class = 40\n"
      "spread = 0.1\n"
      "seed = 42\n"
      "[victim]\n"
      "hidden = 8\n"
      "epochs = 30\n"
      "[adversary]\n"
      "hidden = 16\n"
      "epochs = 25\n"
      "[pool]\n"
      "size = 200\n"
      "[sweep]\n"
      "defenses = none, dcp\n"
      "beta_grid = 0,0.6\n"
      "seeds = 1,2\n"
      "budgets = 120\n"
      "[output]\n"
      "dir = " + out_dir + "\n";
}

}  // namespace

TEST_CASE("run_experiment end to end") {
  const std::string dir = "/tmp/pshield_exp_e2e";
  fs::remove_all(dir);
  const auto cfg = config_from_text(tiny_config(dir));
  const auto report = run_experiment(cfg);

  SUBCASE("row counts: defenses x grid x seeds") {
    CHECK(report.points.size() == 2 * 2 * 2);
    CHECK(fs::exists(fs::path(dir) / "points.csv"));
    CHECK(fs::exists(fs::path(dir) / "report.json"));
    CHECK(fs::exists(fs::path(dir) / "tables.md"));
  }
  SUBCASE("csv header is the exact documented contract") {
    const auto text = read_file(fs::path(dir) / "points.csv");
    CHECK(text.rfind("defense,beta,seed,budget,adv_err_pct,def_err_pct,"
                     "delta_def_err_pct,mean_l1,max_l1,mean_latency_ns,queries\n",
                     0) == 0);
    // 8 data rows + header
    CHECK(std::count(text.begin(), text.end(), '\n') == 9);
  }
  SUBCASE("beta = 0 rows coincide across defenses") {
    double none_err = -1.0, dcp_err = -2.0;
    for (const auto& p : report.points) {
      if (p.seed != 1 || p.beta != 0.0) continue;
      if (p.defense == "none") none_err = p.adv_err_pct;
      if (p.defense == "dcp") dcp_err = p.adv_err_pct;
    }
    CHECK(none_err == dcp_err);
  }
  SUBCASE("delta defender error is zero for the undefended rows") {
    for (const auto& p : report.points) {
      if (p.defense == "none") {
        CHECK(p.delta_def_err_pct == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(p.mean_l1 == 0.0);
      }
    }
  }
  SUBCASE("latency column stays zero unless recording is requested") {
    for (const auto& p : report.points) CHECK(p.mean_latency_ns == 0.0);
    auto rec_cfg = config_from_text(tiny_config("/tmp/pshield_exp_rec"),
                                    {{"sweep.record_latency", "true"},
                                     {"sweep.beta_grid", "0.5"},
                                     {"sweep.seeds", "1"}});
    const auto rec = run_experiment(rec_cfg);
    for (const auto& p : rec.points) CHECK(p.mean_latency_ns > 0.0);
  }
  SUBCASE("report json loads back with an identical config") {
    const auto loaded = load_report_json((fs::path(dir) / "report.json").string());
    CHECK(loaded.config == report.config);
    CHECK(loaded.points.size() == report.points.size());
  }
  SUBCASE("plot data emission") {
    emit_plot_data(report, dir);
    for (const char* fig : {"results", "l1", "queries"}) {
      for (const char* d : {"none", "dcp"}) {
        const fs::path f =
            fs::path(dir) / "plots" / (std::string(fig) + "_" + d + ".tsv");
        REQUIRE(fs::exists(f));
        const auto text = read_file(f);
        CHECK(text.rfind("# x\ty\tseed\n", 0) == 0);
        // every data line has exactly two tabs
        std::istringstream lines(text);
        std::string line;
        std::getline(lines, line);  // header
        std::size_t rows = 0;
        while (std::getline(lines, line)) {
          CHECK(std::count(line.begin(), line.end(), '\t') == 2);
          ++rows;
        }
        CHECK(rows == 4);  // grid x seeds for this defense
      }
    }
    ExperimentReport empty;
    CHECK_THROWS_AS(emit_plot_data(empty, dir), EmptyReportError);
  }
  SUBCASE("single-point report emits single-row TSVs") {
    ExperimentReport one;
    CurvePoint p;
    p.defense = "dcp";
    p.adv_err_pct = 42.0;
    p.def_err_pct = 3.0;
    p.seed = 9;
    one.points.push_back(p);
    const std::string d1 = "/tmp/pshield_exp_onepoint";
    fs::remove_all(d1);
    emit_plot_data(one, d1);
    const auto text = read_file(fs::path(d1) / "plots" / "results_dcp.tsv");
    CHECK(text == "# x\ty\tseed\n3\t42\t9\n");
  }
  SUBCASE("constrained-max table uses the none rows as reference") {
    REQUIRE(report.tables.size() == 1);
    CHECK(report.tables[0].budget == 120);
    CHECK(report.tables[0].defenses.size() == 2);
  }
}

TEST_CASE("adaptive misinformation end to end") {
  const std::string dir = "/tmp/pshield_exp_am";
  fs::remove_all(dir);
  const std::string text =
      "[dataset]\n"
      "generator = blobs\n"
      "classes = 3\n"
      "per_class = 40\n"
      "seed = 4\n"
      "[victim]\n"
      "hidden = 8\n"
      "epochs = 25\n"
      "[adversary]\n"
      "epochs = 20\n"
      "[pool]\n"
      "size = 150\n"
      "[sweep]\n"
      "defenses = none, am\n"
      "beta_grid = 0,0.7\n"
      "seeds = 1\n"
      "budgets = 100\n"
      "[defense.am]\n"
      "tau = 0.9\n"
      "[output]\n"
      "dir = " + dir + "\n";
  const auto report = run_experiment(config_from_text(text));
  REQUIRE(report.errors.empty());
  // am ignores beta: its rows replicate across the grid
  double am0 = -1, am7 = -2, am_l1 = -1;
  for (const auto& p : report.points) {
    if (p.defense != "am") continue;
    if (p.beta == 0.0) am0 = p.adv_err_pct;
    if (p.beta == 0.7) {
      am7 = p.adv_err_pct;
      am_l1 = p.mean_l1;
    }
  }
  CHECK(am0 == am7);
  // tau = 0.9 fires on confident posteriors, so the blend moves something
  CHECK(am_l1 > 0.0);
}

TEST_CASE("byte-identical reruns") {
  const std::string dir_a = "/tmp/pshield_exp_det_a";
  const std::string dir_b = "/tmp/pshield_exp_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_experiment(config_from_text(tiny_config(dir_a)));
  run_experiment(config_from_text(tiny_config(dir_b)));
  CHECK(read_file(fs::path(dir_a) / "points.csv") ==
        read_file(fs::path(dir_b) / "points.csv"));
}

TEST_CASE("crash isolation records error rows and keeps going") {
  const std::string dir = "/tmp/pshield_exp_crash";
  fs::remove_all(dir);
  // noise at magnitude 10 drives whole posteriors negative for some query,
  // so normalize raises DegenerateError inside those cells
  const std::string text =
      "[dataset]\n"
      "generator = blobs\n"
      "classes = 3\n"
      "per_class = 30\n"
      "seed = 1\n"
      "[victim]\n"
      "hidden = 8\n"
      "epochs = 10\n"
      "[adversary]\n"
      "epochs = 10\n"
      "[pool]\n"
      "size = 80\n"
      "[sweep]\n"
      "defenses = none, noise\n"
      "beta_grid = 0,10\n"
      "allow_extended_beta = true\n"
      "seeds = 1\n"
      "budgets = 60\n"
      "[output]\n"
      "dir = " + dir + "\n";
  const auto report = run_experiment(config_from_text(text));
  CHECK(!report.errors.empty());
  bool has_none_rows = false;
  for (const auto& p : report.points) has_none_rows |= (p.defense == "none");
  CHECK(has_none_rows);

  SUBCASE("fail-fast propagates instead") {
    const auto cfg =
        config_from_text(text, {{"sweep.fail_fast", "true"},
                                {"output.dir", dir + "_ff"}});
    CHECK_THROWS(run_experiment(cfg));
  }
}

TEST_CASE("bench_latency shape") {
  const std::string dir = "/tmp/pshield_exp_bench";
  fs::remove_all(dir);
  const std::string text =
      "[dataset]\n"
      "generator = blobs\n"
      "classes = 5\n"
      "per_class = 30\n"
      "seed = 2\n"
      "[victim]\n"
      "hidden = 16\n"
      "epochs = 5\n"
      "[pool]\n"
      "size = 300\n"
      "[sweep]\n"
      "defenses = dcp, rs\n"
      "budgets = 100\n"
      "[bench]\n"
      "queries = 400\n"
      "warmup = 100\n"
      "batch = 64\n"
      "[output]\n"
      "dir = " + dir + "\n";
  const auto summary = bench_latency(config_from_text(text));
  REQUIRE(summary.size() == 3);  // none baseline + dcp + rs
  CHECK(summary[0].defense == "none");
  CHECK(summary[0].overhead_ratio == doctest::Approx(1.0));
  for (const auto& s : summary) {
    CHECK(s.samples == 400);
    CHECK(s.mean_ns > 0.0);
  }
  CHECK(fs::exists(fs::path(dir) / "latency.csv"));
  const auto csv = read_file(fs::path(dir) / "latency.csv");
  CHECK(csv.rfind("defense,queries,mean_ms,median_ms,p99_ms,overhead_ratio\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
