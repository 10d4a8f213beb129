#include "pshield/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace pshield {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) {
    throw ConfigError(key + ": bad number '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) {
    throw ConfigError(key + ": bad integer '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) {
    throw ConfigError(key + ": bad integer '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": bad boolean '" + v + "'");
}

std::vector<std::size_t> parse_hidden(const std::string& key,
                                      const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;  // empty -> linear model
  for (const auto& tok : split(v, ',')) {
    out.push_back(static_cast<std::size_t>(parse_u64(key, tok)));
  }
  return out;
}

// "a:step:b" (inclusive, fp-robust count) or a comma list.
std::vector<double> parse_grid(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.find(':') != std::string::npos) {
    const auto parts = split(v, ':');
    if (parts.size() != 3) {
      throw ConfigError(key + ": range must be start:step:stop");
    }
    const double a = parse_double(key, parts[0]);
    const double s = parse_double(key, parts[1]);
    const double b = parse_double(key, parts[2]);
    if (!(s > 0.0) || b < a) {
      throw ConfigError(key + ": bad range '" + v + "'");
    }
    const int n = static_cast<int>(std::lround((b - a) / s));
    // linspace form: hits the endpoints exactly and yields the canonical
    // doubles for decimal steps (a + i*s would drift, e.g. 15*0.1 > 1.5)
    for (int i = 0; i <= n; ++i) {
      out.push_back(n == 0 ? a : a + (b - a) * i / n);
    }
    return out;
  }
  for (const auto& tok : split(v, ',')) out.push_back(parse_double(key, tok));
  return out;
}

// Shortest decimal that parses back to exactly the same double; integral
// values print without an exponent.
std::string fmt_double(double v) {
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

std::string fmt_hidden(const std::vector<std::size_t>& h) {
  std::string out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(h[i]);
  }
  return out;
}

template <typename T, typename F>
std::string fmt_list(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

std::string schedule_name(LrSchedule s) {
  return s == LrSchedule::Cosine ? "cosine" : "constant";
}

LrSchedule parse_schedule(const std::string& key, const std::string& v) {
  if (v == "cosine") return LrSchedule::Cosine;
  if (v == "constant") return LrSchedule::Constant;
  throw ConfigError(key + ": schedule must be constant or cosine, got '" + v +
                    "'");
}

// Keys every TrainConfig-backed section accepts.
void apply_train_key(TrainConfig& t, const std::string& full_key,
                     const std::string& field, const std::string& v) {
  if (field == "epochs") t.epochs = parse_int(full_key, v);
  else if (field == "batch") t.batch_size = parse_int(full_key, v);
  else if (field == "lr") t.learning_rate = parse_double(full_key, v);
  else if (field == "momentum") t.momentum = parse_double(full_key, v);
  else if (field == "weight_decay") t.weight_decay = parse_double(full_key, v);
  else if (field == "schedule") t.schedule = parse_schedule(full_key, v);
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty() || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError("config line " + std::to_string(line_no) +
                         ": malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key = value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": empty key");
    }
    doc[section.empty() ? key : section + "." + key] = value;
  }
  return doc;
}

ExperimentConfig config_from_text(
    const std::string& text,
    const std::map<std::string, std::string>& overrides, bool strict) {
  auto doc = parse_config_text(text);
  bool seeds_given = doc.count("sweep.seeds") > 0;
  for (const auto& [k, v] : overrides) {
    doc[k] = v;
    if (k == "sweep.seeds") seeds_given = true;
  }

  ExperimentConfig cfg;
  cfg.beta_grid.clear();
  for (int i = 0; i <= 15; ++i) cfg.beta_grid.push_back(i / 10.0);

  std::set<std::string> consumed;
  auto take = [&](const std::string& key) -> const std::string* {
    auto it = doc.find(key);
    if (it == doc.end()) return nullptr;
    consumed.insert(key);
    return &it->second;
  };

  if (const auto* v = take("dataset.generator")) cfg.dataset.generator = *v;
  if (const auto* v = take("dataset.classes"))
    cfg.dataset.classes = parse_u64("dataset.classes", *v);
  if (const auto* v = take("dataset.per_class"))
    cfg.dataset.per_class = parse_u64("dataset.per_class", *v);
  if (const auto* v = take("dataset.dim"))
    cfg.dataset.dim = parse_u64("dataset.dim", *v);
  if (const auto* v = take("dataset.spread"))
    cfg.dataset.spread = parse_double("dataset.spread", *v);
  if (const auto* v = take("dataset.seed"))
    cfg.dataset.seed = parse_u64("dataset.seed", *v);
  if (const auto* v = take("dataset.csv_train")) cfg.dataset.csv_train = *v;
  if (const auto* v = take("dataset.csv_test")) cfg.dataset.csv_test = *v;

  if (const auto* v = take("victim.hidden"))
    cfg.victim.hidden = parse_hidden("victim.hidden", *v);
  if (const auto* v = take("victim.seed"))
    cfg.victim.train.seed = parse_u64("victim.seed", *v);
  for (const char* f : {"epochs", "batch", "lr", "momentum", "weight_decay",
                        "schedule"}) {
    if (const auto* v = take(std::string("victim.") + f)) {
      apply_train_key(cfg.victim.train, std::string("victim.") + f, f, *v);
    }
  }
  if (const auto* v = take("adversary.hidden"))
    cfg.adversary.hidden = parse_hidden("adversary.hidden", *v);
  for (const char* f : {"epochs", "batch", "lr", "momentum", "weight_decay",
                        "schedule"}) {
    if (const auto* v = take(std::string("adversary.") + f)) {
      apply_train_key(cfg.adversary.train, std::string("adversary.") + f, f, *v);
    }
  }

  if (const auto* v = take("pool.mode")) {
    if (*v == "in_distribution") cfg.pool.mode = PoolMode::InDistribution;
    else if (*v == "ood") cfg.pool.mode = PoolMode::OutOfDistribution;
    else throw ConfigError("pool.mode: must be in_distribution or ood");
  }
  if (const auto* v = take("pool.size"))
    cfg.pool.size = parse_u64("pool.size", *v);
  if (const auto* v = take("pool.seed"))
    cfg.pool.seed = parse_u64("pool.seed", *v);

  std::vector<std::string> defense_names{"none", "dcp"};
  if (const auto* v = take("sweep.defenses")) {
    defense_names = split(*v, ',');
    if (defense_names.empty()) {
      throw ConfigError("sweep.defenses: empty list");
    }
  }
  if (const auto* v = take("sweep.beta_grid"))
    cfg.beta_grid = parse_grid("sweep.beta_grid", *v);
  if (const auto* v = take("sweep.seeds")) {
    cfg.seeds.clear();
    for (const auto& tok : split(*v, ','))
      cfg.seeds.push_back(parse_u64("sweep.seeds", tok));
  } else if (!seeds_given) {
    if (const char* env = std::getenv(kSeedEnvVar)) {
      cfg.seeds.clear();
      for (const auto& tok : split(env, ','))
        cfg.seeds.push_back(parse_u64(kSeedEnvVar, tok));
    }
  }
  if (const auto* v = take("sweep.budgets")) {
    cfg.budgets.clear();
    for (const auto& tok : split(*v, ','))
      cfg.budgets.push_back(parse_u64("sweep.budgets", tok));
  }
  if (const auto* v = take("sweep.l1_budget"))
    cfg.l1_budget = parse_double("sweep.l1_budget", *v);
  if (const auto* v = take("sweep.delta_limits")) {
    cfg.delta_limits_pct.clear();
    for (const auto& tok : split(*v, ','))
      cfg.delta_limits_pct.push_back(parse_double("sweep.delta_limits", tok));
  }
  if (const auto* v = take("sweep.jobs")) cfg.jobs = parse_int("sweep.jobs", *v);
  if (const auto* v = take("sweep.fail_fast"))
    cfg.fail_fast = parse_bool("sweep.fail_fast", *v);
  if (const auto* v = take("sweep.record_latency"))
    cfg.record_latency = parse_bool("sweep.record_latency", *v);
  if (const auto* v = take("sweep.allow_extended_beta"))
    cfg.allow_extended_beta = parse_bool("sweep.allow_extended_beta", *v);

  if (const auto* v = take("bench.beta"))
    cfg.bench.beta = parse_double("bench.beta", *v);
  if (const auto* v = take("bench.queries"))
    cfg.bench.queries = parse_u64("bench.queries", *v);
  if (const auto* v = take("bench.warmup"))
    cfg.bench.warmup = parse_u64("bench.warmup", *v);
  if (const auto* v = take("bench.batch"))
    cfg.bench.batch = parse_u64("bench.batch", *v);

  if (const auto* v = take("output.dir")) cfg.out_dir = *v;

  cfg.defenses.clear();
  for (const auto& name : defense_names) {
    DefenseEntry entry;
    entry.kind = defense_from_name(name);  // throws ConfigError on bad name
    const std::string prefix = "defense." + name + ".";
    if (const auto* v = take(prefix + "gamma"))
      entry.cfg.gamma = parse_double(prefix + "gamma", *v);
    if (const auto* v = take(prefix + "nu"))
      entry.cfg.nu = parse_double(prefix + "nu", *v);
    if (const auto* v = take(prefix + "tau")) {
      if (*v != "auto") entry.cfg.tau = parse_double(prefix + "tau", *v);
    }
    if (const auto* v = take(prefix + "k"))
      entry.cfg.top_k = parse_int(prefix + "k", *v);
    if (const auto* v = take(prefix + "rng_seed"))
      entry.cfg.noise_seed = parse_u64(prefix + "rng_seed", *v);
    cfg.defenses.push_back(std::move(entry));
  }

  if (strict) {
    for (const auto& [k, v] : doc) {
      if (!consumed.count(k)) {
        throw UnknownKeyError("unknown config key '" + k + "'");
      }
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path,
                              const std::map<std::string, std::string>& overrides,
                              bool strict) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str(), overrides, strict);
}

void ExperimentConfig::validate() const {
  if (dataset.generator != "blobs" && dataset.generator != "rings" &&
      dataset.generator != "csv") {
    throw ConfigError("dataset.generator: unknown generator '" +
                      dataset.generator + "'");
  }
  if (dataset.generator == "csv" &&
      (dataset.csv_train.empty() || dataset.csv_test.empty())) {
    throw ConfigError("dataset.csv_train/csv_test: required for generator=csv");
  }
  if (dataset.classes < 2) throw ConfigError("dataset.classes: need >= 2");
  if (dataset.per_class < 1) throw ConfigError("dataset.per_class: need >= 1");
  if (dataset.generator == "blobs" && dataset.dim < 2) {
    throw ConfigError("dataset.dim: need >= 2");
  }
  if (dataset.generator == "blobs" && !(dataset.spread > 0.0)) {
    throw ConfigError("dataset.spread: need > 0");
  }
  victim.train.validate();
  adversary.train.validate();
  if (pool.size < 1) throw ConfigError("pool.size: need >= 1");
  if (defenses.empty()) throw ConfigError("sweep.defenses: need >= 1 defense");
  std::set<DefenseKind> seen;
  for (const auto& d : defenses) {
    if (!seen.insert(d.kind).second) {
      throw ConfigError("sweep.defenses: duplicate defense '" +
                        std::string(defense_name(d.kind)) + "'");
    }
    d.cfg.validate();
  }
  if (beta_grid.empty()) throw ConfigError("sweep.beta_grid: empty grid");
  for (double b : beta_grid) {
    if (b < 0.0) throw ConfigError("sweep.beta_grid: beta must be >= 0");
    const double cap = allow_extended_beta ? 10.0 : 1.5;
    if (b > cap + 1e-12) {
      throw ConfigError(
          "sweep.beta_grid: beta " + fmt_double(b) + " above " +
          fmt_double(cap) +
          (allow_extended_beta ? "" : " (pass --allow-extended-beta to widen)"));
    }
  }
  if (seeds.empty()) throw ConfigError("sweep.seeds: need >= 1 seed");
  if (budgets.empty()) throw ConfigError("sweep.budgets: need >= 1 budget");
  for (std::size_t b : budgets) {
    if (b > pool.size) {
      throw ConfigError("sweep.budgets: budget " + std::to_string(b) +
                        " exceeds pool.size " + std::to_string(pool.size));
    }
  }
  if (!(l1_budget > 0.0 && l1_budget <= 2.0)) {
    throw ConfigError("sweep.l1_budget: must be in (0, 2]");
  }
  for (double l : delta_limits_pct) {
    if (!(l > 0.0)) throw ConfigError("sweep.delta_limits: limits must be > 0");
  }
  if (jobs < 1) throw ConfigError("sweep.jobs: need >= 1");
  if (bench.warmup < 100) throw ConfigError("bench.warmup: need >= 100");
  if (bench.queries < 100) throw ConfigError("bench.queries: need >= 100");
  if (bench.batch < 1) throw ConfigError("bench.batch: need >= 1");
  if (!(bench.beta >= 0.0 && bench.beta <= 10.0)) {
    throw ConfigError("bench.beta: must be in [0, 10]");
  }
  if (out_dir.empty()) throw ConfigError("output.dir: empty");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::effective()
    const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&](const std::string& k, const std::string& v) {
    kv.emplace_back(k, v);
  };
  add("dataset.generator", dataset.generator);
  add("dataset.classes", std::to_string(dataset.classes));
  add("dataset.per_class", std::to_string(dataset.per_class));
  add("dataset.dim", std::to_string(dataset.dim));
  add("dataset.spread", fmt_double(dataset.spread));
  add("dataset.seed", std::to_string(dataset.seed));
  if (dataset.generator == "csv") {
    add("dataset.csv_train", dataset.csv_train);
    add("dataset.csv_test", dataset.csv_test);
  }
  auto add_train = [&](const std::string& p, const TrainConfig& t) {
    add(p + ".epochs", std::to_string(t.epochs));
    add(p + ".batch", std::to_string(t.batch_size));
    add(p + ".lr", fmt_double(t.learning_rate));
    add(p + ".momentum", fmt_double(t.momentum));
    add(p + ".weight_decay", fmt_double(t.weight_decay));
    add(p + ".schedule", schedule_name(t.schedule));
  };
  add("victim.hidden", fmt_hidden(victim.hidden));
  add_train("victim", victim.train);
  add("victim.seed", std::to_string(victim.train.seed));
  add("adversary.hidden", fmt_hidden(adversary.hidden));
  add_train("adversary", adversary.train);
  add("pool.mode", pool.mode == PoolMode::InDistribution ? "in_distribution"
                                                         : "ood");
  add("pool.size", std::to_string(pool.size));
  add("pool.seed", std::to_string(pool.seed));
  add("sweep.defenses",
      fmt_list(defenses, [](const DefenseEntry& d) {
        return std::string(defense_name(d.kind));
      }));
  add("sweep.beta_grid", fmt_list(beta_grid, fmt_double));
  add("sweep.seeds", fmt_list(seeds, [](std::uint64_t s) {
        return std::to_string(s);
      }));
  add("sweep.budgets", fmt_list(budgets, [](std::size_t b) {
        return std::to_string(b);
      }));
  add("sweep.l1_budget", fmt_double(l1_budget));
  add("sweep.delta_limits", fmt_list(delta_limits_pct, fmt_double));
  add("sweep.jobs", std::to_string(jobs));
  add("sweep.fail_fast", fail_fast ? "true" : "false");
  add("sweep.record_latency", record_latency ? "true" : "false");
  add("sweep.allow_extended_beta", allow_extended_beta ? "true" : "false");
  add("bench.beta", fmt_double(bench.beta));
  add("bench.queries", std::to_string(bench.queries));
  add("bench.warmup", std::to_string(bench.warmup));
  add("bench.batch", std::to_string(bench.batch));
  add("output.dir", out_dir);
  for (const auto& d : defenses) {
    if (d.kind == DefenseKind::NoDefense) continue;
    const std::string p = "defense." + std::string(defense_name(d.kind)) + ".";
    add(p + "gamma", fmt_double(d.cfg.gamma));
    add(p + "nu", fmt_double(d.cfg.nu));
    add(p + "tau", d.cfg.tau ? fmt_double(*d.cfg.tau) : "auto");
    add(p + "k", std::to_string(d.cfg.top_k));
    add(p + "rng_seed", std::to_string(d.cfg.noise_seed));
  }
  return kv;
}

std::string ExperimentConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const auto& [k, v] : effective()) {
    const auto dot = k.rfind('.');
    const std::string sec = k.substr(0, dot);
    const std::string leaf = k.substr(dot + 1);
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += leaf + " = " + v + "\n";
  }
  return out;
}

}  // namespace pshield
