#pragma once

// Experiment harness: strict config parsing, policy construction and the
// run / compare / abtest / sweep / heatmap / gen-log commands.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rlw/policy.hpp"
#include "rlw/preset.hpp"
#include "rlw/simulator.hpp"

namespace rlw {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& msg)
      : std::runtime_error(field.empty() ? msg : field + ": " + msg), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace config_detail {

/// Reads fields from a JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key), "missing required field");
    return j_.at(key);
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    if (!has(key)) return;
    out = as<T>(key, j_.at(key));
  }

  template <typename T>
  T req(const std::string& key) {
    return as<T>(key, at(key));
  }

  void opt_boundary(const std::string& key, Boundary& b) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(field(key), "expected [start, finish]");
    b = Boundary{v[0].get<double>(), v[1].get<double>()};
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  template <typename T>
  T as(const std::string& key, const Json& v) const {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        if constexpr (std::is_integral_v<T>) {
          const double d = v.get<double>();
          if (d != std::floor(d)) throw ConfigError(field(key), "expected an integer");
          if constexpr (std::is_unsigned_v<T>)
            if (d < 0) throw ConfigError(field(key), "expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void rethrow_as_config(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// Policy specs

struct PolicySpec {
  std::string name;   // myopic | v1d3 | frozen | rlw | rlw-reg
  std::string label;  // display name, defaults to name
  Json params = Json::object();
  std::string field = "policy";
};

inline RlwConfig parse_rlw_config(const PolicySpec& spec, std::uint64_t seed) {
  using config_detail::ObjectReader;
  RlwConfig c;
  c.seed = derive_seed(seed, 3);
  if (spec.name == "rlw-reg") {
    c.edge_mode = EdgeMode::Raw;
  }
  ObjectReader r(spec.params, spec.field);
  r.has("name");
  r.has("label");
  r.has("preset");
  r.opt("gamma", c.policy.gamma);
  r.opt_boundary("w_rew", c.policy.w_rew);
  r.opt_boundary("w_p", c.policy.w_p);
  r.opt("t_up", c.policy.t_up);
  r.opt("feedback_interval", c.policy.feedback_interval);
  r.opt("metrics_window", c.policy.metrics_window);
  r.opt("day_start", c.policy.day_start);
  r.opt("day_end", c.policy.day_end);
  r.opt("day_length", c.policy.day_length);
  r.opt("reset_values_daily", c.policy.reset_values_daily);
  if (r.has("edge_mode")) {
    const auto m = r.req<std::string>("edge_mode");
    if (m == "standardized")
      c.edge_mode = EdgeMode::Standardized;
    else if (m == "raw")
      c.edge_mode = EdgeMode::Raw;
    else
      throw ConfigError(r.field("edge_mode"), "expected 'standardized' or 'raw'");
  }
  if (r.has("smoothing")) {
    ObjectReader s(r.at("smoothing"), r.field("smoothing"));
    s.opt("enabled", c.smooth_rewards);
    s.opt("beta", c.smoother_beta);
    s.opt("literal_init", c.smoother_literal_init);
    s.finish();
  }
  if (r.has("standardizer")) {
    ObjectReader s(r.at("standardizer"), r.field("standardizer"));
    s.opt("beta1", c.std_beta1);
    s.opt("beta2", c.std_beta2);
    s.finish();
  }
  if (r.has("optimizer")) {
    const auto o = r.req<std::string>("optimizer");
    if (o == "adam")
      c.optimizer = ValueOptimizer::Adam;
    else if (o == "sgd")
      c.optimizer = ValueOptimizer::Sgd;
    else
      throw ConfigError(r.field("optimizer"), "expected 'adam' or 'sgd'");
  }
  if (r.has("adam")) {
    ObjectReader a(r.at("adam"), r.field("adam"));
    a.opt("base_lr", c.adam.base_lr);
    a.opt("beta1", c.adam.beta1);
    a.opt("beta2", c.adam.beta2);
    a.opt("epsilon", c.adam.epsilon);
    a.finish();
  }
  r.opt("sgd_lr", c.sgd_lr);
  if (r.has("pruning")) {
    const auto p = r.req<std::string>("pruning");
    if (p == "ucb")
      c.pruning = PruningMode::Ucb;
    else if (p == "fixed")
      c.pruning = PruningMode::Fixed;
    else
      throw ConfigError(r.field("pruning"), "expected 'ucb' or 'fixed'");
  }
  r.opt("fixed_threshold", c.fixed_threshold);
  if (r.has("ucb")) {
    ObjectReader u(r.at("ucb"), r.field("ucb"));
    u.opt("arm_min", c.ucb.arm_min);
    u.opt("arm_max", c.ucb.arm_max);
    u.opt("arm_count", c.ucb.arm_count);
    u.opt("alpha_q", c.ucb.alpha_q);
    u.opt("gamma_n", c.ucb.gamma_n);
    u.opt("c", c.ucb.c);
    u.finish();
  }
  r.finish();
  return c;
}

inline V1d3Config parse_v1d3_config(const PolicySpec& spec) {
  config_detail::ObjectReader r(spec.params, spec.field);
  r.has("name");
  r.has("label");
  r.has("preset");
  V1d3Config c;
  r.opt("gamma", c.gamma);
  r.opt("learning_rate", c.learning_rate);
  r.opt("t_up", c.t_up);
  r.finish();
  return c;
}

/// Builds a fresh policy instance for one run.
inline std::unique_ptr<DispatchPolicy> make_policy(const PolicySpec& spec, const Grid& grid, std::uint64_t seed,
                                                   Seconds round_length) {
  using config_detail::ObjectReader;
  using config_detail::rethrow_as_config;
  std::unique_ptr<DispatchPolicy> out;
  rethrow_as_config(spec.field, [&] {
    if (spec.name == "myopic") {
      ObjectReader r(spec.params, spec.field);
      r.has("name");
      r.has("label");
      r.has("preset");
      r.finish();
      out = std::make_unique<MyopicPolicy>();
    } else if (spec.name == "v1d3") {
      const auto c = parse_v1d3_config(spec);
      check_gamma(c.gamma);
      if (!(c.t_up > 0.0)) throw std::invalid_argument("t_up must be > 0");
      out = std::make_unique<V1d3Policy>(grid.cell_count(), c);
    } else if (spec.name == "frozen") {
      ObjectReader r(spec.params, spec.field);
      r.has("name");
      r.has("label");
      r.has("preset");
      double gamma = 0.9;
      r.opt("gamma", gamma);
      const auto path = r.req<std::string>("table");
      r.finish();
      ValueTable table;
      try {
        table = load_value_table(path, grid);
      } catch (const std::runtime_error& e) {
        throw ConfigError(r.field("table"), e.what());
      }
      out = std::make_unique<FrozenTablePolicy>(std::move(table), gamma);
    } else if (spec.name == "rlw" || spec.name == "rlw-reg") {
      out = std::make_unique<RlwPolicy>(grid.cell_count(), parse_rlw_config(spec, seed), round_length);
    } else {
      throw ConfigError(spec.field + ".name", fmt::format("unknown policy '{}'", spec.name));
    }
  });
  return out;
}

inline PolicySpec parse_policy_spec(const Json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  PolicySpec s;
  s.field = field;
  s.params = j;
  if (!j.contains("name")) throw ConfigError(field + ".name", "missing required field");
  if (!j.at("name").is_string()) throw ConfigError(field + ".name", "expected a string");
  s.name = j.at("name").get<std::string>();
  s.label = s.name;
  if (j.contains("label")) {
    if (!j.at("label").is_string()) throw ConfigError(field + ".label", "expected a string");
    s.label = j.at("label").get<std::string>();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Experiment config

struct AbSpec {
  PolicySpec a;
  PolicySpec b;
  double flip_hours = 3.0;
};

struct SweepSpec {
  std::map<std::string, std::vector<double>> grid;
  std::map<std::string, std::pair<double, double>> ranges;
  int budget = 1;
  std::string objective = "income";
  std::uint64_t seed = 0;
};

inline const std::vector<std::string>& sweep_params() {
  static const std::vector<std::string> p = {"w_rew_start", "w_rew_finish", "w_p_start", "w_p_finish"};
  return p;
}

struct ExperimentConfig {
  std::vector<PolicySpec> policies;
  std::string baseline;
  std::string preset;
  std::optional<std::string> log_path;
  Json city_overrides = Json::object();
  std::vector<std::uint64_t> seeds{1};
  SimConfig sim;
  std::string out_dir = "out";
  std::optional<AbSpec> abtest;
  std::optional<SweepSpec> sweep;
};

inline CityPreset build_city(const ExperimentConfig& cfg) {
  using config_detail::ObjectReader;
  CityPreset c;
  try {
    c = make_preset(cfg.preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("city.preset", e.what());
  }
  ObjectReader r(cfg.city_overrides, "city");
  r.has("preset");
  r.has("log");
  r.opt("driver_count", c.driver_count);
  r.opt("base_price", c.base_price);
  r.opt("price_per_km", c.price_per_km);
  if (r.has("completion")) {
    ObjectReader cm(r.at("completion"), "city.completion");
    cm.opt("a", c.completion.a);
    cm.opt("b", c.completion.b);
    cm.finish();
  }
  r.finish();
  config_detail::rethrow_as_config("city", [&] { c.validate(); });
  return c;
}

inline std::vector<std::uint64_t> parse_seed_range(const std::string& s, const std::string& field) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(s)};
    const auto lo = std::stoull(s.substr(0, dots));
    const auto hi = std::stoull(s.substr(dots + 2));
    if (hi < lo) throw ConfigError(field, "empty seed range");
    std::vector<std::uint64_t> out;
    for (auto x = lo; x <= hi; ++x) out.push_back(x);
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError(field, fmt::format("invalid seed range '{}', expected N or N..M", s));
  }
}

inline ExperimentConfig parse_experiment_config(const Json& j) {
  using config_detail::ObjectReader;
  ExperimentConfig cfg;
  ObjectReader r(j, "");

  if (r.has("policy")) cfg.policies.push_back(parse_policy_spec(r.at("policy"), "policy"));
  if (r.has("policies")) {
    const auto& arr = r.at("policies");
    if (!arr.is_array()) throw ConfigError("policies", "expected an array");
    cfg.policies.clear();
    for (std::size_t i = 0; i < arr.size(); ++i)
      cfg.policies.push_back(parse_policy_spec(arr[i], fmt::format("policies[{}]", i)));
  }
  r.opt("baseline", cfg.baseline);

  const auto& city = r.at("city");
  if (!city.is_object()) throw ConfigError("city", "expected an object");
  if (!city.contains("preset")) throw ConfigError("city.preset", "missing required field");
  if (!city.at("preset").is_string()) throw ConfigError("city.preset", "expected a string");
  cfg.preset = city.at("preset").get<std::string>();
  if (city.contains("log")) {
    if (!city.at("log").is_string()) throw ConfigError("city.log", "expected a string");
    cfg.log_path = city.at("log").get<std::string>();
  }
  cfg.city_overrides = city;

  if (r.has("seed")) cfg.seeds = {r.req<std::uint64_t>("seed")};
  if (r.has("seeds")) {
    const auto& s = r.at("seeds");
    if (s.is_string()) {
      cfg.seeds = parse_seed_range(s.get<std::string>(), "seeds");
    } else if (s.is_array() && !s.empty()) {
      cfg.seeds.clear();
      for (const auto& x : s) {
        if (!x.is_number_unsigned()) throw ConfigError("seeds", "expected non-negative integers");
        cfg.seeds.push_back(x.get<std::uint64_t>());
      }
    } else {
      throw ConfigError("seeds", "expected \"N..M\" or a non-empty array");
    }
  }
  r.opt("horizon", cfg.sim.horizon);
  r.opt("out", cfg.out_dir);
  r.opt("price_scale", cfg.sim.price_scale);
  if (r.has("sim")) {
    ObjectReader s(r.at("sim"), "sim");
    s.opt("round_length", cfg.sim.round_length);
    s.opt("max_wait", cfg.sim.max_wait);
    s.opt("broadcast_radius", cfg.sim.broadcast_radius_m);
    s.opt("cancel_fraction", cfg.sim.cancel_fraction);
    s.opt("speed", cfg.sim.speed_mps);
    s.opt("report_window", cfg.sim.report_window);
    s.opt("snapshot_interval", cfg.sim.snapshot_interval);
    s.opt("match_log", cfg.sim.match_log);
    s.finish();
  }
  if (r.has("abtest")) {
    ObjectReader a(r.at("abtest"), "abtest");
    AbSpec ab{parse_policy_spec(a.at("policy_a"), "abtest.policy_a"),
              parse_policy_spec(a.at("policy_b"), "abtest.policy_b"), 3.0};
    a.opt("flip_hours", ab.flip_hours);
    a.finish();
    cfg.abtest = ab;
  }
  if (r.has("sweep")) {
    ObjectReader s(r.at("sweep"), "sweep");
    SweepSpec sw;
    s.opt("budget", sw.budget);
    s.opt("objective", sw.objective);
    s.opt("seed", sw.seed);
    const auto known = [&](const std::string& field, const std::string& k) {
      if (std::find(sweep_params().begin(), sweep_params().end(), k) == sweep_params().end())
        throw ConfigError(field + "." + k, "unknown sweep parameter");
    };
    if (s.has("grid")) {
      const auto& g = s.at("grid");
      if (!g.is_object()) throw ConfigError("sweep.grid", "expected an object");
      for (auto it = g.begin(); it != g.end(); ++it) {
        known("sweep.grid", it.key());
        if (!it->is_array() || it->empty()) throw ConfigError("sweep.grid." + it.key(), "expected a non-empty array");
        for (const auto& x : *it)
          if (!x.is_number()) throw ConfigError("sweep.grid." + it.key(), "expected numbers");
        sw.grid[it.key()] = it->get<std::vector<double>>();
      }
    }
    if (s.has("ranges")) {
      const auto& g = s.at("ranges");
      if (!g.is_object()) throw ConfigError("sweep.ranges", "expected an object");
      for (auto it = g.begin(); it != g.end(); ++it) {
        known("sweep.ranges", it.key());
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number() ||
            (*it)[0].get<double>() > (*it)[1].get<double>())
          throw ConfigError("sweep.ranges." + it.key(), "expected [lo, hi] with lo <= hi");
        sw.ranges[it.key()] = {(*it)[0].get<double>(), (*it)[1].get<double>()};
      }
    }
    s.finish();
    cfg.sweep = sw;
  }
  r.finish();
  return cfg;
}

/// Checks everything that can be checked before a run starts.
inline void validate_experiment(const ExperimentConfig& cfg) {
  const auto city = build_city(cfg);
  config_detail::rethrow_as_config("sim", [&] { cfg.sim.validate(); });
  if (cfg.seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  const auto check = [&](const PolicySpec& p) {
    if (p.name == "frozen" || p.name == "myopic" || p.name == "v1d3" || p.name == "rlw" || p.name == "rlw-reg") {
      (void)make_policy(p, city.grid, cfg.seeds.front(), cfg.sim.round_length);
      return;
    }
    throw ConfigError(p.field + ".name", fmt::format("unknown policy '{}'", p.name));
  };
  for (const auto& p : cfg.policies) check(p);
  if (cfg.abtest) {
    check(cfg.abtest->a);
    check(cfg.abtest->b);
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("--config", "cannot open " + path);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("--config", e.what());
  }
  return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Running

inline std::unique_ptr<DemandSource> make_source(const ExperimentConfig& cfg, const CityPreset& city,
                                                 std::uint64_t seed) {
  SimConfig sim = cfg.sim;
  sim.seed = seed;
  if (cfg.log_path) {
    auto log = load_event_log(*cfg.log_path, city.grid, seed);
    if (cfg.sim.price_scale != 1.0)
      for (auto& o : log.orders) o.price *= cfg.sim.price_scale;
    return std::make_unique<LogReplay>(city.grid, std::move(log));
  }
  return std::make_unique<DemandGenerator>(city, seed, sim);
}

inline RunReport run_policy(const ExperimentConfig& cfg, const CityPreset& city, const PolicySpec& spec,
                            std::uint64_t seed) {
  SimConfig sim = cfg.sim;
  sim.seed = seed;
  auto source = make_source(cfg, city, seed);
  auto policy = make_policy(spec, city.grid, seed, sim.round_length);
  Simulator s(sim, city.completion);
  auto report = s.run(*source, *policy);
  report.policy = spec.label;
  return report;
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
/// Results must be written by index, which keeps output order deterministic.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

/// Writes report.json, timeseries.csv, values.csv, value_table.csv,
/// thresholds.csv and (optionally) matches.jsonl into dir.
inline void write_run_outputs(const std::filesystem::path& dir, const RunReport& r) {
  write_file(dir / "report.json", totals_json(r).dump(2) + "\n");
  write_file(dir / "timeseries.csv", timeseries_csv(r));
  if (!r.snapshots.empty()) write_file(dir / "values.csv", snapshots_csv(r));
  if (r.final_values) write_file(dir / "value_table.csv", value_table_csv(*r.final_values, r.grid));
  if (!r.thresholds.empty()) write_file(dir / "thresholds.csv", threshold_trace_csv(r.thresholds));
  if (!r.match_log.empty()) {
    std::string s;
    for (const auto& l : r.match_log) s += l + "\n";
    write_file(dir / "matches.jsonl", s);
  }
}

inline RunReport cmd_run(const ExperimentConfig& cfg) {
  if (cfg.policies.empty()) throw ConfigError("policy", "missing required field");
  validate_experiment(cfg);
  const auto city = build_city(cfg);
  auto report = run_policy(cfg, city, cfg.policies.front(), cfg.seeds.front());
  write_run_outputs(cfg.out_dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// Comparison

struct Improvement {
  double mean = 0.0;
  double std = 0.0;
};

struct PolicyComparison {
  std::string label;
  std::vector<RunReport> runs;  // one per seed
  std::map<std::string, Improvement> improvement;  // metric -> % vs baseline
};

struct ComparisonReport {
  std::string baseline;
  std::vector<std::uint64_t> seeds;
  std::vector<PolicyComparison> policies;
};

inline double metric_value(const RunReport& r, const std::string& metric) {
  const auto m = r.metrics();
  if (metric == "cr") return m.cr;
  if (metric == "ar") return m.ar;
  if (metric == "sr") return m.sr;
  if (metric == "income") return m.income;
  throw std::invalid_argument("unknown metric " + metric);
}

inline const std::vector<std::string>& comparison_metrics() {
  static const std::vector<std::string> m = {"cr", "ar", "sr", "income"};
  return m;
}

/// Percent improvement of value over base; 0 when both are 0.
inline double percent_improvement(double value, double base) {
  if (base == 0.0) return value == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  return (value - base) / base * 100.0;
}

inline Improvement mean_std(const std::vector<double>& xs) {
  Improvement out;
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

inline ComparisonReport cmd_compare(const ExperimentConfig& cfg) {
  if (cfg.policies.size() < 2) throw ConfigError("policies", "compare needs at least two policies");
  for (const auto& p : cfg.policies)
    if (p.params.contains("preset") && p.params.at("preset") != cfg.preset)
      throw ConfigError(p.field + ".preset", "mismatched presets across policies");
  std::set<std::string> labels;
  for (const auto& p : cfg.policies)
    if (!labels.insert(p.label).second) throw ConfigError(p.field + ".label", "duplicate policy label " + p.label);
  const std::string baseline = cfg.baseline.empty() ? cfg.policies.front().label : cfg.baseline;
  if (!labels.count(baseline)) throw ConfigError("baseline", "no policy labelled '" + baseline + "'");
  validate_experiment(cfg);
  const auto city = build_city(cfg);

  ComparisonReport rep;
  rep.baseline = baseline;
  rep.seeds = cfg.seeds;
  const std::size_t np = cfg.policies.size(), ns = cfg.seeds.size();
  std::vector<RunReport> runs(np * ns);
  parallel_for(np * ns, [&](std::size_t k) {
    runs[k] = run_policy(cfg, city, cfg.policies[k / ns], cfg.seeds[k % ns]);
  });
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t p = 1; p < np; ++p)
      if (runs[p * ns + s].demand_hash != runs[s].demand_hash)
        throw std::logic_error(fmt::format("demand streams differ across policies for seed {}", cfg.seeds[s]));

  std::size_t base_idx = 0;
  for (std::size_t p = 0; p < np; ++p)
    if (cfg.policies[p].label == baseline) base_idx = p;
  for (std::size_t p = 0; p < np; ++p) {
    PolicyComparison pc;
    pc.label = cfg.policies[p].label;
    for (std::size_t s = 0; s < ns; ++s) pc.runs.push_back(runs[p * ns + s]);
    for (const auto& metric : comparison_metrics()) {
      std::vector<double> xs;
      for (std::size_t s = 0; s < ns; ++s)
        xs.push_back(percent_improvement(metric_value(runs[p * ns + s], metric),
                                         metric_value(runs[base_idx * ns + s], metric)));
      pc.improvement[metric] = mean_std(xs);
    }
    rep.policies.push_back(std::move(pc));
  }
  return rep;
}

inline OrderedJson comparison_json(const ComparisonReport& rep) {
  OrderedJson j;
  j["baseline"] = rep.baseline;
  j["seeds"] = rep.seeds;
  j["policies"] = OrderedJson::array();
  for (const auto& p : rep.policies) {
    OrderedJson pj;
    pj["label"] = p.label;
    for (const auto& metric : comparison_metrics()) {
      const auto& imp = p.improvement.at(metric);
      pj["improvement_pct"][metric] = {{"mean", imp.mean}, {"std", imp.std}};
    }
    pj["runs"] = OrderedJson::array();
    for (const auto& r : p.runs) pj["runs"].push_back(totals_json(r));
    j["policies"].push_back(pj);
  }
  return j;
}

/// Table-style summary: one row per policy, "mean±std" percent improvements.
inline std::string comparison_table_csv(const ComparisonReport& rep) {
  std::string out = "policy,cr_pct,ar_pct,sr_pct,income_pct\n";
  for (const auto& p : rep.policies) {
    out += p.label;
    for (const auto& metric : comparison_metrics()) {
      const auto& imp = p.improvement.at(metric);
      out += fmt::format(",{:.2f}±{:.2f}", imp.mean, imp.std);
    }
    out += "\n";
  }
  return out;
}

inline std::string comparison_runs_csv(const ComparisonReport& rep) {
  std::string out = "policy,seed,requests,dispatches,completed,cancelled,unanswered,income,cr,ar,sr,demand_hash\n";
  for (const auto& p : rep.policies)
    for (const auto& r : p.runs) {
      const auto m = r.metrics();
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", p.label, r.seed, r.totals.requests,
                         r.totals.dispatches, r.totals.completed, r.totals.cancelled, r.totals.unanswered,
                         r.totals.income, m.cr, m.ar, m.sr, r.demand_hash);
    }
  return out;
}

// ---------------------------------------------------------------------------
// A/B time flipping

struct AbWindow {
  std::size_t index = 0;
  Seconds start = 0.0;
  Seconds end = 0.0;
  std::size_t arm = 0;  // 0 = policy_a (treatment), 1 = policy_b (control)
  MetricCounts counts;
};

struct AbReport {
  std::string label_a;
  std::string label_b;
  double flip_hours = 3.0;
  std::vector<AbWindow> windows;
  MetricCounts treatment;
  MetricCounts control;
  MetricCounts run_totals;
  /// Treatment / control ratios within the flipping run.
  std::map<std::string, double> flip_ratio;
  /// Ratios from separate A-only and B-only runs on the shared stream,
  /// restricted to policy_a's windows.
  std::map<std::string, double> matched_ratio;
};

inline void add_counts(MetricCounts& into, const MetricCounts& c) {
  into.requests += c.requests;
  into.dispatches += c.dispatches;
  into.completed += c.completed;
  into.cancelled += c.cancelled;
  into.unanswered += c.unanswered;
  into.income += c.income;
}

inline std::map<std::string, double> metric_ratios(const MetricCounts& a, const MetricCounts& b) {
  const auto ma = compute_metrics(a), mb = compute_metrics(b);
  const auto ratio = [](double x, double y) { return y != 0.0 ? x / y : (x == 0.0 ? 1.0 : std::numeric_limits<double>::infinity()); };
  return {{"cr", ratio(ma.cr, mb.cr)}, {"ar", ratio(ma.ar, mb.ar)}, {"sr", ratio(ma.sr, mb.sr)},
          {"income", ratio(ma.income, mb.income)}};
}

inline AbReport cmd_abtest(const ExperimentConfig& cfg) {
  if (!cfg.abtest) throw ConfigError("abtest", "missing required field");
  const auto& ab = *cfg.abtest;
  if (!(ab.flip_hours > 0.0)) throw ConfigError("abtest.flip_hours", "must be > 0");
  validate_experiment(cfg);
  const auto city = build_city(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  SimConfig sim = cfg.sim;
  sim.seed = seed;
  const Seconds flip = ab.flip_hours * 3600.0;
  const auto window_of = [flip](Seconds t) { return static_cast<std::size_t>(std::floor(t / flip)); };

  AbReport rep;
  rep.label_a = ab.a.label;
  rep.label_b = ab.b.label;
  rep.flip_hours = ab.flip_hours;
  const std::size_t n_windows = static_cast<std::size_t>(std::ceil(sim.horizon / flip));
  for (std::size_t w = 0; w < n_windows; ++w)
    rep.windows.push_back({w, w * flip, std::min(sim.horizon, (w + 1) * flip), w % 2, {}});

  {
    auto source = make_source(cfg, city, seed);
    auto pa = make_policy(ab.a, city.grid, seed, sim.round_length);
    auto pb = make_policy(ab.b, city.grid, derive_seed(seed, 11), sim.round_length);
    std::vector<DispatchPolicy*> ps{pa.get(), pb.get()};
    Simulator s(sim, city.completion);
    std::vector<CompensatedSum> income(n_windows);
    auto report = s.run(*source, ps, [&](Seconds t) { return window_of(t) % 2; },
                        [&](const RoundCounts& rc) {
                          auto& w = rep.windows.at(window_of(rc.time));
                          add_counts(w.counts, rc.counts);
                          income[w.index].add(rc.counts.income);
                        });
    for (std::size_t w = 0; w < n_windows; ++w) {
      rep.windows[w].counts.income = income[w].value();
      add_counts(rep.windows[w].arm == 0 ? rep.treatment : rep.control, rep.windows[w].counts);
    }
    rep.run_totals = report.totals;
  }
  rep.flip_ratio = metric_ratios(rep.treatment, rep.control);

  // Counterfactual pair on the shared stream, compared over A's windows.
  const auto restricted = [&](const PolicySpec& spec) {
    auto source = make_source(cfg, city, seed);
    auto p = make_policy(spec, city.grid, seed, sim.round_length);
    Simulator s(sim, city.completion);
    MetricCounts c;
    std::vector<DispatchPolicy*> ps{p.get()};
    s.run(*source, ps, [](Seconds) { return std::size_t{0}; }, [&](const RoundCounts& rc) {
      if (window_of(rc.time) % 2 == 0) add_counts(c, rc.counts);
    });
    return c;
  };
  rep.matched_ratio = metric_ratios(restricted(ab.a), restricted(ab.b));
  return rep;
}

inline OrderedJson abtest_json(const AbReport& rep) {
  OrderedJson j;
  j["policy_a"] = rep.label_a;
  j["policy_b"] = rep.label_b;
  j["flip_hours"] = rep.flip_hours;
  const auto counts_json = [](const MetricCounts& c) {
    const auto m = compute_metrics(c);
    OrderedJson o;
    o["requests"] = c.requests;
    o["dispatches"] = c.dispatches;
    o["completed"] = c.completed;
    o["cancelled"] = c.cancelled;
    o["unanswered"] = c.unanswered;
    o["income"] = c.income;
    o["cr"] = m.cr;
    o["ar"] = m.ar;
    o["sr"] = m.sr;
    return o;
  };
  j["treatment"] = counts_json(rep.treatment);
  j["control"] = counts_json(rep.control);
  j["flip_ratio"] = rep.flip_ratio;
  j["matched_ratio"] = rep.matched_ratio;
  j["windows"] = OrderedJson::array();
  for (const auto& w : rep.windows) {
    auto o = counts_json(w.counts);
    o["index"] = w.index;
    o["start"] = w.start;
    o["end"] = w.end;
    o["policy"] = w.arm == 0 ? rep.label_a : rep.label_b;
    j["windows"].push_back(o);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep

struct SweepPoint {
  std::map<std::string, double> params;
  double objective = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> trace;
  std::size_t best = 0;
};

/// Grid points first (cartesian product in parameter order), then seeded
/// uniform samples from the ranges until the budget is reached.
inline std::vector<std::map<std::string, double>> sweep_points(const SweepSpec& sw, const PolicySpec& base) {
  if (sw.budget < 1) throw ConfigError("sweep.budget", "must be >= 1");
  if (sw.grid.empty() && sw.ranges.empty()) throw ConfigError("sweep", "empty parameter space");
  const auto rl = base.params.value("w_rew", Json::array({0.430, 0.008}));
  const auto pl = base.params.value("w_p", Json::array({0.002, 0.004}));
  const std::map<std::string, double> defaults = {{"w_rew_start", rl[0].get<double>()},
                                                  {"w_rew_finish", rl[1].get<double>()},
                                                  {"w_p_start", pl[0].get<double>()},
                                                  {"w_p_finish", pl[1].get<double>()}};
  std::vector<std::map<std::string, double>> pts;
  const auto budget = static_cast<std::size_t>(sw.budget);
  if (!sw.grid.empty()) {
    std::vector<std::map<std::string, double>> acc{defaults};
    for (const auto& name : sweep_params()) {
      auto it = sw.grid.find(name);
      if (it == sw.grid.end()) continue;
      std::vector<std::map<std::string, double>> next;
      for (const auto& p : acc)
        for (double v : it->second) {
          auto q = p;
          q[name] = v;
          next.push_back(q);
        }
      acc = std::move(next);
    }
    for (auto& p : acc) {
      if (pts.size() >= budget) break;
      pts.push_back(p);
    }
  }
  if (!sw.ranges.empty()) {
    std::mt19937_64 rng(derive_seed(sw.seed, 5));
    while (pts.size() < budget) {
      auto p = defaults;
      for (const auto& name : sweep_params()) {
        auto it = sw.ranges.find(name);
        if (it == sw.ranges.end()) continue;
        std::uniform_real_distribution<double> u(it->second.first, it->second.second);
        p[name] = u(rng);
      }
      pts.push_back(p);
    }
  }
  return pts;
}

inline SweepResult cmd_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep", "missing required field");
  if (cfg.policies.empty()) throw ConfigError("policy", "missing required field");
  const auto& sw = *cfg.sweep;
  const auto& base = cfg.policies.front();
  if (base.name != "rlw" && base.name != "rlw-reg") throw ConfigError("policy.name", "sweep tunes rlw weight factors");
  const auto& metrics = comparison_metrics();
  if (std::find(metrics.begin(), metrics.end(), sw.objective) == metrics.end())
    throw ConfigError("sweep.objective", "expected one of cr, ar, sr, income");
  validate_experiment(cfg);
  const auto city = build_city(cfg);
  const auto pts = sweep_points(sw, base);

  SweepResult res;
  res.trace.resize(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    PolicySpec spec = base;
    spec.params["w_rew"] = {pts[i].at("w_rew_start"), pts[i].at("w_rew_finish")};
    spec.params["w_p"] = {pts[i].at("w_p_start"), pts[i].at("w_p_finish")};
    double total = 0.0;
    for (auto seed : cfg.seeds) total += metric_value(run_policy(cfg, city, spec, seed), sw.objective);
    res.trace[i] = SweepPoint{pts[i], total / static_cast<double>(cfg.seeds.size())};
  });
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    if (res.trace[i].objective > res.trace[res.best].objective) res.best = i;
  return res;
}

inline std::string sweep_trace_csv(const SweepResult& r) {
  std::string out = "index,w_rew_start,w_rew_finish,w_p_start,w_p_finish,objective\n";
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& p = r.trace[i].params;
    out += fmt::format("{},{},{},{},{},{}\n", i, p.at("w_rew_start"), p.at("w_rew_finish"), p.at("w_p_start"),
                       p.at("w_p_finish"), r.trace[i].objective);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmap

/// Parses values.csv (time,cell_id,row,col,value) into snapshots keyed by time.
inline std::map<double, std::vector<std::tuple<int, int, double>>> read_snapshots(std::istream& in) {
  std::map<double, std::vector<std::tuple<int, int, double>>> out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("time,", 0) != 0) throw std::runtime_error("values.csv: missing header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f[5];
    for (auto& x : f)
      if (!std::getline(ss, x, ',')) throw std::runtime_error(fmt::format("values.csv line {}: expected 5 fields", lineno));
    try {
      out[parse_double(f[0])].emplace_back(std::stoi(f[2]), std::stoi(f[3]), parse_double(f[4]));
    } catch (const std::logic_error&) {
      throw std::runtime_error(fmt::format("values.csv line {}: malformed number", lineno));
    }
  }
  return out;
}

/// Grid CSV (row,col,value) for the archived snapshot nearest t; ties pick
/// the earlier snapshot.
inline std::string cmd_heatmap(const std::filesystem::path& run_dir, double t) {
  const auto path = run_dir / "values.csv";
  std::ifstream f(path);
  if (!f) throw std::runtime_error("no value snapshots in " + run_dir.string());
  const auto snaps = read_snapshots(f);
  if (snaps.empty()) throw std::runtime_error("no value snapshots in " + run_dir.string());
  if (t < snaps.begin()->first || t > snaps.rbegin()->first)
    throw std::runtime_error(fmt::format("no snapshot in range: t={} outside [{}, {}]", t, snaps.begin()->first,
                                         snaps.rbegin()->first));
  auto best = snaps.begin();
  for (auto it = snaps.begin(); it != snaps.end(); ++it)
    if (std::abs(it->first - t) < std::abs(best->first - t)) best = it;
  std::string out = "row,col,value\n";
  for (const auto& [row, col, v] : best->second) out += fmt::format("{},{},{}\n", row, col, v);
  return out;
}

}  // namespace rlw
