// rlw: command-line front end for the dispatch simulator.
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rlw/rlw.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::optional<double> price_scale;
  std::string policy;
  std::string preset;
  std::optional<double> horizon;
  std::string baseline;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "Single seed");
  cmd->add_option("--seeds", o.seeds, "Seed range N..M");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--price-scale", o.price_scale, "Multiply every order price");
  cmd->add_option("--policy", o.policy, "Policy name (overrides the config's first policy)");
  cmd->add_option("--preset", o.preset, "City preset (overrides city.preset)");
  cmd->add_option("--horizon", o.horizon, "Simulated seconds");
}

rlw::ExperimentConfig resolve(const Overrides& o) {
  rlw::Json j = rlw::Json::object();
  if (!o.config.empty()) {
    std::ifstream f(o.config);
    if (!f) throw rlw::ConfigError("--config", "cannot open " + o.config);
    try {
      j = rlw::Json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw rlw::ConfigError("--config", e.what());
    }
    if (!j.is_object()) throw rlw::ConfigError("<root>", "expected an object");
  }
  if (!o.preset.empty()) j["city"]["preset"] = o.preset;
  if (!o.policy.empty()) {
    if (j.contains("policies") && j["policies"].is_array() && !j["policies"].empty())
      j["policies"][0] = rlw::Json{{"name", o.policy}};
    else
      j["policy"] = rlw::Json{{"name", o.policy}};
  }
  if (o.seed) {
    j.erase("seeds");
    j["seed"] = *o.seed;
  }
  if (!o.seeds.empty()) {
    j.erase("seed");
    j["seeds"] = o.seeds;
  }
  if (!o.out.empty()) j["out"] = o.out;
  if (o.price_scale) j["price_scale"] = *o.price_scale;
  if (o.horizon) j["horizon"] = *o.horizon;
  if (!o.baseline.empty()) j["baseline"] = o.baseline;
  return rlw::parse_experiment_config(j);
}

void print_totals(const rlw::RunReport& r) {
  const auto m = r.metrics();
  fmt::print("{} seed={} requests={} completed={} cancelled={} unanswered={} income={:.2f} cr={:.4f} ar={:.4f} sr={:.4f}\n",
             r.policy, r.seed, r.totals.requests, r.totals.completed, r.totals.cancelled, r.totals.unanswered,
             r.totals.income, m.cr, m.ar, m.sr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ride-hailing dispatch simulator and experiment harness"};
  app.require_subcommand(1);

  Overrides run_o, cmp_o, ab_o, sw_o, gl_o;
  auto* run = app.add_subcommand("run", "Run one policy on one seed");
  add_common(run, run_o);

  auto* cmp = app.add_subcommand("compare", "Matched-seed comparison against a baseline");
  add_common(cmp, cmp_o);
  cmp->add_option("--baseline", cmp_o.baseline, "Baseline policy label");

  auto* ab = app.add_subcommand("abtest", "Time-flipping A/B test");
  add_common(ab, ab_o);
  std::optional<double> flip_hours;
  ab->add_option("--flip-hours", flip_hours, "Hours per flip window");

  auto* sw = app.add_subcommand("sweep", "Weight-factor search");
  add_common(sw, sw_o);
  std::optional<int> budget;
  sw->add_option("--budget", budget, "Number of evaluations");

  auto* hm = app.add_subcommand("heatmap", "Export the value snapshot nearest t");
  std::string run_dir, hm_out;
  double hm_t = 0.0;
  hm->add_option("--run", run_dir, "Run output directory")->required();
  hm->add_option("-t,--time", hm_t, "Simulation time in seconds")->required();
  hm->add_option("--out", hm_out, "Output CSV (stdout when omitted)");

  auto* gl = app.add_subcommand("gen-log", "Emit a trip event log from a preset");
  add_common(gl, gl_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const auto cfg = resolve(run_o);
      const auto report = rlw::cmd_run(cfg);
      print_totals(report);
      fmt::print("wrote {}\n", cfg.out_dir);
    } else if (*cmp) {
      const auto cfg = resolve(cmp_o);
      const auto rep = rlw::cmd_compare(cfg);
      const std::filesystem::path dir = cfg.out_dir;
      rlw::write_file(dir / "comparison.json", rlw::comparison_json(rep).dump(2) + "\n");
      rlw::write_file(dir / "comparison.csv", rlw::comparison_table_csv(rep));
      rlw::write_file(dir / "runs.csv", rlw::comparison_runs_csv(rep));
      std::cout << rlw::comparison_table_csv(rep);
    } else if (*ab) {
      auto cfg = resolve(ab_o);
      if (flip_hours) {
        if (!cfg.abtest) throw rlw::ConfigError("abtest", "missing required field");
        cfg.abtest->flip_hours = *flip_hours;
      }
      const auto rep = rlw::cmd_abtest(cfg);
      const auto j = rlw::abtest_json(rep);
      rlw::write_file(std::filesystem::path(cfg.out_dir) / "abtest.json", j.dump(2) + "\n");
      fmt::print("flip_ratio income={:.4f} cr={:.4f}  matched_ratio income={:.4f} cr={:.4f}\n",
                 rep.flip_ratio.at("income"), rep.flip_ratio.at("cr"), rep.matched_ratio.at("income"),
                 rep.matched_ratio.at("cr"));
    } else if (*sw) {
      auto cfg = resolve(sw_o);
      if (budget) {
        if (!cfg.sweep) throw rlw::ConfigError("sweep", "missing required field");
        cfg.sweep->budget = *budget;
      }
      const auto res = rlw::cmd_sweep(cfg);
      rlw::write_file(std::filesystem::path(cfg.out_dir) / "sweep_trace.csv", rlw::sweep_trace_csv(res));
      const auto& best = res.trace[res.best];
      fmt::print("best index={} w_rew=[{}, {}] w_p=[{}, {}] objective={}\n", res.best, best.params.at("w_rew_start"),
                 best.params.at("w_rew_finish"), best.params.at("w_p_start"), best.params.at("w_p_finish"),
                 best.objective);
    } else if (*hm) {
      const auto csv = rlw::cmd_heatmap(run_dir, hm_t);
      if (hm_out.empty())
        std::cout << csv;
      else
        rlw::write_file(hm_out, csv);
    } else if (*gl) {
      const auto cfg = resolve(gl_o);
      const auto city = rlw::build_city(cfg);
      rlw::SimConfig sim = cfg.sim;
      sim.seed = cfg.seeds.front();
      try {
        sim.validate();
      } catch (const std::invalid_argument& e) {
        throw rlw::ConfigError("sim", e.what());
      }
      const auto log = rlw::generate_log(city, sim);
      if (gl_o.out.empty())
        std::cout << log;
      else
        rlw::write_file(std::filesystem::path(gl_o.out) / "events.jsonl", log);
    }
  } catch (const rlw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
