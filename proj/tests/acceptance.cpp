// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runtime budgets are part of each criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "support.hpp"

using namespace rlw;
using namespace rlw::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

bool report(int id, double budget_s, const std::function<Verdict()>& fn) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool ok = v.pass && in_time;
  fmt::print("C{} {} {} ({:.2f}s of {:.0f}s budget{})\n", id, ok ? "PASS" : "FAIL", v.detail, secs, budget_s,
             in_time ? "" : ", over budget");
  std::fflush(stdout);
  return ok;
}

// C1 ----------------------------------------------------------------------

Verdict td_fixed_point() {
  const Grid g(1, 2, 500.0);
  ValueLearner learner(2, 0.9, ValueOptimizer::Sgd, AdamParams{}, 0.5);
  const DispatchSample a_to_b{g.cell(0), g.cell(1), 1.0, 1.0, AssignmentKind::Dispatch};
  const auto b_idle = DispatchSample::idle(g.cell(1));
  for (int tick = 0; tick < 500; ++tick) learner.batch_update({a_to_b, b_idle});
  const double va = learner.values()[0], vb = learner.values()[1];
  return {std::abs(va - 1.0) < 1e-3 && std::abs(vb) < 1e-3, fmt::format("V_A={:.9f} V_B={:.3g}", va, vb)};
}

// C2 ----------------------------------------------------------------------

Verdict expected_update_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> val(-20.0, 20.0), pc(0.0, 1.0), gm(0.0, 0.999), rew(0.0, 30.0);
  const Grid g(1, 2, 500.0);
  int within = 0;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    ValueTable v(2);
    v[0] = val(rng);
    v[1] = val(rng);
    const DispatchSample s{g.cell(0), g.cell(1), rew(rng), pc(rng), AssignmentKind::Dispatch};
    const double gamma = gm(rng);
    const double done = s.reward + gamma * v[1], stay = gamma * v[0];
    std::bernoulli_distribution completes(s.p_c);
    constexpr int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = completes(rng) ? done : stay;
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n;
    const double se = std::sqrt(std::max(0.0, (sq / n - mean * mean) / (n - 1)));
    const double z = se > 0.0 ? std::abs(mean - expected_td_target(s, v, gamma)) / se : 0.0;
    worst = std::max(worst, z);
    if (z <= 3.0) ++within;
  }
  return {within == 50, fmt::format("{}/50 tuples within 3 SE, worst |z|={:.2f}", within, worst)};
}

// C3 ----------------------------------------------------------------------

Verdict hungarian_oracle() {
  std::mt19937_64 rng(33);
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    const double density = i % 2 == 0 ? 1.0 : 0.5;
    const auto edges = random_graph(rng, 6, density, i % 4 >= 2);
    const auto r = solve_assignment(edges);
    if (valid_matching(r) && r.total_weight == brute_force_best(edges)) ++equal;
  }
  return {equal == 100, fmt::format("{}/100 graphs match brute force exactly", equal)};
}

// C4 ----------------------------------------------------------------------

std::vector<std::string> decisions(const RunReport& r) {
  std::vector<std::string> out;
  for (const auto& line : r.match_log) {
    const auto j = Json::parse(line);
    out.push_back(fmt::format("{}:{}:{}", j.at("time").get<double>(), j.at("order_id").get<std::int64_t>(),
                              j.at("driver_id").get<std::int64_t>()));
  }
  return out;
}

RunReport scaled_run(const CityPreset& city, const RlwConfig& cfg, double scale) {
  SimConfig sim;
  sim.seed = 11;
  sim.horizon = 6 * 3600.0;
  sim.price_scale = scale;
  sim.match_log = true;
  Simulator s(sim, city.completion);
  DemandGenerator src(city, sim.seed, sim);
  RlwPolicy p(city.grid.cell_count(), cfg, sim.round_length);
  return s.run(src, p);
}

Verdict price_scale_invariance() {
  const auto city = make_preset("imbalanced");
  RlwConfig std_cfg;
  std_cfg.optimizer = ValueOptimizer::Sgd;
  std_cfg.seed = 5;
  RlwConfig reg_cfg = std_cfg;
  reg_cfg.edge_mode = EdgeMode::Raw;

  const double scales[] = {0.5, 1.0, 2.0};
  std::vector<RunReport> std_runs, reg_runs;
  for (double sc : scales) {
    std_runs.push_back(scaled_run(city, std_cfg, sc));
    reg_runs.push_back(scaled_run(city, reg_cfg, sc));
  }
  bool std_same = true, reg_differs = false;
  const auto base_std = decisions(std_runs[1]), base_reg = decisions(reg_runs[1]);
  for (std::size_t i = 0; i < 3; ++i) {
    std_same = std_same && std_runs[i].match_hash == std_runs[1].match_hash && decisions(std_runs[i]) == base_std;
    if (i != 1 && decisions(reg_runs[i]) != base_reg) reg_differs = true;
  }
  return {std_same && reg_differs && !base_std.empty(),
          fmt::format("std decisions identical across x0.5/x1/x2: {} ({} matches); reg decisions differ: {}",
                      std_same ? "yes" : "no", base_std.size(), reg_differs ? "yes" : "no")};
}

// C5 ----------------------------------------------------------------------

Verdict lm_ucb() {
  constexpr int seeds = 20;
  double stationary = 0.0, after_flip = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> noise(0.0, 0.02);

    std::vector<double> mean = {0.5, 0.5, 0.5, 0.6, 0.5};
    LmUcb b(LmUcbParams{}, {0, 1, 2, 3, 4}, static_cast<std::uint64_t>(seed));
    int best = 0;
    for (int pull = 1; pull <= 1000; ++pull) {
      const auto arm = b.current_arm();
      if (pull >= 200 && arm == 3) ++best;
      b.update_reward(mean[arm] + noise(rng));
    }
    stationary += best / 801.0;

    mean = {0.5, 0.5, 0.5, 0.6, 0.5};
    LmUcb f(LmUcbParams{}, {0, 1, 2, 3, 4}, static_cast<std::uint64_t>(seed));
    int new_best = 0;
    for (int pull = 1; pull <= 700; ++pull) {
      if (pull == 500) mean = {0.6, 0.5, 0.5, 0.5, 0.5};
      const auto arm = f.current_arm();
      if (pull >= 500 && arm == 0) ++new_best;
      f.update_reward(mean[arm] + noise(rng));
    }
    after_flip += new_best / 201.0;
  }
  stationary /= seeds;
  after_flip /= seeds;
  return {stationary >= 0.8 && after_flip > 0.5,
          fmt::format("optimal share pulls 200-1000 = {:.3f}; new optimum share pulls 500-700 after flip = {:.3f}",
                      stationary, after_flip)};
}

// C6 ----------------------------------------------------------------------

Verdict pruning_monotonicity() {
  const double ths[] = {0.0, 0.1, 0.2, 0.3};
  const auto w = EdgeWeights::make(0.430, 0.002);
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> side(1, 6);
  int monotone_graphs = 0;
  for (int i = 0; i < 100; ++i) {
    const double density = i % 2 == 0 ? 1.0 : 0.5;
    const int no = side(rng), nd = side(rng);
    std::vector<WeightedEdge> edges;
    for (int o = 0; o < no; ++o)
      for (int d = 0; d < nd; ++d) {
        if (u(rng) >= density) continue;
        const auto pair = make_pair(o, 100 + d, u(rng));
        const double r_star = u(rng), dv_star = u(rng), p_star = u(rng);
        edges.push_back({pair, edge_weight(pair, r_star, dv_star, p_star, w)});
      }
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    bool mono = true;
    for (double th : ths) {
      const auto n = solve_assignment(prune(edges, th)).matched.size();
      mono = mono && n <= prev;
      prev = n;
    }
    if (mono) ++monotone_graphs;
  }

  const auto city = make_preset("imbalanced");
  std::vector<double> sr(4, 0.0);
  for (int k = 0; k < 4; ++k)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      SimConfig sim;
      sim.seed = seed;
      sim.horizon = 6 * 3600.0;
      Simulator s(sim, city.completion);
      DemandGenerator src(city, seed, sim);
      RlwConfig cfg;
      cfg.pruning = PruningMode::Fixed;
      cfg.fixed_threshold = ths[k];
      cfg.seed = seed;
      RlwPolicy p(city.grid.cell_count(), cfg, sim.round_length);
      sr[k] += s.run(src, p).metrics().sr / 20.0;
    }
  const bool sr_mono = sr[0] <= sr[1] && sr[1] <= sr[2] && sr[2] <= sr[3];
  return {monotone_graphs == 100 && sr_mono,
          fmt::format("matched count non-increasing on {}/100 graphs; mean SR by th = {:.4f} {:.4f} {:.4f} {:.4f}",
                      monotone_graphs, sr[0], sr[1], sr[2], sr[3])};
}

// C7 ----------------------------------------------------------------------

double one_sided_paired_p(const std::vector<double>& diff) {
  const auto ms = mean_std(diff);
  if (ms.std == 0.0) return ms.mean > 0.0 ? 0.0 : 1.0;
  const double t = ms.mean / (ms.std / std::sqrt(static_cast<double>(diff.size())));
  boost::math::students_t dist(static_cast<double>(diff.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, t));
}

Verdict directional_end_to_end() {
  auto cfg = parse_experiment_config(Json{
      {"policies", Json::array({{{"name", "myopic"}}, {{"name", "v1d3"}}, {{"name", "rlw"}}})},
      {"baseline", "myopic"},
      {"city", {{"preset", "imbalanced"}}},
      {"seeds", "1..20"},
      {"horizon", 86400}});
  const auto rep = cmd_compare(cfg);
  const auto& my = rep.policies[0].runs;
  const auto& v1 = rep.policies[1].runs;
  const auto& rl = rep.policies[2].runs;
  std::vector<double> d_income, d_cr;
  int beats_v1d3 = 0;
  for (std::size_t i = 0; i < rl.size(); ++i) {
    d_income.push_back(rl[i].totals.income - my[i].totals.income);
    d_cr.push_back(rl[i].metrics().cr - my[i].metrics().cr);
    if (rl[i].totals.income >= v1[i].totals.income) ++beats_v1d3;
  }
  const double p_income = one_sided_paired_p(d_income), p_cr = one_sided_paired_p(d_cr);
  const bool ok = mean_std(d_income).mean > 0.0 && mean_std(d_cr).mean > 0.0 && p_income < 0.05 && p_cr < 0.05 &&
                  beats_v1d3 >= 12;
  return {ok, fmt::format("income vs myopic {:+.2f}% (p={:.2g}); CR vs myopic {:+.2f}% (p={:.2g}); "
                          "RLW >= V1D3 income in {}/20 seeds",
                          rep.policies[2].improvement.at("income").mean, p_income,
                          rep.policies[2].improvement.at("cr").mean, p_cr, beats_v1d3)};
}

// C8 ----------------------------------------------------------------------

Verdict subsumption() {
  const auto city = make_preset("imbalanced");
  SimConfig sim;
  sim.seed = 8;
  sim.horizon = 3600.0;
  Simulator s(sim, city.completion);
  DemandGenerator a(city, sim.seed, sim), b(city, sim.seed, sim);
  V1d3Policy v1d3(city.grid.cell_count(), V1d3Config{});
  RlwPolicy rlw(city.grid.cell_count(), RlwConfig::v1d3_degenerate(V1d3Config{}), sim.round_length);
  const auto ra = s.run(a, v1d3), rb = s.run(b, rlw);
  const bool ok = ra.totals.dispatches > 0 && ra.match_hash == rb.match_hash;
  return {ok, fmt::format("match hash v1d3={} rlw-degenerate={} over {} dispatches", ra.match_hash, rb.match_hash,
                          ra.totals.dispatches)};
}

// C9 ----------------------------------------------------------------------

Verdict determinism_and_conservation() {
  const auto root = scratch_dir("acceptance_c9");
  int identical = 0, runs = 0;
  std::int64_t windows = 0, violations = 0;
  for (const char* name : {"myopic", "v1d3", "rlw", "rlw-reg"}) {
    for (std::uint64_t seed : {1u, 2u}) {
      Json j{{"policy", {{"name", name}}},
             {"city", {{"preset", "imbalanced"}}},
             {"seed", seed},
             {"horizon", 86400},
             {"sim", {{"match_log", true}}}};
      std::vector<std::string> files[2];
      for (int rep = 0; rep < 2; ++rep) {
        const auto dir = root / fmt::format("{}_{}_{}", name, seed, rep);
        j["out"] = dir.string();
        const auto r = cmd_run(parse_experiment_config(j));
        for (const auto& w : r.series) {
          ++windows;
          const auto& c = w.cumulative;
          if (c.requests != c.completed + c.cancelled + c.unanswered + w.open_at_end) ++violations;
        }
        for (const char* f : {"report.json", "timeseries.csv", "values.csv", "value_table.csv", "thresholds.csv",
                              "matches.jsonl"})
          files[rep].push_back(std::filesystem::exists(dir / f) ? slurp(dir / f) : std::string("<absent>"));
      }
      ++runs;
      if (files[0] == files[1]) ++identical;
    }
  }
  std::filesystem::remove_all(root);
  return {identical == runs && violations == 0,
          fmt::format("{}/{} reruns byte-identical; conservation violated in {}/{} windows", identical, runs,
                      violations, windows)};
}

}  // namespace

int main() {
  bool all = true;
  all &= report(1, 1.0, td_fixed_point);
  all &= report(2, 10.0, expected_update_oracle);
  all &= report(3, 5.0, hungarian_oracle);
  all &= report(4, 60.0, price_scale_invariance);
  all &= report(5, 10.0, lm_ucb);
  all &= report(6, 600.0, pruning_monotonicity);
  all &= report(7, 600.0, directional_end_to_end);
  all &= report(8, 60.0, subsumption);
  all &= report(9, 600.0, determinism_and_conservation);
  fmt::print("{}\n", all ? "ALL PASS" : "SOME CRITERIA FAILED");
  return all ? 0 : 1;
}
