#pragma once

// Discrete-time marketplace: 2-second dispatch rounds, synthetic demand or
// event-log replay, Bernoulli trip outcomes and metric accounting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rlw/bandit.hpp"
#include "rlw/domain.hpp"
#include "rlw/matching.hpp"
#include "rlw/policy.hpp"
#include "rlw/preset.hpp"
#include "rlw/value_store.hpp"

namespace rlw {

// ---------------------------------------------------------------------------
// Small utilities

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent seed for a named sub-stream of a run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull));
}

/// Uniform in [0,1) tied to (seed, order id), identical for generated and
/// replayed streams.
inline double order_uniform(std::uint64_t seed, OrderId id) {
  const auto h = splitmix64(derive_seed(seed, 7) ^ static_cast<std::uint64_t>(id));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

class Fnv1a {
 public:
  void add(std::string_view s) {
    for (unsigned char ch : s) {
      h_ ^= ch;
      h_ *= 0x100000001B3ull;
    }
  }
  std::uint64_t value() const { return h_; }
  std::string hex() const { return fmt::format("{:016x}", h_); }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ull;
};

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// ---------------------------------------------------------------------------
// Configuration

struct SimConfig {
  Seconds round_length = 2.0;
  Seconds horizon = 86400.0;
  Seconds max_wait = 300.0;
  double broadcast_radius_m = 3000.0;
  double cancel_fraction = 0.5;
  double speed_mps = 8.0;
  Seconds report_window = 300.0;
  Seconds snapshot_interval = 3600.0;
  double price_scale = 1.0;
  std::uint64_t seed = 1;
  bool match_log = false;

  void validate() const {
    if (!(round_length > 0.0)) throw std::invalid_argument("sim.round_length must be > 0");
    if (!(horizon >= 0.0)) throw std::invalid_argument("sim.horizon must be >= 0");
    if (!(max_wait > 0.0)) throw std::invalid_argument("sim.max_wait must be > 0");
    if (!(broadcast_radius_m >= 0.0)) throw std::invalid_argument("sim.broadcast_radius must be >= 0");
    if (!(cancel_fraction >= 0.0 && cancel_fraction <= 1.0))
      throw std::invalid_argument("sim.cancel_fraction must be in [0,1]");
    if (!(speed_mps > 0.0)) throw std::invalid_argument("sim.speed must be > 0");
    if (!(report_window > 0.0)) throw std::invalid_argument("sim.report_window must be > 0");
    if (!(snapshot_interval > 0.0)) throw std::invalid_argument("sim.snapshot_interval must be > 0");
    if (!(price_scale > 0.0)) throw std::invalid_argument("price_scale must be > 0");
  }
};

struct SimClock {
  Seconds t = 0.0;
  Seconds round_length = 2.0;
  Seconds t_up = 10.0;
  Seconds horizon = 0.0;

  SimClock(Seconds round, Seconds update, Seconds h) : round_length(round), t_up(update), horizon(h) {
    const double k = t_up / round_length;
    if (std::abs(k - std::round(k)) > 1e-9) throw std::invalid_argument("T_up must be a multiple of the round length");
  }
  bool running() const { return t < horizon; }
  bool update_tick() const { return on_tick(t, t_up); }
  void advance() { t += round_length; }
};

// ---------------------------------------------------------------------------
// Demand sources

struct DriverEvent {
  Seconds t = 0.0;
  DriverId id = 0;
  GridCell cell;
  bool online = true;
};

class DemandSource {
 public:
  virtual ~DemandSource() = default;
  virtual const Grid& grid() const = 0;
  /// Orders requested in [t, t + round_length).
  virtual std::vector<Order> orders(Seconds t, Seconds round_length) = 0;
  /// Driver online/offline events in [t, t + round_length).
  virtual std::vector<DriverEvent> driver_events(Seconds t, Seconds round_length) = 0;
};

/// Per-round Poisson demand from a preset. The count per round is drawn as a
/// single Poisson over the whole city and split across cells categorically,
/// which is equal in distribution to independent per-cell draws.
class DemandGenerator final : public DemandSource {
 public:
  DemandGenerator(const CityPreset& preset, std::uint64_t seed, const SimConfig& sim)
      : preset_(preset), seed_(seed), sim_(sim), rng_(derive_seed(seed, 1)) {
    preset_.validate();
    for (int h = 0; h < 24; ++h) {
      const auto& surf = preset_.intensity[static_cast<std::size_t>(h)];
      double total = 0.0;
      for (double x : surf) total += x;
      hourly_rate_[static_cast<std::size_t>(h)] = total;
      if (total > 0.0) origin_[static_cast<std::size_t>(h)] = std::discrete_distribution<int>(surf.begin(), surf.end());
    }
    for (const auto& row : preset_.destination) dest_.emplace_back(row.begin(), row.end());
  }

  const Grid& grid() const override { return preset_.grid; }
  const CityPreset& preset() const { return preset_; }

  std::vector<Order> orders(Seconds t, Seconds round_length) override {
    std::vector<Order> out;
    const auto hour = static_cast<std::size_t>(static_cast<long long>(std::floor(t / 3600.0)) % 24);
    const double lambda = hourly_rate_[hour] * round_length / 3600.0;
    if (lambda <= 0.0) return out;
    std::poisson_distribution<int> count(lambda);
    const int n = count(rng_);
    for (int k = 0; k < n; ++k) {
      Order o;
      o.id = next_id_++;
      o.origin = preset_.grid.cell(origin_[hour](rng_));
      o.destination = preset_.grid.cell(dest_[static_cast<std::size_t>(o.origin.id)](rng_));
      const double trip_m = preset_.trip_length_m(o.origin, o.destination);
      o.trip_duration = std::max(1.0, std::round(trip_m / sim_.speed_mps));
      o.price = (preset_.base_price + preset_.price_per_km * trip_m / 1000.0) * sim_.price_scale;
      o.request_time = t;
      o.completion_draw = order_uniform(seed_, o.id);
      out.push_back(o);
    }
    return out;
  }

  std::vector<DriverEvent> driver_events(Seconds t, Seconds round_length) override {
    std::vector<DriverEvent> out;
    if (t != 0.0 || round_length <= 0.0) return out;
    std::mt19937_64 rng(derive_seed(seed_, 2));
    std::discrete_distribution<int> place(preset_.driver_weights.begin(), preset_.driver_weights.end());
    for (int i = 0; i < preset_.driver_count; ++i) out.push_back({0.0, i, preset_.grid.cell(place(rng)), true});
    return out;
  }

 private:
  CityPreset preset_;
  std::uint64_t seed_;
  SimConfig sim_;
  std::mt19937_64 rng_;
  std::array<double, 24> hourly_rate_{};
  std::array<std::discrete_distribution<int>, 24> origin_{};
  std::vector<std::discrete_distribution<int>> dest_;
  OrderId next_id_ = 0;
};

// TripEventLog (JSONL):
//   {"type":"order","t":int,"id":int,"o_row":int,"o_col":int,"d_row":int,"d_col":int,"price":float,"dur_s":int}
//   {"type":"driver","t":int,"id":int,"row":int,"col":int,"event":"online"|"offline"}

struct TripEventLog {
  std::vector<Order> orders;
  std::vector<DriverEvent> drivers;
};

inline std::string order_event_json(const Order& o) {
  nlohmann::ordered_json j;
  j["type"] = "order";
  j["t"] = static_cast<long long>(std::llround(o.request_time));
  j["id"] = o.id;
  j["o_row"] = o.origin.row;
  j["o_col"] = o.origin.col;
  j["d_row"] = o.destination.row;
  j["d_col"] = o.destination.col;
  j["price"] = o.price;
  j["dur_s"] = static_cast<long long>(std::llround(o.trip_duration));
  return j.dump();
}

inline std::string driver_event_json(const DriverEvent& e) {
  nlohmann::ordered_json j;
  j["type"] = "driver";
  j["t"] = static_cast<long long>(std::llround(e.t));
  j["id"] = e.id;
  j["row"] = e.cell.row;
  j["col"] = e.cell.col;
  j["event"] = e.online ? "online" : "offline";
  return j.dump();
}

/// Records the generator's stream into a TripEventLog.
inline std::string generate_log(const CityPreset& preset, const SimConfig& sim) {
  DemandGenerator gen(preset, sim.seed, sim);
  std::string out;
  for (Seconds t = 0.0; t < sim.horizon; t += sim.round_length) {
    for (const auto& e : gen.driver_events(t, sim.round_length)) out += driver_event_json(e) + "\n";
    for (const auto& o : gen.orders(t, sim.round_length)) out += order_event_json(o) + "\n";
  }
  return out;
}

inline TripEventLog parse_event_log(std::istream& in, const Grid& grid, std::uint64_t seed) {
  TripEventLog log;
  std::string line;
  int lineno = 0;
  double last_t = -1.0;
  std::vector<OrderId> order_ids;
  const auto fail = [&](const std::string& msg) {
    throw std::runtime_error(fmt::format("event log line {}: {}", lineno, msg));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    try {
      const auto type = j.at("type").get<std::string>();
      const double t = static_cast<double>(j.at("t").get<long long>());
      if (t < last_t) fail("timestamps must be non-decreasing");
      last_t = t;
      if (type == "order") {
        Order o;
        o.id = j.at("id").get<OrderId>();
        o.origin = grid.cell(j.at("o_row").get<int>(), j.at("o_col").get<int>());
        o.destination = grid.cell(j.at("d_row").get<int>(), j.at("d_col").get<int>());
        o.price = j.at("price").get<double>();
        o.trip_duration = static_cast<double>(j.at("dur_s").get<long long>());
        o.request_time = t;
        o.completion_draw = order_uniform(seed, o.id);
        validate(o);
        order_ids.push_back(o.id);
        log.orders.push_back(o);
      } else if (type == "driver") {
        DriverEvent e;
        e.t = t;
        e.id = j.at("id").get<DriverId>();
        e.cell = grid.cell(j.at("row").get<int>(), j.at("col").get<int>());
        const auto ev = j.at("event").get<std::string>();
        if (ev != "online" && ev != "offline") fail("driver event must be online|offline");
        e.online = ev == "online";
        log.drivers.push_back(e);
      } else {
        fail("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    } catch (const std::out_of_range& e) {
      fail(e.what());
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  std::sort(order_ids.begin(), order_ids.end());
  if (std::adjacent_find(order_ids.begin(), order_ids.end()) != order_ids.end())
    throw std::runtime_error("event log: duplicate order ids");
  return log;
}

inline TripEventLog load_event_log(const std::string& path, const Grid& grid, std::uint64_t seed) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("event log not found: " + path);
  return parse_event_log(f, grid, seed);
}

class LogReplay final : public DemandSource {
 public:
  LogReplay(Grid grid, TripEventLog log) : grid_(grid), log_(std::move(log)) {}

  const Grid& grid() const override { return grid_; }

  std::vector<Order> orders(Seconds t, Seconds round_length) override {
    std::vector<Order> out;
    while (next_order_ < log_.orders.size() && log_.orders[next_order_].request_time < t + round_length)
      out.push_back(log_.orders[next_order_++]);
    return out;
  }

  std::vector<DriverEvent> driver_events(Seconds t, Seconds round_length) override {
    std::vector<DriverEvent> out;
    while (next_driver_ < log_.drivers.size() && log_.drivers[next_driver_].t < t + round_length)
      out.push_back(log_.drivers[next_driver_++]);
    return out;
  }

 private:
  Grid grid_;
  TripEventLog log_;
  std::size_t next_order_ = 0;
  std::size_t next_driver_ = 0;
};

// ---------------------------------------------------------------------------
// Outcomes and metrics

/// Resolves a pending assignment given a uniform draw: completed iff u < p_c.
inline Outcome resolve_assignment(Assignment& a, double u) {
  if (a.outcome != Outcome::Pending) throw std::logic_error("assignment already resolved");
  if (a.kind != AssignmentKind::Dispatch) throw std::logic_error("only dispatch assignments resolve");
  a.outcome = u < a.pair.completion_prob ? Outcome::Completed : Outcome::Cancelled;
  return a.outcome;
}

template <typename Rng>
Outcome resolve_assignment(Assignment& a, const CompletionModel& model, Rng& rng) {
  a.pair.completion_prob = model(a.pair.pickup_distance);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return resolve_assignment(a, u(rng));
}

/// Seconds a driver stays busy after dispatch: pickup plus trip when
/// completed, a fraction of the pickup leg when cancelled.
inline Seconds busy_duration(Outcome outcome, Seconds pickup_s, Seconds trip_s, double cancel_fraction) {
  if (outcome == Outcome::Completed) return pickup_s + trip_s;
  if (outcome == Outcome::Cancelled) return pickup_s * cancel_fraction;
  throw std::logic_error("busy_duration: unresolved assignment");
}

struct MetricCounts {
  std::int64_t requests = 0;
  std::int64_t dispatches = 0;
  std::int64_t completed = 0;
  std::int64_t cancelled = 0;
  std::int64_t unanswered = 0;
  double income = 0.0;
};

struct Metrics {
  double cr = 0.0;
  double ar = 0.0;
  double sr = 0.0;
  double income = 0.0;
};

/// CR = completed/requests, AR = accepted/requests (accepted = dispatched),
/// SR = completed/dispatches. Zero denominators give 0.
inline Metrics compute_metrics(const MetricCounts& c) {
  const auto ratio = [](std::int64_t a, std::int64_t b) {
    return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  return Metrics{ratio(c.completed, c.requests), ratio(c.dispatches, c.requests), ratio(c.completed, c.dispatches),
                 c.income};
}

struct WindowRow {
  Seconds t_start = 0.0;
  Seconds t_end = 0.0;
  MetricCounts counts;
  std::int64_t open_at_end = 0;
  MetricCounts cumulative;
};

struct ValueSnapshot {
  Seconds time = 0.0;
  ValueTable values;
};

struct RunReport {
  std::string policy;
  std::uint64_t seed = 0;
  Seconds horizon = 0.0;
  Grid grid;
  MetricCounts totals;
  std::int64_t open_at_horizon = 0;
  std::vector<WindowRow> series;
  std::vector<ValueSnapshot> snapshots;
  std::vector<ThresholdTrace> thresholds;
  std::vector<std::string> match_log;
  std::optional<ValueTable> final_values;
  std::string demand_hash;
  std::string match_hash;

  Metrics metrics() const { return compute_metrics(totals); }
};

/// Per-round counts, handed to run observers (A/B attribution).
struct RoundCounts {
  Seconds time = 0.0;
  std::size_t active_policy = 0;
  MetricCounts counts;
};

// ---------------------------------------------------------------------------
// Simulator

class Simulator {
 public:
  using ScheduleFn = std::function<std::size_t(Seconds)>;
  using ObserverFn = std::function<void(const RoundCounts&)>;

  Simulator(SimConfig sim, CompletionModel completion) : sim_(sim), completion_(completion) {
    sim_.validate();
    completion_.validate();
  }

  const SimConfig& config() const { return sim_; }

  RunReport run(DemandSource& source, DispatchPolicy& policy) {
    std::vector<DispatchPolicy*> ps{&policy};
    return run(source, ps, [](Seconds) { return std::size_t{0}; });
  }

  /// Runs with several policies; schedule(t) picks the active one per round.
  /// Inactive policies receive no rounds and are suspended on switch-out.
  RunReport run(DemandSource& source, const std::vector<DispatchPolicy*>& policies, const ScheduleFn& schedule,
                const ObserverFn& observer = {}) {
    if (policies.empty()) throw std::invalid_argument("simulator needs at least one policy");
    const Grid& grid = source.grid();
    RunReport report;
    report.policy = policies.front()->name();
    for (std::size_t i = 1; i < policies.size(); ++i) report.policy += "+" + policies[i]->name();
    report.seed = sim_.seed;
    report.horizon = sim_.horizon;
    report.grid = grid;

    std::map<DriverId, Driver> drivers;
    std::map<DriverId, bool> pending_offline;
    std::deque<Order> open;  // ascending id
    Fnv1a demand_hash, match_hash;
    CompensatedSum income_total, income_window;
    MetricCounts cum, window;
    Seconds window_start = 0.0;
    std::size_t last_active = schedule(0.0);
    Seconds next_snapshot = 0.0;

    const auto take_snapshot = [&](Seconds t) {
      if (const auto* v = policies[schedule(std::min(t, std::max(0.0, sim_.horizon - sim_.round_length)))]->values())
        report.snapshots.push_back({t, *v});
    };

    const auto close_window = [&](Seconds t_end) {
      WindowRow row;
      row.t_start = window_start;
      row.t_end = t_end;
      window.income = income_window.value();
      row.counts = window;
      row.open_at_end = static_cast<std::int64_t>(open.size());
      cum.income = income_total.value();
      row.cumulative = cum;
      if (cum.requests != cum.completed + cum.cancelled + cum.unanswered + row.open_at_end)
        throw std::logic_error(fmt::format("conservation violated in window ending {}", t_end));
      report.series.push_back(row);
      window = MetricCounts{};
      income_window = CompensatedSum{};
      window_start = t_end;
    };

    SimClock clock(sim_.round_length, sim_.round_length, sim_.horizon);
    for (; clock.running(); clock.advance()) {
      const Seconds t = clock.t;
      const std::size_t active = schedule(t);
      if (active >= policies.size()) throw std::out_of_range("schedule returned an invalid policy index");
      if (active != last_active) {
        policies[last_active]->suspend();
        last_active = active;
      }
      DispatchPolicy& policy = *policies[active];

      if (t >= next_snapshot) {
        take_snapshot(t);
        next_snapshot += sim_.snapshot_interval;
      }

      // Trips and cancellations finishing by now free their drivers.
      for (auto it = drivers.begin(); it != drivers.end();) {
        auto& d = it->second;
        if (d.status != DriverStatus::Idle && d.busy_until <= t) {
          d.status = DriverStatus::Idle;
          if (pending_offline[d.id]) {
            pending_offline.erase(d.id);
            it = drivers.erase(it);
            continue;
          }
        }
        ++it;
      }

      for (const auto& e : source.driver_events(t, sim_.round_length)) {
        if (e.online) {
          if (drivers.count(e.id)) continue;
          drivers[e.id] = Driver{e.id, e.cell, DriverStatus::Idle, t};
          pending_offline.erase(e.id);
        } else {
          auto it = drivers.find(e.id);
          if (it == drivers.end()) continue;
          if (it->second.status == DriverStatus::Idle)
            drivers.erase(it);
          else
            pending_offline[e.id] = true;
        }
      }

      MetricCounts round;
      for (auto& o : source.orders(t, sim_.round_length)) {
        validate(o);
        demand_hash.add(order_event_json(o));
        demand_hash.add("\n");
        open.push_back(o);
        ++round.requests;
      }
      std::sort(open.begin(), open.end(), [](const Order& a, const Order& b) { return a.id < b.id; });

      SettledCounts settled;
      for (auto it = open.begin(); it != open.end();) {
        if (t - it->request_time >= sim_.max_wait) {
          ++round.unanswered;
          ++settled.requests;
          it = open.erase(it);
        } else {
          ++it;
        }
      }

      MarketSnapshot snap;
      snap.time = t;
      snap.open_orders.assign(open.begin(), open.end());
      for (const auto& [id, d] : drivers)
        if (d.status == DriverStatus::Idle) snap.idle_drivers.push_back(d);
      snap.candidate_pairs =
          build_candidate_pairs(snap.open_orders, snap.idle_drivers, grid, sim_.broadcast_radius_m, completion_);

      RoundMatch m = policy.assign(snap);
      check_matching(m.result, snap);

      for (std::size_t k = 0; k < m.result.matched.size(); ++k) {
        const auto& mp = m.result.matched[k];
        Assignment a{mp.pair, t, Outcome::Pending, AssignmentKind::Dispatch};
        const Outcome outcome = resolve_assignment(a, mp.pair.order.completion_draw);
        auto& d = drivers.at(mp.pair.driver.id);
        const double pickup_s = mp.pair.pickup_distance / sim_.speed_mps;
        ++round.dispatches;
        ++settled.requests;
        ++settled.accepted;
        ++settled.dispatches;
        if (outcome == Outcome::Completed) {
          ++round.completed;
          ++settled.completed;
          round.income += mp.pair.order.price;
          income_total.add(mp.pair.order.price);
          income_window.add(mp.pair.order.price);
          d.status = DriverStatus::OnTrip;
          d.busy_until = t + busy_duration(outcome, pickup_s, mp.pair.order.trip_duration, sim_.cancel_fraction);
          d.location = mp.pair.order.destination;
        } else {
          ++round.cancelled;
          d.status = DriverStatus::EnRoutePickup;
          d.busy_until = t + busy_duration(outcome, pickup_s, 0.0, sim_.cancel_fraction);
        }
        const std::string rec = match_record_json(k < m.records.size() ? &m.records[k] : nullptr, mp, outcome, t);
        match_hash.add(rec);
        match_hash.add("\n");
        if (sim_.match_log) report.match_log.push_back(rec);
      }
      {
        std::vector<OrderId> done;
        for (const auto& mp : m.result.matched) done.push_back(mp.pair.order.id);
        std::sort(done.begin(), done.end());
        open.erase(std::remove_if(open.begin(), open.end(),
                                  [&](const Order& o) { return std::binary_search(done.begin(), done.end(), o.id); }),
                   open.end());
      }

      policy.end_round(snap, m, RoundFeedback{t, settled});

      window.requests += round.requests;
      window.dispatches += round.dispatches;
      window.completed += round.completed;
      window.cancelled += round.cancelled;
      window.unanswered += round.unanswered;
      cum.requests += round.requests;
      cum.dispatches += round.dispatches;
      cum.completed += round.completed;
      cum.cancelled += round.cancelled;
      cum.unanswered += round.unanswered;
      if (observer) observer(RoundCounts{t, active, round});

      const Seconds t_next = t + sim_.round_length;
      if (t_next - window_start >= sim_.report_window - 1e-9 || t_next >= sim_.horizon) close_window(t_next);
    }

    if (sim_.horizon > 0.0) take_snapshot(sim_.horizon);
    cum.income = income_total.value();
    report.totals = cum;
    report.open_at_horizon = static_cast<std::int64_t>(open.size());
    for (auto* p : policies)
      if (const auto* tr = p->threshold_trace()) report.thresholds.insert(report.thresholds.end(), tr->begin(), tr->end());
    if (const auto* v = policies[last_active]->values()) report.final_values = *v;
    report.demand_hash = demand_hash.hex();
    report.match_hash = match_hash.hex();
    return report;
  }

 private:
  static void check_matching(const MatchResult& r, const MarketSnapshot& snap) {
    std::vector<OrderId> os;
    std::vector<DriverId> ds;
    for (const auto& m : r.matched) {
      os.push_back(m.pair.order.id);
      ds.push_back(m.pair.driver.id);
    }
    std::sort(os.begin(), os.end());
    std::sort(ds.begin(), ds.end());
    if (std::adjacent_find(os.begin(), os.end()) != os.end() || std::adjacent_find(ds.begin(), ds.end()) != ds.end())
      throw std::logic_error("policy matched an order or driver twice");
    for (const auto& m : r.matched) {
      const bool order_open = std::any_of(snap.open_orders.begin(), snap.open_orders.end(),
                                          [&](const Order& o) { return o.id == m.pair.order.id; });
      const bool driver_idle = std::any_of(snap.idle_drivers.begin(), snap.idle_drivers.end(),
                                           [&](const Driver& d) { return d.id == m.pair.driver.id; });
      if (!order_open || !driver_idle) throw std::logic_error("policy matched a pair outside the snapshot");
    }
  }

  static std::string match_record_json(const PairRecord* rec, const MatchedPair& mp, Outcome outcome, Seconds t) {
    nlohmann::ordered_json j;
    j["time"] = t;
    j["order_id"] = mp.pair.order.id;
    j["driver_id"] = mp.pair.driver.id;
    j["p_c"] = mp.pair.completion_prob;
    j["r_star"] = rec ? rec->r_star : 0.0;
    j["dv_star"] = rec ? rec->dv_star : 0.0;
    j["p_star"] = rec ? rec->p_star : 0.0;
    j["edge_weight"] = mp.weight;
    j["outcome"] = outcome == Outcome::Completed ? "completed" : "cancelled";
    return j.dump();
  }

  SimConfig sim_;
  CompletionModel completion_;
};

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::ordered_json totals_json(const RunReport& r) {
  const auto m = r.metrics();
  nlohmann::ordered_json j;
  j["policy"] = r.policy;
  j["seed"] = r.seed;
  j["horizon_s"] = r.horizon;
  j["requests"] = r.totals.requests;
  j["dispatches"] = r.totals.dispatches;
  j["completed"] = r.totals.completed;
  j["cancelled"] = r.totals.cancelled;
  j["unanswered"] = r.totals.unanswered;
  j["open_at_horizon"] = r.open_at_horizon;
  j["income"] = r.totals.income;
  j["cr"] = m.cr;
  j["ar"] = m.ar;
  j["sr"] = m.sr;
  j["demand_hash"] = r.demand_hash;
  j["match_hash"] = r.match_hash;
  return j;
}

inline std::string timeseries_csv(const RunReport& r) {
  std::string out =
      "t_start,t_end,requests,dispatches,completed,cancelled,unanswered,open,income,cr,ar,sr,"
      "cum_requests,cum_completed,cum_cancelled,cum_unanswered\n";
  for (const auto& w : r.series) {
    const auto m = compute_metrics(w.counts);
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", w.t_start, w.t_end, w.counts.requests,
                       w.counts.dispatches, w.counts.completed, w.counts.cancelled, w.counts.unanswered, w.open_at_end,
                       w.counts.income, m.cr, m.ar, m.sr, w.cumulative.requests, w.cumulative.completed,
                       w.cumulative.cancelled, w.cumulative.unanswered);
  }
  return out;
}

inline std::string snapshots_csv(const RunReport& r) {
  std::string out = "time,cell_id,row,col,value\n";
  for (const auto& s : r.snapshots)
    for (CellId id = 0; id < s.values.size(); ++id) {
      const auto c = r.grid.cell(id);
      out += fmt::format("{},{},{},{},{}\n", s.time, id, c.row, c.col, s.values[id]);
    }
  return out;
}

}  // namespace rlw
