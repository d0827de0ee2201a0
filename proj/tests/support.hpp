#pragma once

// Independent oracles and fixtures shared by unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rlw/rlw.hpp"

namespace rlw::testing {

inline Order make_order(OrderId id, const Grid& g, int r, int c, int dr, int dc, double price = 10.0) {
  Order o;
  o.id = id;
  o.origin = g.cell(r, c);
  o.destination = g.cell(dr, dc);
  o.price = price;
  o.trip_duration = 600.0;
  return o;
}

inline Driver make_driver(DriverId id, const Grid& g, int r, int c) {
  Driver d;
  d.id = id;
  d.location = g.cell(r, c);
  return d;
}

inline OrderDriverPair make_pair(OrderId o, DriverId d, double pc = 1.0, double dist = 0.0) {
  OrderDriverPair p;
  p.order.id = o;
  p.order.price = 1.0;
  p.order.trip_duration = 1.0;
  p.driver.id = d;
  p.completion_prob = pc;
  p.pickup_distance = dist;
  p.penalty_raw = dist;
  return p;
}

/// Best total weight over all matchings (including the empty one) by
/// exhaustive enumeration; orders are assigned in turn to a free driver or
/// to nobody.
inline double brute_force_best(const std::vector<WeightedEdge>& edges) {
  std::vector<OrderId> orders;
  std::vector<DriverId> drivers;
  for (const auto& e : edges) {
    orders.push_back(e.pair.order.id);
    drivers.push_back(e.pair.driver.id);
  }
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  std::sort(drivers.begin(), drivers.end());
  drivers.erase(std::unique(drivers.begin(), drivers.end()), drivers.end());
  const auto idx = [](const auto& v, auto x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  const double none = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> w(orders.size(), std::vector<double>(drivers.size(), none));
  for (const auto& e : edges) w[idx(orders, e.pair.order.id)][idx(drivers, e.pair.driver.id)] = e.weight;

  std::vector<bool> used(drivers.size(), false);
  double best = 0.0;
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double acc) {
    if (i == orders.size()) {
      best = std::max(best, acc);
      return;
    }
    rec(i + 1, acc);
    for (std::size_t j = 0; j < drivers.size(); ++j) {
      if (used[j] || w[i][j] == none) continue;
      used[j] = true;
      rec(i + 1, acc + w[i][j]);
      used[j] = false;
    }
  };
  rec(0, 0.0);
  return best;
}

/// Random bipartite graph with up to max_side orders and drivers. Weights
/// are dyadic rationals (k / 64) so every partial sum is exact.
inline std::vector<WeightedEdge> random_graph(std::mt19937_64& rng, int max_side, double density,
                                              bool allow_negative) {
  std::uniform_int_distribution<int> side(1, max_side);
  std::uniform_int_distribution<int> k(allow_negative ? -64 : 1, 640);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int no = side(rng), nd = side(rng);
  std::vector<WeightedEdge> edges;
  for (int o = 0; o < no; ++o)
    for (int d = 0; d < nd; ++d) {
      if (u(rng) >= density) continue;
      edges.push_back({make_pair(100 + o, 200 + d, u(rng)), k(rng) / 64.0});
    }
  return edges;
}

inline bool valid_matching(const MatchResult& r) {
  std::vector<OrderId> os;
  std::vector<DriverId> ds;
  for (const auto& m : r.matched) {
    os.push_back(m.pair.order.id);
    ds.push_back(m.pair.driver.id);
  }
  std::sort(os.begin(), os.end());
  std::sort(ds.begin(), ds.end());
  return std::adjacent_find(os.begin(), os.end()) == os.end() && std::adjacent_find(ds.begin(), ds.end()) == ds.end();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rlw_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Demand source with a fixed driver fleet and a caller-supplied order
/// stream, for scenario tests.
class ScriptedSource final : public DemandSource {
 public:
  using OrderFn = std::function<std::vector<Order>(Seconds)>;
  ScriptedSource(Grid g, std::vector<Driver> fleet, OrderFn fn)
      : grid_(g), fleet_(std::move(fleet)), fn_(std::move(fn)) {}
  const Grid& grid() const override { return grid_; }
  std::vector<Order> orders(Seconds t, Seconds) override { return fn_(t); }
  std::vector<DriverEvent> driver_events(Seconds t, Seconds) override {
    std::vector<DriverEvent> out;
    if (t != 0.0) return out;
    for (const auto& d : fleet_) out.push_back({0.0, d.id, d.location, true});
    return out;
  }

 private:
  Grid grid_;
  std::vector<Driver> fleet_;
  OrderFn fn_;
};

}  // namespace rlw::testing
