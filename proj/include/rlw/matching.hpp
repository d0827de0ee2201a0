#pragma once

// Weighted bipartite order/driver graphs and maximum-weight assignment.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rlw/conditioning.hpp"
#include "rlw/domain.hpp"
#include "rlw/value_store.hpp"

namespace rlw {

struct EdgeWeights {
  double w_rew = 1.0;
  double w_res = 0.0;
  double w_p = 0.0;

  static EdgeWeights make(double w_rew, double w_p) {
    if (!(w_rew >= 0.0 && w_rew <= 1.0)) throw std::invalid_argument("w_rew must be in [0,1]");
    if (!(w_p >= 0.0)) throw std::invalid_argument("w_p must be >= 0");
    return EdgeWeights{w_rew, 1.0 - w_rew, w_p};
  }
};

struct WeightedEdge {
  OrderDriverPair pair;
  double weight = 0.0;
};

struct MatchedPair {
  OrderDriverPair pair;
  double weight = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> matched;
  std::vector<OrderId> unmatched_orders;
  std::vector<DriverId> unmatched_drivers;
  double total_weight = 0.0;
};

/// p_c * (w_rew r* + w_res dv* - w_p p*)
inline double edge_weight(const OrderDriverPair& pair, double r_star, double dv_star, double p_star,
                          const EdgeWeights& w) {
  return pair.completion_prob * (w.w_rew * r_star + w.w_res * dv_star - w.w_p * p_star);
}

/// Keeps edges whose completion probability strictly exceeds th.
inline std::vector<WeightedEdge> prune(const std::vector<WeightedEdge>& edges, double th) {
  if (!(th >= 0.0 && th <= 1.0)) throw std::invalid_argument("prune threshold must be in [0,1]");
  std::vector<WeightedEdge> out;
  out.reserve(edges.size());
  for (const auto& e : edges)
    if (e.pair.completion_prob > th) out.push_back(e);
  return out;
}

namespace detail {

// Kuhn-Munkres with potentials, O(n^2 m), rows <= cols. Returns for each
// row the assigned column. cost is row-major n x m.
inline std::vector<int> hungarian_min_cost(const std::vector<double>& cost, int n, int m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
  std::vector<double> minv(static_cast<std::size_t>(m) + 1);
  std::vector<char> used(static_cast<std::size_t>(m) + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * static_cast<std::size_t>(m) +
                                static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0)
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Maximum-total-weight matching over a sparse edge list. Edges with
/// weight <= 0 never raise the total and are left unmatched. Orders and
/// drivers are indexed in ascending id order so results are deterministic.
inline MatchResult solve_assignment(const std::vector<WeightedEdge>& edges) {
  MatchResult result;
  if (edges.empty()) return result;

  std::vector<OrderId> order_ids;
  std::vector<DriverId> driver_ids;
  for (const auto& e : edges) {
    if (!std::isfinite(e.weight)) throw std::invalid_argument("solve_assignment: non-finite edge weight");
    order_ids.push_back(e.pair.order.id);
    driver_ids.push_back(e.pair.driver.id);
  }
  std::sort(order_ids.begin(), order_ids.end());
  order_ids.erase(std::unique(order_ids.begin(), order_ids.end()), order_ids.end());
  std::sort(driver_ids.begin(), driver_ids.end());
  driver_ids.erase(std::unique(driver_ids.begin(), driver_ids.end()), driver_ids.end());

  const auto index_of = [](const auto& ids, auto id) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  const int n_orders = static_cast<int>(order_ids.size());
  const int n_drivers = static_cast<int>(driver_ids.size());
  const bool orders_are_rows = n_orders <= n_drivers;
  const int n = orders_are_rows ? n_orders : n_drivers;
  const int m = orders_are_rows ? n_drivers : n_orders;

  std::vector<double> cost(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), 0.0);
  std::vector<int> edge_at(cost.size(), -1);
  for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
    const auto& e = edges[static_cast<std::size_t>(k)];
    const int oi = index_of(order_ids, e.pair.order.id);
    const int di = index_of(driver_ids, e.pair.driver.id);
    const int r = orders_are_rows ? oi : di;
    const int c = orders_are_rows ? di : oi;
    const auto idx = static_cast<std::size_t>(r) * static_cast<std::size_t>(m) + static_cast<std::size_t>(c);
    if (edge_at[idx] >= 0)
      throw std::invalid_argument(fmt::format("solve_assignment: duplicate edge order {} driver {}",
                                              e.pair.order.id, e.pair.driver.id));
    edge_at[idx] = k;
    cost[idx] = -std::max(e.weight, 0.0);
  }

  const auto row_to_col = detail::hungarian_min_cost(cost, n, m);

  std::vector<char> order_matched(static_cast<std::size_t>(n_orders), 0);
  std::vector<char> driver_matched(static_cast<std::size_t>(n_drivers), 0);
  for (int r = 0; r < n; ++r) {
    const int c = row_to_col[static_cast<std::size_t>(r)];
    if (c < 0) continue;
    const int k = edge_at[static_cast<std::size_t>(r) * static_cast<std::size_t>(m) + static_cast<std::size_t>(c)];
    if (k < 0) continue;
    const auto& e = edges[static_cast<std::size_t>(k)];
    if (!(e.weight > 0.0)) continue;
    result.matched.push_back(MatchedPair{e.pair, e.weight});
    order_matched[static_cast<std::size_t>(orders_are_rows ? r : c)] = 1;
    driver_matched[static_cast<std::size_t>(orders_are_rows ? c : r)] = 1;
  }
  std::sort(result.matched.begin(), result.matched.end(), [](const MatchedPair& a, const MatchedPair& b) {
    return a.pair.order.id < b.pair.order.id;
  });
  for (const auto& mp : result.matched) result.total_weight += mp.weight;
  for (int i = 0; i < n_orders; ++i)
    if (!order_matched[static_cast<std::size_t>(i)]) result.unmatched_orders.push_back(order_ids[static_cast<std::size_t>(i)]);
  for (int i = 0; i < n_drivers; ++i)
    if (!driver_matched[static_cast<std::size_t>(i)])
      result.unmatched_drivers.push_back(driver_ids[static_cast<std::size_t>(i)]);
  return result;
}

/// Rebuilds unmatched lists against the full snapshot (orders/drivers with
/// no edges at all are unmatched too).
inline void fill_unmatched(MatchResult& r, const MarketSnapshot& snap) {
  r.unmatched_orders.clear();
  r.unmatched_drivers.clear();
  std::vector<OrderId> mo;
  std::vector<DriverId> md;
  for (const auto& m : r.matched) {
    mo.push_back(m.pair.order.id);
    md.push_back(m.pair.driver.id);
  }
  std::sort(mo.begin(), mo.end());
  std::sort(md.begin(), md.end());
  for (const auto& o : snap.open_orders)
    if (!std::binary_search(mo.begin(), mo.end(), o.id)) r.unmatched_orders.push_back(o.id);
  for (const auto& d : snap.idle_drivers)
    if (!std::binary_search(md.begin(), md.end(), d.id)) r.unmatched_drivers.push_back(d.id);
}

enum class EdgeMode {
  Standardized,  // p_c (w_rew r* + w_res dv* - w_p p*)
  Raw            // p_c (r + dv - w_p p), unstandardized
};

/// Per-pair raw and standardized components, kept for the update phase and
/// the match log.
struct PairRecord {
  Seconds time = 0.0;
  OrderId order_id = 0;
  DriverId driver_id = 0;
  GridCell driver_cell;
  GridCell origin;
  GridCell destination;
  double price = 0.0;
  double p_c = 0.0;
  double reward = 0.0;
  double residual = 0.0;
  double penalty = 0.0;
  double r_star = 0.0;
  double dv_star = 0.0;
  double p_star = 0.0;
  double edge_weight = 0.0;
};

struct EdgeConditioning {
  const ValueTable* values = nullptr;
  const RewardSmoother* smoother = nullptr;  // null: reward is the order's own price
  const Standardizer* reward_std = nullptr;
  const Standardizer* residual_std = nullptr;
  const Standardizer* penalty_std = nullptr;
  double gamma = 0.9;
  EdgeMode mode = EdgeMode::Standardized;
};

/// Reward signal for a pair: the origin cell's smoothed price, or the
/// order price when smoothing is off or the cell has not been observed.
inline double pair_reward(const OrderDriverPair& pair, const RewardSmoother* smoother) {
  if (smoother != nullptr && smoother->initialized(pair.order.origin.id)) return (*smoother)[pair.order.origin.id];
  return pair.order.price;
}

inline PairRecord score_pair(const OrderDriverPair& pair, const EdgeConditioning& ec, const EdgeWeights& w,
                             Seconds t) {
  PairRecord rec;
  rec.time = t;
  rec.order_id = pair.order.id;
  rec.driver_id = pair.driver.id;
  rec.driver_cell = pair.driver.location;
  rec.origin = pair.order.origin;
  rec.destination = pair.order.destination;
  rec.price = pair.order.price;
  rec.p_c = pair.completion_prob;
  rec.reward = pair_reward(pair, ec.smoother);
  const double v_dest = ec.values ? (*ec.values)[pair.order.destination.id] : 0.0;
  const double v_drv = ec.values ? (*ec.values)[pair.driver.location.id] : 0.0;
  rec.residual = ec.gamma * v_dest - v_drv;
  rec.penalty = pair.penalty_raw;
  if (ec.mode == EdgeMode::Standardized) {
    rec.r_star = ec.reward_std->standardize(rec.reward);
    rec.dv_star = ec.residual_std->standardize(rec.residual);
    rec.p_star = ec.penalty_std->standardize(rec.penalty);
    rec.edge_weight = edge_weight(pair, rec.r_star, rec.dv_star, rec.p_star, w);
  } else {
    rec.r_star = rec.reward;
    rec.dv_star = rec.residual;
    rec.p_star = rec.penalty;
    rec.edge_weight = pair.completion_prob * (rec.reward + rec.residual - w.w_p * rec.penalty);
  }
  return rec;
}

struct RoundMatch {
  MatchResult result;
  std::vector<PairRecord> records;  // one per matched pair, in result order
};

/// Score every candidate pair, prune by completion probability, solve.
inline RoundMatch match_round(const MarketSnapshot& snap, const EdgeConditioning& ec, const EdgeWeights& w,
                              double th) {
  std::vector<WeightedEdge> edges;
  std::map<std::pair<OrderId, DriverId>, PairRecord> recs;
  edges.reserve(snap.candidate_pairs.size());
  for (const auto& pair : snap.candidate_pairs) {
    if (!(pair.completion_prob > th)) continue;
    auto rec = score_pair(pair, ec, w, snap.time);
    edges.push_back(WeightedEdge{pair, rec.edge_weight});
    recs.emplace(std::make_pair(pair.order.id, pair.driver.id), rec);
  }
  RoundMatch out;
  out.result = solve_assignment(edges);
  fill_unmatched(out.result, snap);
  for (const auto& m : out.result.matched)
    out.records.push_back(recs.at({m.pair.order.id, m.pair.driver.id}));
  return out;
}

}  // namespace rlw
