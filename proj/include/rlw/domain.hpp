#pragma once

// Core data model: lattice cells, orders, drivers, candidate pairs and
// market snapshots shared by every other module.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlw {

using CellId = std::int32_t;
using OrderId = std::int64_t;
using DriverId = std::int64_t;
using Seconds = double;

struct GridCell {
  CellId id = 0;
  int row = 0;
  int col = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Rectangular lattice of square cells. Cell ids are row-major.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double cell_size_m)
      : rows_(rows), cols_(cols), cell_size_(cell_size_m) {
    if (rows <= 0 || cols <= 0)
      throw std::invalid_argument("grid dimensions must be positive");
    if (!(cell_size_m > 0.0))
      throw std::invalid_argument("cell_size must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int cell_count() const { return rows_ * cols_; }
  double cell_size() const { return cell_size_; }

  bool contains(int row, int col) const {
    return row >= 0 && row < rows_ && col >= 0 && col < cols_;
  }

  GridCell cell(int row, int col) const {
    if (!contains(row, col))
      throw std::out_of_range("cell (" + std::to_string(row) + "," +
                              std::to_string(col) + ") outside grid");
    return GridCell{static_cast<CellId>(row * cols_ + col), row, col};
  }

  GridCell cell(CellId id) const {
    if (id < 0 || id >= cell_count())
      throw std::out_of_range("cell id " + std::to_string(id) + " outside grid");
    return GridCell{id, id / cols_, id % cols_};
  }

  /// Straight-line distance between cell centres in meters.
  double distance_m(const GridCell& a, const GridCell& b) const {
    const double dr = a.row - b.row;
    const double dc = a.col - b.col;
    return std::sqrt(dr * dr + dc * dc) * cell_size_;
  }

 private:
  int rows_ = 1;
  int cols_ = 1;
  double cell_size_ = 500.0;
};

struct Order {
  OrderId id = 0;
  GridCell origin;
  GridCell destination;
  double price = 0.0;
  Seconds request_time = 0.0;
  Seconds trip_duration = 0.0;
  /// Uniform draw attached at creation; the order completes iff u < p_c.
  double completion_draw = 0.5;
};

enum class DriverStatus { Idle, EnRoutePickup, OnTrip, Offline };

struct Driver {
  DriverId id = 0;
  GridCell location;
  DriverStatus status = DriverStatus::Idle;
  Seconds busy_until = 0.0;
};

struct OrderDriverPair {
  Order order;
  Driver driver;
  double pickup_distance = 0.0;
  double completion_prob = 1.0;
  double penalty_raw = 0.0;
};

enum class Outcome { Pending, Completed, Cancelled };
enum class AssignmentKind { Dispatch, Idle };

struct Assignment {
  OrderDriverPair pair;
  Seconds decided_time = 0.0;
  Outcome outcome = Outcome::Pending;
  AssignmentKind kind = AssignmentKind::Dispatch;
};

struct MarketSnapshot {
  Seconds time = 0.0;
  std::vector<Order> open_orders;
  std::vector<Driver> idle_drivers;
  std::vector<OrderDriverPair> candidate_pairs;
};

inline void validate(const Order& o) {
  if (!(o.price > 0.0))
    throw std::invalid_argument("order " + std::to_string(o.id) + ": price must be > 0");
  if (!(o.trip_duration > 0.0))
    throw std::invalid_argument("order " + std::to_string(o.id) +
                                ": trip_duration must be > 0");
}

struct UnitCompletion {
  double operator()(const Order&, const Driver&, double) const { return 1.0; }
};

/// All order/driver pairs whose pickup distance is within the broadcast
/// radius. Pairs are emitted order-major in input order. The completion
/// callable receives (order, driver, pickup_distance_m).
template <typename CompletionFn = UnitCompletion>
std::vector<OrderDriverPair> build_candidate_pairs(const std::vector<Order>& orders,
                                                   const std::vector<Driver>& drivers,
                                                   const Grid& grid,
                                                   double broadcast_radius_m,
                                                   CompletionFn&& completion = {}) {
  std::vector<OrderDriverPair> pairs;
  for (const auto& o : orders) {
    for (const auto& d : drivers) {
      const double dist = grid.distance_m(d.location, o.origin);
      if (dist > broadcast_radius_m) continue;
      OrderDriverPair p;
      p.order = o;
      p.driver = d;
      p.pickup_distance = dist;
      p.completion_prob = completion(o, d, dist);
      p.penalty_raw = dist;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

}  // namespace rlw
