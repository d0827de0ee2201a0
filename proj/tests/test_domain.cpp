#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace rlw;
using namespace rlw::testing;

TEST(CandidatePairs, SameCellGivesZeroDistance) {
  Grid g(4, 4, 500.0);
  auto pairs = build_candidate_pairs({make_order(1, g, 0, 0, 1, 1)}, {make_driver(1, g, 0, 0)}, g, 1000.0);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].pickup_distance, 0.0);
}

TEST(CandidatePairs, OutsideRadiusExcluded) {
  Grid g(4, 4, 500.0);
  auto pairs = build_candidate_pairs({make_order(1, g, 0, 0, 1, 1)}, {make_driver(1, g, 0, 3)}, g, 1000.0);
  EXPECT_TRUE(pairs.empty());
}

TEST(CandidatePairs, RadiusIsInclusive) {
  Grid g(4, 4, 500.0);
  auto pairs = build_candidate_pairs({make_order(1, g, 0, 0, 1, 1)}, {make_driver(1, g, 0, 2)}, g, 1000.0);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].pickup_distance, 1000.0);
}

TEST(CandidatePairs, FullProductWhenAllInRange) {
  Grid g(4, 4, 500.0);
  auto pairs = build_candidate_pairs({make_order(1, g, 0, 0, 1, 1), make_order(2, g, 1, 0, 1, 1)},
                                     {make_driver(1, g, 0, 1), make_driver(2, g, 1, 1)}, g, 1000.0);
  EXPECT_EQ(pairs.size(), 4u);
}

TEST(CandidatePairs, CompletionCallableReceivesDistance) {
  Grid g(4, 4, 500.0);
  auto pairs = build_candidate_pairs({make_order(1, g, 0, 0, 1, 1)}, {make_driver(1, g, 0, 1)}, g, 1000.0,
                                     [](const Order&, const Driver&, double d) { return d / 1000.0; });
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].completion_prob, 0.5);
  EXPECT_EQ(pairs[0].penalty_raw, 500.0);
}

TEST(CandidatePairs, RandomInstancesMatchEnumeration) {
  std::mt19937_64 rng(11);
  Grid g(12, 9, 400.0);
  std::uniform_int_distribution<int> row(0, 11), col(0, 8), count(0, 15);
  std::uniform_real_distribution<double> radius(0.0, 4000.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Order> orders;
    std::vector<Driver> drivers;
    for (int i = count(rng); i > 0; --i) orders.push_back(make_order(i, g, row(rng), col(rng), 0, 0));
    for (int i = count(rng); i > 0; --i) drivers.push_back(make_driver(i, g, row(rng), col(rng)));
    const double r = radius(rng);
    const auto pairs = build_candidate_pairs(orders, drivers, g, r);
    ASSERT_LE(pairs.size(), orders.size() * drivers.size());
    std::size_t expected = 0;
    for (const auto& o : orders)
      for (const auto& d : drivers) {
        const double dr = o.origin.row - d.location.row, dc = o.origin.col - d.location.col;
        if (std::sqrt(dr * dr + dc * dc) * 400.0 <= r) ++expected;
      }
    EXPECT_EQ(pairs.size(), expected);
    for (const auto& p : pairs) EXPECT_LE(p.pickup_distance, r);
  }
}

TEST(Grid, IndexRoundTrip) {
  for (auto [rows, cols] : {std::pair{1, 1}, std::pair{3, 7}, std::pair{24, 24}}) {
    Grid g(rows, cols, 250.0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const auto cell = g.cell(r, c);
        EXPECT_EQ(g.cell(cell.id), cell);
      }
    for (CellId id = 0; id < g.cell_count(); ++id) EXPECT_EQ(g.cell(g.cell(id).row, g.cell(id).col).id, id);
  }
}

TEST(Grid, RejectsInvalidShapesAndIndices) {
  EXPECT_THROW(Grid(0, 3, 500.0), std::invalid_argument);
  EXPECT_THROW(Grid(3, 3, 0.0), std::invalid_argument);
  Grid g(3, 3, 500.0);
  EXPECT_THROW(g.cell(3, 0), std::out_of_range);
  EXPECT_THROW(g.cell(CellId{9}), std::out_of_range);
  EXPECT_THROW(g.cell(CellId{-1}), std::out_of_range);
}

TEST(Grid, DistanceIsEuclideanInCells) {
  Grid g(10, 10, 500.0);
  EXPECT_EQ(g.distance_m(g.cell(0, 0), g.cell(3, 4)), 2500.0);
}

TEST(Order, ValidationRejectsNonPositivePriceOrDuration) {
  Grid g(2, 2, 500.0);
  auto o = make_order(1, g, 0, 0, 1, 1);
  EXPECT_NO_THROW(validate(o));
  o.price = 0.0;
  EXPECT_THROW(validate(o), std::invalid_argument);
  o.price = 1.0;
  o.trip_duration = 0.0;
  EXPECT_THROW(validate(o), std::invalid_argument);
}
