#pragma once

// Synthetic city presets: hour-of-day demand surfaces, destination
// distributions, price and cancellation parameters.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rlw/domain.hpp"
#include "rlw/policy.hpp"

namespace rlw {

struct CityPreset {
  std::string name;
  Grid grid;
  int driver_count = 100;
  /// intensity[hour][cell] in requests per hour.
  std::vector<std::vector<double>> intensity;
  /// destination[origin][dest], each row sums to 1.
  std::vector<std::vector<double>> destination;
  /// Relative weights for initial driver placement.
  std::vector<double> driver_weights;
  double base_price = 2.5;
  double price_per_km = 1.5;
  double mean_trip_length_m = 5000.0;
  double min_trip_m = 250.0;
  CompletionModel completion;

  void validate() const {
    const auto cells = static_cast<std::size_t>(grid.cell_count());
    if (driver_count < 0) throw std::invalid_argument("preset.driver_count must be >= 0");
    if (intensity.size() != 24) throw std::invalid_argument("preset.intensity must have 24 hourly surfaces");
    for (const auto& h : intensity) {
      if (h.size() != cells) throw std::invalid_argument("preset.intensity surface has wrong cell count");
      for (double x : h)
        if (!(x >= 0.0)) throw std::invalid_argument("preset.intensity must be >= 0");
    }
    if (destination.size() != cells) throw std::invalid_argument("preset.destination must have one row per cell");
    for (const auto& row : destination) {
      if (row.size() != cells) throw std::invalid_argument("preset.destination row has wrong size");
      double s = 0.0;
      for (double x : row) {
        if (!(x >= 0.0)) throw std::invalid_argument("preset.destination probabilities must be >= 0");
        s += x;
      }
      if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("preset.destination rows must sum to 1");
    }
    if (driver_weights.size() != cells) throw std::invalid_argument("preset.driver_weights has wrong size");
    if (!(base_price >= 0.0 && price_per_km >= 0.0 && base_price + price_per_km > 0.0))
      throw std::invalid_argument("preset price model must be non-negative and non-zero");
    completion.validate();
  }

  double trip_length_m(const GridCell& o, const GridCell& d) const {
    return std::max(grid.distance_m(o, d), min_trip_m);
  }

  double daily_requests() const {
    double s = 0.0;
    for (const auto& h : intensity)
      for (double x : h) s += x;
    return s;
  }

  /// Demand-weighted mean trip length implied by the surfaces.
  double implied_mean_trip_m() const {
    std::vector<double> origin_w(static_cast<std::size_t>(grid.cell_count()), 0.0);
    for (const auto& h : intensity)
      for (std::size_t c = 0; c < h.size(); ++c) origin_w[c] += h[c];
    double num = 0.0, den = 0.0;
    for (int o = 0; o < grid.cell_count(); ++o) {
      const double w = origin_w[static_cast<std::size_t>(o)];
      if (w <= 0.0) continue;
      const auto oc = grid.cell(o);
      double m = 0.0;
      for (int d = 0; d < grid.cell_count(); ++d)
        m += destination[static_cast<std::size_t>(o)][static_cast<std::size_t>(d)] * trip_length_m(oc, grid.cell(d));
      num += w * m;
      den += w;
    }
    return den > 0.0 ? num / den : 0.0;
  }
};

namespace preset_detail {

struct Hotspot {
  double row = 0.0;
  double col = 0.0;
  double sigma_m = 1500.0;
  /// Requests per hour at the peak cell, by hour of day.
  std::array<double, 24> amplitude{};
};

inline double gaussian(const Grid& g, const GridCell& c, double row, double col, double sigma_m) {
  const double dr = (c.row - row) * g.cell_size();
  const double dc = (c.col - col) * g.cell_size();
  return std::exp(-(dr * dr + dc * dc) / (2.0 * sigma_m * sigma_m));
}

/// Rows of P(d | o) proportional to attraction(d) * exp(kappa * dist_km).
inline std::vector<std::vector<double>> gravity(const Grid& g, const std::vector<double>& attraction,
                                                double kappa, double min_trip_m) {
  const int n = g.cell_count();
  std::vector<std::vector<double>> p(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  for (int o = 0; o < n; ++o) {
    const auto oc = g.cell(o);
    double s = 0.0;
    auto& row = p[static_cast<std::size_t>(o)];
    for (int d = 0; d < n; ++d) {
      const double km = std::max(g.distance_m(oc, g.cell(d)), min_trip_m) / 1000.0;
      row[static_cast<std::size_t>(d)] = attraction[static_cast<std::size_t>(d)] * std::exp(kappa * km);
      s += row[static_cast<std::size_t>(d)];
    }
    for (auto& x : row) x /= s;
  }
  return p;
}

/// Bisection on the gravity exponent so the implied mean trip length hits
/// the preset target.
inline void calibrate_destinations(CityPreset& c, const std::vector<double>& attraction) {
  double lo = -3.0, hi = 1.5;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    c.destination = gravity(c.grid, attraction, mid, c.min_trip_m);
    if (c.implied_mean_trip_m() < c.mean_trip_length_m)
      lo = mid;
    else
      hi = mid;
  }
  c.destination = gravity(c.grid, attraction, 0.5 * (lo + hi), c.min_trip_m);
}

// Relative demand by hour of day (night trough, morning and evening peaks).
inline constexpr std::array<double, 24> kDailyProfile = {0.25, 0.15, 0.10, 0.08, 0.10, 0.25, 0.55, 0.90,
                                                         1.00, 0.85, 0.70, 0.70, 0.75, 0.70, 0.65, 0.70,
                                                         0.80, 0.95, 1.00, 0.90, 0.75, 0.60, 0.45, 0.35};

inline std::vector<std::vector<double>> surfaces(const Grid& g, double background_per_cell,
                                                 const std::vector<Hotspot>& spots) {
  std::vector<std::vector<double>> s(24, std::vector<double>(static_cast<std::size_t>(g.cell_count()), 0.0));
  for (int h = 0; h < 24; ++h) {
    for (int id = 0; id < g.cell_count(); ++id) {
      const auto c = g.cell(id);
      double x = background_per_cell * kDailyProfile[static_cast<std::size_t>(h)];
      for (const auto& sp : spots)
        x += sp.amplitude[static_cast<std::size_t>(h)] * gaussian(g, c, sp.row, sp.col, sp.sigma_m);
      s[static_cast<std::size_t>(h)][static_cast<std::size_t>(id)] = x;
    }
  }
  return s;
}

inline std::array<double, 24> scaled_profile(double peak) {
  std::array<double, 24> a{};
  for (std::size_t h = 0; h < 24; ++h) a[h] = peak * kDailyProfile[h];
  return a;
}

/// Min-max normalised city statistics mapped onto generator parameters.
struct CityStats {
  const char* name;
  double answer_rate;  // normalised to [0,1]
  double cancel_rate;  // normalised to [0,1]
  double mean_trip_m;
  int population;      // 3 high, 2 medium, 1 low
};

inline constexpr std::array<CityStats, 6> kCityStats = {{
    {"city1", 0.63, 0.88, 5.54e3, 3},
    {"city2", 0.98, 1.00, 6.41e3, 3},
    {"city3", 0.00, 0.55, 6.43e3, 2},
    {"city4", 1.00, 0.32, 5.90e3, 2},
    {"city5", 0.17, 0.19, 6.31e3, 1},
    {"city6", 0.73, 0.00, 4.34e3, 1},
}};

inline CityPreset from_stats(const CityStats& st) {
  CityPreset c;
  c.name = st.name;
  c.grid = Grid(24, 24, 500.0);
  const double demand_scale = 0.5 + 0.25 * st.population;
  // Higher normalised answer rate -> more supply per unit demand.
  c.driver_count = static_cast<int>(std::lround(120.0 * demand_scale * (0.8 + 0.4 * st.answer_rate)));
  // Higher normalised cancel rate -> steeper completion decay with pickup distance.
  c.completion = CompletionModel{2.0, 0.6 + 0.8 * st.cancel_rate};
  c.mean_trip_length_m = st.mean_trip_m;
  Hotspot centre{11.5, 11.5, 2500.0, scaled_profile(30.0 * demand_scale)};
  Hotspot second{6.0, 17.0, 1500.0, scaled_profile(15.0 * demand_scale)};
  c.intensity = surfaces(c.grid, 2.0 * demand_scale, {centre, second});
  c.driver_weights.assign(static_cast<std::size_t>(c.grid.cell_count()), 1.0);
  std::vector<double> attraction(static_cast<std::size_t>(c.grid.cell_count()));
  for (int id = 0; id < c.grid.cell_count(); ++id) {
    const auto cell = c.grid.cell(id);
    attraction[static_cast<std::size_t>(id)] =
        0.3 + gaussian(c.grid, cell, centre.row, centre.col, 3000.0) + 0.5 * gaussian(c.grid, cell, second.row, second.col, 2000.0);
  }
  calibrate_destinations(c, attraction);
  return c;
}

/// Hot-spot morning / dispersed evening city with strongly imbalanced
/// supply: drivers start uniformly, morning demand concentrates downtown,
/// evening demand spreads over the periphery.
inline CityPreset imbalanced() {
  CityPreset c;
  c.name = "imbalanced";
  c.grid = Grid(20, 20, 500.0);
  c.driver_count = 150;
  c.base_price = 2.0;
  c.price_per_km = 1.2;
  c.mean_trip_length_m = 4000.0;
  c.completion = CompletionModel{2.0, 1.4};
  std::array<double, 24> morning{}, evening{};
  for (std::size_t h = 0; h < 24; ++h) {
    const double p = kDailyProfile[h];
    const bool am = h >= 6 && h < 14;
    morning[h] = (am ? 60.0 : 12.0) * p;
    evening[h] = (am ? 0.0 : 6.0) * p;
  }
  Hotspot downtown{9.5, 9.5, 1200.0, morning};
  Hotspot ring_a{3.0, 3.0, 1500.0, evening};
  Hotspot ring_b{16.0, 4.0, 1500.0, evening};
  Hotspot ring_c{4.0, 16.0, 1500.0, evening};
  Hotspot ring_d{16.0, 16.0, 1500.0, evening};
  c.intensity = surfaces(c.grid, 0.6, {downtown, ring_a, ring_b, ring_c, ring_d});
  c.driver_weights.assign(static_cast<std::size_t>(c.grid.cell_count()), 1.0);
  std::vector<double> attraction(static_cast<std::size_t>(c.grid.cell_count()));
  for (int id = 0; id < c.grid.cell_count(); ++id) {
    const auto cell = c.grid.cell(id);
    attraction[static_cast<std::size_t>(id)] = 0.2 + gaussian(c.grid, cell, 9.5, 9.5, 2000.0);
  }
  calibrate_destinations(c, attraction);
  return c;
}

/// Small uniform city for quick runs and tests.
inline CityPreset uniform_small() {
  CityPreset c;
  c.name = "uniform-small";
  c.grid = Grid(6, 6, 500.0);
  c.driver_count = 20;
  c.mean_trip_length_m = 1200.0;
  c.intensity.assign(24, std::vector<double>(static_cast<std::size_t>(c.grid.cell_count()), 8.0));
  c.driver_weights.assign(static_cast<std::size_t>(c.grid.cell_count()), 1.0);
  std::vector<double> attraction(static_cast<std::size_t>(c.grid.cell_count()), 1.0);
  calibrate_destinations(c, attraction);
  return c;
}

}  // namespace preset_detail

inline std::vector<std::string> preset_names() {
  std::vector<std::string> n;
  for (const auto& s : preset_detail::kCityStats) n.emplace_back(s.name);
  n.emplace_back("imbalanced");
  n.emplace_back("uniform-small");
  return n;
}

inline CityPreset make_preset(const std::string& name) {
  for (const auto& s : preset_detail::kCityStats)
    if (name == s.name) return preset_detail::from_stats(s);
  if (name == "imbalanced") return preset_detail::imbalanced();
  if (name == "uniform-small") return preset_detail::uniform_small();
  throw std::invalid_argument(fmt::format("unknown city preset '{}'", name));
}

}  // namespace rlw
