// Runs the three dispatch policies on the same demand stream for one
// simulated day and prints their totals. Args: [preset] [hours].

#include <fmt/format.h>

#include "rlw/rlw.hpp"

int main(int argc, char** argv) {
  const std::string preset_name = argc > 1 ? argv[1] : "imbalanced";
  const double hours = argc > 2 ? std::stod(argv[2]) : 24.0;

  const auto city = rlw::make_preset(preset_name);
  rlw::SimConfig sim;
  sim.seed = 7;
  sim.horizon = hours * 3600.0;

  rlw::MyopicPolicy myopic;
  rlw::V1d3Policy v1d3(city.grid.cell_count(), rlw::V1d3Config{});
  rlw::RlwPolicy rlw_policy(city.grid.cell_count(), rlw::RlwConfig{}, sim.round_length);

  fmt::print("{:<8} {:>9} {:>9} {:>9} {:>11} {:>7} {:>7} {:>7}\n", "policy", "requests", "completed", "cancelled",
             "income", "cr", "ar", "sr");
  for (rlw::DispatchPolicy* p : {static_cast<rlw::DispatchPolicy*>(&myopic), static_cast<rlw::DispatchPolicy*>(&v1d3),
                                 static_cast<rlw::DispatchPolicy*>(&rlw_policy)}) {
    rlw::DemandGenerator demand(city, sim.seed, sim);
    rlw::Simulator simulator(sim, city.completion);
    const auto r = simulator.run(demand, *p);
    const auto m = r.metrics();
    fmt::print("{:<8} {:>9} {:>9} {:>9} {:>11.2f} {:>7.4f} {:>7.4f} {:>7.4f}\n", r.policy, r.totals.requests,
               r.totals.completed, r.totals.cancelled, r.totals.income, m.cr, m.ar, m.sr);
  }
}
