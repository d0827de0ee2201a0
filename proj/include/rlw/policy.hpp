#pragma once

// Dispatch policies sharing a two-phase round interface: assign() scores
// and matches against frozen state, end_round() runs the buffered
// learning updates and threshold feedback.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rlw/bandit.hpp"
#include "rlw/conditioning.hpp"
#include "rlw/domain.hpp"
#include "rlw/matching.hpp"
#include "rlw/value_store.hpp"

namespace rlw {

/// p_c = sigmoid(a - b * pickup_km)
struct CompletionModel {
  double a = 2.0;
  double b = 0.6;

  void validate() const {
    if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("completion model a, b must be >= 0");
  }

  double operator()(double pickup_distance_m) const { return sigmoid(a - b * pickup_distance_m / 1000.0); }
  double operator()(const Order&, const Driver&, double pickup_distance_m) const {
    return (*this)(pickup_distance_m);
  }
};

struct Boundary {
  double start = 0.0;
  double finish = 0.0;
};

struct PolicyConfig {
  double gamma = 0.9;
  Boundary w_rew{0.430, 0.008};
  Boundary w_p{0.002, 0.004};
  Seconds t_up = 10.0;
  Seconds feedback_interval = 60.0;  // C
  Seconds metrics_window = 60.0;
  Seconds day_start = 0.0;
  Seconds day_end = 86400.0;
  Seconds day_length = 86400.0;
  bool reset_values_daily = false;

  void validate(Seconds round_length) const {
    check_gamma(gamma);
    for (double w : {w_rew.start, w_rew.finish})
      if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("w_rew boundaries must be in [0,1]");
    for (double w : {w_p.start, w_p.finish})
      if (!(w >= 0.0)) throw std::invalid_argument("w_p boundaries must be >= 0");
    if (!(day_end > day_start)) throw std::invalid_argument("day_end must be > day_start");
    if (!(day_length > 0.0)) throw std::invalid_argument("day_length must be > 0");
    const auto multiple_of_round = [&](Seconds s) {
      const double k = s / round_length;
      return s > 0.0 && std::abs(k - std::round(k)) < 1e-9;
    };
    if (!multiple_of_round(t_up)) throw std::invalid_argument("t_up must be a positive multiple of the round length");
    if (!multiple_of_round(feedback_interval))
      throw std::invalid_argument("feedback interval C must be a positive multiple of the round length");
  }
};

/// Linear interpolation of the weight factors across the day window; t is
/// clamped to [day_start, day_end].
inline EdgeWeights interpolate_weights(const PolicyConfig& cfg, Seconds t) {
  if (t <= cfg.day_start) return EdgeWeights::make(cfg.w_rew.start, cfg.w_p.start);
  if (t >= cfg.day_end) return EdgeWeights::make(cfg.w_rew.finish, cfg.w_p.finish);
  const double f = (t - cfg.day_start) / (cfg.day_end - cfg.day_start);
  const auto lerp = [f](const Boundary& b) { return b.start + (b.finish - b.start) * f; };
  return EdgeWeights::make(lerp(cfg.w_rew), lerp(cfg.w_p));
}

inline bool on_tick(Seconds t, Seconds interval) {
  const auto ti = static_cast<long long>(std::llround(t));
  const auto ii = static_cast<long long>(std::llround(interval));
  return ii > 0 && ti % ii == 0;
}

struct RoundFeedback {
  Seconds time = 0.0;
  SettledCounts settled;
};

struct ThresholdTrace {
  Seconds time = 0.0;
  std::size_t arm_index = 0;
  double threshold = 0.0;
  double q = 0.0;
  double cr = 0.0;
  double ar = 0.0;
};

class DispatchPolicy {
 public:
  virtual ~DispatchPolicy() = default;
  virtual std::string name() const = 0;

  /// Order-driver assignment for one round. Does not touch learned state.
  virtual RoundMatch assign(const MarketSnapshot& snap) = 0;

  /// Buffers this round's samples; runs updates on T_up / C ticks.
  virtual void end_round(const MarketSnapshot&, const RoundMatch&, const RoundFeedback&) {}

  /// Called when the policy stops receiving rounds (A/B flipping).
  virtual void suspend() {}

  virtual const ValueTable* values() const { return nullptr; }
  virtual std::optional<double> threshold() const { return std::nullopt; }
  virtual const std::vector<ThresholdTrace>* threshold_trace() const { return nullptr; }

  RoundMatch step(const MarketSnapshot& snap, const RoundFeedback& fb) {
    auto m = assign(snap);
    end_round(snap, m, fb);
    return m;
  }
};

// ---------------------------------------------------------------------------

/// Batched pickup-distance minimizer: cardinality first, then distance.
class MyopicPolicy final : public DispatchPolicy {
 public:
  std::string name() const override { return "myopic"; }

  RoundMatch assign(const MarketSnapshot& snap) override {
    double max_d = 0.0;
    for (const auto& p : snap.candidate_pairs) max_d = std::max(max_d, p.pickup_distance);
    const double rows = static_cast<double>(std::min(snap.open_orders.size(), snap.idle_drivers.size()));
    const double big = (max_d + 1.0) * (rows + 1.0);
    std::vector<WeightedEdge> edges;
    edges.reserve(snap.candidate_pairs.size());
    for (const auto& p : snap.candidate_pairs) edges.push_back({p, big - p.pickup_distance});
    RoundMatch out;
    out.result = solve_assignment(edges);
    fill_unmatched(out.result, snap);
    for (const auto& m : out.result.matched) {
      PairRecord r;
      r.time = snap.time;
      r.order_id = m.pair.order.id;
      r.driver_id = m.pair.driver.id;
      r.driver_cell = m.pair.driver.location;
      r.origin = m.pair.order.origin;
      r.destination = m.pair.order.destination;
      r.price = m.pair.order.price;
      r.p_c = m.pair.completion_prob;
      r.penalty = m.pair.penalty_raw;
      r.edge_weight = m.weight;
      out.records.push_back(r);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------

namespace detail {

/// Dispatch records and idle drivers accumulated between update ticks.
struct SampleBuffer {
  std::vector<PairRecord> dispatched;
  std::map<DriverId, GridCell> idle;

  void add_round(const MarketSnapshot& snap, const RoundMatch& m) {
    for (const auto& r : m.records) dispatched.push_back(r);
    std::vector<DriverId> unmatched = m.result.unmatched_drivers;
    std::sort(unmatched.begin(), unmatched.end());
    for (const auto& d : snap.idle_drivers)
      if (std::binary_search(unmatched.begin(), unmatched.end(), d.id)) idle[d.id] = d.location;
  }

  void clear() {
    dispatched.clear();
    idle.clear();
  }
};

inline PairRecord raw_record(const OrderDriverPair& p, Seconds t) {
  PairRecord r;
  r.time = t;
  r.order_id = p.order.id;
  r.driver_id = p.driver.id;
  r.driver_cell = p.driver.location;
  r.origin = p.order.origin;
  r.destination = p.order.destination;
  r.price = p.order.price;
  r.p_c = p.completion_prob;
  r.reward = p.order.price;
  r.penalty = p.penalty_raw;
  return r;
}

}  // namespace detail

struct V1d3Config {
  double gamma = 0.9;
  double learning_rate = 0.05;
  Seconds t_up = 10.0;
};

/// Online tabular value iteration with completion-weighted raw edges
/// p_c (price + gamma V[dest] - V[driver]) and fixed-step updates.
class V1d3Policy final : public DispatchPolicy {
 public:
  V1d3Policy(int cell_count, V1d3Config cfg)
      : cfg_(cfg), learner_(cell_count, cfg.gamma, ValueOptimizer::Sgd, AdamParams{}, cfg.learning_rate) {}

  std::string name() const override { return "v1d3"; }
  const ValueTable* values() const override { return &learner_.values(); }

  RoundMatch assign(const MarketSnapshot& snap) override {
    return match_against(learner_.values(), cfg_.gamma, snap);
  }

  void end_round(const MarketSnapshot& snap, const RoundMatch& m, const RoundFeedback& fb) override {
    buffer_.add_round(snap, m);
    if (!on_tick(fb.time, cfg_.t_up)) return;
    for (const auto& r : buffer_.dispatched)
      learner_.apply(DispatchSample{r.driver_cell, r.destination, r.price, r.p_c, AssignmentKind::Dispatch});
    for (const auto& [id, cell] : buffer_.idle) learner_.apply(DispatchSample::idle(cell));
    buffer_.clear();
  }

  void suspend() override { buffer_.clear(); }

  static RoundMatch match_against(const ValueTable& v, double gamma, const MarketSnapshot& snap) {
    std::vector<WeightedEdge> edges;
    std::vector<PairRecord> recs;
    edges.reserve(snap.candidate_pairs.size());
    for (const auto& p : snap.candidate_pairs) {
      auto r = detail::raw_record(p, snap.time);
      r.residual = gamma * v[p.order.destination.id] - v[p.driver.location.id];
      r.r_star = r.reward;
      r.dv_star = r.residual;
      r.p_star = r.penalty;
      r.edge_weight = p.completion_prob * (p.order.price + r.residual);
      edges.push_back({p, r.edge_weight});
      recs.push_back(r);
    }
    RoundMatch out;
    out.result = solve_assignment(edges);
    fill_unmatched(out.result, snap);
    for (const auto& mp : out.result.matched)
      for (const auto& r : recs)
        if (r.order_id == mp.pair.order.id && r.driver_id == mp.pair.driver.id) {
          out.records.push_back(r);
          break;
        }
    return out;
  }

 private:
  V1d3Config cfg_;
  ValueLearner learner_;
  detail::SampleBuffer buffer_;
};

/// V1D3-style edges against a value table loaded from a previous run.
class FrozenTablePolicy final : public DispatchPolicy {
 public:
  FrozenTablePolicy(ValueTable table, double gamma) : table_(std::move(table)), gamma_(gamma) { check_gamma(gamma); }

  std::string name() const override { return "frozen"; }
  const ValueTable* values() const override { return &table_; }
  RoundMatch assign(const MarketSnapshot& snap) override { return V1d3Policy::match_against(table_, gamma_, snap); }

 private:
  ValueTable table_;
  double gamma_;
};

// ---------------------------------------------------------------------------

enum class PruningMode { Ucb, Fixed };

struct RlwConfig {
  PolicyConfig policy;
  EdgeMode edge_mode = EdgeMode::Standardized;
  bool smooth_rewards = true;
  double smoother_beta = 0.9;
  bool smoother_literal_init = false;
  double std_beta1 = 0.99;
  double std_beta2 = 0.999;
  ValueOptimizer optimizer = ValueOptimizer::Adam;
  AdamParams adam;
  double sgd_lr = 0.05;
  PruningMode pruning = PruningMode::Ucb;
  double fixed_threshold = 0.0;
  LmUcbParams ucb;
  std::uint64_t seed = 0;

  /// Settings under which the edge weights and updates reduce to V1D3.
  static RlwConfig v1d3_degenerate(const V1d3Config& v) {
    RlwConfig c;
    c.policy.gamma = v.gamma;
    c.policy.t_up = v.t_up;
    c.policy.w_p = {0.0, 0.0};
    c.edge_mode = EdgeMode::Raw;
    c.smooth_rewards = false;
    c.optimizer = ValueOptimizer::Sgd;
    c.sgd_lr = v.learning_rate;
    c.pruning = PruningMode::Fixed;
    c.fixed_threshold = 0.0;
    return c;
  }
};

class RlwPolicy final : public DispatchPolicy {
 public:
  RlwPolicy(int cell_count, RlwConfig cfg, Seconds round_length = 2.0)
      : cfg_(std::move(cfg)),
        learner_(cell_count, cfg_.policy.gamma, cfg_.optimizer, cfg_.adam, cfg_.sgd_lr),
        smoother_(cell_count, cfg_.smoother_beta, cfg_.smoother_literal_init),
        reward_std_(cfg_.std_beta1, cfg_.std_beta2),
        residual_std_(cfg_.std_beta1, cfg_.std_beta2),
        penalty_std_(cfg_.std_beta1, cfg_.std_beta2),
        ucb_(cfg_.ucb, cfg_.seed),
        window_(cfg_.policy.metrics_window) {
    cfg_.policy.validate(round_length);
    if (!(cfg_.fixed_threshold >= 0.0 && cfg_.fixed_threshold <= 1.0))
      throw std::invalid_argument("fixed_threshold must be in [0,1]");
  }

  std::string name() const override { return "rlw"; }
  const ValueTable* values() const override { return &learner_.values(); }
  std::optional<double> threshold() const override { return current_threshold(); }
  const std::vector<ThresholdTrace>* threshold_trace() const override { return &trace_; }

  const RlwConfig& config() const { return cfg_; }
  const ValueLearner& learner() const { return learner_; }
  const RewardSmoother& smoother() const { return smoother_; }
  const Standardizer& reward_standardizer() const { return reward_std_; }
  const Standardizer& residual_standardizer() const { return residual_std_; }
  const Standardizer& penalty_standardizer() const { return penalty_std_; }
  const LmUcb& bandit() const { return ucb_; }

  double current_threshold() const {
    return cfg_.pruning == PruningMode::Ucb ? ucb_.threshold() : cfg_.fixed_threshold;
  }

  Seconds time_of_day(Seconds t) const { return std::fmod(t, cfg_.policy.day_length); }

  RoundMatch assign(const MarketSnapshot& snap) override {
    const auto w = interpolate_weights(cfg_.policy, time_of_day(snap.time));
    EdgeConditioning ec;
    ec.values = &learner_.values();
    ec.smoother = cfg_.smooth_rewards ? &smoother_ : nullptr;
    ec.reward_std = &reward_std_;
    ec.residual_std = &residual_std_;
    ec.penalty_std = &penalty_std_;
    ec.gamma = cfg_.policy.gamma;
    ec.mode = cfg_.edge_mode;
    return match_round(snap, ec, w, current_threshold());
  }

  void end_round(const MarketSnapshot& snap, const RoundMatch& m, const RoundFeedback& fb) override {
    const Seconds t = fb.time;
    if (cfg_.policy.reset_values_daily && t > 0.0 && on_tick(t, cfg_.policy.day_length)) learner_.reset();
    buffer_.add_round(snap, m);
    if (on_tick(t, cfg_.policy.t_up)) update_tick();
    window_.record(t, fb.settled);
    if (cfg_.pruning == PruningMode::Ucb && t > 0.0 && on_tick(t, cfg_.policy.feedback_interval)) {
      window_.evict(t);
      const double cr = window_.completion_rate();
      const double ar = window_.answer_rate();
      const double q = objective(cr, ar);
      const std::size_t pulled = ucb_.current_arm();
      ucb_.feedback(cr, ar);
      trace_.push_back({t, pulled, ucb_.arms()[pulled], q, cr, ar});
    }
  }

  void suspend() override { buffer_.clear(); }

 private:
  void update_tick() {
    const double gamma = cfg_.policy.gamma;
    for (const auto& r : buffer_.dispatched) {
      double reward = r.price;
      if (cfg_.smooth_rewards) {
        smoother_.update(r.origin.id, r.price);
        reward = smoother_[r.origin.id];
      }
      const auto& v = learner_.values();
      const double residual = gamma * v[r.destination.id] - v[r.driver_cell.id];
      const DispatchSample sample{r.driver_cell, r.destination, reward, r.p_c, AssignmentKind::Dispatch};
      const double delta = td_delta(sample, v, gamma);
      reward_std_.update(reward);
      residual_std_.update(residual);
      penalty_std_.update(r.penalty);
      learner_.step(r.driver_cell, delta);
    }
    for (const auto& [id, cell] : buffer_.idle) learner_.apply(DispatchSample::idle(cell));
    buffer_.clear();
  }

  RlwConfig cfg_;
  ValueLearner learner_;
  RewardSmoother smoother_;
  Standardizer reward_std_;
  Standardizer residual_std_;
  Standardizer penalty_std_;
  LmUcb ucb_;
  MetricsWindow window_;
  detail::SampleBuffer buffer_;
  std::vector<ThresholdTrace> trace_;
};

inline std::string threshold_trace_csv(const std::vector<ThresholdTrace>& trace) {
  std::string out = "time,arm_index,threshold,q,cr,ar\n";
  for (const auto& e : trace)
    out += fmt::format("{},{},{},{},{},{}\n", e.time, e.arm_index, e.threshold, e.q, e.cr, e.ar);
  return out;
}

}  // namespace rlw
