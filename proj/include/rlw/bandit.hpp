#pragma once

// Limited-memory UCB over a discrete set of pruning thresholds, plus the
// sliding metrics window that feeds it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "rlw/domain.hpp"

namespace rlw {

inline double objective(double cr, double ar) { return cr + 0.1 * ar; }

struct LmUcbParams {
  double arm_min = 0.0;
  double arm_max = 0.3;
  int arm_count = 41;
  double alpha_q = 0.8;  // value memory
  double gamma_n = 0.99; // count discount
  double c = 0.1;        // exploration factor; 0.05 cannot re-adapt within 200 pulls

  void validate() const {
    if (arm_count < 1) throw std::invalid_argument("ucb.arm_count must be >= 1");
    if (!(arm_min >= 0.0 && arm_max <= 1.0 && arm_min <= arm_max))
      throw std::invalid_argument("ucb arms must satisfy 0 <= arm_min <= arm_max <= 1");
    if (!(alpha_q >= 0.0 && alpha_q < 1.0)) throw std::invalid_argument("ucb.alpha_q must be in [0,1)");
    if (!(gamma_n >= 0.0 && gamma_n < 1.0)) throw std::invalid_argument("ucb.gamma_n must be in [0,1)");
    if (!(c >= 0.0)) throw std::invalid_argument("ucb.c must be >= 0");
  }

  std::vector<double> arms() const {
    std::vector<double> a(static_cast<std::size_t>(arm_count));
    if (arm_count == 1) {
      a[0] = arm_min;
      return a;
    }
    for (int i = 0; i < arm_count; ++i)
      a[static_cast<std::size_t>(i)] = arm_min + (arm_max - arm_min) * i / (arm_count - 1);
    return a;
  }
};

class LmUcb {
 public:
  LmUcb() : LmUcb(LmUcbParams{}, std::vector<double>{0.0}, 0) {}

  LmUcb(const LmUcbParams& params, std::uint64_t seed) : LmUcb(params, params.arms(), seed) {}

  /// Custom arm values; the starting arm is a seeded uniform choice.
  LmUcb(const LmUcbParams& params, std::vector<double> arms, std::uint64_t seed)
      : params_(params), arms_(std::move(arms)) {
    params_.validate();
    if (arms_.empty()) throw std::invalid_argument("LM-UCB needs at least one arm");
    q_.assign(arms_.size(), 0.0);
    n_arm_.assign(arms_.size(), 0.0);
    std::mt19937_64 rng(seed);
    current_ = static_cast<std::size_t>(rng() % arms_.size());
  }

  const std::vector<double>& arms() const { return arms_; }
  const std::vector<double>& q() const { return q_; }
  const std::vector<double>& counts() const { return n_arm_; }
  double total_count() const { return n_; }
  std::size_t current_arm() const { return current_; }
  double threshold() const { return arms_[current_]; }
  const LmUcbParams& params() const { return params_; }

  void set_state(std::vector<double> q, std::vector<double> counts, double n, std::size_t current) {
    if (q.size() != arms_.size() || counts.size() != arms_.size() || current >= arms_.size())
      throw std::invalid_argument("LM-UCB state size mismatch");
    q_ = std::move(q);
    n_arm_ = std::move(counts);
    n_ = n;
    current_ = current;
  }

  /// Credits reward q to the current arm and selects the next one.
  double update_reward(double q) {
    n_ = params_.gamma_n * n_ + 1.0;
    for (auto& na : n_arm_) na *= params_.gamma_n;
    q_[current_] = params_.alpha_q * q_[current_] + (1.0 - params_.alpha_q) * q;
    n_arm_[current_] += 1.0;
    current_ = select_arm();
    return arms_[current_];
  }

  /// ucb_feedback: objective cr + 0.1 ar on the current arm.
  double feedback(double cr, double ar) {
    if (!(cr >= 0.0 && cr <= 1.0)) throw std::invalid_argument(fmt::format("ucb_feedback: cr={} outside [0,1]", cr));
    if (!(ar >= 0.0 && ar <= 1.0)) throw std::invalid_argument(fmt::format("ucb_feedback: ar={} outside [0,1]", ar));
    return update_reward(objective(cr, ar));
  }

  double score(std::size_t a) const {
    if (n_arm_[a] <= 0.0) return std::numeric_limits<double>::infinity();
    const double log_n = std::log(std::max(n_, 1.0));
    return q_[a] + params_.c * std::sqrt(log_n / n_arm_[a]);
  }

  /// Argmax of score; ties and unpulled arms go to the lowest index.
  std::size_t select_arm() const {
    std::size_t best = 0;
    double best_score = score(0);
    for (std::size_t a = 1; a < arms_.size(); ++a) {
      const double s = score(a);
      if (s > best_score) {
        best = a;
        best_score = s;
      }
    }
    return best;
  }

 private:
  LmUcbParams params_;
  std::vector<double> arms_;
  std::vector<double> q_;
  std::vector<double> n_arm_;
  double n_ = 0.0;
  std::size_t current_ = 0;
};

/// Counts of requests that settled during one round.
struct SettledCounts {
  std::int64_t requests = 0;   // completed + cancelled + expired
  std::int64_t accepted = 0;   // dispatched (completed + cancelled)
  std::int64_t completed = 0;
  std::int64_t dispatches = 0;

  SettledCounts& operator+=(const SettledCounts& o) {
    requests += o.requests;
    accepted += o.accepted;
    completed += o.completed;
    dispatches += o.dispatches;
    return *this;
  }
};

/// Sliding window over settled requests; rates are 0 when empty.
class MetricsWindow {
 public:
  explicit MetricsWindow(Seconds window_seconds = 60.0) : window_(window_seconds) {
    if (!(window_seconds > 0.0)) throw std::invalid_argument("metrics window must be > 0 s");
  }

  void record(Seconds t, const SettledCounts& c) {
    if (c.completed > c.accepted || c.accepted > c.requests || c.completed < 0)
      throw std::invalid_argument("metrics window: inconsistent counts");
    entries_.push_back({t, c});
    totals_ += c;
    evict(t);
  }

  void evict(Seconds now) {
    while (!entries_.empty() && entries_.front().t <= now - window_) {
      const auto& e = entries_.front().c;
      totals_.requests -= e.requests;
      totals_.accepted -= e.accepted;
      totals_.completed -= e.completed;
      totals_.dispatches -= e.dispatches;
      entries_.pop_front();
    }
  }

  const SettledCounts& totals() const { return totals_; }
  Seconds window_seconds() const { return window_; }

  double completion_rate() const {
    return totals_.requests > 0 ? static_cast<double>(totals_.completed) / static_cast<double>(totals_.requests) : 0.0;
  }
  double answer_rate() const {
    return totals_.requests > 0 ? static_cast<double>(totals_.accepted) / static_cast<double>(totals_.requests) : 0.0;
  }

 private:
  struct Entry {
    Seconds t;
    SettledCounts c;
  };
  Seconds window_;
  std::deque<Entry> entries_;
  SettledCounts totals_;
};

}  // namespace rlw
