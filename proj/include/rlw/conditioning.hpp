#pragma once

// Signal conditioning: per-cell price smoothing and EMA standardization of
// edge components into (0,1).

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "rlw/domain.hpp"

namespace rlw {

class RewardSmoother {
 public:
  RewardSmoother() = default;
  /// With literal_init the first observation blends with the zero initial
  /// value; otherwise a cell adopts its first price directly.
  RewardSmoother(int cell_count, double beta, bool literal_init = false)
      : values_(static_cast<std::size_t>(cell_count), 0.0),
        seen_(static_cast<std::size_t>(cell_count), false),
        beta_(beta),
        literal_init_(literal_init) {
    if (!(beta >= 0.0 && beta <= 1.0))
      throw std::invalid_argument("smoother beta must be in [0,1]");
  }

  double beta() const { return beta_; }
  double operator[](CellId c) const { return values_.at(static_cast<std::size_t>(c)); }
  bool initialized(CellId c) const { return seen_.at(static_cast<std::size_t>(c)); }

  /// Marks a cell as already initialized with the given value.
  void set(CellId c, double value) {
    values_.at(static_cast<std::size_t>(c)) = value;
    seen_.at(static_cast<std::size_t>(c)) = true;
  }

  void update(CellId c, double price) {
    if (!(price >= 0.0))
      throw std::invalid_argument(fmt::format("smooth_reward: negative price {}", price));
    auto& s = values_.at(static_cast<std::size_t>(c));
    auto&& seen = seen_.at(static_cast<std::size_t>(c));
    if (!seen && !literal_init_)
      s = price;
    else
      s = beta_ * s + (1.0 - beta_) * price;
    seen = true;
  }

  void reset() {
    std::fill(values_.begin(), values_.end(), 0.0);
    std::fill(seen_.begin(), seen_.end(), false);
  }

 private:
  std::vector<double> values_;
  std::vector<bool> seen_;
  double beta_ = 0.9;
  bool literal_init_ = false;
};

inline void smooth_reward(RewardSmoother& s, const GridCell& grid, double price) {
  s.update(grid.id, price);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Logistic function clamped to the open interval (0,1).
inline double open_sigmoid(double z) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(sigmoid(z), lo, hi);
}

/// Exponentially weighted running mean m and deviation proxy v.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(double beta1, double beta2, double epsilon = 1e-9)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("standardizer beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("standardizer beta2 must be in [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("standardizer epsilon must be > 0");
  }

  double mean() const { return m_; }
  double var() const { return v_; }
  long long count() const { return count_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }

  void set_state(double m, double v) {
    if (!(v >= 0.0)) throw std::invalid_argument("standardizer v must be >= 0");
    m_ = m;
    v_ = v;
  }

  void update(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("stdizer_update: non-finite input");
    m_ = beta1_ * m_ + (1.0 - beta1_) * x;
    const double d = x - m_;
    v_ = beta2_ * v_ + (1.0 - beta2_) * d * d;
    ++count_;
  }

  // epsilon replaces sqrt(v) only while v == 0.
  double standardize(double x) const {
    const double sd = v_ > 0.0 ? std::sqrt(v_) : epsilon_;
    const double z = (x - m_) / sd;
    return open_sigmoid(z);
  }

  void reset() {
    m_ = 0.0;
    v_ = 0.0;
    count_ = 0;
  }

 private:
  double m_ = 0.0;
  double v_ = 0.0;
  long long count_ = 0;
  double beta1_ = 0.99;
  double beta2_ = 0.999;
  double epsilon_ = 1e-9;
};

inline void stdizer_update(Standardizer& s, double x) { s.update(x); }
inline double standardize(const Standardizer& s, double x) { return s.standardize(x); }

}  // namespace rlw
