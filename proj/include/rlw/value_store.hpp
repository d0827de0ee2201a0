#pragma once

// Tabular spatial value function V[cell] with per-cell ADAM moments.
// Dispatch samples are updated with the completion-weighted (expected)
// TD target; idle samples decay toward zero.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rlw/domain.hpp"

namespace rlw {

class ValueTable {
 public:
  ValueTable() = default;
  explicit ValueTable(int cell_count) : values_(static_cast<std::size_t>(cell_count), 0.0) {}

  double operator[](CellId c) const { return values_.at(static_cast<std::size_t>(c)); }
  double& operator[](CellId c) { return values_.at(static_cast<std::size_t>(c)); }

  int size() const { return static_cast<int>(values_.size()); }
  const std::vector<double>& data() const { return values_; }

  double mean() const {
    if (values_.empty()) return 0.0;
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

  void reset() { std::fill(values_.begin(), values_.end(), 0.0); }

  friend bool operator==(const ValueTable&, const ValueTable&) = default;

 private:
  std::vector<double> values_;
};

struct AdamParams {
  double base_lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("adam.base_lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam.beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam.beta2 must be in [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam.epsilon must be > 0");
  }
};

struct AdamMoments {
  double m1 = 0.0;
  double m2 = 0.0;
  std::int64_t step = 0;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(int cell_count, AdamParams params)
      : params_(params), moments_(static_cast<std::size_t>(cell_count)) {
    params_.validate();
  }

  const AdamParams& params() const { return params_; }
  const AdamMoments& at(CellId c) const { return moments_.at(static_cast<std::size_t>(c)); }
  AdamMoments& at(CellId c) { return moments_.at(static_cast<std::size_t>(c)); }
  void reset() { std::fill(moments_.begin(), moments_.end(), AdamMoments{}); }

 private:
  AdamParams params_;
  std::vector<AdamMoments> moments_;
};

struct DispatchSample {
  GridCell s;
  GridCell s_prime;
  double reward = 0.0;
  double p_c = 1.0;
  AssignmentKind kind = AssignmentKind::Dispatch;

  static DispatchSample idle(const GridCell& cell) {
    return DispatchSample{cell, cell, 0.0, 1.0, AssignmentKind::Idle};
  }
};

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument(fmt::format("gamma must be in [0,1), got {}", gamma));
}

/// p_c * (r + gamma V[s']) + (1 - p_c) * gamma V[s]
inline double expected_td_target(const DispatchSample& sample, const ValueTable& v, double gamma) {
  check_gamma(gamma);
  if (sample.kind != AssignmentKind::Dispatch)
    throw std::invalid_argument("expected_td_target requires a dispatch sample");
  const double vs = v[sample.s.id];
  const double vsp = v[sample.s_prime.id];
  return sample.p_c * (sample.reward + gamma * vsp) + (1.0 - sample.p_c) * (gamma * vs);
}

inline double td_delta(const DispatchSample& sample, const ValueTable& v, double gamma) {
  check_gamma(gamma);
  if (sample.kind == AssignmentKind::Idle) return (gamma - 1.0) * v[sample.s.id];
  return expected_td_target(sample, v, gamma) - v[sample.s.id];
}

/// One bias-corrected ADAM ascent step on V[cell] with delta as the gradient.
inline void adam_apply(ValueTable& v, AdamState& adam, const GridCell& cell, double delta) {
  if (!std::isfinite(delta)) throw std::invalid_argument("adam_apply: non-finite delta");
  const auto& p = adam.params();
  auto& mo = adam.at(cell.id);
  mo.m1 = p.beta1 * mo.m1 + (1.0 - p.beta1) * delta;
  mo.m2 = p.beta2 * mo.m2 + (1.0 - p.beta2) * delta * delta;
  mo.step += 1;
  const double t = static_cast<double>(mo.step);
  const double m1_hat = mo.m1 / (1.0 - std::pow(p.beta1, t));
  const double m2_hat = mo.m2 / (1.0 - std::pow(p.beta2, t));
  v[cell.id] += p.base_lr * m1_hat / (std::sqrt(m2_hat) + p.epsilon);
}

enum class ValueOptimizer { Adam, Sgd };

/// Owns V and the optimizer state; the only writer of the value table.
class ValueLearner {
 public:
  ValueLearner() = default;
  ValueLearner(int cell_count, double gamma, ValueOptimizer opt, AdamParams adam, double sgd_lr)
      : values_(cell_count), adam_(cell_count, adam), gamma_(gamma), opt_(opt), sgd_lr_(sgd_lr) {
    check_gamma(gamma);
    if (!(sgd_lr > 0.0 && sgd_lr <= 1.0))
      throw std::invalid_argument("sgd learning rate must be in (0,1]");
  }

  const ValueTable& values() const { return values_; }
  const AdamState& adam() const { return adam_; }
  double gamma() const { return gamma_; }
  ValueOptimizer optimizer() const { return opt_; }

  /// Returns the delta that was applied.
  double apply(const DispatchSample& sample) {
    const double delta = td_delta(sample, values_, gamma_);
    step(sample.s, delta);
    return delta;
  }

  void step(const GridCell& cell, double delta) {
    if (opt_ == ValueOptimizer::Adam) {
      adam_apply(values_, adam_, cell, delta);
    } else {
      if (!std::isfinite(delta)) throw std::invalid_argument("non-finite delta");
      values_[cell.id] += sgd_lr_ * delta;
    }
  }

  void batch_update(const std::vector<DispatchSample>& samples) {
    for (const auto& s : samples) apply(s);
  }

  void reset() {
    values_.reset();
    adam_.reset();
  }

  void load(const ValueTable& table) {
    if (table.size() != values_.size())
      throw std::invalid_argument("value table size mismatch");
    values_ = table;
  }

 private:
  ValueTable values_;
  AdamState adam_;
  double gamma_ = 0.9;
  ValueOptimizer opt_ = ValueOptimizer::Adam;
  double sgd_lr_ = 0.05;
};

// CSV: cell_id,row,col,value

inline std::string value_table_csv(const ValueTable& v, const Grid& grid) {
  std::string out = "cell_id,row,col,value\n";
  for (CellId id = 0; id < v.size(); ++id) {
    const auto c = grid.cell(id);
    out += fmt::format("{},{},{},{}\n", id, c.row, c.col, v[id]);
  }
  return out;
}

inline void save_value_table(const std::string& path, const ValueTable& v, const Grid& grid) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write value table: " + path);
  f << value_table_csv(v, grid);
}

/// strtod-based parse that accepts subnormals and rejects trailing text.
inline double parse_double(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty number");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw std::invalid_argument("malformed number: " + s);
  if (errno == ERANGE && std::abs(x) > 1.0) throw std::out_of_range("number out of range: " + s);
  return x;
}

inline ValueTable parse_value_table(std::istream& in, const Grid& grid) {
  ValueTable v(grid.cell_count());
  std::vector<bool> seen(static_cast<std::size_t>(grid.cell_count()), false);
  std::string line;
  if (!std::getline(in, line) || line.rfind("cell_id", 0) != 0)
    throw std::runtime_error("value table: missing header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f0, f1, f2, f3;
    if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ',') ||
        !std::getline(ss, f3, ','))
      throw std::runtime_error(fmt::format("value table line {}: expected 4 fields", lineno));
    const auto bad = [&](const std::string& what) {
      return std::runtime_error(fmt::format("value table line {}: {}", lineno, what));
    };
    long long id = 0, row = 0, col = 0;
    double value = 0.0;
    try {
      std::size_t n0 = 0, n1 = 0, n2 = 0;
      id = std::stoll(f0, &n0);
      row = std::stoll(f1, &n1);
      col = std::stoll(f2, &n2);
      if (n0 != f0.size() || n1 != f1.size() || n2 != f2.size()) throw bad("malformed integer");
      value = parse_double(f3);
    } catch (const std::logic_error&) {
      throw bad("malformed number");
    }
    if (id < 0 || id >= grid.cell_count()) throw bad("cell id outside grid");
    const auto cell = grid.cell(static_cast<CellId>(id));
    if (cell.row != row || cell.col != col) throw bad("row/col mismatch");
    if (seen[static_cast<std::size_t>(id)]) throw bad("duplicate cell");
    if (!std::isfinite(value)) throw bad("non-finite value");
    v[cell.id] = value;
    seen[static_cast<std::size_t>(id)] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw std::runtime_error(fmt::format("value table: missing cell {}", i));
  return v;
}

inline ValueTable load_value_table(const std::string& path, const Grid& grid) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("value table file not found: " + path);
  return parse_value_table(f, grid);
}

}  // namespace rlw
