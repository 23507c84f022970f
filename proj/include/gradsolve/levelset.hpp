#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradsolve/domain_grid.hpp"
#include "gradsolve/error.hpp"

namespace gradsolve {

/// Non-decreasing, non-negative piecewise-linear profile f on [s_0, s_last],
/// clamped outside.
class MonotoneRHS {
 public:
  MonotoneRHS() : MonotoneRHS(std::vector<std::pair<double, double>>{{0.0, 0.0}}) {}

  explicit MonotoneRHS(std::vector<std::pair<double, double>> breakpoints) : bp_(std::move(breakpoints)) {
    if (bp_.empty()) throw ConfigError("f must have at least one breakpoint");
    for (std::size_t k = 0; k < bp_.size(); ++k) check_breakpoint(bp_, k);
  }

  /// Validates breakpoint k against breakpoint k - 1.
  static void check_breakpoint(const std::vector<std::pair<double, double>>& bp, std::size_t k) {
    const auto [s, v] = bp[k];
    if (!std::isfinite(s) || !std::isfinite(v)) throw ConfigError("f breakpoint " + std::to_string(k) + " is not finite");
    if (v < 0.0) throw ConfigError("f must be non-negative at breakpoint " + std::to_string(k));
    if (k == 0) return;
    if (!(s > bp[k - 1].first)) {
      throw ConfigError("f breakpoints must have strictly increasing s at breakpoint " + std::to_string(k));
    }
    if (v < bp[k - 1].second) throw ConfigError("f must be non-decreasing at breakpoint " + std::to_string(k));
  }

  static MonotoneRHS constant(double c) { return MonotoneRHS({{0.0, c}}); }

  /// f(s) = slope * s on [0, s_max].
  static MonotoneRHS linear(double slope, double s_max) { return MonotoneRHS({{0.0, 0.0}, {s_max, slope * s_max}}); }

  double operator()(double s) const {
    if (s <= bp_.front().first) return bp_.front().second;
    if (s >= bp_.back().first) return bp_.back().second;
    auto it = std::upper_bound(bp_.begin(), bp_.end(), s, [](double x, const auto& e) { return x < e.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    return lo.second + (hi.second - lo.second) * ((s - lo.first) / (hi.first - lo.first));
  }

  bool is_constant() const { return bp_.front().second == bp_.back().second; }
  double max_value() const { return bp_.back().second; }
  const std::vector<std::pair<double, double>>& breakpoints() const { return bp_; }

 private:
  std::vector<std::pair<double, double>> bp_;
};

/// mu(s) = |{v >= s}| of a discrete field, as a step function over the
/// sorted distinct values.
class DistributionFunction {
 public:
  DistributionFunction(std::span<const double> values, std::span<const double> measures) {
    if (values.empty()) throw ContractViolation("distribution_function: empty field");
    if (values.size() != measures.size()) throw ContractViolation("distribution_function: size mismatch");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    // Walk from the top so mu accumulates as a suffix sum.
    double acc = 0.0;
    for (std::size_t r = order.size(); r-- > 0;) {
      const double v = values[order[r]];
      acc += measures[order[r]];
      if (!values_.empty() && values_.back() == v) {
        mu_.back() = acc;
        mass_.back() += measures[order[r]];
      } else {
        values_.push_back(v);
        mu_.push_back(acc);
        mass_.push_back(measures[order[r]]);
      }
    }
    std::reverse(values_.begin(), values_.end());
    std::reverse(mu_.begin(), mu_.end());
    std::reverse(mass_.begin(), mass_.end());
    total_ = acc;
  }

  /// |{v >= s}|
  double operator()(double s) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), s);
    if (it == values_.end()) return 0.0;
    return mu_[static_cast<std::size_t>(it - values_.begin())];
  }

  /// |{v < s}|
  double below(double s) const { return total_ - (*this)(s); }

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& cumulative() const { return mu_; }
  /// Measure carried by each distinct value.
  const std::vector<double>& masses() const { return mass_; }
  double total_measure() const { return total_; }

 private:
  std::vector<double> values_;  // ascending, distinct
  std::vector<double> mu_;      // mu_[k] = |{v >= values_[k]}|
  std::vector<double> mass_;
  double total_ = 0.0;
};

inline DistributionFunction distribution_function(std::span<const double> values, std::span<const double> measures) {
  return DistributionFunction(values, measures);
}

inline std::vector<double> uniform_measures(const Grid& grid) { return std::vector<double>(grid.size(), grid.cell_measure()); }

inline DistributionFunction distribution_function(std::span<const double> v, const Grid& grid) {
  const auto m = uniform_measures(grid);
  return DistributionFunction(v, m);
}

/// Per node x: |{v >= v(x)}|.
inline std::vector<double> superlevel_measures(std::span<const double> v, std::span<const double> measures) {
  const DistributionFunction mu(v, measures);
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = mu(v[k]);
  return out;
}

/// h(x) = f(|{v >= v(x)}|).
inline std::vector<double> h_exact(std::span<const double> v, const MonotoneRHS& f, std::span<const double> measures) {
  auto out = superlevel_measures(v, measures);
  for (double& s : out) s = f(s);
  return out;
}

inline std::vector<double> h_exact(std::span<const double> v, const MonotoneRHS& f, const Grid& grid) {
  const auto m = uniform_measures(grid);
  return h_exact(v, f, m);
}

/// Window average i * int_0^{1/i} |{v >= v(x) - t}| dt, evaluated exactly:
/// a node k with 0 < v(x) - v_k <= 1/i contributes m_k * (1 - i (v(x) - v_k)).
inline std::vector<double> mollified_superlevel_measures(std::span<const double> v, int i,
                                                         std::span<const double> measures) {
  if (i < 1) throw ContractViolation("h_mollified: index i must be >= 1");
  const DistributionFunction mu(v, measures);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> sorted(v.size());
  for (std::size_t r = 0; r < order.size(); ++r) sorted[r] = v[order[r]];

  const double width = 1.0 / static_cast<double>(i);
  const double scale = static_cast<double>(i);
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double vx = v[k];
    // Nodes strictly below vx, scanned downward from the first value < vx.
    auto first_equal = std::lower_bound(sorted.begin(), sorted.end(), vx);
    double extra = 0.0;
    for (auto r = static_cast<std::ptrdiff_t>(first_equal - sorted.begin()) - 1; r >= 0; --r) {
      const double gap = vx - sorted[static_cast<std::size_t>(r)];
      if (gap > width) break;
      const double w = 1.0 - scale * gap;
      if (w > 0.0) extra += measures[order[static_cast<std::size_t>(r)]] * w;
    }
    out[k] = mu(vx) + extra;
  }
  return out;
}

/// h^i(x) = f(i * int_0^{1/i} |{v >= v(x) - t}| dt).
inline std::vector<double> h_mollified(std::span<const double> v, const MonotoneRHS& f, int i,
                                       std::span<const double> measures) {
  auto out = mollified_superlevel_measures(v, i, measures);
  for (double& s : out) s = f(s);
  return out;
}

inline std::vector<double> h_mollified(std::span<const double> v, const MonotoneRHS& f, int i, const Grid& grid) {
  const auto m = uniform_measures(grid);
  return h_mollified(v, f, i, m);
}

/// u*(t) = inf{s : |{v < s}| >= t}. Since |{v < s}| jumps just above each
/// field value, the infimum is the smallest value v_j with |{v <= v_j}| >= t
/// (the minimum for t = 0, +inf if no value qualifies).
inline double decreasing_rearrangement(std::span<const double> v, std::span<const double> measures, double t) {
  const DistributionFunction mu(v, measures);
  const double total = mu.total_measure();
  const double slack = 1e-12 * total;
  if (!(t >= -slack) || !(t <= total + slack)) {
    throw ContractViolation("decreasing_rearrangement: t must lie in [0, |Omega|]");
  }
  const auto& vals = mu.values();
  const auto& mass = mu.masses();
  double at_or_below = 0.0;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    at_or_below += mass[k];
    if (at_or_below >= t) return vals[k];
  }
  return std::numeric_limits<double>::infinity();
}

inline double decreasing_rearrangement(std::span<const double> v, const Grid& grid, double t) {
  const auto m = uniform_measures(grid);
  return decreasing_rearrangement(v, m, t);
}

/// Smallest positive gap between distinct values of v (+inf if constant).
inline double minimal_value_gap(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k] > s[k - 1]) gap = std::min(gap, s[k] - s[k - 1]);
  }
  return gap;
}

}  // namespace gradsolve
