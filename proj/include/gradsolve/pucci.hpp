#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gradsolve/domain_grid.hpp"
#include "gradsolve/error.hpp"

namespace gradsolve {

/// Symmetric N x N matrix stored as its upper triangle, row major.
template <int N>
class SymMatrix {
  static_assert(N == 2 || N == 3, "SymMatrix supports N = 2 and N = 3");

 public:
  static constexpr int kSize = N * (N + 1) / 2;

  SymMatrix() = default;

  static SymMatrix identity() {
    SymMatrix m;
    for (int i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }

  static SymMatrix diagonal(const std::array<double, N>& d) {
    SymMatrix m;
    for (int i = 0; i < N; ++i) m(i, i) = d[i];
    return m;
  }

  double& operator()(int i, int j) { return data_[index(i, j)]; }
  double operator()(int i, int j) const { return data_[index(i, j)]; }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < N; ++i) t += (*this)(i, i);
    return t;
  }

  SymMatrix& operator+=(const SymMatrix& o) {
    for (int k = 0; k < kSize; ++k) data_[k] += o.data_[k];
    return *this;
  }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) {
    for (int k = 0; k < kSize; ++k) a.data_[k] -= b.data_[k];
    return a;
  }
  friend SymMatrix operator*(double s, SymMatrix a) {
    for (auto& v : a.data_) v *= s;
    return a;
  }

 private:
  static constexpr int index(int i, int j) {
    if (i > j) std::swap(i, j);
    return i * N - i * (i - 1) / 2 + (j - i);
  }
  std::array<double, kSize> data_{};
};

/// 0 < lambda <= Lambda.
struct Ellipticity {
  double lambda = 1.0;
  double Lambda = 1.0;
};

inline void validate(const Ellipticity& ell) {
  if (!(ell.lambda > 0.0) || !std::isfinite(ell.Lambda)) throw ConfigError("ellipticity: lambda must be > 0");
  if (!(ell.lambda <= ell.Lambda)) throw ConfigError("ellipticity: requires lambda <= Lambda");
}

/// Eigenvalues in ascending order, closed form.
inline std::array<double, 2> eigenvalues(const SymMatrix<2>& s) {
  const double half_tr = 0.5 * (s(0, 0) + s(1, 1));
  const double half_diff = 0.5 * (s(0, 0) - s(1, 1));
  const double rad = std::hypot(half_diff, s(0, 1));
  return {half_tr - rad, half_tr + rad};
}

/// Trigonometric solution of the characteristic cubic.
inline std::array<double, 3> eigenvalues(const SymMatrix<3>& s) {
  const double p1 = s(0, 1) * s(0, 1) + s(0, 2) * s(0, 2) + s(1, 2) * s(1, 2);
  const double q = s.trace() / 3.0;
  const double d0 = s(0, 0) - q;
  const double d1 = s(1, 1) - q;
  const double d2 = s(2, 2) - q;
  const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
  if (p2 <= 0.0) return {q, q, q};
  const double p = std::sqrt(p2 / 6.0);
  // B = (S - qI) / p, r = det(B) / 2
  const double b00 = d0 / p, b11 = d1 / p, b22 = d2 / p;
  const double b01 = s(0, 1) / p, b02 = s(0, 2) / p, b12 = s(1, 2) / p;
  const double det = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) + b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(0.5 * det, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e_max = q + 2.0 * p * std::cos(phi);
  const double e_min = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double e_mid = 3.0 * q - e_max - e_min;
  return {e_min, e_mid, e_max};
}

/// Pucci maximal operator: Lambda * (sum of e_i >= 0) + lambda * (sum of e_i < 0).
template <int N>
double pucci_plus_exact(const SymMatrix<N>& s, const Ellipticity& ell) {
  double pos = 0.0;
  double neg = 0.0;
  for (double e : eigenvalues(s)) {
    if (e >= 0.0) {
      pos += e;
    } else {
      neg += e;
    }
  }
  return ell.Lambda * pos + ell.lambda * neg;
}

/// Orthonormal frames of lattice lines. Line l covers directions 2l and 2l+1
/// of kDirections; a frame is a pair of mutually orthogonal lines.
struct FrameSet {
  std::vector<std::array<int, 2>> frames;

  static FrameSet axis_and_diagonal() { return {{{0, 1}, {2, 3}}}; }
  static FrameSet axis_only() { return {{{0, 1}}}; }
};

inline void validate(const FrameSet& fs) {
  if (fs.frames.empty()) throw ConfigError("frames: at least one frame is required");
  for (const auto& f : fs.frames) {
    for (int l : f) {
      if (l < 0 || l >= kNumLines) throw ConfigError("frames: line index out of range");
    }
    const auto& a = kDirections[2 * f[0]];
    const auto& b = kDirections[2 * f[1]];
    if (a[0] * b[0] + a[1] * b[1] != 0) throw ConfigError("frames: lines within a frame must be orthogonal");
  }
}

/// Precomputed finite-difference weights for every active node. Second
/// differences use Shortley-Weller arms; a neighbour index < 0 means the value
/// comes from the boundary table.
class Stencil {
 public:
  struct Line {
    double w_plus = 0.0;   // weight of the +direction value
    double w_minus = 0.0;  // weight of the -direction value
    std::int32_t plus = -1;
    std::int32_t minus = -1;
    double g_plus = 0.0;
    double g_minus = 0.0;

    double center_weight() const { return w_plus + w_minus; }
  };

  /// Three-point first derivative along an axis with arms a (+) and b (-).
  struct Slope {
    double w_plus = 0.0;
    double w_minus = 0.0;
    double w_center = 0.0;
    double inv_plus = 0.0;  // 1 / arm length
    double inv_minus = 0.0;
    std::int32_t plus = -1;
    std::int32_t minus = -1;
    double g_plus = 0.0;
    double g_minus = 0.0;
  };

  Stencil() = default;
  Stencil(const Grid& grid, const BoundaryValues& bc) : grid_(&grid), lines_(grid.size() * kNumLines), slopes_(grid.size() * 2) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (int l = 0; l < kNumLines; ++l) {
        const int dp = 2 * l;
        const int dm = 2 * l + 1;
        const Arm& ap = grid.arm(k, dp);
        const Arm& am = grid.arm(k, dm);
        const double a = ap.theta * grid.step_length(dp);
        const double b = am.theta * grid.step_length(dm);
        Line& line = lines_[k * kNumLines + l];
        line.w_plus = 2.0 / (a * (a + b));
        line.w_minus = 2.0 / (b * (a + b));
        line.plus = ap.neighbor;
        line.minus = am.neighbor;
        line.g_plus = ap.neighbor < 0 ? bc.at(k, dp) : 0.0;
        line.g_minus = am.neighbor < 0 ? bc.at(k, dm) : 0.0;
        if (l < 2) {
          Slope& s = slopes_[k * 2 + l];
          const double denom = a * b * (a + b);
          s.w_plus = b * b / denom;
          s.w_minus = -a * a / denom;
          s.w_center = (a * a - b * b) / denom;
          s.inv_plus = 1.0 / a;
          s.inv_minus = 1.0 / b;
          s.plus = ap.neighbor;
          s.minus = am.neighbor;
          s.g_plus = line.g_plus;
          s.g_minus = line.g_minus;
        }
      }
    }
  }

  const Grid& grid() const { return *grid_; }
  std::size_t size() const { return grid_->size(); }
  const Line& line(std::size_t node, int l) const { return lines_[node * kNumLines + l]; }
  const Slope& slope(std::size_t node, int axis) const { return slopes_[node * 2 + axis]; }

  double second_difference(std::span<const double> u, std::size_t node, int l) const {
    const Line& ln = line(node, l);
    const double up = ln.plus >= 0 ? u[ln.plus] : ln.g_plus;
    const double um = ln.minus >= 0 ? u[ln.minus] : ln.g_minus;
    const double u0 = u[node];
    return ln.w_plus * (up - u0) + ln.w_minus * (um - u0);
  }

  double first_difference(std::span<const double> u, std::size_t node, int axis) const {
    const Slope& s = slope(node, axis);
    const double up = s.plus >= 0 ? u[s.plus] : s.g_plus;
    const double um = s.minus >= 0 ? u[s.minus] : s.g_minus;
    return s.w_plus * up + s.w_minus * um + s.w_center * u[node];
  }

  /// Forward and backward differences along an axis.
  std::array<double, 2> one_sided_differences(std::span<const double> u, std::size_t node, int axis) const {
    const Slope& s = slope(node, axis);
    const double up = s.plus >= 0 ? u[s.plus] : s.g_plus;
    const double um = s.minus >= 0 ? u[s.minus] : s.g_minus;
    return {(up - u[node]) * s.inv_plus, (u[node] - um) * s.inv_minus};
  }

 private:
  const Grid* grid_ = nullptr;
  std::vector<Line> lines_;
  std::vector<Slope> slopes_;
};

inline double pucci_line_term(double delta, const Ellipticity& ell) {
  return delta >= 0.0 ? ell.Lambda * delta : ell.lambda * delta;
}

struct FrameChoice {
  double value = 0.0;
  int frame = 0;
};

/// max over frames of sum_lines [Lambda (delta)^+ - lambda (delta)^-].
inline FrameChoice pucci_plus_discrete_choice(const Stencil& st, std::span<const double> u, std::size_t node,
                                              const FrameSet& frames, const Ellipticity& ell) {
  FrameChoice best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t f = 0; f < frames.frames.size(); ++f) {
    double v = 0.0;
    for (int l : frames.frames[f]) v += pucci_line_term(st.second_difference(u, node, l), ell);
    if (v > best.value) best = {v, static_cast<int>(f)};
  }
  return best;
}

inline double pucci_plus_discrete(const Stencil& st, std::span<const double> u, std::size_t node,
                                  const FrameSet& frames, const Ellipticity& ell) {
  return pucci_plus_discrete_choice(st, u, node, frames, ell).value;
}

/// Axis second-difference sum (the epsilon-Laplacian term).
inline double laplacian_discrete(const Stencil& st, std::span<const double> u, std::size_t node) {
  return st.second_difference(u, node, 0) + st.second_difference(u, node, 1);
}

inline std::array<double, 2> gradient_central(const Stencil& st, std::span<const double> u, std::size_t node) {
  return {st.first_difference(u, node, 0), st.first_difference(u, node, 1)};
}

/// Per axis sqrt((D+^2 + D-^2) / 2). Its norm squared is |Du|^2 + O(h^2) on
/// smooth fields, but unlike the centred gradient it does not vanish on
/// odd-even oscillations.
inline std::array<double, 2> gradient_one_sided(const Stencil& st, std::span<const double> u, std::size_t node) {
  std::array<double, 2> g{};
  for (int axis = 0; axis < 2; ++axis) {
    const auto [fwd, bwd] = st.one_sided_differences(u, node, axis);
    g[axis] = std::sqrt(0.5 * (fwd * fwd + bwd * bwd));
  }
  return g;
}

/// |gradient|^gamma, with the convention 0^0 = 1.
inline double degeneracy_factor(std::span<const double> gradient, double gamma) {
  if (gamma == 0.0) return 1.0;
  double sq = 0.0;
  for (double g : gradient) sq += g * g;
  const double norm = std::sqrt(sq);
  if (gamma == 1.0) return norm;
  return std::pow(norm, gamma);
}

inline double degeneracy_factor(const std::array<double, 2>& gradient, double gamma) {
  return degeneracy_factor(std::span<const double>(gradient), gamma);
}

}  // namespace gradsolve
