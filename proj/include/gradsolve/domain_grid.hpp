#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gradsolve/error.hpp"

namespace gradsolve {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Disk {
  double radius = 1.0;
  Point center{};
};

/// Axis-aligned rectangle centred at `center`.
struct Rectangle {
  double width = 1.0;
  double height = 1.0;
  Point center{};
};

struct Annulus {
  double inner = 0.5;
  double outer = 1.0;
  Point center{};
};

using Shape = std::variant<Disk, Rectangle, Annulus>;

struct Domain {
  Shape shape = Disk{};
  int dimension = 2;
};

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace detail

inline void validate(const Domain& domain) {
  if (domain.dimension != 2) {
    throw ConfigError("domain: only dimension 2 is supported by the grid solver (got " +
                      std::to_string(domain.dimension) + ")");
  }
  std::visit(detail::overloaded{
                 [](const Disk& d) {
                   if (!detail::finite_positive(d.radius)) throw ConfigError("domain: disk radius must be > 0");
                 },
                 [](const Rectangle& r) {
                   if (!detail::finite_positive(r.width) || !detail::finite_positive(r.height)) {
                     throw ConfigError("domain: rectangle widths must be > 0");
                   }
                 },
                 [](const Annulus& a) {
                   if (!(a.inner > 0.0) || !std::isfinite(a.outer) || !(a.inner < a.outer)) {
                     throw ConfigError("domain: annulus requires 0 < r_in < r_out");
                   }
                 }},
             domain.shape);
}

/// Closed-form Lebesgue measure |Omega|.
inline double measure(const Domain& domain) {
  constexpr double pi = std::numbers::pi;
  return std::visit(detail::overloaded{
                        [](const Disk& d) { return pi * d.radius * d.radius; },
                        [](const Rectangle& r) { return r.width * r.height; },
                        [](const Annulus& a) { return pi * (a.outer * a.outer - a.inner * a.inner); }},
                    domain.shape);
}

inline double perimeter(const Domain& domain) {
  constexpr double pi = std::numbers::pi;
  return std::visit(detail::overloaded{
                        [](const Disk& d) { return 2.0 * pi * d.radius; },
                        [](const Rectangle& r) { return 2.0 * (r.width + r.height); },
                        [](const Annulus& a) { return 2.0 * pi * (a.outer + a.inner); }},
                    domain.shape);
}

/// Open-set membership: boundary points are not contained.
inline bool contains(const Domain& domain, Point p) {
  return std::visit(detail::overloaded{
                        [&](const Disk& d) { return distance(p, d.center) < d.radius; },
                        [&](const Rectangle& r) {
                          return std::abs(p.x - r.center.x) < 0.5 * r.width &&
                                 std::abs(p.y - r.center.y) < 0.5 * r.height;
                        },
                        [&](const Annulus& a) {
                          const double rho = distance(p, a.center);
                          return rho > a.inner && rho < a.outer;
                        }},
                    domain.shape);
}

/// Unsigned distance from p to the boundary of the domain.
inline double distance_to_boundary(const Domain& domain, Point p) {
  return std::visit(detail::overloaded{
                        [&](const Disk& d) { return std::abs(distance(p, d.center) - d.radius); },
                        [&](const Rectangle& r) {
                          const double dx = std::abs(p.x - r.center.x) - 0.5 * r.width;
                          const double dy = std::abs(p.y - r.center.y) - 0.5 * r.height;
                          if (dx <= 0.0 && dy <= 0.0) return std::min(-dx, -dy);
                          return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
                        },
                        [&](const Annulus& a) {
                          const double rho = distance(p, a.center);
                          return std::min(std::abs(rho - a.inner), std::abs(rho - a.outer));
                        }},
                    domain.shape);
}

namespace detail {

// Segment p + t*d, p strictly inside the circle: the unique t > 0 on the circle.
inline double circle_exit(Point p, Point d, Point c, double radius) {
  const double px = p.x - c.x;
  const double py = p.y - c.y;
  const double a = d.x * d.x + d.y * d.y;
  const double b = px * d.x + py * d.y;
  const double c0 = (px * px + py * py) - radius * radius;  // < 0
  const double root = std::sqrt(b * b - a * c0);
  return b > 0.0 ? -c0 / (b + root) : (root - b) / a;
}

// Segment p + t*d, p strictly outside the circle: first t > 0 on the circle, if any.
inline std::optional<double> circle_entry(Point p, Point d, Point c, double radius) {
  const double px = p.x - c.x;
  const double py = p.y - c.y;
  const double a = d.x * d.x + d.y * d.y;
  const double b = px * d.x + py * d.y;
  const double c0 = (px * px + py * py) - radius * radius;  // > 0
  if (b >= 0.0) return std::nullopt;
  const double disc = b * b - a * c0;
  if (disc < 0.0) return std::nullopt;
  return c0 / (std::sqrt(disc) - b);
}

}  // namespace detail

/// For p inside the domain, the smallest t in (0, 1] at which the segment
/// p -> q meets the boundary, or nullopt if the closed segment stays inside.
inline std::optional<double> first_exit(const Domain& domain, Point p, Point q) {
  const Point d{q.x - p.x, q.y - p.y};
  std::optional<double> t;
  std::visit(detail::overloaded{
                 [&](const Disk& disk) { t = detail::circle_exit(p, d, disk.center, disk.radius); },
                 [&](const Rectangle& r) {
                   double best = std::numeric_limits<double>::infinity();
                   if (d.x > 0.0) best = std::min(best, (r.center.x + 0.5 * r.width - p.x) / d.x);
                   if (d.x < 0.0) best = std::min(best, (r.center.x - 0.5 * r.width - p.x) / d.x);
                   if (d.y > 0.0) best = std::min(best, (r.center.y + 0.5 * r.height - p.y) / d.y);
                   if (d.y < 0.0) best = std::min(best, (r.center.y - 0.5 * r.height - p.y) / d.y);
                   t = best;
                 },
                 [&](const Annulus& a) {
                   double best = detail::circle_exit(p, d, a.center, a.outer);
                   if (auto in = detail::circle_entry(p, d, a.center, a.inner)) best = std::min(best, *in);
                   t = best;
                 }},
             domain.shape);
  if (t && *t <= 1.0) return t;
  return std::nullopt;
}

enum class NodeClass : std::uint8_t { interior, boundary_adjacent, exterior };

/// The eight lattice directions used by the stencils. Opposite directions are
/// adjacent (2k, 2k+1); lines 0..3 are x, y, (1,1) and (1,-1).
inline constexpr std::array<std::array<int, 2>, 8> kDirections{{
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};
inline constexpr int kNumDirections = 8;
inline constexpr int kNumLines = 4;

/// One stencil arm: theta in (0, 1] is the fraction of the lattice step that
/// lies inside the domain; neighbor is the active-node index or -1 when the
/// arm ends on the boundary.
struct Arm {
  double theta = 1.0;
  std::int32_t neighbor = -1;
};

/// Cell-centred lattice over the bounding box of a domain. Only non-exterior
/// nodes are stored ("active" nodes); fields are indexed by active node.
class Grid {
 public:
  const Domain& domain() const noexcept { return domain_; }
  double spacing() const noexcept { return h_; }
  int dimension() const noexcept { return 2; }
  double cell_measure() const noexcept { return h_ * h_; }
  std::size_t size() const noexcept { return position_.size(); }
  double total_measure() const noexcept { return static_cast<double>(size()) * cell_measure(); }

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  Point origin() const noexcept { return origin_; }

  Point position(std::size_t node) const { return position_[node]; }
  NodeClass node_class(std::size_t node) const { return class_[node]; }
  const Arm& arm(std::size_t node, int direction) const { return arm_[node * kNumDirections + direction]; }

  /// Physical step length of a direction before arm truncation.
  double step_length(int direction) const { return direction < 4 ? h_ : h_ * std::numbers::sqrt2; }

  /// End point of an arm (a boundary point when neighbor < 0).
  Point arm_point(std::size_t node, int direction) const {
    const Point p = position_[node];
    const double t = arm(node, direction).theta * h_;
    return {p.x + t * kDirections[direction][0], p.y + t * kDirections[direction][1]};
  }

  Point lattice_point(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
  NodeClass lattice_class(int i, int j) const {
    const auto k = lattice_to_active_[static_cast<std::size_t>(j) * nx_ + i];
    return k < 0 ? NodeClass::exterior : class_[static_cast<std::size_t>(k)];
  }
  std::int32_t lattice_to_active(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
    return lattice_to_active_[static_cast<std::size_t>(j) * nx_ + i];
  }
  std::array<int, 2> lattice_index(std::size_t node) const { return lattice_index_[node]; }

 private:
  friend Grid build_grid(const Domain& domain, int resolution);

  Domain domain_;
  double h_ = 0.0;
  int nx_ = 0;
  int ny_ = 0;
  Point origin_{};
  std::vector<Point> position_;
  std::vector<NodeClass> class_;
  std::vector<Arm> arm_;
  std::vector<std::array<int, 2>> lattice_index_;
  std::vector<std::int32_t> lattice_to_active_;
};

/// Builds the Shortley-Weller lattice: h = (bounding-box width) / resolution
/// (the longer side for rectangles), nodes at cell centres.
inline Grid build_grid(const Domain& domain, int resolution) {
  if (resolution < 8) throw ContractViolation("build_grid: resolution must be >= 8");
  validate(domain);

  Grid g;
  g.domain_ = domain;
  std::visit(detail::overloaded{
                 [&](const Disk& d) {
                   g.h_ = 2.0 * d.radius / resolution;
                   g.nx_ = g.ny_ = resolution;
                   g.origin_ = {d.center.x - d.radius + 0.5 * g.h_, d.center.y - d.radius + 0.5 * g.h_};
                 },
                 [&](const Rectangle& r) {
                   g.h_ = std::max(r.width, r.height) / resolution;
                   g.nx_ = static_cast<int>(std::ceil(r.width / g.h_ - 1e-9));
                   g.ny_ = static_cast<int>(std::ceil(r.height / g.h_ - 1e-9));
                   g.origin_ = {r.center.x - 0.5 * (g.nx_ - 1) * g.h_, r.center.y - 0.5 * (g.ny_ - 1) * g.h_};
                 },
                 [&](const Annulus& a) {
                   g.h_ = 2.0 * a.outer / resolution;
                   g.nx_ = g.ny_ = resolution;
                   g.origin_ = {a.center.x - a.outer + 0.5 * g.h_, a.center.y - a.outer + 0.5 * g.h_};
                 }},
             domain.shape);

  g.lattice_to_active_.assign(static_cast<std::size_t>(g.nx_) * g.ny_, -1);
  for (int j = 0; j < g.ny_; ++j) {
    for (int i = 0; i < g.nx_; ++i) {
      const Point p = g.lattice_point(i, j);
      if (!contains(domain, p)) continue;
      g.lattice_to_active_[static_cast<std::size_t>(j) * g.nx_ + i] = static_cast<std::int32_t>(g.position_.size());
      g.position_.push_back(p);
      g.lattice_index_.push_back({i, j});
    }
  }

  const std::size_t n = g.position_.size();
  g.class_.assign(n, NodeClass::interior);
  g.arm_.assign(n * kNumDirections, Arm{});
  for (std::size_t k = 0; k < n; ++k) {
    const Point p = g.position_[k];
    const auto [i, j] = g.lattice_index_[k];
    for (int dir = 0; dir < kNumDirections; ++dir) {
      const int di = kDirections[dir][0];
      const int dj = kDirections[dir][1];
      const Point q{p.x + di * g.h_, p.y + dj * g.h_};
      Arm& arm = g.arm_[k * kNumDirections + dir];
      if (auto t = first_exit(domain, p, q)) {
        arm.theta = *t;
        arm.neighbor = -1;
        g.class_[k] = NodeClass::boundary_adjacent;
      } else {
        arm.theta = 1.0;
        arm.neighbor = g.lattice_to_active(i + di, j + dj);
        if (arm.neighbor < 0) {
          // Neighbour inside the domain but outside the lattice cannot happen
          // for the supported shapes; guard anyway.
          throw ContractViolation("build_grid: stencil neighbour outside lattice");
        }
      }
    }
  }
  return g;
}

/// Dirichlet data g. Built-in families plus a scattered point table.
struct ConstantBoundary {
  double value = 0.0;
};

/// g(x, y) = c0 + cx * x + cy * y
struct AffineBoundary {
  double c0 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// g depends on the distance to `center`; piecewise-linear in r, clamped.
struct RadialTableBoundary {
  std::vector<std::pair<double, double>> table;  // (r, g), r increasing
  Point center{};
};

/// Scattered samples (x, y, g); evaluation returns the nearest sample.
struct PointTableBoundary {
  std::vector<std::array<double, 3>> samples;
};

using BoundarySpec = std::variant<ConstantBoundary, AffineBoundary, RadialTableBoundary, PointTableBoundary>;

inline void validate(const BoundarySpec& g) {
  if (auto* t = std::get_if<RadialTableBoundary>(&g)) {
    if (t->table.empty()) throw ConfigError("g: radial table must have at least one entry");
    for (std::size_t k = 1; k < t->table.size(); ++k) {
      if (!(t->table[k].first > t->table[k - 1].first)) {
        throw ConfigError("g: radial table radii must be strictly increasing at entry " + std::to_string(k));
      }
    }
  }
  if (auto* t = std::get_if<PointTableBoundary>(&g); t && t->samples.empty()) {
    throw ConfigError("g: point table must have at least one sample");
  }
}

/// Evaluates g anywhere (no boundary check).
inline double evaluate(const BoundarySpec& g, Point p) {
  return std::visit(detail::overloaded{
                        [](const ConstantBoundary& c) { return c.value; },
                        [&](const AffineBoundary& a) { return a.c0 + a.cx * p.x + a.cy * p.y; },
                        [&](const RadialTableBoundary& t) {
                          const double r = distance(p, t.center);
                          const auto& tab = t.table;
                          if (r <= tab.front().first) return tab.front().second;
                          if (r >= tab.back().first) return tab.back().second;
                          auto it = std::upper_bound(tab.begin(), tab.end(), r,
                                                     [](double v, const auto& e) { return v < e.first; });
                          const auto& hi = *it;
                          const auto& lo = *(it - 1);
                          const double s = (r - lo.first) / (hi.first - lo.first);
                          return lo.second + s * (hi.second - lo.second);
                        },
                        [&](const PointTableBoundary& t) {
                          double best = std::numeric_limits<double>::infinity();
                          double value = 0.0;
                          for (const auto& s : t.samples) {
                            const double d = std::hypot(p.x - s[0], p.y - s[1]);
                            if (d < best) {
                              best = d;
                              value = s[2];
                            }
                          }
                          return value;
                        }},
                    g);
}

/// g at a point of the boundary; `tolerance` bounds the allowed distance to it.
inline double boundary_value(const BoundarySpec& g, const Domain& domain, Point p, double tolerance) {
  if (distance_to_boundary(domain, p) > tolerance) {
    throw ContractViolation("boundary_value: point is not on the boundary");
  }
  return evaluate(g, p);
}

/// g sampled at every boundary arm end point of a grid. Entries for arms that
/// end at an active neighbour are unused (zero).
class BoundaryValues {
 public:
  BoundaryValues() = default;
  BoundaryValues(const Grid& grid, const BoundarySpec& g) : values_(grid.size() * kNumDirections, 0.0) {
    const double tol = 1e-9 * (1.0 + grid.spacing());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (int dir = 0; dir < kNumDirections; ++dir) {
        if (grid.arm(k, dir).neighbor < 0) {
          values_[k * kNumDirections + dir] = boundary_value(g, grid.domain(), grid.arm_point(k, dir), tol);
        }
      }
    }
  }

  double at(std::size_t node, int direction) const { return values_[node * kNumDirections + direction]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  std::pair<double, double> range(const Grid& grid) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (int dir = 0; dir < kNumDirections; ++dir) {
        if (grid.arm(k, dir).neighbor < 0) {
          lo = std::min(lo, at(k, dir));
          hi = std::max(hi, at(k, dir));
        }
      }
    }
    return {lo, hi};
  }

 private:
  std::vector<double> values_;
};

}  // namespace gradsolve
