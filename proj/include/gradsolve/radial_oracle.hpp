#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "gradsolve/csv.hpp"
#include "gradsolve/error.hpp"
#include "gradsolve/levelset.hpp"
#include "gradsolve/pucci.hpp"

namespace gradsolve {

/// Samples of a radial profile u(r) on r_k = k R / (n - 1), with w = u'.
struct RadialProfile {
  std::vector<double> radii;
  std::vector<double> u;
  std::vector<double> w;
  double gamma = 1.0;
  Ellipticity ell{};
  int dimension = 2;
  double radius = 1.0;
  double boundary_value = 0.0;
  bool valid = true;
  /// Number of sign changes of u'' along the samples.
  int curvature_sign_changes = 0;

  /// Piecewise-linear interpolation, clamped to [0, R].
  double value_at(double r) const {
    if (r <= radii.front()) return u.front();
    if (r >= radii.back()) return u.back();
    const double step = radii[1] - radii[0];
    auto k = static_cast<std::size_t>(r / step);
    k = std::min(k, radii.size() - 2);
    const double t = (r - radii[k]) / step;
    return (1.0 - t) * u[k] + t * u[k + 1];
  }
};

/// Volume of the unit ball.
inline double omega_N(int dimension) {
  switch (dimension) {
    case 2:
      return std::numbers::pi;
    case 3:
      return 4.0 * std::numbers::pi / 3.0;
    default:
      throw ContractViolation("omega_N: dimension must be 2 or 3");
  }
}

namespace detail {

inline void check_radial_inputs(double gamma, const Ellipticity& ell, int dimension, double radius, int samples) {
  if (!(gamma >= 0.0)) throw ContractViolation("radial oracle: gamma must be >= 0");
  validate(ell);
  if (dimension != 2 && dimension != 3) throw ContractViolation("radial oracle: dimension must be 2 or 3");
  if (!(radius > 0.0)) throw ContractViolation("radial oracle: radius must be > 0");
  if (samples < 2) throw ContractViolation("radial oracle: at least 2 intervals are required");
}

inline std::vector<double> uniform_radii(double radius, int samples) {
  std::vector<double> r(static_cast<std::size_t>(samples) + 1);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = radius * static_cast<double>(k) / samples;
  r.back() = radius;
  return r;
}

}  // namespace detail

/// Solution for f = c: u = g - a (R^{b+1} - r^{b+1}) / (b+1), b = 1/(gamma+1),
/// a = (c / (Lambda (b + N - 1)))^{1/(gamma+1)}. Convex and increasing, so
/// every Hessian eigenvalue takes the Lambda branch.
struct ConstantRHSSolution {
  double beta = 1.0;
  double a = 0.0;
  double radius = 1.0;
  double boundary_value = 0.0;

  ConstantRHSSolution(double gamma, const Ellipticity& ell, int dimension, double c, double radius_, double g_const)
      : beta(1.0 / (gamma + 1.0)),
        a(std::pow(c / (ell.Lambda * (beta + dimension - 1)), 1.0 / (gamma + 1.0))),
        radius(radius_),
        boundary_value(g_const) {}

  double value(double r) const {
    return boundary_value - a * (std::pow(radius, beta + 1.0) - std::pow(r, beta + 1.0)) / (beta + 1.0);
  }
  double derivative(double r) const { return a * std::pow(r, beta); }
};

inline RadialProfile closed_form_constant_rhs(double gamma, const Ellipticity& ell, int dimension, double c,
                                              double radius, double g_const, int samples = 4096) {
  detail::check_radial_inputs(gamma, ell, dimension, radius, samples);
  if (!(c >= 0.0)) throw ContractViolation("closed_form_constant_rhs: c must be >= 0");
  const ConstantRHSSolution sol(gamma, ell, dimension, c, radius, g_const);
  RadialProfile p;
  p.gamma = gamma;
  p.ell = ell;
  p.dimension = dimension;
  p.radius = radius;
  p.boundary_value = g_const;
  p.radii = detail::uniform_radii(radius, samples);
  p.u.resize(p.radii.size());
  p.w.resize(p.radii.size());
  for (std::size_t k = 0; k < p.radii.size(); ++k) {
    p.u[k] = sol.value(p.radii[k]);
    p.w[k] = sol.derivative(p.radii[k]);
  }
  return p;
}

/// Radial form of the operator applied to a profile, minus f_of_r, with w and
/// w' recovered from u by central differences. Returns the max |residual|
/// over r in [R/10, R (1 - 1/256)].
inline double verify_radial_substitution(const RadialProfile& p, const std::function<double(double)>& f_of_r) {
  const auto n = p.radii.size();
  if (n < 257) throw ContractViolation("verify_radial_substitution: need at least 256 radii");
  const double dr = p.radii[1] - p.radii[0];
  const double lo = p.radius / 10.0;
  const double hi = p.radius * (1.0 - 1.0 / 256.0);
  const auto split = [&](double x) { return x >= 0.0 ? p.ell.Lambda * x : p.ell.lambda * x; };
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double r = p.radii[k];
    if (r < lo || r > hi) continue;
    const double w = (p.u[k + 1] - p.u[k - 1]) / (2.0 * dr);
    const double wp = (p.u[k + 1] - 2.0 * p.u[k] + p.u[k - 1]) / (dr * dr);
    const double factor = p.gamma == 0.0 ? 1.0 : std::pow(std::abs(w), p.gamma);
    const double lhs = factor * (split(wp) + (p.dimension - 1) * split(w / r));
    worst = std::max(worst, std::abs(lhs - f_of_r(r)));
  }
  return worst;
}

/// c(r) = f(omega_N (R^N - r^N)): the RHS seen by a radially increasing profile.
inline double radial_rhs(const MonotoneRHS& f, int dimension, double radius, double r) {
  return f(omega_N(dimension) * (std::pow(radius, dimension) - std::pow(r, dimension)));
}

/// Shooting integrator for radially increasing solutions.
///
/// With q = w^{gamma+1} the radial equation
///   w^gamma [P(w') + (N-1) Lambda w / r] = c(r),  P(x) = Lambda x^+ - lambda x^-
/// becomes q' = (gamma+1)/mu (c - (N-1) Lambda q / r), mu = Lambda when the
/// bracket is >= 0 and lambda otherwise. q is started from the series
/// q = A r on [0, R/samples] and advanced with RK4; u follows from integrating
/// w = q^{1/(gamma+1)} inward from u(R) = g, exactly on each interval for
/// linear q.
inline RadialProfile shoot_radial(const MonotoneRHS& f, double gamma, const Ellipticity& ell, int dimension,
                                  double radius, double g_const, int samples = 4096) {
  detail::check_radial_inputs(gamma, ell, dimension, radius, samples);
  const double gp1 = gamma + 1.0;
  const double beta = 1.0 / gp1;
  const int n1 = dimension - 1;
  const auto c = [&](double r) { return radial_rhs(f, dimension, radius, r); };
  const auto slope = [&](double r, double q) {
    const double bracket = c(r) - n1 * ell.Lambda * q / r;
    return gp1 / (bracket >= 0.0 ? ell.Lambda : ell.lambda) * bracket;
  };

  RadialProfile p;
  p.gamma = gamma;
  p.ell = ell;
  p.dimension = dimension;
  p.radius = radius;
  p.boundary_value = g_const;
  p.radii = detail::uniform_radii(radius, samples);
  const std::size_t n = p.radii.size();
  std::vector<double> q(n, 0.0);

  const double series = gp1 * c(0.0) / (ell.Lambda * (1.0 + gp1 * n1));
  q[1] = series * p.radii[1];
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double r = p.radii[k];
    const double dr = p.radii[k + 1] - r;
    const double k1 = slope(r, q[k]);
    const double k2 = slope(r + 0.5 * dr, q[k] + 0.5 * dr * k1);
    const double k3 = slope(r + 0.5 * dr, q[k] + 0.5 * dr * k2);
    const double k4 = slope(r + dr, q[k] + dr * k3);
    q[k + 1] = q[k] + dr / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (q[k + 1] < 0.0) {
      if (c(p.radii[k + 1]) > 0.0) {
        throw OracleInvalidError("shoot_radial: derivative reached zero at r = " + std::to_string(p.radii[k + 1]) +
                                 " with positive right-hand side");
      }
      p.valid = false;
    }
  }

  p.w.resize(n);
  for (std::size_t k = 0; k < n; ++k) p.w[k] = q[k] > 0.0 ? std::pow(q[k], beta) : 0.0;

  // Integral of (linear q)^beta over one interval.
  const auto piece = [&](std::size_t k) {
    const double dr = p.radii[k + 1] - p.radii[k];
    const double qa = std::max(q[k], 0.0);
    const double qb = std::max(q[k + 1], 0.0);
    if (std::abs(qb - qa) <= 1e-12 * std::max(qa, qb)) return 0.5 * dr * (p.w[k] + p.w[k + 1]);
    return dr * (std::pow(qb, beta + 1.0) - std::pow(qa, beta + 1.0)) / ((beta + 1.0) * (qb - qa));
  };
  p.u.assign(n, 0.0);
  p.u[n - 1] = g_const;
  for (std::size_t k = n - 1; k-- > 0;) p.u[k] = p.u[k + 1] - piece(k);

  int last_sign = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const double bracket = c(p.radii[k]) - n1 * ell.Lambda * q[k] / p.radii[k];
    const int sign = bracket > 0.0 ? 1 : (bracket < 0.0 ? -1 : 0);
    if (sign != 0) {
      if (last_sign != 0 && sign != last_sign) ++p.curvature_sign_changes;
      last_sign = sign;
    }
  }
  for (double w : p.w) {
    if (w < 0.0) p.valid = false;
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (p.u[k] < p.u[k - 1]) p.valid = false;
  }
  return p;
}

inline void write_profile_csv(std::ostream& os, const RadialProfile& p) {
  CsvWriter csv(os);
  csv.header({"r", "u", "w"});
  for (std::size_t k = 0; k < p.radii.size(); ++k) {
    csv.cell(p.radii[k]).cell(p.u[k]).cell(p.w[k]).end_row();
  }
}

/// max_k |a_k - b_k| / max_k |b_k|.
inline double relative_linf(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num = std::max(num, std::abs(a[k] - b[k]));
    den = std::max(den, std::abs(b[k]));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace gradsolve
