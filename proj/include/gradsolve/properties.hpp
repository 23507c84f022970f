#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gradsolve/domain_grid.hpp"
#include "gradsolve/inner_solver.hpp"
#include "gradsolve/levelset.hpp"
#include "gradsolve/pucci.hpp"
#include "gradsolve/radial_oracle.hpp"

namespace gradsolve {

/// Outcome of one property over a batch of seeded trials. `worst` is the
/// largest observed violation measure, compared against `threshold`.
struct PropertyResult {
  std::string suite;
  std::string name;
  int trials = 0;
  int failures = 0;
  double worst = 0.0;
  double threshold = 0.0;

  bool passed() const { return failures == 0; }

  void record(double violation) {
    ++trials;
    worst = std::max(worst, violation);
    if (!(violation <= threshold)) ++failures;
  }
};

inline bool all_passed(const std::vector<PropertyResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const PropertyResult& r) { return r.passed(); });
}

namespace detail {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

template <int N>
SymMatrix<N> random_symmetric(Rng& rng, double scale) {
  SymMatrix<N> s;
  for (int i = 0; i < N; ++i) {
    for (int j = i; j < N; ++j) s(i, j) = uniform(rng, -scale, scale);
  }
  return s;
}

/// A A^T for a random A.
template <int N>
SymMatrix<N> random_psd(Rng& rng, double scale) {
  std::array<std::array<double, N>, N> a{};
  for (auto& row : a) {
    for (auto& v : row) v = uniform(rng, -scale, scale);
  }
  SymMatrix<N> p;
  for (int i = 0; i < N; ++i) {
    for (int j = i; j < N; ++j) {
      double s = 0.0;
      for (int k = 0; k < N; ++k) s += a[i][k] * a[j][k];
      p(i, j) = s;
    }
  }
  return p;
}

inline Ellipticity random_ellipticity(Rng& rng) {
  const double lambda = uniform(rng, 0.2, 2.0);
  return {lambda, lambda * uniform(rng, 1.0, 4.0)};
}

template <int N>
void pucci_checks(Rng& rng, int count, PropertyResult& sub, PropertyResult& mono, PropertyResult& trace) {
  for (int t = 0; t < count; ++t) {
    const auto ell = random_ellipticity(rng);
    const auto x = random_symmetric<N>(rng, 1.0);
    const auto y = random_symmetric<N>(rng, 1.0);
    const auto p = random_psd<N>(rng, 1.0);
    sub.record(pucci_plus_exact(x + y, ell) - pucci_plus_exact(x, ell) - pucci_plus_exact(y, ell));
    mono.record(pucci_plus_exact(x, ell) - pucci_plus_exact(x + p, ell));
    const Ellipticity iso{ell.Lambda, ell.Lambda};
    trace.record(std::abs(pucci_plus_exact(x, iso) - ell.Lambda * x.trace()));
  }
}

/// Random field on the grid; every other field is quantised so that ties occur.
inline std::vector<double> random_field(Rng& rng, std::size_t n, bool with_ties) {
  std::vector<double> v(n);
  const int levels = 1 + static_cast<int>(uniform(rng, 3.0, 40.0));
  for (auto& x : v) {
    x = uniform(rng, -1.0, 1.0);
    if (with_ties) x = std::round(x * levels) / levels;
  }
  return v;
}

inline MonotoneRHS random_rhs(Rng& rng, double s_max) {
  std::vector<std::pair<double, double>> bp;
  const int n = 2 + static_cast<int>(uniform(rng, 0.0, 4.0));
  double f = uniform(rng, 0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    bp.emplace_back(s_max * k / (n - 1), f);
    f += uniform(rng, 0.0, 1.0);
  }
  return MonotoneRHS(std::move(bp));
}

inline Domain random_domain(Rng& rng) {
  switch (static_cast<int>(uniform(rng, 0.0, 3.0))) {
    case 0:
      return Domain{Disk{uniform(rng, 0.5, 1.5), {}}};
    case 1:
      return Domain{Rectangle{uniform(rng, 1.0, 2.0), uniform(rng, 1.0, 2.0), {}}};
    default:
      return Domain{Annulus{0.4, 1.2, {}}};
  }
}

inline BoundarySpec random_boundary(Rng& rng) {
  return AffineBoundary{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
}

inline InnerConfig random_inner(Rng& rng) {
  InnerConfig cfg;
  cfg.epsilon = 1e-2;
  cfg.gamma = std::floor(uniform(rng, 0.0, 3.0));
  cfg.ell = random_ellipticity(rng);
  return cfg;
}

}  // namespace detail

/// Closed-form Pucci values, subadditivity, PSD monotonicity and the trace
/// reduction at lambda = Lambda.
inline std::vector<PropertyResult> pucci_properties(std::uint64_t seed, int matrices) {
  detail::Rng rng(seed);
  PropertyResult ident{"pucci", "identity_matrices", 0, 0, 0.0, 1e-12};
  for (const Ellipticity ell : {Ellipticity{1, 1}, Ellipticity{1, 2}, Ellipticity{0.5, 3}, Ellipticity{0.25, 0.25}}) {
    ident.record(std::abs(pucci_plus_exact(SymMatrix<2>::identity(), ell) - 2 * ell.Lambda));
    ident.record(std::abs(pucci_plus_exact(-1.0 * SymMatrix<2>::identity(), ell) + 2 * ell.lambda));
    ident.record(std::abs(pucci_plus_exact(SymMatrix<2>::diagonal({1, -1}), ell) - (ell.Lambda - ell.lambda)));
    ident.record(std::abs(pucci_plus_exact(SymMatrix<3>::identity(), ell) - 3 * ell.Lambda));
    ident.record(std::abs(pucci_plus_exact(-1.0 * SymMatrix<3>::identity(), ell) + 3 * ell.lambda));
    ident.record(std::abs(pucci_plus_exact(SymMatrix<3>::diagonal({1, -1, 0}), ell) - (ell.Lambda - ell.lambda)));
  }
  PropertyResult sub{"pucci", "subadditivity", 0, 0, 0.0, 1e-9};
  PropertyResult mono{"pucci", "psd_monotonicity", 0, 0, 0.0, 1e-9};
  PropertyResult trace{"pucci", "trace_reduction", 0, 0, 0.0, 1e-12};
  detail::pucci_checks<2>(rng, matrices / 2, sub, mono, trace);
  detail::pucci_checks<3>(rng, matrices - matrices / 2, sub, mono, trace);
  return {ident, sub, mono, trace};
}

/// Laws of the mollified right-hand side on random fields.
inline std::vector<PropertyResult> mollified_rhs_properties(std::uint64_t seed, int fields, int resolution) {
  detail::Rng rng(seed);
  const Grid grid = build_grid(Domain{Disk{1.0, {}}}, resolution);
  const auto m = uniform_measures(grid);
  const double total = grid.total_measure();
  PropertyResult bound{"mollified_rhs", "bounded_by_f_of_total_measure", 0, 0, 0.0, 1e-12};
  PropertyResult dom{"mollified_rhs", "dominates_exact", 0, 0, 0.0, 0.0};
  PropertyResult dec{"mollified_rhs", "non_increasing_in_i", 0, 0, 0.0, 0.0};
  PropertyResult exact{"mollified_rhs", "exact_below_value_gap", 0, 0, 0.0, 0.0};
  for (int t = 0; t < fields; ++t) {
    const auto v = detail::random_field(rng, grid.size(), t % 2 == 1);
    const auto f = detail::random_rhs(rng, total * detail::uniform(rng, 0.5, 1.5));
    const auto he = h_exact(v, f, m);
    const double cap = f(total);
    std::vector<double> prev;
    double w_bound = 0.0, w_dom = 0.0, w_dec = 0.0;
    for (int i = 1; i <= 1024; i *= 2) {
      const auto hi = h_mollified(v, f, i, m);
      for (std::size_t k = 0; k < hi.size(); ++k) {
        w_bound = std::max({w_bound, hi[k] - cap, he[k] - cap});
        w_dom = std::max(w_dom, he[k] - hi[k]);
        if (!prev.empty()) w_dec = std::max(w_dec, hi[k] - prev[k]);
      }
      prev = hi;
    }
    bound.record(w_bound);
    dom.record(w_dom);
    dec.record(w_dec);
    const double gap = minimal_value_gap(v);
    const int i_star = static_cast<int>(std::min(1e9, std::floor(1.0 / gap) + 1.0));
    const auto hs = h_mollified(v, f, i_star, m);
    double diff = 0.0;
    for (std::size_t k = 0; k < hs.size(); ++k) diff = std::max(diff, std::abs(hs[k] - he[k]));
    exact.record(diff);
  }
  return {bound, dom, dec, exact};
}

/// max u <= max g on converged inner solutions with h >= 0.
inline PropertyResult max_principle_property(std::uint64_t seed, int pairs, int resolution) {
  detail::Rng rng(seed);
  // Excess over max g, in units of scale = 1 + max|g| + max|h|.
  PropertyResult r{"inner_solver", "discrete_max_principle", 0, 0, 0.0, 1e-6};
  for (int t = 0; t < pairs; ++t) {
    const Domain dom = detail::random_domain(rng);
    const BoundarySpec g = detail::random_boundary(rng);
    const InnerConfig cfg = detail::random_inner(rng);
    const Grid grid = build_grid(dom, resolution);
    const BoundaryValues bc(grid, g);
    const Stencil st(grid, bc);
    std::vector<double> h(grid.size());
    for (auto& x : h) x = detail::uniform(rng, 0.0, 2.0);
    auto [u, rep] = inner_solve(harmonic_extension(st), h, cfg, st);
    const double g_max = bc.range(grid).second;
    const double scale = 1.0 + bc.max_abs() + max_abs(h);
    r.record((*std::max_element(u.begin(), u.end()) - g_max) / scale);
  }
  return r;
}

/// h1 <= h2 with the same g gives u1 >= u2 - 1e-6.
inline PropertyResult comparison_property(std::uint64_t seed, int pairs, int resolution) {
  detail::Rng rng(seed);
  PropertyResult r{"inner_solver", "rhs_comparison", 0, 0, 0.0, 1e-6};
  for (int t = 0; t < pairs; ++t) {
    const Domain dom = detail::random_domain(rng);
    const BoundarySpec g = detail::random_boundary(rng);
    const InnerConfig cfg = detail::random_inner(rng);
    const Grid grid = build_grid(dom, resolution);
    const BoundaryValues bc(grid, g);
    const Stencil st(grid, bc);
    std::vector<double> h1(grid.size()), h2(grid.size());
    for (std::size_t k = 0; k < h1.size(); ++k) {
      h1[k] = detail::uniform(rng, 0.0, 2.0);
      h2[k] = h1[k] + detail::uniform(rng, 0.0, 1.0);
    }
    const auto u0 = harmonic_extension(st);
    const auto u1 = inner_solve(u0, h1, cfg, st).first;
    const auto u2 = inner_solve(u0, h2, cfg, st).first;
    double worst = 0.0;
    for (std::size_t k = 0; k < u1.size(); ++k) worst = std::max(worst, u2[k] - u1[k]);
    r.record(worst);
  }
  return r;
}

/// Closed forms against the substitution check, the scaling law and the
/// shooting integrator.
inline std::vector<PropertyResult> radial_properties() {
  PropertyResult subst{"radial_oracle", "closed_form_substitution", 0, 0, 0.0, 1e-6};
  PropertyResult scaling{"radial_oracle", "scaling_law", 0, 0, 0.0, 1e-8};
  PropertyResult shoot{"radial_oracle", "shooting_matches_closed_form", 0, 0, 0.0, 1e-6};
  for (double gamma : {0.0, 1.0, 2.0}) {
    for (const Ellipticity ell : {Ellipticity{1, 1}, Ellipticity{1, 2}}) {
      for (int n : {2, 3}) {
        const double c = 1.5;
        const auto p = closed_form_constant_rhs(gamma, ell, n, c, 1.0, 0.0);
        subst.record(verify_radial_substitution(p, [c](double) { return c; }));

        const double k = 2.0;
        const auto q = closed_form_constant_rhs(gamma, ell, n, std::pow(k, gamma + 1.0) * c, 1.0, 0.0);
        double dev = 0.0;
        for (std::size_t j = 0; j < p.u.size(); ++j) {
          dev = std::max({dev, std::abs(q.w[j] - k * p.w[j]), std::abs(q.u[j] - k * p.u[j])});
        }
        scaling.record(dev);

        const auto s = shoot_radial(MonotoneRHS::constant(c), gamma, ell, n, 1.0, 0.0);
        shoot.record(relative_linf(s.u, p.u));
      }
    }
  }
  return {subst, scaling, shoot};
}

struct PropertyCounts {
  int resolution = 16;
  int matrices = 1000;
  int fields = 50;
  int max_principle_pairs = 20;
  int comparison_pairs = 10;
};

/// Every suite, each with its own stream derived from `seed`.
inline std::vector<PropertyResult> run_property_suites(std::uint64_t seed, const PropertyCounts& n) {
  std::vector<PropertyResult> out;
  const auto append = [&](std::vector<PropertyResult> rs) { out.insert(out.end(), rs.begin(), rs.end()); };
  append(pucci_properties(seed, n.matrices));
  append(mollified_rhs_properties(seed + 1, n.fields, n.resolution));
  out.push_back(max_principle_property(seed + 2, n.max_principle_pairs, n.resolution));
  out.push_back(comparison_property(seed + 3, n.comparison_pairs, n.resolution));
  append(radial_properties());
  return out;
}

}  // namespace gradsolve
