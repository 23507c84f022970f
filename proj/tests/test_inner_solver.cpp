#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gradsolve/inner_solver.hpp"
#include "gradsolve/radial_oracle.hpp"

using namespace gradsolve;

namespace {

struct Problem {
  Problem(const Domain& d, int res, const BoundarySpec& g) : grid(build_grid(d, res)), bc(grid, g), st(grid, bc) {}
  Grid grid;
  BoundaryValues bc;
  Stencil st;
};

const Domain kDisk{Disk{1.0, {}}};

InnerConfig config(double eps, double gamma, Ellipticity ell = {}) {
  InnerConfig c;
  c.epsilon = eps;
  c.gamma = gamma;
  c.ell = ell;
  return c;
}

std::vector<double> solve(const Problem& p, std::span<const double> h, const InnerConfig& cfg) {
  return inner_solve(std::vector<double>(p.grid.size(), 0.0), h, cfg, p.st).first;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Random non-negative field, monotone coupling h1 <= h2.
std::pair<std::vector<double>, std::vector<double>> ordered_pair(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> h1(n), h2(n);
  for (std::size_t k = 0; k < n; ++k) {
    h1[k] = u(rng);
    h2[k] = h1[k] + 0.5 * u(rng);
  }
  return {h1, h2};
}

}  // namespace

TEST(Residual, Examples) {
  const Problem p(kDisk, 16, ConstantBoundary{0.0});
  const std::vector<double> zero(p.grid.size(), 0.0);
  const std::vector<double> one(p.grid.size(), 1.0);
  for (double r : residual(p.st, zero, one, config(1e-2, 1.0))) EXPECT_EQ(r, -1.0);

  // (1 + eps) Lap u = h for u = r^2 / 4, with g = u on the circle r = 1.
  const double eps = 1e-2;
  const Problem q(kDisk, 16, ConstantBoundary{0.25});
  std::vector<double> u(q.grid.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Point x = q.grid.position(k);
    u[k] = 0.25 * (x.x * x.x + x.y * x.y);
  }
  const std::vector<double> h(q.grid.size(), 1.0 + eps);
  for (double r : residual(q.st, u, h, config(eps, 0.0))) EXPECT_NEAR(r, 0.0, 1e-10);
}

TEST(PseudoTime, ZeroDataIsAFixedPoint) {
  const Problem p(kDisk, 16, ConstantBoundary{0.0});
  const std::vector<double> zero(p.grid.size(), 0.0);
  auto [u, rep] = pseudo_time_solve(zero, zero, config(1e-2, 1.0), p.st);
  EXPECT_EQ(rep.iterations, 0);
  for (double x : u) EXPECT_EQ(x, 0.0);
  auto [v, rep2] = policy_accelerated_solve(zero, zero, config(1e-2, 1.0), p.st);
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(PseudoTime, ConstantRHSMatchesRadialSolution) {
  const Problem p(kDisk, 64, ConstantBoundary{0.0});
  const std::vector<double> h(p.grid.size(), 1.5);
  auto [u, rep] = pseudo_time_solve(std::vector<double>(p.grid.size(), 0.0), h, config(1e-3, 1.0), p.st);
  EXPECT_LE(rep.final_residual, rep.tolerance);
  const ConstantRHSSolution exact(1.0, {1.0, 1.0}, 2, 1.5, 1.0, 0.0);
  std::vector<double> ref(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Point x = p.grid.position(k);
    ref[k] = exact.value(std::hypot(x.x, x.y));
  }
  EXPECT_LE(relative_linf(u, ref), 0.05);
}

TEST(PseudoTime, NonConvergenceCarriesHistory) {
  const Problem p(kDisk, 16, ConstantBoundary{0.0});
  const std::vector<double> h(p.grid.size(), 1.0);
  auto cfg = config(1e-2, 1.0);
  cfg.max_iters = 5;
  cfg.history_stride = 1;
  try {
    pseudo_time_solve(std::vector<double>(p.grid.size(), 0.0), h, cfg, p.st);
    FAIL();
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.history().size(), 6u);
  }
}

TEST(PseudoTime, ComparisonPrinciple) {
  std::mt19937_64 rng(17);
  const Problem p(kDisk, 16, ConstantBoundary{0.0});
  for (double gamma : {0.0, 1.0, 2.0}) {
    for (int t = 0; t < 3; ++t) {
      const auto [h1, h2] = ordered_pair(p.grid.size(), rng);
      const auto cfg = config(1e-2, gamma, {0.5, 1.5});
      const auto u1 = solve(p, h1, cfg);
      const auto u2 = solve(p, h2, cfg);
      for (std::size_t k = 0; k < u1.size(); ++k) EXPECT_GE(u1[k], u2[k] - 1e-6);
    }
  }
}

TEST(PseudoTime, MaximumPrinciple) {
  std::mt19937_64 rng(23);
  const Problem p(Domain{Annulus{0.4, 1.0, {}}}, 24, AffineBoundary{0.3, 1.0, -0.5});
  const auto [lo, hi] = p.bc.range(p.grid);
  (void)lo;
  const auto [h, unused] = ordered_pair(p.grid.size(), rng);
  (void)unused;
  const auto u = solve(p, h, config(1e-2, 1.0, {0.5, 2.0}));
  const double scale = 1.0 + p.bc.max_abs() + max_abs(h);
  EXPECT_LE(*std::max_element(u.begin(), u.end()), hi + 1e-6 * scale);
}

TEST(PseudoTime, MonotoneInBoundaryData) {
  const std::vector<std::pair<BoundarySpec, BoundarySpec>> pairs{
      {ConstantBoundary{0.0}, ConstantBoundary{0.2}},
      {AffineBoundary{0.0, 0.5, 0.0}, AffineBoundary{0.6, 0.5, 0.1}},
  };
  for (const auto& [g1, g2] : pairs) {
    const Problem p1(kDisk, 16, g1);
    const Problem p2(kDisk, 16, g2);
    const std::vector<double> h(p1.grid.size(), 1.0);
    const auto u1 = solve(p1, h, config(1e-2, 1.0));
    const auto u2 = solve(p2, h, config(1e-2, 1.0));
    for (std::size_t k = 0; k < u1.size(); ++k) EXPECT_LE(u1[k], u2[k] + 1e-6);
  }
}

// sup |u| <= sup |g| + C max|h|, C calibrated on the coarsest grid.
TEST(PseudoTime, AbpBoundStableUnderRefinement) {
  const BoundarySpec g = AffineBoundary{0.1, 0.2, 0.0};
  const auto h_of = [](Point x) { return 1.0 + x.x * x.x; };
  double c_geom = 0.0;
  for (int res : {16, 32, 64}) {
    const Problem p(kDisk, res, g);
    std::vector<double> h(p.grid.size());
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = h_of(p.grid.position(k));
    const auto u = solve(p, h, config(1e-2, 1.0));
    const double excess = (max_abs(u) - p.bc.max_abs()) / max_abs(h);
    if (res == 16) {
      c_geom = 1.25 * excess;
      EXPECT_GT(c_geom, 0.0);
    } else {
      EXPECT_LE(excess, c_geom) << res;
    }
  }
}

TEST(PseudoTime, ResidualNonIncreasingAfterTransient) {
  const Problem p(kDisk, 16, ConstantBoundary{0.0});
  const std::vector<double> h(p.grid.size(), 1.5);
  auto cfg = config(1e-2, 1.0);
  cfg.history_stride = 1;
  const auto [u, rep] = pseudo_time_solve(std::vector<double>(p.grid.size(), 0.0), h, cfg, p.st);
  const auto& hist = rep.history;
  ASSERT_GT(hist.size(), 10u);
  const std::size_t start = hist.size() / 10;
  for (std::size_t k = start + 1; k < hist.size(); ++k) {
    EXPECT_LE(hist[k].residual_inf, hist[k - 1].residual_inf + 1e-12) << hist[k].iter;
  }
}

TEST(PseudoTime, PoissonLimitIsExactForQuadratics) {
  // gamma = 0, lambda = Lambda = 1: (1 + eps) Lap u = c has u = c (r^2 - 1) / (4 (1 + eps)).
  const double eps = 1e-2, c = 2.0;
  for (int res : {16, 32}) {
    const Problem p(kDisk, res, ConstantBoundary{0.0});
    const std::vector<double> h(p.grid.size(), c);
    const auto u = solve(p, h, config(eps, 0.0));
    double err = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const Point x = p.grid.position(k);
      err = std::max(err, std::abs(u[k] - c * (x.x * x.x + x.y * x.y - 1.0) / (4.0 * (1.0 + eps))));
    }
    EXPECT_LE(err, 1e-6) << res;
  }
}

TEST(PolicySolver, AgreesWithPseudoTime) {
  std::mt19937_64 rng(31);
  for (double gamma : {0.0, 1.0}) {
    const Problem p(kDisk, 32, AffineBoundary{0.0, 0.3, 0.0});
    const auto [h, unused] = ordered_pair(p.grid.size(), rng);
    (void)unused;
    auto cfg = config(1e-2, gamma, {0.5, 1.0});
    const auto [u_pt, rep_pt] = pseudo_time_solve(std::vector<double>(p.grid.size(), 0.0), h, cfg, p.st);
    cfg.method = InnerMethod::policy;
    const auto [u_pol, rep_pol] = policy_accelerated_solve(std::vector<double>(p.grid.size(), 0.0), h, cfg, p.st);
    EXPECT_LE(rep_pol.final_residual, rep_pol.tolerance);
    EXPECT_LE(max_diff(u_pt, u_pol), 10.0 * rep_pt.tolerance) << gamma;
  }
}

TEST(HarmonicExtension, ReproducesAffineData) {
  const Problem p(Domain{Annulus{0.3, 1.0, {0.1, 0.0}}}, 32, AffineBoundary{1.0, -2.0, 0.5});
  const auto u = harmonic_extension(p.st);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Point x = p.grid.position(k);
    EXPECT_NEAR(u[k], 1.0 - 2.0 * x.x + 0.5 * x.y, 1e-10);
  }
}

TEST(InnerConfig, Validation) {
  auto c = config(0.0, 1.0);
  EXPECT_THROW(validate(c), ConfigError);
  c = config(1e-2, -1.0);
  EXPECT_THROW(validate(c), ConfigError);
  c = config(1e-2, 1.0);
  c.cfl_safety = 1.5;
  EXPECT_THROW(validate(c), ConfigError);
  c.cfl_safety = 0.5;
  c.tol_residual = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
}
