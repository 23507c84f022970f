#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gradsolve/outer_fixedpoint.hpp"
#include "gradsolve/radial_oracle.hpp"

using namespace gradsolve;

namespace {

ProblemSpec disk_problem(MonotoneRHS f, double gamma = 1.0, Ellipticity ell = {}) {
  ProblemSpec p;
  p.domain = Domain{Disk{1.0, {}}};
  p.gamma = gamma;
  p.ell = ell;
  p.f = std::move(f);
  return p;
}

// The superlevel measure never exceeds |Omega| < 4 on the unit disk.
const MonotoneRHS kIdentity = MonotoneRHS::linear(1.0, 4.0);

}  // namespace

TEST(Schedule, LadderHalvesAndEndsAtEpsMin) {
  SchedulePlan plan;
  plan.eps0 = 0.1;
  plan.eps_min = 1e-4;
  const auto eps = epsilon_ladder(plan);
  ASSERT_EQ(eps.size(), 11u);
  EXPECT_EQ(eps.front(), 0.1);
  EXPECT_EQ(eps[9], 0.1 / 512);
  EXPECT_EQ(eps.back(), 1e-4);
  plan.eps_min = 0.1;
  EXPECT_EQ(epsilon_ladder(plan), std::vector<double>{0.1});
}

TEST(Schedule, MollificationIndicesEndWithExactRHS) {
  SchedulePlan plan;
  plan.i0 = 4;
  plan.i_max = 64;
  EXPECT_EQ(mollification_schedule(plan), (std::vector<int>{4, 8, 16, 32, 64, kExactRHS}));
  plan.i0 = 3;
  plan.i_max = 20;
  EXPECT_EQ(mollification_schedule(plan), (std::vector<int>{3, 6, 12, kExactRHS}));
}

TEST(Schedule, Validation) {
  SchedulePlan plan;
  plan.eps_min = 1.0;
  EXPECT_THROW(validate(plan), ConfigError);
  plan = {};
  plan.i_max = 2;
  EXPECT_THROW(validate(plan), ConfigError);
  plan = {};
  plan.damping = 0.0;
  EXPECT_THROW(validate(plan), ConfigError);
  plan = {};
  plan.max_picard = 0;
  EXPECT_THROW(validate(plan), ConfigError);
  auto p = disk_problem(kIdentity);
  p.gamma = -1.0;
  EXPECT_THROW(validate(p), ConfigError);
}

TEST(SolveGrad, ConstantRHSNeedsAtMostTwoPicardSteps) {
  const auto p = disk_problem(MonotoneRHS::constant(1.5));
  SchedulePlan plan;
  plan.eps_min = 1e-3;
  const Grid g = build_grid(p.domain, 16);
  const auto [u, rep] = solve_grad(p, plan, g);
  for (const auto& s : rep.stages) EXPECT_LE(s.picard_iterations, 2) << s.epsilon << " " << s.index;
}

TEST(SolveGrad, ZeroRHSGivesHarmonicExtension) {
  auto p = disk_problem(MonotoneRHS::constant(0.0));
  p.g = AffineBoundary{0.5, 1.0, -1.0};
  SchedulePlan plan;
  plan.eps_min = 1e-2;
  const Grid g = build_grid(p.domain, 16);
  const auto [u, rep] = solve_grad(p, plan, g);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Point x = g.position(k);
    EXPECT_NEAR(u[k], 0.5 + x.x - x.y, 1e-9);
  }
}

// On the coarsest lattice the returned field must reproduce itself: the
// inner operator evaluated with h = f(|{u >= u(x)}|) built from u is ~0.
TEST(SolveGrad, ToyFixedPointIsSelfConsistent) {
  const auto p = disk_problem(kIdentity);
  SchedulePlan plan;
  plan.eps_min = 1e-3;
  const Grid g = build_grid(p.domain, 8);
  const auto [u, rep] = solve_grad(p, plan, g);
  const BoundaryValues bc(g, p.g);
  const Stencil st(g, bc);
  InnerConfig cfg = plan.inner;
  cfg.epsilon = plan.eps_min;
  const auto h = h_exact(u, p.f, g);
  for (double r : residual(st, u, h, cfg)) EXPECT_LE(std::abs(r), 1e-3);
  // Brute-force superlevel measures.
  for (std::size_t k = 0; k < u.size(); ++k) {
    double m = 0.0;
    for (double w : u) m += w >= u[k] ? g.cell_measure() : 0.0;
    EXPECT_NEAR(h[k], m, 1e-12);
  }
}

TEST(SolveGrad, LaddersSharingEpsMinAgree) {
  const auto p = disk_problem(MonotoneRHS::constant(1.5));
  const Grid g = build_grid(p.domain, 16);
  SchedulePlan a;
  a.eps0 = 0.1;
  a.eps_min = 1e-5;
  SchedulePlan b = a;
  b.eps0 = 0.07;
  const auto [ua, ra] = solve_grad(p, a, g);
  const auto [ub, rb] = solve_grad(p, b, g);
  double gap = 0.0;
  for (std::size_t k = 0; k < ua.size(); ++k) gap = std::max(gap, std::abs(ua[k] - ub[k]));
  EXPECT_LE(gap, 10.0 * ra.tol_fixedpoint);
  EXPECT_LE(ra.cauchy_gaps.back(), 10.0 * ra.tol_fixedpoint);
}

TEST(SolveGrad, PicardLimitRaisesWithPartialReport) {
  const auto p = disk_problem(kIdentity);
  SchedulePlan plan;
  plan.max_picard = 1;
  const Grid g = build_grid(p.domain, 16);
  try {
    solve_grad(p, plan, g);
    FAIL();
  } catch (const PipelineError& e) {
    ASSERT_EQ(e.history().size(), 1u);
    EXPECT_GT(e.history().front(), e.partial().tol_fixedpoint);
    EXPECT_EQ(e.partial().failed_epsilon, plan.eps0);
    EXPECT_EQ(e.partial().failed_index, plan.i0);
  }
}

TEST(SolveGrad, Deterministic) {
  const auto p = disk_problem(kIdentity);
  SchedulePlan plan;
  plan.eps_min = 1e-2;
  const Grid g = build_grid(p.domain, 16);
  const auto [u1, r1] = solve_grad(p, plan, g);
  const auto [u2, r2] = solve_grad(p, plan, g);
  EXPECT_EQ(u1, u2);
  EXPECT_EQ(r1.cauchy_gaps, r2.cauchy_gaps);
}

TEST(SolveGrad, SupNormStaysUnderUniformBound) {
  auto p = disk_problem(kIdentity);
  p.g = ConstantBoundary{0.25};
  SchedulePlan plan;
  plan.eps_min = 1e-3;
  const Grid g = build_grid(p.domain, 16);
  const auto [u, rep] = solve_grad(p, plan, g);
  EXPECT_GT(rep.sup_bound_constant, 0.0);
  for (double s : rep.rung_sup_norms) EXPECT_LE(s, rep.sup_bound);
  EXPECT_EQ(rep.rung_sup_norms.size(), rep.epsilons.size());
  EXPECT_EQ(rep.cauchy_gaps.size(), rep.epsilons.size() - 1);
  // f >= 0 makes u a subsolution: it stays below the boundary value.
  for (double x : u) EXPECT_LE(x, 0.25 + 1e-6);
}

TEST(SolveGrad, ImpossibleBoundConstantRaises) {
  const auto p = disk_problem(MonotoneRHS::constant(1.5));
  SchedulePlan plan;
  plan.eps_min = 1e-2;
  plan.sup_bound_constant = 1e-3;
  const Grid g = build_grid(p.domain, 16);
  EXPECT_THROW(solve_grad(p, plan, g), PipelineError);
}

TEST(SolveGrad, MatchesClosedFormAtResolution32) {
  for (const Ellipticity ell : {Ellipticity{1.0, 1.0}, Ellipticity{1.0, 2.0}}) {
    const double c = 1.5 * ell.Lambda;
    const auto p = disk_problem(MonotoneRHS::constant(c), 1.0, ell);
    SchedulePlan plan;
    plan.eps_min = 1e-4;
    const Grid g = build_grid(p.domain, 32);
    const auto [u, rep] = solve_grad(p, plan, g);
    const ConstantRHSSolution exact(1.0, ell, 2, c, 1.0, 0.0);
    std::vector<double> ref(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      const Point x = g.position(k);
      ref[k] = exact.value(std::hypot(x.x, x.y));
    }
    EXPECT_LE(relative_linf(u, ref), 0.02) << ell.Lambda;
  }
}

TEST(SolveGrad, NonlocalRHSMatchesShootingAtResolution16) {
  const auto p = disk_problem(kIdentity);
  SchedulePlan plan;
  const Grid g = build_grid(p.domain, 16);
  const auto [u, rep] = solve_grad(p, plan, g);
  const auto prof = shoot_radial(p.f, 1.0, p.ell, 2, 1.0, 0.0);
  std::vector<double> ref(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Point x = g.position(k);
    ref[k] = prof.value_at(std::hypot(x.x, x.y));
  }
  EXPECT_LE(relative_linf(u, ref), 0.05);
}
