#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradsolve/domain_grid.hpp"
#include "gradsolve/error.hpp"
#include "gradsolve/inner_solver.hpp"
#include "gradsolve/levelset.hpp"
#include "gradsolve/pucci.hpp"

namespace gradsolve {

/// |Du|^gamma M+_{lambda,Lambda}(D^2 u) = f(|{u >= u(x)}|) in the domain, u = g on its boundary.
struct ProblemSpec {
  Domain domain{};
  double gamma = 1.0;
  Ellipticity ell{};
  MonotoneRHS f{};
  BoundarySpec g = ConstantBoundary{0.0};
};

inline void validate(const ProblemSpec& p) {
  validate(p.domain);
  if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma)) throw ConfigError("problem: gamma must be >= 0");
  validate(p.ell);
  validate(p.g);
}

/// Continuation ladder eps_j = eps0 * 2^-j (last rung clamped to eps_min) and
/// mollification indices i0, 2 i0, ... <= i_max, followed by the exact RHS.
struct SchedulePlan {
  double eps0 = 1e-1;
  double eps_min = 1e-4;
  int i0 = 4;
  int i_max = 64;
  /// Defaults to 1e-6 * (1 + max|g|).
  std::optional<double> tol_fixedpoint;
  int max_picard = 60;
  double damping = 1.0;
  /// Constant of the uniform bound max|u| <= max|g| + C f(|Omega|); calibrated
  /// on the first rung when absent.
  std::optional<double> sup_bound_constant;
  InnerConfig inner{};
};

inline void validate(const SchedulePlan& plan) {
  if (!(plan.eps0 > 0.0) || !(plan.eps_min > 0.0)) throw ConfigError("schedule: eps0 and eps_min must be > 0");
  if (plan.eps_min > plan.eps0) throw ConfigError("schedule: eps_min must not exceed eps0");
  if (plan.i0 < 1) throw ConfigError("schedule: i0 must be >= 1");
  if (plan.i_max < plan.i0) throw ConfigError("schedule: i_max must be >= i0");
  if (plan.tol_fixedpoint && !(*plan.tol_fixedpoint > 0.0)) throw ConfigError("schedule: tol_fixedpoint must be > 0");
  if (plan.max_picard < 1) throw ConfigError("schedule: max_picard must be >= 1");
  if (!(plan.damping > 0.0 && plan.damping <= 1.0)) throw ConfigError("schedule: damping must lie in (0, 1]");
}

inline std::vector<double> epsilon_ladder(const SchedulePlan& plan) {
  std::vector<double> eps;
  for (int j = 0;; ++j) {
    const double e = std::ldexp(plan.eps0, -j);
    if (e <= plan.eps_min) break;
    eps.push_back(e);
  }
  eps.push_back(plan.eps_min);
  return eps;
}

/// Mollification indices; 0 denotes the exact right-hand side.
inline std::vector<int> mollification_schedule(const SchedulePlan& plan) {
  std::vector<int> out;
  for (long i = plan.i0; i <= plan.i_max; i *= 2) out.push_back(static_cast<int>(i));
  out.push_back(0);
  return out;
}

inline constexpr int kExactRHS = 0;

struct StageReport {
  double epsilon = 0.0;
  int index = kExactRHS;
  int picard_iterations = 0;
  std::vector<double> gaps;
  double damping = 1.0;
  std::vector<SolveReport> inner;
  double sup_norm = 0.0;
};

struct PipelineReport {
  std::vector<double> epsilons;
  std::vector<StageReport> stages;
  std::vector<double> rung_sup_norms;
  /// ||u_{eps_j} - u_{eps_{j+1}}||_inf between consecutive rungs.
  std::vector<double> cauchy_gaps;
  std::vector<std::vector<double>> rung_solutions;
  double tol_fixedpoint = 0.0;
  double sup_bound_constant = 0.0;
  double sup_bound = 0.0;
  /// Stage that raised, when solve_grad failed.
  double failed_epsilon = 0.0;
  int failed_index = kExactRHS;
};

inline std::vector<double> rhs_for(std::span<const double> v, const MonotoneRHS& f, int index,
                                   std::span<const double> measures) {
  return index == kExactRHS ? h_exact(v, f, measures) : h_mollified(v, f, index, measures);
}

/// Damped Picard iteration v <- (1 - theta) v + theta S(h^i(v)), S the inner
/// solve. theta is halved once if the gap grows twice in a row.
inline std::pair<std::vector<double>, StageReport> picard_stage(std::vector<double> v, const MonotoneRHS& f, int index,
                                                                const InnerConfig& cfg, const SchedulePlan& plan,
                                                                const Stencil& st, std::span<const double> measures,
                                                                double tol_fixedpoint) {
  StageReport rep;
  rep.epsilon = cfg.epsilon;
  rep.index = index;
  double theta = plan.damping;
  bool halved = false;
  int growth = 0;
  double prev_gap = std::numeric_limits<double>::infinity();
  std::vector<double> warm = v;

  for (int m = 1; m <= plan.max_picard; ++m) {
    const auto rhs = rhs_for(v, f, index, measures);
    auto [u, solve_rep] = inner_solve(std::move(warm), rhs, cfg, st);
    rep.inner.push_back(std::move(solve_rep));
    double gap = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double next = (1.0 - theta) * v[k] + theta * u[k];
      gap = std::max(gap, std::abs(next - v[k]));
      v[k] = next;
    }
    warm = std::move(u);
    rep.gaps.push_back(gap);
    rep.picard_iterations = m;
    if (gap <= tol_fixedpoint) {
      rep.damping = theta;
      rep.sup_norm = max_abs(v);
      return {std::move(v), std::move(rep)};
    }
    growth = gap > prev_gap ? growth + 1 : 0;
    if (growth >= 2 && !halved) {
      theta *= 0.5;
      halved = true;
      growth = 0;
    }
    prev_gap = gap;
  }
  throw NonConvergenceError("picard_stage: fixed-point gap " + std::to_string(rep.gaps.back()) + " above " +
                                std::to_string(tol_fixedpoint) + " after " + std::to_string(plan.max_picard) +
                                " iterations (eps = " + std::to_string(cfg.epsilon) +
                                ", i = " + std::to_string(index) + ")",
                            rep.gaps);
}

/// Error raised by solve_grad; keeps the report of the stages completed so far.
class PipelineError : public NonConvergenceError {
 public:
  PipelineError(const NonConvergenceError& cause, PipelineReport partial)
      : NonConvergenceError(cause.what(), cause.history()), partial_(std::move(partial)) {}
  const PipelineReport& partial() const noexcept { return partial_; }

 private:
  PipelineReport partial_;
};

/// Full continuation: for each eps on the ladder run the Picard stages over
/// the mollification schedule (ending with the exact RHS), warm-starting each
/// stage and rung from the previous one.
inline std::pair<std::vector<double>, PipelineReport> solve_grad(const ProblemSpec& problem, const SchedulePlan& plan,
                                                                 const Grid& grid) {
  validate(problem);
  validate(plan);
  const BoundaryValues bc(grid, problem.g);
  const Stencil st(grid, bc);
  const auto measures = uniform_measures(grid);
  const double g_max = bc.max_abs();

  PipelineReport rep;
  rep.tol_fixedpoint = plan.tol_fixedpoint.value_or(1e-6 * (1.0 + g_max));
  rep.epsilons = epsilon_ladder(plan);
  const double f_total = problem.f(grid.total_measure());

  InnerConfig cfg = plan.inner;
  cfg.gamma = problem.gamma;
  cfg.ell = problem.ell;

  std::vector<double> v = harmonic_extension(st);
  std::optional<double> bound_constant = plan.sup_bound_constant;
  try {
    for (double eps : rep.epsilons) {
      cfg.epsilon = eps;
      for (int index : mollification_schedule(plan)) {
        rep.failed_epsilon = eps;
        rep.failed_index = index;
        auto [next, stage] = picard_stage(std::move(v), problem.f, index, cfg, plan, st, measures, rep.tol_fixedpoint);
        v = std::move(next);
        rep.stages.push_back(std::move(stage));
      }
      const double sup = max_abs(v);
      if (!bound_constant) {
        // Calibrated once on the first rung, with a factor-two margin.
        bound_constant = f_total > 0.0 ? std::max(0.0, 2.0 * (sup - g_max) / f_total) : 0.0;
      }
      rep.sup_bound_constant = *bound_constant;
      rep.sup_bound = g_max + *bound_constant * f_total + 10.0 * rep.tol_fixedpoint;
      if (!rep.rung_solutions.empty()) {
        const auto& prev = rep.rung_solutions.back();
        double gap = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) gap = std::max(gap, std::abs(v[k] - prev[k]));
        rep.cauchy_gaps.push_back(gap);
      }
      rep.rung_sup_norms.push_back(sup);
      rep.rung_solutions.push_back(v);
      if (sup > rep.sup_bound) {
        throw NonConvergenceError("solve_grad: uniform bound violated at eps = " + std::to_string(eps) + ": max|u| = " +
                                      std::to_string(sup) + " > " + std::to_string(rep.sup_bound),
                                  rep.rung_sup_norms);
      }
    }
  } catch (const NonConvergenceError& e) {
    throw PipelineError(e, std::move(rep));
  }
  rep.failed_epsilon = 0.0;
  rep.failed_index = kExactRHS;
  return {std::move(v), std::move(rep)};
}

}  // namespace gradsolve
