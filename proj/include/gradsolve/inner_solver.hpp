#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradsolve/domain_grid.hpp"
#include "gradsolve/error.hpp"
#include "gradsolve/parallel.hpp"
#include "gradsolve/pucci.hpp"

namespace gradsolve {

enum class InnerMethod { pseudo_time, policy };

/// Gradient used inside |Du|^gamma.
enum class GradientEstimate { one_sided, central };

inline const char* to_string(GradientEstimate g) { return g == GradientEstimate::central ? "central" : "one_sided"; }

inline const char* to_string(InnerMethod m) { return m == InnerMethod::policy ? "policy" : "pseudo_time"; }

/// Configuration of the epsilon-regularised solve
///   |Du|^gamma M+(D^2 u) + eps Lap u = h,  u = g on the boundary.
struct InnerConfig {
  double epsilon = 1e-2;
  double gamma = 1.0;
  Ellipticity ell{};
  FrameSet frames = FrameSet::axis_and_diagonal();
  GradientEstimate gradient = GradientEstimate::one_sided;
  double cfl_safety = 0.5;
  /// Absolute bound on max|R|; defaults to 1e-8 * (1 + max|h|).
  std::optional<double> tol_residual;
  long max_iters = 2'000'000;
  /// Pseudo-time history is recorded every `history_stride` iterations.
  int history_stride = 100;
  InnerMethod method = InnerMethod::pseudo_time;
  int max_policy_iters = 200;
};

inline void validate(const InnerConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) throw ConfigError("inner: epsilon must be > 0");
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) throw ConfigError("inner: gamma must be >= 0");
  validate(cfg.ell);
  validate(cfg.frames);
  if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) throw ConfigError("inner: cfl_safety must lie in (0, 1]");
  if (cfg.tol_residual && !(*cfg.tol_residual > 0.0)) throw ConfigError("inner: tol_residual must be > 0");
  if (cfg.max_iters < 1) throw ConfigError("inner: max_iters must be >= 1");
  if (cfg.history_stride < 1) throw ConfigError("inner: history_stride must be >= 1");
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double residual_tolerance(const InnerConfig& cfg, std::span<const double> h) {
  return cfg.tol_residual.value_or(1e-8 * (1.0 + max_abs(h)));
}

struct ResidualSample {
  long iter = 0;
  double residual_inf = 0.0;
  double wall_ms = 0.0;
};

struct SolveReport {
  long iterations = 0;
  double final_residual = 0.0;
  double tolerance = 0.0;
  std::vector<ResidualSample> history;
  double wall_ms = 0.0;
  InnerMethod method = InnerMethod::pseudo_time;
  bool fell_back = false;
};

namespace detail {

inline double node_factor(const Stencil& st, std::span<const double> u, std::size_t k, const InnerConfig& cfg) {
  if (cfg.gamma == 0.0) return 1.0;
  const auto g = cfg.gradient == GradientEstimate::central ? gradient_central(st, u, k) : gradient_one_sided(st, u, k);
  return degeneracy_factor(g, cfg.gamma);
}

struct NodeEval {
  double residual = 0.0;
  double step = 0.0;
};

inline NodeEval evaluate_node(const Stencil& st, std::span<const double> u, std::span<const double> h,
                              const InnerConfig& cfg, std::size_t k) {
  std::array<double, kNumLines> d{};
  for (int l = 0; l < kNumLines; ++l) d[l] = st.second_difference(u, k, l);

  double pucci = -std::numeric_limits<double>::infinity();
  double frame_weight = 0.0;
  for (const auto& frame : cfg.frames.frames) {
    double v = 0.0;
    double w = 0.0;
    for (int l : frame) {
      v += pucci_line_term(d[l], cfg.ell);
      w += st.line(k, l).center_weight();
    }
    pucci = std::max(pucci, v);
    frame_weight = std::max(frame_weight, w);
  }
  const double axis_weight = st.line(k, 0).center_weight() + st.line(k, 1).center_weight();
  const double a = node_factor(st, u, k, cfg);

  NodeEval e;
  e.residual = a * pucci + cfg.epsilon * (d[0] + d[1]) - h[k];
  e.step = cfg.cfl_safety / (cfg.ell.Lambda * a * frame_weight + cfg.epsilon * axis_weight + 1e-14);
  return e;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline std::vector<double> residual_values(const SolveReport& r) {
  std::vector<double> out;
  out.reserve(r.history.size());
  for (const auto& s : r.history) out.push_back(s.residual_inf);
  return out;
}

}  // namespace detail

/// R(x) = |Du|^gamma M+_disc u + eps Lap_disc u - h at every active node.
inline std::vector<double> residual(const Stencil& st, std::span<const double> u, std::span<const double> h,
                                    const InnerConfig& cfg) {
  std::vector<double> r(st.size());
  const auto n = static_cast<std::ptrdiff_t>(st.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) r[k] = detail::evaluate_node(st, u, h, cfg, static_cast<std::size_t>(k)).residual;
  return r;
}

/// Explicit pseudo-time relaxation u <- u + tau(x) R(x) with the local step
/// tau = cfl / (Lambda |Du|^gamma W_frame + eps W_axis), where W are the
/// centre weights of the difference stencils (2N/h^2 away from the boundary).
inline std::pair<std::vector<double>, SolveReport> pseudo_time_solve(std::vector<double> u, std::span<const double> h,
                                                                     const InnerConfig& cfg, const Stencil& st) {
  validate(cfg);
  if (u.size() != st.size() || h.size() != st.size()) throw ContractViolation("pseudo_time_solve: size mismatch");
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.method = InnerMethod::pseudo_time;
  rep.tolerance = residual_tolerance(cfg, h);

  const auto n = static_cast<std::ptrdiff_t>(st.size());
  std::vector<double> r(st.size());
  std::vector<double> tau(st.size());
  for (long it = 0;; ++it) {
    double rmax = 0.0;
#pragma omp parallel for schedule(static) reduction(max : rmax)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const auto e = detail::evaluate_node(st, u, h, cfg, static_cast<std::size_t>(k));
      r[k] = e.residual;
      tau[k] = e.step;
      rmax = std::max(rmax, std::abs(e.residual));
    }
    const bool done = rmax <= rep.tolerance;
    if (it % cfg.history_stride == 0 || done || it == cfg.max_iters) {
      rep.history.push_back({it, rmax, detail::elapsed_ms(start)});
    }
    if (done) {
      rep.iterations = it;
      rep.final_residual = rmax;
      break;
    }
    if (!std::isfinite(rmax) || it == cfg.max_iters) {
      throw NonConvergenceError("pseudo_time_solve: residual " + std::to_string(rmax) + " above tolerance " +
                                    std::to_string(rep.tolerance) + " after " + std::to_string(it) + " iterations",
                                detail::residual_values(rep));
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) u[k] += tau[k] * r[k];
  }
  rep.wall_ms = detail::elapsed_ms(start);
  return {std::move(u), std::move(rep)};
}

namespace detail {

/// Assembles -(frozen operator) as an M-matrix: rows scaled by -1 so the
/// diagonal is positive. Boundary contributions go to the right-hand side.
inline void assemble_frozen(const Stencil& st, std::span<const double> u, std::span<const double> h,
                            const InnerConfig& cfg, Eigen::SparseMatrix<double>& A, Eigen::VectorXd& b) {
  const std::size_t n = st.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 9);
  b.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    std::array<double, kNumLines> d{};
    for (int l = 0; l < kNumLines; ++l) d[l] = st.second_difference(u, k, l);
    const auto choice = pucci_plus_discrete_choice(st, u, k, cfg.frames, cfg.ell);
    const double a = node_factor(st, u, k, cfg);

    std::array<double, kNumLines> alpha{};
    for (int l : cfg.frames.frames[static_cast<std::size_t>(choice.frame)]) {
      alpha[l] += a * (d[l] >= 0.0 ? cfg.ell.Lambda : cfg.ell.lambda);
    }
    alpha[0] += cfg.epsilon;
    alpha[1] += cfg.epsilon;

    double diag = 0.0;
    double rhs = -h[k];
    for (int l = 0; l < kNumLines; ++l) {
      if (alpha[l] == 0.0) continue;
      const auto& ln = st.line(k, l);
      diag += alpha[l] * ln.center_weight();
      if (ln.plus >= 0) {
        trip.emplace_back(static_cast<int>(k), ln.plus, -alpha[l] * ln.w_plus);
      } else {
        rhs += alpha[l] * ln.w_plus * ln.g_plus;
      }
      if (ln.minus >= 0) {
        trip.emplace_back(static_cast<int>(k), ln.minus, -alpha[l] * ln.w_minus);
      } else {
        rhs += alpha[l] * ln.w_minus * ln.g_minus;
      }
    }
    trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
    b[static_cast<Eigen::Index>(k)] = rhs;
  }
  A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  A.setFromTriplets(trip.begin(), trip.end());
}

}  // namespace detail

/// Policy iteration: freeze the active frame, the Lambda/lambda branch of each
/// line and the factor |Du|^gamma at the current iterate, solve the linear
/// system, relax by 1/(1 + gamma) and repeat. Falls back to pseudo-time on a
/// failed factorisation or when the residual stalls.
inline std::pair<std::vector<double>, SolveReport> policy_accelerated_solve(std::vector<double> u,
                                                                            std::span<const double> h,
                                                                            const InnerConfig& cfg,
                                                                            const Stencil& st) {
  validate(cfg);
  if (u.size() != st.size() || h.size() != st.size()) throw ContractViolation("policy_accelerated_solve: size mismatch");
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.method = InnerMethod::policy;
  rep.tolerance = residual_tolerance(cfg, h);
  const double relax = 1.0 / (1.0 + cfg.gamma);

  std::vector<double> best = u;
  double best_res = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

  for (int it = 0; it <= cfg.max_policy_iters; ++it) {
    const double res = max_abs(residual(st, u, h, cfg));
    rep.history.push_back({it, res, detail::elapsed_ms(start)});
    if (res <= rep.tolerance) {
      rep.iterations = it;
      rep.final_residual = res;
      rep.wall_ms = detail::elapsed_ms(start);
      return {std::move(u), std::move(rep)};
    }
    if (res < 0.9 * best_res) {
      since_improvement = 0;
    } else if (++since_improvement >= 20) {
      break;
    }
    if (res < best_res) {
      best_res = res;
      best = u;
    }
    if (!std::isfinite(res) || it == cfg.max_policy_iters) break;

    detail::assemble_frozen(st, u, h, cfg, A, b);
    lu.compute(A);
    if (lu.info() != Eigen::Success) break;
    const Eigen::VectorXd sol = lu.solve(b);
    if (lu.info() != Eigen::Success || !sol.allFinite()) break;
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += relax * (sol[static_cast<Eigen::Index>(k)] - u[k]);
  }

  auto [v, tail] = pseudo_time_solve(std::move(best), h, cfg, st);
  const long offset = static_cast<long>(rep.history.size());
  const double t0 = detail::elapsed_ms(start) - tail.wall_ms;
  for (const auto& s : tail.history) rep.history.push_back({offset + s.iter, s.residual_inf, t0 + s.wall_ms});
  rep.iterations = offset + tail.iterations;
  rep.final_residual = tail.final_residual;
  rep.fell_back = true;
  rep.wall_ms = detail::elapsed_ms(start);
  return {std::move(v), std::move(rep)};
}

inline std::pair<std::vector<double>, SolveReport> inner_solve(std::vector<double> u0, std::span<const double> h,
                                                               const InnerConfig& cfg, const Stencil& st) {
  if (cfg.method == InnerMethod::policy) return policy_accelerated_solve(std::move(u0), h, cfg, st);
  return pseudo_time_solve(std::move(u0), h, cfg, st);
}

/// Discrete harmonic extension of the boundary data (axis Laplacian = 0),
/// used as the initial guess of the first solve.
inline std::vector<double> harmonic_extension(const Stencil& st) {
  InnerConfig lap;
  lap.gamma = 0.0;
  lap.epsilon = 1.0;
  lap.frames = FrameSet::axis_only();
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  const std::vector<double> zero(st.size(), 0.0);
  // With gamma = 0 and lambda = Lambda = 1 the frozen operator is (1 + eps) Lap.
  detail::assemble_frozen(st, zero, zero, lap, A, b);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  if (lu.info() != Eigen::Success) throw NonConvergenceError("harmonic_extension: factorisation failed", {});
  const Eigen::VectorXd x = lu.solve(b);
  return std::vector<double>(x.data(), x.data() + x.size());
}

}  // namespace gradsolve
