#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gradsolve/config.hpp"
#include "gradsolve/csv.hpp"
#include "gradsolve/levelset.hpp"
#include "gradsolve/outer_fixedpoint.hpp"
#include "gradsolve/properties.hpp"
#include "gradsolve/radial_oracle.hpp"

namespace gradsolve {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitAcceptanceFailure = 4;

struct Verdict {
  std::string check;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Radial reference solution on a disk with constant boundary data.
struct OracleReference {
  std::string kind;
  Point center{};
  std::function<double(double)> value;
  std::optional<RadialProfile> profile;
  double self_residual = 0.0;
};

/// Closed form when f is constant, shooting otherwise. With gamma = 0 the
/// eps Lap u term is absorbed exactly into Lambda + eps_min.
inline OracleReference make_oracle(const RunConfig& cfg) {
  const auto* disk = std::get_if<Disk>(&cfg.problem.domain.shape);
  const auto* g = std::get_if<ConstantBoundary>(&cfg.problem.g);
  if (!disk || !g) throw ConfigError("oracle: radial references need a disk with constant g");
  const auto& pb = cfg.problem;
  const bool constant = pb.f.is_constant();
  OracleKind kind = cfg.oracle.kind;
  if (kind == OracleKind::automatic) kind = constant ? OracleKind::closed_form : OracleKind::shooting;
  if (kind == OracleKind::closed_form && !constant) throw ConfigError("oracle: closed_form requires constant f");

  OracleReference ref;
  ref.center = disk->center;
  const int dim = pb.domain.dimension;
  if (kind == OracleKind::closed_form) {
    Ellipticity ell = pb.ell;
    if (pb.gamma == 0.0) ell.Lambda += cfg.schedule.eps_min;
    const double c = pb.f.max_value();
    const ConstantRHSSolution sol(pb.gamma, ell, dim, c, disk->radius, g->value);
    ref.kind = "closed_form";
    ref.value = [sol](double r) { return sol.value(r); };
    auto profile = closed_form_constant_rhs(pb.gamma, ell, dim, c, disk->radius, g->value, cfg.oracle.samples);
    ref.self_residual = verify_radial_substitution(profile, [c](double) { return c; });
    ref.profile = std::move(profile);
  } else {
    auto profile = shoot_radial(pb.f, pb.gamma, pb.ell, dim, disk->radius, g->value, cfg.oracle.samples);
    if (!profile.valid) throw OracleInvalidError("oracle: shooting profile failed its monotonicity check");
    const auto f = pb.f;
    const double radius = disk->radius;
    ref.kind = "shooting";
    ref.self_residual =
        verify_radial_substitution(profile, [&](double r) { return radial_rhs(f, dim, radius, r); });
    auto shared = std::make_shared<const RadialProfile>(profile);
    ref.value = [shared](double r) { return shared->value_at(r); };
    ref.profile = std::move(profile);
  }
  return ref;
}

struct OracleError {
  double abs_linf = 0.0;
  double rel_linf = 0.0;
};

/// Errors of a grid field against the oracle at the active nodes.
inline OracleError compare_to_oracle(const Grid& grid, std::span<const double> u, const OracleReference& ref) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double exact = ref.value(distance(grid.position(k), ref.center));
    num = std::max(num, std::abs(u[k] - exact));
    den = std::max(den, std::abs(exact));
  }
  return {num, den > 0.0 ? num / den : num};
}

namespace detail {

inline nlohmann::ordered_json environment_fingerprint() {
  nlohmann::ordered_json env;
#if defined(__clang__)
  env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = std::string("gcc ") + __VERSION__;
#else
  env["compiler"] = "unknown";
#endif
  env["cxx_standard"] = static_cast<long>(__cplusplus);
#ifdef _OPENMP
  env["openmp"] = static_cast<long>(_OPENMP);
#else
  env["openmp"] = nullptr;
#endif
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
#if defined(__linux__)
  env["platform"] = "linux";
#elif defined(__APPLE__)
  env["platform"] = "darwin";
#else
  env["platform"] = "other";
#endif
  return env;
}

class Artifacts {
 public:
  Artifacts(std::filesystem::path dir, bool wall_time) : dir_(std::move(dir)), wall_time_(wall_time) {
    std::filesystem::create_directories(dir_);
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return os;
  }

  double wall(double ms) const { return wall_time_ ? ms : 0.0; }
  bool wall_time() const { return wall_time_; }

 private:
  std::filesystem::path dir_;
  bool wall_time_;
};

inline std::string suffix(int resolution) { return "_r" + std::to_string(resolution) + ".csv"; }

inline void write_solution(const Artifacts& out, int resolution, const Grid& grid, const ProblemSpec& pb,
                           const std::vector<double>& u) {
  const BoundaryValues bc(grid, pb.g);
  const Stencil st(grid, bc);
  const auto m = uniform_measures(grid);
  const auto mu = superlevel_measures(u, m);
  const auto h = h_exact(u, pb.f, m);
  auto os = out.open("solution" + suffix(resolution));
  CsvWriter csv(os);
  csv.header({"x", "y", "u", "grad_norm", "superlevel_measure", "h"});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto p = grid.position(k);
    const auto du = gradient_central(st, u, k);
    csv.cell(p.x).cell(p.y).cell(u[k]).cell(std::hypot(du[0], du[1])).cell(mu[k]).cell(h[k]).end_row();
  }
}

inline void write_pipeline_csvs(const Artifacts& out, int resolution, const PipelineReport& rep,
                                const std::vector<double>* failed_gaps) {
  {
    auto os = out.open("inner_history" + suffix(resolution));
    CsvWriter csv(os);
    csv.header({"stage", "epsilon", "i", "picard", "iter", "residual_inf", "wall_ms"});
    for (std::size_t s = 0; s < rep.stages.size(); ++s) {
      const auto& st = rep.stages[s];
      for (std::size_t m = 0; m < st.inner.size(); ++m) {
        for (const auto& h : st.inner[m].history) {
          csv.cell(static_cast<long long>(s)).cell(st.epsilon).cell(st.index).cell(static_cast<long long>(m + 1));
          csv.cell(static_cast<long long>(h.iter)).cell(h.residual_inf).cell(out.wall(h.wall_ms)).end_row();
        }
      }
    }
  }
  {
    auto os = out.open("picard_gaps" + suffix(resolution));
    CsvWriter csv(os);
    csv.header({"stage", "epsilon", "i", "picard", "gap"});
    for (std::size_t s = 0; s < rep.stages.size(); ++s) {
      const auto& st = rep.stages[s];
      for (std::size_t m = 0; m < st.gaps.size(); ++m) {
        csv.cell(static_cast<long long>(s)).cell(st.epsilon).cell(st.index).cell(static_cast<long long>(m + 1));
        csv.cell(st.gaps[m]).end_row();
      }
    }
    if (failed_gaps) {
      for (std::size_t m = 0; m < failed_gaps->size(); ++m) {
        csv.cell(static_cast<long long>(rep.stages.size())).cell(rep.failed_epsilon).cell(rep.failed_index);
        csv.cell(static_cast<long long>(m + 1)).cell((*failed_gaps)[m]).end_row();
      }
    }
  }
  {
    auto os = out.open("rungs" + suffix(resolution));
    CsvWriter csv(os);
    csv.header({"rung", "epsilon", "sup_norm", "cauchy_gap"});
    for (std::size_t j = 0; j < rep.rung_sup_norms.size(); ++j) {
      csv.cell(static_cast<long long>(j)).cell(rep.epsilons[j]).cell(rep.rung_sup_norms[j]);
      if (j == 0) {
        csv.cell("nan");
      } else {
        csv.cell(rep.cauchy_gaps[j - 1]);
      }
      csv.end_row();
    }
  }
}

inline nlohmann::ordered_json pipeline_json(const PipelineReport& rep, const Artifacts& out) {
  using json = nlohmann::ordered_json;
  json j;
  j["tol_fixedpoint"] = rep.tol_fixedpoint;
  j["epsilons"] = rep.epsilons;
  j["rung_sup_norms"] = rep.rung_sup_norms;
  j["cauchy_gaps"] = rep.cauchy_gaps;
  j["sup_bound_constant"] = rep.sup_bound_constant;
  j["sup_bound"] = rep.sup_bound;
  json stages = json::array();
  for (const auto& st : rep.stages) {
    json s;
    s["epsilon"] = st.epsilon;
    s["i"] = st.index;
    s["picard_iterations"] = st.picard_iterations;
    s["damping"] = st.damping;
    s["gaps"] = st.gaps;
    s["sup_norm"] = st.sup_norm;
    json inner = json::array();
    for (const auto& r : st.inner) {
      inner.push_back({{"method", to_string(r.method)},
                       {"iterations", r.iterations},
                       {"final_residual", r.final_residual},
                       {"tolerance", r.tolerance},
                       {"fell_back", r.fell_back},
                       {"wall_ms", out.wall(r.wall_ms)}});
    }
    s["inner"] = inner;
    stages.push_back(std::move(s));
  }
  j["stages"] = stages;
  return j;
}

}  // namespace detail

/// Everything a run leaves behind besides its CSVs.
struct RunReport {
  nlohmann::ordered_json config;
  nlohmann::ordered_json environment;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::vector<Verdict> verdicts;
  std::string status = "ok";
  int exit_code = kExitOk;
};

inline nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["status"] = r.status;
  j["exit_code"] = r.exit_code;
  j["config"] = r.config;
  j["environment"] = r.environment;
  j["runs"] = r.runs;
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  auto verdicts = nlohmann::ordered_json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"check", v.check}, {"value", v.value}, {"threshold", v.threshold}, {"pass", v.pass}});
  }
  j["acceptance"] = verdicts;
  return j;
}

namespace detail {

struct SolveOutcome {
  Grid grid;
  std::vector<double> u;
  PipelineReport report;
};

/// Solves at one resolution, writing the per-resolution artifacts. Returns
/// nothing on non-convergence after recording it in `report`.
inline std::optional<SolveOutcome> solve_one(const RunConfig& cfg, int resolution, const Artifacts& out,
                                             RunReport& report, std::ostream& log) {
  Grid grid = build_grid(cfg.problem.domain, resolution);
  nlohmann::ordered_json run;
  run["resolution"] = resolution;
  run["spacing"] = grid.spacing();
  run["nodes"] = grid.size();
  try {
    auto [u, rep] = solve_grad(cfg.problem, cfg.schedule, grid);
    write_solution(out, resolution, grid, cfg.problem, u);
    write_pipeline_csvs(out, resolution, rep, nullptr);
    run["pipeline"] = pipeline_json(rep, out);
    run["max_abs_u"] = max_abs(u);
    report.runs.push_back(std::move(run));
    log << "resolution " << resolution << ": " << rep.stages.size() << " stages, max|u| = " << format_double(max_abs(u))
        << "\n";
    return SolveOutcome{std::move(grid), std::move(u), std::move(rep)};
  } catch (const PipelineError& e) {
    write_pipeline_csvs(out, resolution, e.partial(), &e.history());
    run["pipeline"] = pipeline_json(e.partial(), out);
    run["error"] = {{"message", e.what()},
                    {"epsilon", e.partial().failed_epsilon},
                    {"i", e.partial().failed_index},
                    {"history", e.history()}};
    report.runs.push_back(std::move(run));
    report.status = "non_convergence";
    report.exit_code = kExitNonConvergence;
    log << "resolution " << resolution << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

inline void write_report(const Artifacts& out, const RunReport& report) {
  auto os = out.open("report.json");
  os << to_json(report).dump(2) << "\n";
}

inline void finish_verdicts(RunReport& report) {
  if (report.exit_code != kExitOk) return;
  for (const auto& v : report.verdicts) {
    if (!v.pass) {
      report.status = "acceptance_failure";
      report.exit_code = kExitAcceptanceFailure;
      return;
    }
  }
}

inline void run_solve(const RunConfig& cfg, const Artifacts& out, RunReport& report, std::ostream& log) {
  for (int res : cfg.resolutions) {
    if (!solve_one(cfg, res, out, report, log)) return;
  }
}

inline void run_oracle_compare(const RunConfig& cfg, const Artifacts& out, RunReport& report, std::ostream& log,
                               bool study) {
  OracleReference ref;
  try {
    ref = make_oracle(cfg);
  } catch (const OracleInvalidError& e) {
    report.extra["oracle"] = {{"error", e.what()}};
    report.verdicts.push_back({"oracle_valid", 0.0, 0.0, false});
    return;
  }
  report.extra["oracle"] = {{"kind", ref.kind}, {"samples", cfg.oracle.samples}, {"self_residual", ref.self_residual}};
  {
    auto os = out.open("radial_profile.csv");
    write_profile_csv(os, *ref.profile);
  }

  std::vector<std::pair<int, OracleError>> errors;
  std::vector<double> spacings;
  for (int res : cfg.resolutions) {
    auto outcome = solve_one(cfg, res, out, report, log);
    if (!outcome) return;
    const auto err = compare_to_oracle(outcome->grid, outcome->u, ref);
    errors.emplace_back(res, err);
    spacings.push_back(outcome->grid.spacing());
    report.runs.back()["oracle_error"] = {{"abs_linf", err.abs_linf}, {"rel_linf", err.rel_linf}};
    auto os = out.open("oracle" + suffix(res));
    CsvWriter csv(os);
    csv.header({"x", "y", "r", "u", "u_oracle", "abs_error"});
    for (std::size_t k = 0; k < outcome->grid.size(); ++k) {
      const auto p = outcome->grid.position(k);
      const double r = distance(p, ref.center);
      const double e = ref.value(r);
      csv.cell(p.x).cell(p.y).cell(r).cell(outcome->u[k]).cell(e).cell(std::abs(outcome->u[k] - e)).end_row();
    }
    log << "resolution " << res << ": relative Linf error vs " << ref.kind << " = " << format_double(err.rel_linf)
        << "\n";
  }

  const double finest = errors.back().second.rel_linf;
  report.verdicts.push_back({"rel_linf_at_finest_resolution", finest, cfg.oracle.tolerance,
                             finest <= cfg.oracle.tolerance});
  if (!study) return;

  auto os = out.open("convergence.csv");
  CsvWriter csv(os);
  csv.header({"resolution", "h", "abs_linf", "rel_linf", "ratio"});
  bool monotone = true;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < errors.size(); ++j) {
    csv.cell(errors[j].first).cell(spacings[j]).cell(errors[j].second.abs_linf).cell(errors[j].second.rel_linf);
    if (j == 0) {
      csv.cell("nan");
    } else {
      const double ratio = errors[j - 1].second.abs_linf / errors[j].second.abs_linf;
      min_ratio = std::min(min_ratio, ratio);
      monotone = monotone && errors[j].second.rel_linf < errors[j - 1].second.rel_linf;
      csv.cell(ratio);
    }
    csv.end_row();
  }
  if (cfg.study.require_monotone) report.verdicts.push_back({"error_decreases_monotonically", monotone ? 1.0 : 0.0, 1.0, monotone});
  if (cfg.study.min_ratio && errors.size() > 1) {
    report.verdicts.push_back({"min_error_ratio", min_ratio, *cfg.study.min_ratio, min_ratio >= *cfg.study.min_ratio});
  }
}

inline void run_property_check(const RunConfig& cfg, const Artifacts& out, RunReport& report, std::ostream& log) {
  const PropertyCounts counts{cfg.properties.resolution, cfg.properties.matrices, cfg.properties.fields,
                              cfg.properties.max_principle_pairs, cfg.properties.comparison_pairs};
  const auto results = run_property_suites(cfg.seed, counts);
  auto os = out.open("properties.csv");
  CsvWriter csv(os);
  csv.header({"suite", "property", "trials", "failures", "worst", "threshold", "verdict"});
  for (const auto& r : results) {
    csv.cell(r.suite).cell(r.name).cell(r.trials).cell(r.failures).cell(r.worst).cell(r.threshold);
    csv.cell(r.passed() ? "PASS" : "FAIL").end_row();
    report.verdicts.push_back({r.suite + "." + r.name, r.worst, r.threshold, r.passed()});
    log << (r.passed() ? "PASS " : "FAIL ") << r.suite << "." << r.name << " worst=" << format_double(r.worst) << "\n";
  }
}

}  // namespace detail

/// Executes a validated configuration and returns the process exit code.
inline int run(const RunConfig& cfg, std::ostream& log) {
  const detail::Artifacts out(cfg.output.directory, cfg.output.wall_time);
  RunReport report;
  report.config = to_json(cfg);
  report.environment = detail::environment_fingerprint();
  try {
    switch (cfg.mode) {
      case RunMode::solve:
        detail::run_solve(cfg, out, report, log);
        break;
      case RunMode::oracle_compare:
        detail::run_oracle_compare(cfg, out, report, log, false);
        break;
      case RunMode::convergence_study:
        detail::run_oracle_compare(cfg, out, report, log, true);
        break;
      case RunMode::property_check:
        detail::run_property_check(cfg, out, report, log);
        break;
    }
  } catch (const ConfigError& e) {
    report.status = "config_error";
    report.exit_code = kExitConfigError;
    report.extra["error"] = e.what();
    log << "config error: " << e.what() << "\n";
  }
  detail::finish_verdicts(report);
  detail::write_report(out, report);
  return report.exit_code;
}

}  // namespace gradsolve
