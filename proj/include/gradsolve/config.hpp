#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gradsolve/domain_grid.hpp"
#include "gradsolve/error.hpp"
#include "gradsolve/outer_fixedpoint.hpp"

namespace gradsolve {

enum class RunMode { solve, oracle_compare, convergence_study, property_check };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::solve:
      return "solve";
    case RunMode::oracle_compare:
      return "oracle-compare";
    case RunMode::convergence_study:
      return "convergence-study";
    case RunMode::property_check:
      return "property-check";
  }
  return "solve";
}

inline std::optional<RunMode> parse_mode(std::string_view s) {
  for (auto m : {RunMode::solve, RunMode::oracle_compare, RunMode::convergence_study, RunMode::property_check}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

enum class OracleKind { automatic, closed_form, shooting };

inline const char* to_string(OracleKind k) {
  switch (k) {
    case OracleKind::closed_form:
      return "closed_form";
    case OracleKind::shooting:
      return "shooting";
    default:
      return "auto";
  }
}

struct OracleSettings {
  OracleKind kind = OracleKind::automatic;
  int samples = 4096;
  /// Relative L-infinity error allowed against the oracle.
  double tolerance = 5e-2;
};

/// Checks applied by convergence-study.
struct StudySettings {
  bool require_monotone = true;
  /// Minimum error ratio between consecutive resolutions, if set.
  std::optional<double> min_ratio;
};

struct PropertySettings {
  int resolution = 16;
  int matrices = 1000;
  int fields = 50;
  int max_principle_pairs = 20;
  int comparison_pairs = 10;
};

struct OutputSettings {
  std::string directory = "out";
  /// Record wall-clock columns; off by default so reruns are byte-identical.
  bool wall_time = false;
};

struct RunConfig {
  RunMode mode = RunMode::solve;
  ProblemSpec problem{};
  std::vector<int> resolutions{64};
  SchedulePlan schedule{};
  OracleSettings oracle{};
  StudySettings study{};
  PropertySettings properties{};
  OutputSettings output{};
  std::uint64_t seed = 20240601;
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ConfigError(where(n) + msg);
  }

  std::string where(const YAML::Node& n) const {
    const auto m = n.Mark();
    if (m.is_null()) return source_ + ": ";
    return source_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
  }

  /// Rejects keys outside `allowed`, reporting the offending key's position.
  void only(const YAML::Node& map, const std::string& ctx, std::initializer_list<std::string_view> allowed) const {
    if (!map.IsMap()) fail(map, ctx + " must be a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) fail(kv.first, "unknown key '" + key + "' in " + ctx);
    }
  }

  template <class T>
  T as(const YAML::Node& n, const std::string& name) const {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, name + ": wrong type");
    }
  }

  template <class T>
  void read(const YAML::Node& map, const char* key, const std::string& ctx, T& out) const {
    if (const auto n = map[key]) out = as<T>(n, ctx + "." + key);
  }

  template <class T>
  void read(const YAML::Node& map, const char* key, const std::string& ctx, std::optional<T>& out) const {
    if (const auto n = map[key]; n && !n.IsNull()) out = as<T>(n, ctx + "." + key);
  }

  Point point(const YAML::Node& n, const std::string& name) const {
    if (!n.IsSequence() || n.size() != 2) fail(n, name + " must be a pair [x, y]");
    return {as<double>(n[0], name), as<double>(n[1], name)};
  }

  Domain domain(const YAML::Node& n) const {
    only(n, "domain", {"shape", "radius", "width", "height", "inner", "outer", "center", "dimension"});
    Domain d;
    read(n, "dimension", "domain", d.dimension);
    const auto shape = n["shape"] ? as<std::string>(n["shape"], "domain.shape") : std::string("disk");
    Point c{};
    if (n["center"]) c = point(n["center"], "domain.center");
    if (shape == "disk") {
      Disk s{1.0, c};
      read(n, "radius", "domain", s.radius);
      d.shape = s;
    } else if (shape == "rectangle") {
      Rectangle s{1.0, 1.0, c};
      read(n, "width", "domain", s.width);
      read(n, "height", "domain", s.height);
      d.shape = s;
    } else if (shape == "annulus") {
      Annulus s{0.5, 1.0, c};
      read(n, "inner", "domain", s.inner);
      read(n, "outer", "domain", s.outer);
      d.shape = s;
    } else {
      fail(n["shape"], "domain.shape must be one of disk, rectangle, annulus");
    }
    try {
      validate(d);
    } catch (const ConfigError& e) {
      fail(n, e.what());
    }
    return d;
  }

  MonotoneRHS rhs(const YAML::Node& n) const {
    if (n.IsScalar()) {
      const double c = as<double>(n, "problem.f");
      try {
        return MonotoneRHS::constant(c);
      } catch (const ConfigError& e) {
        fail(n, e.what());
      }
    }
    if (!n.IsSequence() || n.size() == 0) fail(n, "problem.f must be a number or a list of [s, f(s)] pairs");
    std::vector<std::pair<double, double>> bp;
    for (std::size_t k = 0; k < n.size(); ++k) {
      const auto e = n[k];
      if (!e.IsSequence() || e.size() != 2) fail(e, "problem.f breakpoint " + std::to_string(k) + " must be [s, f(s)]");
      bp.emplace_back(as<double>(e[0], "problem.f"), as<double>(e[1], "problem.f"));
      try {
        MonotoneRHS::check_breakpoint(bp, k);
      } catch (const ConfigError& err) {
        fail(e, err.what());
      }
    }
    return MonotoneRHS(std::move(bp));
  }

  BoundarySpec boundary(const YAML::Node& n) const {
    if (n.IsScalar()) return ConstantBoundary{as<double>(n, "problem.g")};
    only(n, "problem.g", {"type", "value", "c0", "cx", "cy", "table", "center", "samples"});
    const auto type = n["type"] ? as<std::string>(n["type"], "problem.g.type") : std::string("constant");
    BoundarySpec g;
    if (type == "constant") {
      ConstantBoundary b;
      read(n, "value", "problem.g", b.value);
      g = b;
    } else if (type == "affine") {
      AffineBoundary b;
      read(n, "c0", "problem.g", b.c0);
      read(n, "cx", "problem.g", b.cx);
      read(n, "cy", "problem.g", b.cy);
      g = b;
    } else if (type == "radial_table") {
      RadialTableBoundary b;
      if (n["center"]) b.center = point(n["center"], "problem.g.center");
      const auto t = n["table"];
      if (!t || !t.IsSequence()) fail(n, "problem.g.table must be a list of [r, g] pairs");
      for (const auto& e : t) {
        if (!e.IsSequence() || e.size() != 2) fail(e, "problem.g.table entries must be [r, g]");
        b.table.emplace_back(as<double>(e[0], "problem.g.table"), as<double>(e[1], "problem.g.table"));
      }
      g = b;
    } else if (type == "point_table") {
      PointTableBoundary b;
      const auto s = n["samples"];
      if (!s || !s.IsSequence()) fail(n, "problem.g.samples must be a list of [x, y, g] triples");
      for (const auto& e : s) {
        if (!e.IsSequence() || e.size() != 3) fail(e, "problem.g.samples entries must be [x, y, g]");
        b.samples.push_back({as<double>(e[0], "problem.g.samples"), as<double>(e[1], "problem.g.samples"),
                             as<double>(e[2], "problem.g.samples")});
      }
      g = b;
    } else {
      fail(n["type"], "problem.g.type must be one of constant, affine, radial_table, point_table");
    }
    try {
      validate(g);
    } catch (const ConfigError& e) {
      fail(n, e.what());
    }
    return g;
  }

  ProblemSpec problem(const YAML::Node& n) const {
    only(n, "problem", {"gamma", "lambda", "Lambda", "f", "g"});
    ProblemSpec p;
    read(n, "gamma", "problem", p.gamma);
    read(n, "lambda", "problem", p.ell.lambda);
    read(n, "Lambda", "problem", p.ell.Lambda);
    if (!(p.gamma >= 0.0)) fail(n["gamma"], "problem.gamma must be >= 0");
    try {
      validate(p.ell);
    } catch (const ConfigError& e) {
      fail(n["lambda"] ? n["lambda"] : n, e.what());
    }
    if (n["f"]) p.f = rhs(n["f"]);
    if (n["g"]) p.g = boundary(n["g"]);
    return p;
  }

  void inner(const YAML::Node& n, InnerConfig& cfg) const {
    only(n, "inner",
         {"method", "cfl_safety", "tol_residual", "max_iters", "history_stride", "max_policy_iters", "frames",
          "gradient"});
    if (const auto m = n["method"]) {
      const auto s = as<std::string>(m, "inner.method");
      if (s == "pseudo_time") {
        cfg.method = InnerMethod::pseudo_time;
      } else if (s == "policy") {
        cfg.method = InnerMethod::policy;
      } else {
        fail(m, "inner.method must be pseudo_time or policy");
      }
    }
    read(n, "cfl_safety", "inner", cfg.cfl_safety);
    read(n, "tol_residual", "inner", cfg.tol_residual);
    read(n, "max_iters", "inner", cfg.max_iters);
    read(n, "history_stride", "inner", cfg.history_stride);
    read(n, "max_policy_iters", "inner", cfg.max_policy_iters);
    if (const auto f = n["frames"]) {
      const auto s = as<std::string>(f, "inner.frames");
      if (s == "axis_and_diagonal") {
        cfg.frames = FrameSet::axis_and_diagonal();
      } else if (s == "axis") {
        cfg.frames = FrameSet::axis_only();
      } else {
        fail(f, "inner.frames must be axis_and_diagonal or axis");
      }
    }
    if (const auto gr = n["gradient"]) {
      const auto s = as<std::string>(gr, "inner.gradient");
      if (s == "one_sided") {
        cfg.gradient = GradientEstimate::one_sided;
      } else if (s == "central") {
        cfg.gradient = GradientEstimate::central;
      } else {
        fail(gr, "inner.gradient must be one_sided or central");
      }
    }
    try {
      validate(cfg);
    } catch (const ConfigError& e) {
      fail(n, e.what());
    }
    if (cfg.max_policy_iters < 1) fail(n, "inner: max_policy_iters must be >= 1");
  }

  void schedule(const YAML::Node& n, SchedulePlan& plan) const {
    only(n, "schedule",
         {"eps0", "eps_min", "i0", "i_max", "tol_fixedpoint", "max_picard", "damping", "sup_bound_constant"});
    read(n, "eps0", "schedule", plan.eps0);
    read(n, "eps_min", "schedule", plan.eps_min);
    read(n, "i0", "schedule", plan.i0);
    read(n, "i_max", "schedule", plan.i_max);
    read(n, "tol_fixedpoint", "schedule", plan.tol_fixedpoint);
    read(n, "max_picard", "schedule", plan.max_picard);
    read(n, "damping", "schedule", plan.damping);
    read(n, "sup_bound_constant", "schedule", plan.sup_bound_constant);
    try {
      validate(plan);
    } catch (const ConfigError& e) {
      fail(n, e.what());
    }
  }

  RunConfig run(const YAML::Node& root) const {
    only(root, "config",
         {"mode", "seed", "domain", "resolution", "resolutions", "problem", "schedule", "inner", "oracle", "study",
          "properties", "output"});
    RunConfig cfg;
    if (const auto m = root["mode"]) {
      const auto parsed = parse_mode(as<std::string>(m, "mode"));
      if (!parsed) fail(m, "mode must be one of solve, oracle-compare, convergence-study, property-check");
      cfg.mode = *parsed;
    }
    read(root, "seed", "config", cfg.seed);
    if (root["domain"]) cfg.problem.domain = domain(root["domain"]);
    if (root["resolution"] && root["resolutions"]) fail(root["resolutions"], "give either resolution or resolutions");
    if (const auto r = root["resolution"]) cfg.resolutions = {as<int>(r, "resolution")};
    if (const auto r = root["resolutions"]) {
      if (!r.IsSequence() || r.size() == 0) fail(r, "resolutions must be a non-empty list");
      cfg.resolutions.clear();
      for (const auto& e : r) cfg.resolutions.push_back(as<int>(e, "resolutions"));
    }
    for (int res : cfg.resolutions) {
      if (res < 8) fail(root["resolutions"] ? root["resolutions"] : root["resolution"], "resolution must be >= 8");
    }
    if (root["problem"]) {
      const Domain d = cfg.problem.domain;
      cfg.problem = problem(root["problem"]);
      cfg.problem.domain = d;
    }
    if (root["schedule"]) schedule(root["schedule"], cfg.schedule);
    if (root["inner"]) inner(root["inner"], cfg.schedule.inner);
    if (const auto o = root["oracle"]) {
      only(o, "oracle", {"kind", "samples", "tolerance"});
      if (const auto k = o["kind"]) {
        const auto s = as<std::string>(k, "oracle.kind");
        if (s == "auto") {
          cfg.oracle.kind = OracleKind::automatic;
        } else if (s == "closed_form") {
          cfg.oracle.kind = OracleKind::closed_form;
        } else if (s == "shooting") {
          cfg.oracle.kind = OracleKind::shooting;
        } else {
          fail(k, "oracle.kind must be auto, closed_form or shooting");
        }
      }
      read(o, "samples", "oracle", cfg.oracle.samples);
      read(o, "tolerance", "oracle", cfg.oracle.tolerance);
      if (cfg.oracle.samples < 256) fail(o, "oracle.samples must be >= 256");
      if (!(cfg.oracle.tolerance > 0.0)) fail(o, "oracle.tolerance must be > 0");
    }
    if (const auto s = root["study"]) {
      only(s, "study", {"require_monotone", "min_ratio"});
      read(s, "require_monotone", "study", cfg.study.require_monotone);
      read(s, "min_ratio", "study", cfg.study.min_ratio);
    }
    if (const auto p = root["properties"]) {
      only(p, "properties", {"resolution", "matrices", "fields", "max_principle_pairs", "comparison_pairs"});
      read(p, "resolution", "properties", cfg.properties.resolution);
      read(p, "matrices", "properties", cfg.properties.matrices);
      read(p, "fields", "properties", cfg.properties.fields);
      read(p, "max_principle_pairs", "properties", cfg.properties.max_principle_pairs);
      read(p, "comparison_pairs", "properties", cfg.properties.comparison_pairs);
      if (cfg.properties.resolution < 8) fail(p, "properties.resolution must be >= 8");
    }
    if (const auto o = root["output"]) {
      only(o, "output", {"directory", "wall_time"});
      read(o, "directory", "output", cfg.output.directory);
      read(o, "wall_time", "output", cfg.output.wall_time);
    }
    try {
      validate(cfg.problem);
    } catch (const ConfigError& e) {
      fail(root, e.what());
    }
    return cfg;
  }

 private:
  std::string source_;
};

}  // namespace detail

/// Parses and validates a configuration held in memory. `source` names it in
/// diagnostics ("<source>:<line>:<column>: message").
inline RunConfig load_config_text(const std::string& text, const std::string& source = "<config>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": parse error: " + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  return detail::ConfigReader(source).run(root);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), path);
}

/// Effective configuration with every default filled in; loadable again by
/// load_config_text.
inline nlohmann::ordered_json to_json(const RunConfig& c) {
  using json = nlohmann::ordered_json;
  json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;

  json d;
  std::visit(detail::overloaded{[&](const Disk& s) {
                                  d["shape"] = "disk";
                                  d["radius"] = s.radius;
                                  d["center"] = {s.center.x, s.center.y};
                                },
                                [&](const Rectangle& s) {
                                  d["shape"] = "rectangle";
                                  d["width"] = s.width;
                                  d["height"] = s.height;
                                  d["center"] = {s.center.x, s.center.y};
                                },
                                [&](const Annulus& s) {
                                  d["shape"] = "annulus";
                                  d["inner"] = s.inner;
                                  d["outer"] = s.outer;
                                  d["center"] = {s.center.x, s.center.y};
                                }},
             c.problem.domain.shape);
  d["dimension"] = c.problem.domain.dimension;
  j["domain"] = d;
  j["resolutions"] = c.resolutions;

  json p;
  p["gamma"] = c.problem.gamma;
  p["lambda"] = c.problem.ell.lambda;
  p["Lambda"] = c.problem.ell.Lambda;
  json f = json::array();
  for (const auto& [s, v] : c.problem.f.breakpoints()) f.push_back({s, v});
  p["f"] = f;
  json g;
  std::visit(detail::overloaded{[&](const ConstantBoundary& b) {
                                  g["type"] = "constant";
                                  g["value"] = b.value;
                                },
                                [&](const AffineBoundary& b) {
                                  g["type"] = "affine";
                                  g["c0"] = b.c0;
                                  g["cx"] = b.cx;
                                  g["cy"] = b.cy;
                                },
                                [&](const RadialTableBoundary& b) {
                                  g["type"] = "radial_table";
                                  g["center"] = {b.center.x, b.center.y};
                                  json t = json::array();
                                  for (const auto& [r, v] : b.table) t.push_back({r, v});
                                  g["table"] = t;
                                },
                                [&](const PointTableBoundary& b) {
                                  g["type"] = "point_table";
                                  json t = json::array();
                                  for (const auto& s : b.samples) t.push_back({s[0], s[1], s[2]});
                                  g["samples"] = t;
                                }},
             c.problem.g);
  p["g"] = g;
  j["problem"] = p;

  const auto& s = c.schedule;
  json sj;
  sj["eps0"] = s.eps0;
  sj["eps_min"] = s.eps_min;
  sj["i0"] = s.i0;
  sj["i_max"] = s.i_max;
  sj["tol_fixedpoint"] = s.tol_fixedpoint ? json(*s.tol_fixedpoint) : json(nullptr);
  sj["max_picard"] = s.max_picard;
  sj["damping"] = s.damping;
  sj["sup_bound_constant"] = s.sup_bound_constant ? json(*s.sup_bound_constant) : json(nullptr);
  j["schedule"] = sj;

  const auto& in = s.inner;
  json ij;
  ij["method"] = to_string(in.method);
  ij["cfl_safety"] = in.cfl_safety;
  ij["tol_residual"] = in.tol_residual ? json(*in.tol_residual) : json(nullptr);
  ij["max_iters"] = in.max_iters;
  ij["history_stride"] = in.history_stride;
  ij["max_policy_iters"] = in.max_policy_iters;
  ij["frames"] = in.frames.frames.size() == 1 ? "axis" : "axis_and_diagonal";
  ij["gradient"] = to_string(in.gradient);
  j["inner"] = ij;

  j["oracle"] = {{"kind", to_string(c.oracle.kind)}, {"samples", c.oracle.samples}, {"tolerance", c.oracle.tolerance}};
  j["study"] = {{"require_monotone", c.study.require_monotone},
                {"min_ratio", c.study.min_ratio ? json(*c.study.min_ratio) : json(nullptr)}};
  j["properties"] = {{"resolution", c.properties.resolution},
                     {"matrices", c.properties.matrices},
                     {"fields", c.properties.fields},
                     {"max_principle_pairs", c.properties.max_principle_pairs},
                     {"comparison_pairs", c.properties.comparison_pairs}};
  j["output"] = {{"directory", c.output.directory}, {"wall_time", c.output.wall_time}};
  return j;
}

}  // namespace gradsolve
