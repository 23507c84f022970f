#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gradsolve/config.hpp"
#include "gradsolve/runner.hpp"

using namespace gradsolve;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = GRADSOLVE_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("gradsolve_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    load_config_text(text, "test.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json report_of(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "report.json")); }

}  // namespace

TEST(Config, MinimalFileGetsDefaults) {
  const auto cfg = load_config(kConfigDir + "/minimal.yaml");
  EXPECT_EQ(cfg.mode, RunMode::solve);
  EXPECT_EQ(cfg.problem.gamma, 1.0);
  EXPECT_EQ(cfg.schedule.i0, 4);
  EXPECT_EQ(cfg.schedule.inner.gradient, GradientEstimate::one_sided);
  EXPECT_FALSE(cfg.output.wall_time);
}

TEST(Config, DecreasingRHSReportsLineAndBreakpoint) {
  try {
    load_config(kConfigDir + "/invalid_decreasing_f.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("invalid_decreasing_f.yaml:10:7:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("f must be non-decreasing at breakpoint 1"), std::string::npos) << msg;
  }
}

TEST(Config, Rejections) {
  EXPECT_NE(config_error("problem:\n  lambda: 2\n  Lambda: 1\n").find("test.yaml:2:"), std::string::npos);
  EXPECT_NE(config_error("bogus: 1\n").find("test.yaml:1:1:"), std::string::npos);
  EXPECT_NE(config_error("resolution: 4\n").find("test.yaml:1:"), std::string::npos);
  EXPECT_NE(config_error("mode: [unclosed\n").find("parse error"), std::string::npos);
  EXPECT_NE(config_error("mode: sideways\n"), "");
  EXPECT_NE(config_error("domain:\n  shape: annulus\n  r_in: 1.0\n  r_out: 0.5\n"), "");
  EXPECT_NE(config_error("inner:\n  gradient: sideways\n"), "");
  EXPECT_NE(config_error("problem:\n  f: -1\n"), "");
}

TEST(Config, EchoRoundTrips) {
  for (const char* name : {"criterion1_closed_form.yaml", "criterion3_nonlocal_radial.yaml",
                           "criterion9_determinism.yaml", "forced_nonconvergence.yaml"}) {
    const auto cfg = load_config(kConfigDir + "/" + name);
    const auto echo = to_json(cfg);
    const auto again = load_config_text(echo.dump(), "echo");
    EXPECT_EQ(to_json(again), echo) << name;
  }
}

TEST(Csv, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-2.5e-7), "-2.4999999999999999e-07");
}

TEST(Runner, OracleCompareConstantRHS) {
  auto cfg = load_config_text(
      "mode: oracle-compare\nresolution: 16\nproblem:\n  f: 1.5\nschedule:\n  eps_min: 1.0e-3\n", "inline");
  const auto dir = scratch("oracle_constant");
  cfg.output.directory = dir.string();
  std::ostringstream log;
  EXPECT_EQ(run(cfg, log), kExitOk) << log.str();
  const auto rep = report_of(dir);
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_EQ(rep["oracle"]["kind"], "closed_form");
  EXPECT_LE(rep["runs"][0]["oracle_error"]["rel_linf"].get<double>(), 0.05);
  for (const char* f : {"solution_r16.csv", "oracle_r16.csv", "radial_profile.csv", "inner_history_r16.csv",
                        "picard_gaps_r16.csv", "rungs_r16.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "solution_r16.csv").substr(0, 37), "x,y,u,grad_norm,superlevel_measure,h\n");
}

TEST(Runner, ForcedNonConvergenceExitsWithGaps) {
  auto cfg = load_config(kConfigDir + "/forced_nonconvergence.yaml");
  const auto dir = scratch("forced");
  cfg.output.directory = dir.string();
  std::ostringstream log;
  EXPECT_EQ(run(cfg, log), kExitNonConvergence);
  const auto rep = report_of(dir);
  EXPECT_EQ(rep["status"], "non_convergence");
  const auto& err = rep["runs"][0]["error"];
  EXPECT_EQ(err["history"].size(), 1u);
  EXPECT_GT(err["history"][0].get<double>(), 0.0);
  EXPECT_EQ(err["i"], 4);
  EXPECT_NE(slurp(dir / "picard_gaps_r16.csv").find("stage,epsilon,i,picard,gap"), std::string::npos);
}

TEST(Runner, ConvergenceStudyWritesRatios) {
  auto cfg = load_config_text(
      "mode: convergence-study\nresolutions: [8, 16]\nproblem:\n  f: 1.5\nschedule:\n  eps_min: 1.0e-3\n",
      "inline");
  const auto dir = scratch("study");
  cfg.output.directory = dir.string();
  std::ostringstream log;
  const int code = run(cfg, log);
  const auto rep = report_of(dir);
  bool all_pass = true;
  for (const auto& v : rep["acceptance"]) all_pass = all_pass && v["pass"].get<bool>();
  EXPECT_EQ(code, all_pass ? kExitOk : kExitAcceptanceFailure);
  std::istringstream csv(slurp(dir / "convergence.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "resolution,h,abs_linf,rel_linf,ratio");
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("8,0.25,", 0), 0u) << line;
  EXPECT_EQ(line.substr(line.size() - 4), ",nan");
}

TEST(Runner, OracleNeedsDiskWithConstantBoundary) {
  auto cfg = load_config_text(
      "mode: oracle-compare\nresolution: 8\ndomain:\n  shape: rectangle\n  width: 1\n  height: 1\n", "inline");
  const auto dir = scratch("bad_oracle");
  cfg.output.directory = dir.string();
  std::ostringstream log;
  EXPECT_EQ(run(cfg, log), kExitConfigError);
  EXPECT_EQ(report_of(dir)["status"], "config_error");
}

TEST(Runner, PropertyCheckIsByteIdentical) {
  auto cfg = load_config(kConfigDir + "/criterion9_determinism.yaml");
  cfg.mode = RunMode::property_check;
  std::string first;
  for (int rep = 0; rep < 2; ++rep) {
    const auto dir = scratch("props");
    cfg.output.directory = dir.string();
    std::ostringstream log;
    EXPECT_EQ(run(cfg, log), kExitOk) << log.str();
    const std::string both = slurp(dir / "properties.csv") + slurp(dir / "report.json");
    if (rep == 0) {
      first = both;
    } else {
      EXPECT_EQ(both, first);
    }
  }
}
