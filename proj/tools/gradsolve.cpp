#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradsolve/config.hpp"
#include "gradsolve/parallel.hpp"
#include "gradsolve/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Degenerate fully nonlinear solver with level-set dependent right-hand side"};
  std::string mode;
  std::string config_path;
  std::string out_dir;
  std::vector<int> resolutions;
  app.add_option("mode", mode, "solve | oracle-compare | convergence-study | property-check")->required();
  app.add_option("--config", config_path, "Run configuration (YAML or JSON)")->required();
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  app.add_option("--resolution", resolutions, "Grid resolution(s) (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gradsolve::kExitOk : gradsolve::kExitConfigError;
  }

  gradsolve::configure_threads_from_env();
  gradsolve::RunConfig cfg;
  try {
    cfg = gradsolve::load_config(config_path);
    const auto m = gradsolve::parse_mode(mode);
    if (!m) throw gradsolve::ConfigError("unknown mode '" + mode + "'");
    cfg.mode = *m;
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    for (int r : resolutions) {
      if (r < 8) throw gradsolve::ConfigError("--resolution must be >= 8");
    }
    if (!resolutions.empty()) cfg.resolutions = resolutions;
  } catch (const gradsolve::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gradsolve::kExitConfigError;
  }

  try {
    return gradsolve::run(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
