#include <iostream>

#include <CLI11.hpp>

#include "turnpike/experiment.hpp"

namespace {

int finish(const turnpike::RunSummary& summary) {
  if (!summary.message.empty()) {
    if (summary.exit_code == turnpike::ExitCode::ok)
      std::cout << summary.message << "\n";
    else
      std::cerr << summary.message << "\n";
  }
  return static_cast<int>(summary.exit_code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"turnpike: long-horizon optimal control experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long long seed_override = -1;
  bool strict = false;
  bool dump_trajectory = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed_override, "seed override");
    cmd->add_flag("--strict", strict, "nonzero exit on verdict failure");
  };

  CLI::App* solve = app.add_subcommand("solve", "single-horizon solve + diagnostics");
  add_common(solve);
  solve->add_flag("--dump-trajectory", dump_trajectory, "also write trajectory.csv");
  CLI::App* sweep = app.add_subcommand("sweep", "horizon sweep with aggregate report");
  add_common(sweep);
  CLI::App* probe = app.add_subcommand("probe", "steering-cost probe around the steady pair");
  add_common(probe);
  CLI::App* classify = app.add_subcommand("classify", "shared-control classification demo");
  add_common(classify);
  CLI::App* validate = app.add_subcommand("validate-config", "schema-check a config file");
  validate->add_option("--config", config_path, "config file (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  using namespace turnpike;
  try {
    if (validate->parsed()) return finish(validate_config_file(config_path));

    if (classify->parsed()) {
      ClassifyFileConfig cfg = load_classify_config(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<unsigned long>(seed_override);
      const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
      return finish(run_classify(cfg, dir));
    }

    ExperimentConfig cfg = load_experiment_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<unsigned long>(seed_override);
    if (strict) cfg.strict = true;
    const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
    if (solve->parsed()) return finish(run_solve(cfg, dir, dump_trajectory));
    if (sweep->parsed()) return finish(run_sweep(cfg, dir));
    if (probe->parsed()) return finish(run_probe(cfg, dir));
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(ExitCode::runtime_failure);
  }
  return 0;
}
