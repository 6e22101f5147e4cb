#ifndef TURNPIKE_EXPERIMENT_HPP
#define TURNPIKE_EXPERIMENT_HPP

#include <string>

#include "turnpike/config.hpp"
#include "turnpike/diagnostics.hpp"

namespace turnpike {

/// CLI exit codes: 0 ok, 1 verdict failure under strict, 2 config error,
/// 3 runtime failure.
enum class ExitCode : int { ok = 0, verdict_failure = 1, config_error = 2, runtime_failure = 3 };

struct RunSummary {
  ExitCode exit_code = ExitCode::ok;
  std::string message;
  nlohmann::ordered_json report;  // top-level report written to disk
};

/// Single-horizon solve + diagnostics; writes report.json and signals.csv
/// into out_dir (plus trajectory.csv / steady-state snapshots when asked).
RunSummary run_solve(const ExperimentConfig& config, const std::string& out_dir,
                     bool dump_trajectory = false);

/// Horizon sweep: per-T subreports plus an aggregate with the uniform-bound
/// verdict, the midpoint-distance table and fitted rates per horizon.
RunSummary run_sweep(const ExperimentConfig& config, const std::string& out_dir);

/// Steering-cost probe in both directions; writes probe.json and ratio CSVs.
RunSummary run_probe(const ExperimentConfig& config, const std::string& out_dir);

/// Shared-control classification demo; writes classify.json, trajectories
/// and the inferred classifier sampled on [-2,2]^2.
RunSummary run_classify(const ClassifyFileConfig& config, const std::string& out_dir);

/// Schema check only.
RunSummary validate_config_file(const std::string& path);

}  // namespace turnpike

#endif
