#ifndef TURNPIKE_CONFIG_HPP
#define TURNPIKE_CONFIG_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "turnpike/classify.hpp"
#include "turnpike/pde.hpp"

#include <json.hpp>

namespace turnpike {

/// Schema violation; `path` points at the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& msg)
      : std::runtime_error("config error at " + path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline constexpr int kConfigSchemaVersion = 1;

struct LinearSystemSpec {
  Matrix A, B;
  Vector initial_state;
};

struct NeuralSystemSpec {
  bool inside = false;
  Sigma sigma = Sigma::tanh();
  int dim = 2;
  Vector initial_state;
};

struct PdeSystemSpec {
  PdeKind kind = PdeKind::heat;
  double length = 1.0;
  int n_interior = 64;
  double omega_lo = 0.0, omega_hi = 1.0;
  ScalarNonlinearity nonlinearity;
  double u_bar_value = 0.0;  // constant on omega
  // initial state: explicit values, "zero", or an eigenmode of the Laplacian
  std::variant<std::monostate, Vector, int> initial;  // monostate = zero, int = eigenmode
  double initial_amplitude = 1.0;
  Vector initial_velocity;  // wave only; empty = zero
};

struct CostBlock {
  std::optional<Vector> y_bar;  // empty => steady_solve directive (PDE only)
  bool steady_solve = false;
  std::optional<Vector> u_bar;
  bool final_cost_none = true;
  double final_weight = 0.0;
  std::optional<Vector> final_anchor;        // defaults to y_bar
  bool final_anchor_initial_state = false;   // anchor = y0 (PDE loops)
  double state_weight = 1.0;
  double control_weight = 1.0;
};

struct SolverBlock {
  int max_iters = 2000;
  double tolerance = 1e-6;
  int restarts = 5;
};

struct DiagnosticsBlock {
  double boundary_width = -1.0;  // <0 => 2 * steering_horizon
  double margin = 2.0;
  double tau = -1.0;  // <0 => horizon / 4
  double steering_horizon = 1.0;
};

struct ProbeBlock {
  double radius = 0.5;
  int samples = 64;
  double steering_horizon = 1.0;
  int steps = 100;
};

/// Parsed and validated experiment configuration (schema_version 1). Unknown
/// keys are rejected; seed is mandatory.
struct ExperimentConfig {
  unsigned long seed = 0;
  std::string output_dir = "out";
  std::variant<LinearSystemSpec, NeuralSystemSpec, PdeSystemSpec> system;
  CostBlock cost;
  std::vector<double> horizons;
  int steps_per_unit_time = 0;  // 0 => auto (PDE stability limit)
  SolverBlock solver;
  DiagnosticsBlock diagnostics;
  ProbeBlock probe;
  bool strict = false;
  nlohmann::ordered_json raw;  // canonical echo for reports
};

struct ClassifyFileConfig {
  unsigned long seed = 0;
  std::string output_dir = "out";
  ClassifyProblem problem;
  SolverBlock solver;
  bool points_generated = false;  // dataset synthesized from the seed
  nlohmann::ordered_json raw;
};

/// Throws ConfigError on any schema violation.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ClassifyFileConfig parse_classify_config(const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::string& path);
ClassifyFileConfig load_classify_config(const std::string& path);

}  // namespace turnpike

#endif
