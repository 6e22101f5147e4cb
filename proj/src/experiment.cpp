#include "turnpike/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "turnpike/steering.hpp"

namespace turnpike {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// shortest round-trip decimal form, reparsing to the same bits
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_file(path, j.dump(2) + "\n");
}

struct BuiltProblem {
  ControlAffineSystem system;
  Vector initial_state;
  CostSpec cost;
  bool driftless = false;
  int steps_per_unit = 100;
  std::function<double(const Vector&)> state_distance;
  double control_metric_scale = 1.0;  // sqrt(h) for PDE control channels
  std::optional<PdeSystem> pde;
};

Vector pde_initial_position(const PdeSystemSpec& spec, const Grid1D& grid) {
  const int n = grid.n_interior;
  if (std::holds_alternative<std::monostate>(spec.initial)) return Vector::Zero(n);
  if (std::holds_alternative<Vector>(spec.initial)) {
    const Vector& v = std::get<Vector>(spec.initial);
    if (static_cast<int>(v.size()) != n)
      throw ConfigError("system.initial_state", "dimension must match n_interior");
    return v;
  }
  const int mode = std::get<int>(spec.initial);
  if (mode < 1 || mode > n) throw ConfigError("system.initial_state.eigenmode", "mode out of range");
  Vector v(n);
  for (int i = 0; i < n; ++i)
    v(i) = spec.initial_amplitude * std::sin(mode * M_PI * grid.node(i) / grid.length);
  return v;
}

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  BuiltProblem built;

  if (std::holds_alternative<PdeSystemSpec>(cfg.system)) {
    const PdeSystemSpec& spec = std::get<PdeSystemSpec>(cfg.system);
    Grid1D grid(spec.length, spec.n_interior, spec.omega_lo, spec.omega_hi);
    const int m = static_cast<int>(grid.omega_indices().size());
    const Vector u_bar = Vector::Constant(m, spec.u_bar_value);
    if (cfg.cost.u_bar)
      throw ConfigError("cost.u_bar", "PDE runs take the steady control from system.u_bar");

    Field y_bar;
    if (cfg.cost.steady_solve || !cfg.cost.y_bar) {
      y_bar = solve_steady(grid, spec.nonlinearity, u_bar);
    } else {
      if (static_cast<int>(cfg.cost.y_bar->size()) != grid.n_interior)
        throw ConfigError("cost.y_bar", "dimension must match n_interior");
      y_bar = Field{*cfg.cost.y_bar, grid.spacing()};
    }
    PdeSystem pde = PdeSystem::create(spec.kind, grid, spec.nonlinearity, u_bar, y_bar);
    built.system = semidiscretize(pde);
    built.driftless = false;

    const Vector position = pde_initial_position(spec, grid);
    if (spec.kind == PdeKind::heat) {
      built.initial_state = position;
    } else {
      Vector velocity = Vector::Zero(grid.n_interior);
      if (spec.initial_velocity.size() > 0) {
        if (static_cast<int>(spec.initial_velocity.size()) != grid.n_interior)
          throw ConfigError("system.initial_velocity", "dimension must match n_interior");
        velocity = spec.initial_velocity;
      }
      built.initial_state = wave_pack(Field{position, grid.spacing()}, Field{velocity, grid.spacing()});
    }

    FinalCost final_cost = FinalCost::off();
    if (!cfg.cost.final_cost_none) {
      Vector anchor;
      if (cfg.cost.final_anchor) {
        anchor = *cfg.cost.final_anchor;
        if (anchor.size() != built.system.state_dim)
          throw ConfigError("cost.final_cost.anchor", "dimension must match the state");
      } else if (cfg.cost.final_anchor_initial_state) {
        anchor = built.initial_state;
      } else {
        anchor = Vector::Zero(built.system.state_dim);
        anchor.head(grid.n_interior) = y_bar.values;
      }
      final_cost = FinalCost::quadratic(cfg.cost.final_weight, anchor);
    }
    built.cost = pde_cost_spec(pde, final_cost, cfg.cost.state_weight, cfg.cost.control_weight);
    built.steps_per_unit =
        cfg.steps_per_unit_time > 0 ? cfg.steps_per_unit_time : suggested_steps_per_unit_time(pde);
    built.control_metric_scale = std::sqrt(grid.spacing());
    PdeSystem pde_copy = pde;
    built.state_distance = [pde_copy](const Vector& s) { return pde_state_distance(pde_copy, s); };
    built.pde = std::move(pde);
    return built;
  }

  if (std::holds_alternative<LinearSystemSpec>(cfg.system)) {
    const LinearSystemSpec& spec = std::get<LinearSystemSpec>(cfg.system);
    built.system = make_linear_system(spec.A, spec.B);
    built.initial_state = spec.initial_state;
  } else {
    const NeuralSystemSpec& spec = std::get<NeuralSystemSpec>(cfg.system);
    built.system = make_neural_system(spec.inside, spec.sigma, spec.dim);
    built.initial_state = spec.initial_state;
  }
  built.driftless = built.system.zero_drift;

  const int d = built.system.state_dim;
  const int m = built.system.control_dim;
  if (cfg.cost.steady_solve)
    throw ConfigError("cost.y_bar", "steady_solve applies to PDE systems only");
  if (!cfg.cost.y_bar) throw ConfigError("cost.y_bar", "missing required key");
  if (static_cast<int>(cfg.cost.y_bar->size()) != d)
    throw ConfigError("cost.y_bar", "dimension must match the state");
  built.cost.y_bar = *cfg.cost.y_bar;
  built.cost.u_bar = Vector::Zero(m);
  if (cfg.cost.u_bar) {
    if (static_cast<int>(cfg.cost.u_bar->size()) != m)
      throw ConfigError("cost.u_bar", "dimension must match the control");
    built.cost.u_bar = *cfg.cost.u_bar;
  }
  built.cost.state_weight = cfg.cost.state_weight;
  built.cost.control_weight = cfg.cost.control_weight;
  if (!cfg.cost.final_cost_none) {
    Vector anchor = built.cost.y_bar;
    if (cfg.cost.final_anchor) {
      anchor = *cfg.cost.final_anchor;
      if (anchor.size() != d) throw ConfigError("cost.final_cost.anchor", "dimension mismatch");
    } else if (cfg.cost.final_anchor_initial_state) {
      anchor = built.initial_state;
    }
    built.cost.final_cost = FinalCost::quadratic(cfg.cost.final_weight, anchor);
  }
  built.steps_per_unit = cfg.steps_per_unit_time;
  const Vector y_bar = built.cost.y_bar;
  built.state_distance = [y_bar](const Vector& y) { return (y - y_bar).norm(); };
  return built;
}

OcpProblem make_ocp(const BuiltProblem& built, double horizon) {
  OcpProblem problem;
  problem.system = built.system;
  problem.initial_state = built.initial_state;
  problem.horizon = horizon;
  problem.steps = std::max(1, static_cast<int>(std::lround(horizon * built.steps_per_unit)));
  problem.cost = built.cost;
  problem.validate();
  return problem;
}

SampledSignal distance_signal(const BuiltProblem& built, const Trajectory& traj) {
  SampledSignal sig;
  sig.horizon = traj.times(traj.times.size() - 1);
  sig.values.resize(traj.states.rows());
  for (int k = 0; k < traj.states.rows(); ++k)
    sig.values(k) = built.state_distance(traj.states.row(k).transpose());
  return sig;
}

SampledSignal control_signal_magnitude(const BuiltProblem& built, const ControlSignal& u,
                                       const Vector& u_bar) {
  SampledSignal sig;
  sig.horizon = u.horizon;
  sig.values.resize(u.steps + 1);
  for (int k = 0; k < u.steps; ++k)
    sig.values(k) = built.control_metric_scale * (u.values.row(k).transpose() - u_bar).norm();
  sig.values(u.steps) = sig.values(u.steps - 1);  // piecewise-constant tail
  return sig;
}

std::string signals_csv(const SampledSignal& dist, const SampledSignal& ctrl) {
  std::string out = "t,dist,ctrl\n";
  const double dt = dist.dt();
  for (int i = 0; i < dist.nodes(); ++i) {
    out += fmt_double(i * dt);
    out += ',';
    out += fmt_double(dist.values(i));
    out += ',';
    out += fmt_double(ctrl.values(i));
    out += '\n';
  }
  return out;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  for (int j = 0; j < traj.states.cols(); ++j) out += ",y_" + std::to_string(j + 1);
  out += '\n';
  for (int k = 0; k < traj.states.rows(); ++k) {
    out += fmt_double(traj.times(k));
    for (int j = 0; j < traj.states.cols(); ++j) {
      out += ',';
      out += fmt_double(traj.states(k, j));
    }
    out += '\n';
  }
  return out;
}

std::string field_csv(const Grid1D& grid, const Vector& values) {
  std::string out = "x,value\n";
  for (int i = 0; i < grid.n_interior; ++i) {
    out += fmt_double(grid.node(i));
    out += ',';
    out += fmt_double(values(i));
    out += '\n';
  }
  return out;
}

// space-time array: t rows by x columns (position block only for wave)
std::string spacetime_csv(const Grid1D& grid, const Trajectory& traj) {
  std::string out = "t";
  for (int i = 0; i < grid.n_interior; ++i) out += ",x_" + fmt_double(grid.node(i));
  out += '\n';
  for (int k = 0; k < traj.states.rows(); ++k) {
    out += fmt_double(traj.times(k));
    for (int i = 0; i < grid.n_interior; ++i) {
      out += ',';
      out += fmt_double(traj.states(k, i));
    }
    out += '\n';
  }
  return out;
}

ordered_json solve_report_json(const ExperimentConfig& cfg, const OcpProblem& problem,
                               const Solution& sol, const TurnpikeReport& report) {
  ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["kind"] = "solve_report";
  j.update(to_json(report));
  j["steps"] = problem.steps;
  j["scheme"] = to_string(problem.scheme);
  j["grad_norm"] = sol.grad_norm;
  j["iterations"] = sol.iterations;
  j["restarts_used"] = sol.restarts_used;
  j["converged"] = sol.converged;
  j["steady_residual"] = problem.steady_residual_value;
  j["steady_warning"] = problem.steady_warning;
  j["config"] = cfg.raw;
  return j;
}

bool any_failure(const TurnpikeReport& report) {
  for (const auto& [name, v] : report.verdicts)
    if (v == Verdict::fail) return true;
  return false;
}

struct SingleRun {
  OcpProblem problem;
  Solution solution;
  TurnpikeReport report;
};

SingleRun execute_single(const ExperimentConfig& cfg, const BuiltProblem& built, double horizon) {
  SingleRun run;
  run.problem = make_ocp(built, horizon);
  SolveOptions opts;
  opts.max_iters = cfg.solver.max_iters;
  opts.tolerance = cfg.solver.tolerance;
  opts.restarts = cfg.solver.restarts;
  opts.seed = cfg.seed;
  run.solution = solve(run.problem, opts);

  const SampledSignal dist = distance_signal(built, run.solution.trajectory);
  const SampledSignal ctrl = control_signal_magnitude(built, run.solution.control,
                                                      run.problem.cost.u_bar);
  const double W = cfg.diagnostics.boundary_width > 0.0
                       ? cfg.diagnostics.boundary_width
                       : 2.0 * cfg.diagnostics.steering_horizon;
  VerdictThresholds thresholds;
  thresholds.margin = cfg.diagnostics.margin;
  run.report = make_report(dist, ctrl, run.solution.cost_value, W,
                           !run.problem.cost.final_cost.none, built.driftless, thresholds);
  return run;
}

}  // namespace

RunSummary run_solve(const ExperimentConfig& cfg, const std::string& out_dir,
                     bool dump_trajectory) {
  RunSummary summary;
  try {
    if (cfg.horizons.size() != 1) {
      summary.exit_code = ExitCode::config_error;
      summary.message = "run_solve expects exactly one horizon (got " +
                        std::to_string(cfg.horizons.size()) + ")";
      return summary;
    }
    BuiltProblem built;
    try {
      built = build_problem(cfg);
    } catch (const std::invalid_argument& e) {
      summary.exit_code = ExitCode::config_error;
      summary.message = e.what();
      return summary;
    }
    SingleRun run = execute_single(cfg, built, cfg.horizons[0]);

    const fs::path dir(out_dir);
    summary.report = solve_report_json(cfg, run.problem, run.solution, run.report);
    write_json(dir / "report.json", summary.report);
    write_file(dir / "signals.csv", signals_csv(run.report.distance, run.report.control));
    if (built.pde)
      write_file(dir / "steady_state.csv", field_csv(built.pde->grid, built.pde->y_bar.values));
    if (dump_trajectory) {
      write_file(dir / "trajectory.csv", trajectory_csv(run.solution.trajectory));
      if (built.pde)
        write_file(dir / "spacetime.csv", spacetime_csv(built.pde->grid, run.solution.trajectory));
    }

    if (cfg.strict && any_failure(run.report)) {
      summary.exit_code = ExitCode::verdict_failure;
      summary.message = "verdict failure";
    }
  } catch (const ConfigError& e) {
    summary.exit_code = ExitCode::config_error;
    summary.message = e.what();
  } catch (const std::exception& e) {
    summary.exit_code = ExitCode::runtime_failure;
    summary.message = e.what();
  }
  return summary;
}

RunSummary run_sweep(const ExperimentConfig& cfg, const std::string& out_dir) {
  RunSummary summary;
  try {
    if (cfg.horizons.size() < 2) {
      summary.exit_code = ExitCode::config_error;
      summary.message = "run_sweep expects at least two horizons";
      return summary;
    }
    BuiltProblem built;
    try {
      built = build_problem(cfg);
    } catch (const std::invalid_argument& e) {
      summary.exit_code = ExitCode::config_error;
      summary.message = e.what();
      return summary;
    }

    std::vector<double> horizons = cfg.horizons;
    std::sort(horizons.begin(), horizons.end());

    const fs::path dir(out_dir);
    ordered_json aggregate;
    aggregate["schema_version"] = kConfigSchemaVersion;
    aggregate["kind"] = "sweep_report";
    ordered_json per_horizon = ordered_json::object();
    std::map<double, double> costs;
    bool any_fail = false;

    for (double T : horizons) {
      const std::string key = fmt_double(T);
      try {
        SingleRun run = execute_single(cfg, built, T);
        costs[T] = run.solution.cost_value;
        const fs::path sub = dir / ("T_" + key);
        write_json(sub / "report.json", solve_report_json(cfg, run.problem, run.solution, run.report));
        write_file(sub / "signals.csv", signals_csv(run.report.distance, run.report.control));
        any_fail = any_fail || any_failure(run.report);

        ordered_json entry;
        entry["cost_value"] = run.solution.cost_value;
        const int mid = run.problem.steps / 2;
        entry["midpoint_distance"] = run.report.distance.values(mid);
        if (run.report.fits.count("turnpike")) entry["mu_two_sided"] = run.report.fits.at("turnpike").mu;
        if (run.report.fits.count("stabilization"))
          entry["mu_one_sided"] = run.report.fits.at("stabilization").mu;
        entry["converged"] = run.solution.converged;
        per_horizon[key] = std::move(entry);
      } catch (const std::exception& e) {
        per_horizon[key] = {{"error", e.what()}};
        any_fail = true;
      }
    }

    aggregate["per_horizon"] = std::move(per_horizon);
    const double T_threshold = horizons.size() > 1 ? horizons[1] : horizons[0];
    const double rel_tol = 0.05;
    const Verdict uniform = check_uniform_bound(costs, T_threshold, rel_tol);
    aggregate["uniform_bound"] = {{"verdict", to_string(uniform)},
                                  {"T_threshold", T_threshold},
                                  {"rel_tol", rel_tol}};
    aggregate["config"] = cfg.raw;
    summary.report = aggregate;
    write_json(dir / "aggregate.json", aggregate);

    if (cfg.strict && (any_fail || uniform == Verdict::fail)) {
      summary.exit_code = ExitCode::verdict_failure;
      summary.message = "verdict failure";
    }
  } catch (const ConfigError& e) {
    summary.exit_code = ExitCode::config_error;
    summary.message = e.what();
  } catch (const std::exception& e) {
    summary.exit_code = ExitCode::runtime_failure;
    summary.message = e.what();
  }
  return summary;
}

namespace {

ordered_json probe_json(const CostEstimateProbe& probe) {
  ordered_json j;
  j["direction"] = probe.direction == ProbeDirection::into_steady ? "into_steady" : "out_of_steady";
  j["radius"] = probe.radius;
  j["samples"] = probe.samples;
  j["failures"] = probe.failures;
  j["degenerate"] = probe.degenerate;
  j["unreliable"] = probe.unreliable;
  if (probe.estimated_C)
    j["estimated_C"] = *probe.estimated_C;
  else
    j["estimated_C"] = nullptr;
  j["ratios"] = probe.ratios;
  return j;
}

std::string ratios_csv(const CostEstimateProbe& into, const CostEstimateProbe& out_of) {
  std::string out = "direction,index,ratio\n";
  for (size_t i = 0; i < into.ratios.size(); ++i)
    out += "into_steady," + std::to_string(i) + "," + fmt_double(into.ratios[i]) + "\n";
  for (size_t i = 0; i < out_of.ratios.size(); ++i)
    out += "out_of_steady," + std::to_string(i) + "," + fmt_double(out_of.ratios[i]) + "\n";
  return out;
}

std::string histogram_csv(const CostEstimateProbe& into, const CostEstimateProbe& out_of) {
  double hi = 0.0;
  for (double r : into.ratios) hi = std::max(hi, r);
  for (double r : out_of.ratios) hi = std::max(hi, r);
  if (hi <= 0.0) hi = 1.0;
  constexpr int kBins = 20;
  std::string out = "bin_lo,bin_hi,into_steady,out_of_steady\n";
  for (int b = 0; b < kBins; ++b) {
    const double lo = hi * b / kBins;
    const double up = hi * (b + 1) / kBins;
    int c1 = 0, c2 = 0;
    for (double r : into.ratios)
      if (r >= lo && (r < up || b == kBins - 1)) ++c1;
    for (double r : out_of.ratios)
      if (r >= lo && (r < up || b == kBins - 1)) ++c2;
    out += fmt_double(lo) + "," + fmt_double(up) + "," + std::to_string(c1) + "," +
           std::to_string(c2) + "\n";
  }
  return out;
}

}  // namespace

RunSummary run_probe(const ExperimentConfig& cfg, const std::string& out_dir) {
  RunSummary summary;
  try {
    BuiltProblem built;
    try {
      built = build_problem(cfg);
    } catch (const std::invalid_argument& e) {
      summary.exit_code = ExitCode::config_error;
      summary.message = e.what();
      return summary;
    }

    ProbeOptions popts;
    popts.samples = cfg.probe.samples;
    popts.steps = cfg.probe.steps;
    const auto [into, out_of] =
        probe_cost_estimate(built.system, built.cost.y_bar, built.cost.u_bar, cfg.probe.radius,
                            cfg.probe.steering_horizon, cfg.probe.samples, cfg.seed, popts);

    const fs::path dir(out_dir);
    ordered_json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["kind"] = "probe_report";
    j["T0"] = cfg.probe.steering_horizon;
    j["into_steady"] = probe_json(into);
    j["out_of_steady"] = probe_json(out_of);
    j["config"] = cfg.raw;
    summary.report = j;
    write_json(dir / "probe.json", j);
    write_file(dir / "ratios.csv", ratios_csv(into, out_of));
    write_file(dir / "ratio_histogram.csv", histogram_csv(into, out_of));

    if (cfg.strict && (into.unreliable || out_of.unreliable)) {
      summary.exit_code = ExitCode::verdict_failure;
      summary.message = "probe unreliable";
    }
  } catch (const ConfigError& e) {
    summary.exit_code = ExitCode::config_error;
    summary.message = e.what();
  } catch (const std::exception& e) {
    summary.exit_code = ExitCode::runtime_failure;
    summary.message = e.what();
  }
  return summary;
}

RunSummary run_classify(const ClassifyFileConfig& cfg, const std::string& out_dir) {
  RunSummary summary;
  try {
    SolveOptions opts;
    opts.max_iters = cfg.solver.max_iters;
    opts.tolerance = cfg.solver.tolerance;
    opts.restarts = cfg.solver.restarts;
    opts.seed = cfg.seed;
    const ClassifyOutcome outcome = run_classification(cfg.problem, opts);

    const int n = static_cast<int>(cfg.problem.points.rows());
    const fs::path dir(out_dir);

    ordered_json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["kind"] = "classify_report";
    j["n_points"] = n;
    j["T"] = cfg.problem.horizon;
    j["accuracy"] = outcome.accuracy;
    j["loss"] = outcome.loss;
    j["baseline_loss"] = outcome.baseline_loss;
    j["loss_over_baseline"] = outcome.baseline_loss > 0.0 ? outcome.loss / outcome.baseline_loss
                                                          : 0.0;
    j["margins"] = outcome.margins;
    j["late_slope_ratio"] = outcome.late_slope_ratio;
    j["flattened"] = outcome.flattened;
    j["iterations"] = outcome.solution.iterations;
    j["converged"] = outcome.solution.converged;
    j["config"] = cfg.raw;
    summary.report = j;
    write_json(dir / "classify.json", j);

    // per-point trajectories: t, x1_i, x2_i blocks
    std::string traj = "t";
    for (int i = 0; i < n; ++i)
      traj += ",x1_" + std::to_string(i) + ",x2_" + std::to_string(i);
    traj += '\n';
    const Trajectory& tr = outcome.solution.trajectory;
    for (int k = 0; k < tr.states.rows(); ++k) {
      traj += fmt_double(tr.times(k));
      for (int i = 0; i < 2 * n; ++i) {
        traj += ',';
        traj += fmt_double(tr.states(k, i));
      }
      traj += '\n';
    }
    write_file(dir / "trajectories.csv", traj);

    std::string dist_csv = "t,mean_preimage_distance\n";
    for (int k = 0; k < outcome.preimage_distance.size(); ++k) {
      dist_csv += fmt_double(tr.times(k)) + "," + fmt_double(outcome.preimage_distance(k)) + "\n";
    }
    write_file(dir / "preimage_distance.csv", dist_csv);

    constexpr int kResolution = 41;
    const Matrix grid = classifier_grid(cfg.problem, outcome.solution.control, kResolution);
    std::string grid_csv = "y\\x";
    for (int c = 0; c < kResolution; ++c)
      grid_csv += "," + fmt_double(-2.0 + 4.0 * c / (kResolution - 1));
    grid_csv += '\n';
    for (int r = 0; r < kResolution; ++r) {
      grid_csv += fmt_double(-2.0 + 4.0 * r / (kResolution - 1));
      for (int c = 0; c < kResolution; ++c) grid_csv += "," + fmt_double(grid(r, c));
      grid_csv += '\n';
    }
    write_file(dir / "classifier_grid.csv", grid_csv);
  } catch (const ConfigError& e) {
    summary.exit_code = ExitCode::config_error;
    summary.message = e.what();
  } catch (const std::exception& e) {
    summary.exit_code = ExitCode::runtime_failure;
    summary.message = e.what();
  }
  return summary;
}

RunSummary validate_config_file(const std::string& path) {
  RunSummary summary;
  try {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    nlohmann::json j;
    in >> j;
    if (j.is_object() && j.contains("task") && j.at("task") == "classify") {
      parse_classify_config(j);
      summary.message = "valid classify config";
    } else {
      parse_experiment_config(j);
      summary.message = "valid experiment config";
    }
  } catch (const ConfigError& e) {
    summary.exit_code = ExitCode::config_error;
    summary.message = e.what();
  } catch (const std::exception& e) {
    summary.exit_code = ExitCode::config_error;
    summary.message = e.what();
  }
  return summary;
}

}  // namespace turnpike
