#include "turnpike/config.hpp"

#include <fstream>
#include <random>
#include <set>

namespace turnpike {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError(path + "." + key, "unknown key");
  }
}

const json& require(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(path + "." + key, "missing required key");
  return j.at(key);
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

double as_positive(const json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (v <= 0.0) throw ConfigError(path, "expected a positive number");
  return v;
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

Vector as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = as_number(j.at(i), path + "[" + std::to_string(i) + "]");
  return v;
}

Matrix as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const size_t rows = j.size();
  const size_t cols = j.at(0).is_array() ? j.at(0).size() : 0;
  if (cols == 0) throw ConfigError(path, "expected rows to be non-empty arrays");
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    const json& row = j.at(r);
    if (!row.is_array() || row.size() != cols)
      throw ConfigError(path + "[" + std::to_string(r) + "]", "ragged matrix rows");
    for (size_t c = 0; c < cols; ++c)
      m(r, c) = as_number(row.at(c), path + "[" + std::to_string(r) + "]");
  }
  return m;
}

Sigma parse_sigma(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "tanh") return Sigma::tanh();
    throw ConfigError(path, "unknown sigma '" + j.get<std::string>() + "'");
  }
  if (j.is_object()) {
    check_keys(j, path, {"leaky_relu"});
    const double alpha = as_number(require(j, path, "leaky_relu"), path + ".leaky_relu");
    if (alpha < 0.0 || alpha >= 1.0) throw ConfigError(path + ".leaky_relu", "slope must lie in [0,1)");
    return Sigma::leaky_relu(alpha);
  }
  throw ConfigError(path, "expected \"tanh\" or {\"leaky_relu\": alpha}");
}

ScalarNonlinearity parse_nonlinearity(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "zero") return ScalarNonlinearity::zero();
    if (s == "tanh") return ScalarNonlinearity::tanh();
    throw ConfigError(path, "unknown nonlinearity '" + s + "'");
  }
  if (j.is_object()) {
    check_keys(j, path, {"leaky_relu"});
    const double alpha = as_number(require(j, path, "leaky_relu"), path + ".leaky_relu");
    if (alpha < 0.0 || alpha >= 1.0) throw ConfigError(path + ".leaky_relu", "slope must lie in [0,1)");
    return ScalarNonlinearity::leaky_relu(alpha);
  }
  throw ConfigError(path, "expected \"zero\", \"tanh\" or {\"leaky_relu\": alpha}");
}

void parse_system(const json& j, ExperimentConfig& cfg) {
  const std::string path = "system";
  const std::string type = require(j, path, "type").get<std::string>();
  if (type == "linear") {
    check_keys(j, path, {"type", "A", "B", "initial_state"});
    LinearSystemSpec spec;
    spec.A = as_matrix(require(j, path, "A"), path + ".A");
    spec.B = as_matrix(require(j, path, "B"), path + ".B");
    spec.initial_state = as_vector(require(j, path, "initial_state"), path + ".initial_state");
    if (spec.A.rows() != spec.A.cols()) throw ConfigError(path + ".A", "must be square");
    if (spec.B.rows() != spec.A.rows()) throw ConfigError(path + ".B", "row count must match A");
    if (spec.initial_state.size() != spec.A.rows())
      throw ConfigError(path + ".initial_state", "dimension must match A");
    cfg.system = std::move(spec);
    return;
  }
  if (type == "neural_outside" || type == "neural_inside") {
    check_keys(j, path, {"type", "dim", "sigma", "initial_state"});
    NeuralSystemSpec spec;
    spec.inside = type == "neural_inside";
    spec.dim = as_int(require(j, path, "dim"), path + ".dim");
    if (spec.dim < 1) throw ConfigError(path + ".dim", "must be >= 1");
    spec.sigma = parse_sigma(require(j, path, "sigma"), path + ".sigma");
    spec.initial_state = as_vector(require(j, path, "initial_state"), path + ".initial_state");
    if (spec.initial_state.size() != spec.dim)
      throw ConfigError(path + ".initial_state", "dimension must match dim");
    cfg.system = std::move(spec);
    return;
  }
  if (type == "pde") {
    check_keys(j, path, {"type", "kind", "length", "n_interior", "omega", "nonlinearity",
                          "u_bar", "initial_state", "initial_amplitude", "initial_velocity"});
    PdeSystemSpec spec;
    const std::string kind = require(j, path, "kind").get<std::string>();
    if (kind == "heat") spec.kind = PdeKind::heat;
    else if (kind == "wave") spec.kind = PdeKind::wave;
    else throw ConfigError(path + ".kind", "expected \"heat\" or \"wave\"");
    spec.length = as_positive(require(j, path, "length"), path + ".length");
    spec.n_interior = as_int(require(j, path, "n_interior"), path + ".n_interior");
    if (spec.n_interior < 1) throw ConfigError(path + ".n_interior", "must be >= 1");
    const Vector omega = as_vector(require(j, path, "omega"), path + ".omega");
    if (omega.size() != 2) throw ConfigError(path + ".omega", "expected [a, b]");
    spec.omega_lo = omega(0);
    spec.omega_hi = omega(1);
    spec.nonlinearity = parse_nonlinearity(require(j, path, "nonlinearity"), path + ".nonlinearity");
    if (j.contains("u_bar")) spec.u_bar_value = as_number(j.at("u_bar"), path + ".u_bar");
    if (j.contains("initial_state")) {
      const json& init = j.at("initial_state");
      if (init.is_string()) {
        if (init.get<std::string>() != "zero")
          throw ConfigError(path + ".initial_state", "expected \"zero\", an array or {eigenmode}");
        spec.initial = std::monostate{};
      } else if (init.is_array()) {
        spec.initial = as_vector(init, path + ".initial_state");
      } else if (init.is_object()) {
        check_keys(init, path + ".initial_state", {"eigenmode"});
        spec.initial = as_int(require(init, path + ".initial_state", "eigenmode"),
                              path + ".initial_state.eigenmode");
      } else {
        throw ConfigError(path + ".initial_state", "expected \"zero\", an array or {eigenmode}");
      }
    }
    if (j.contains("initial_amplitude"))
      spec.initial_amplitude = as_number(j.at("initial_amplitude"), path + ".initial_amplitude");
    if (j.contains("initial_velocity"))
      spec.initial_velocity = as_vector(j.at("initial_velocity"), path + ".initial_velocity");
    cfg.system = std::move(spec);
    return;
  }
  throw ConfigError(path + ".type", "unknown system type '" + type + "'");
}

void parse_cost(const json& j, ExperimentConfig& cfg) {
  const std::string path = "cost";
  check_keys(j, path, {"y_bar", "u_bar", "final_cost", "state_weight", "control_weight"});
  CostBlock& cost = cfg.cost;
  if (j.contains("y_bar")) {
    const json& yb = j.at("y_bar");
    if (yb.is_string()) {
      if (yb.get<std::string>() != "steady_solve")
        throw ConfigError(path + ".y_bar", "expected an array or \"steady_solve\"");
      cost.steady_solve = true;
    } else {
      cost.y_bar = as_vector(yb, path + ".y_bar");
    }
  } else {
    cost.steady_solve = std::holds_alternative<PdeSystemSpec>(cfg.system);
  }
  if (!cost.steady_solve && !cost.y_bar && !std::holds_alternative<PdeSystemSpec>(cfg.system))
    throw ConfigError(path + ".y_bar", "missing required key");
  if (j.contains("u_bar")) cost.u_bar = as_vector(j.at("u_bar"), path + ".u_bar");
  if (j.contains("final_cost")) {
    const json& fc = j.at("final_cost");
    if (fc.is_string()) {
      if (fc.get<std::string>() != "none")
        throw ConfigError(path + ".final_cost", "expected \"none\" or {weight, anchor}");
      cost.final_cost_none = true;
    } else if (fc.is_object()) {
      check_keys(fc, path + ".final_cost", {"weight", "anchor"});
      cost.final_cost_none = false;
      cost.final_weight = as_number(require(fc, path + ".final_cost", "weight"),
                                    path + ".final_cost.weight");
      if (cost.final_weight < 0.0)
        throw ConfigError(path + ".final_cost.weight", "must be >= 0");
      if (fc.contains("anchor")) {
        const json& anchor = fc.at("anchor");
        if (anchor.is_string()) {
          const std::string s = anchor.get<std::string>();
          if (s == "initial_state") cost.final_anchor_initial_state = true;
          else if (s != "y_bar")
            throw ConfigError(path + ".final_cost.anchor",
                              "expected an array, \"y_bar\" or \"initial_state\"");
        } else {
          cost.final_anchor = as_vector(anchor, path + ".final_cost.anchor");
        }
      }
    } else {
      throw ConfigError(path + ".final_cost", "expected \"none\" or {weight, anchor}");
    }
  }
  if (j.contains("state_weight"))
    cost.state_weight = as_positive(j.at("state_weight"), path + ".state_weight");
  if (j.contains("control_weight"))
    cost.control_weight = as_positive(j.at("control_weight"), path + ".control_weight");
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j, "$", {"schema_version", "seed", "output_dir", "system", "cost", "horizons",
                      "steps_per_unit_time", "solver", "diagnostics", "probe", "strict"});
  const int version = as_int(require(j, "$", "schema_version"), "schema_version");
  if (version != kConfigSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version));

  ExperimentConfig cfg;
  if (!j.contains("seed")) throw ConfigError("seed", "missing required key (seed is mandatory)");
  if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
    throw ConfigError("seed", "expected a nonnegative integer");
  cfg.seed = j.at("seed").get<unsigned long>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  parse_system(require(j, "$", "system"), cfg);
  parse_cost(require(j, "$", "cost"), cfg);

  const json& horizons = require(j, "$", "horizons");
  if (!horizons.is_array() || horizons.empty())
    throw ConfigError("horizons", "expected a non-empty array");
  for (size_t i = 0; i < horizons.size(); ++i) {
    const double T = as_positive(horizons.at(i), "horizons[" + std::to_string(i) + "]");
    cfg.horizons.push_back(T);
  }

  if (j.contains("steps_per_unit_time")) {
    const json& spu = j.at("steps_per_unit_time");
    if (spu.is_string()) {
      if (spu.get<std::string>() != "auto")
        throw ConfigError("steps_per_unit_time", "expected a positive integer or \"auto\"");
      cfg.steps_per_unit_time = 0;
    } else {
      cfg.steps_per_unit_time = as_int(spu, "steps_per_unit_time");
      if (cfg.steps_per_unit_time < 1)
        throw ConfigError("steps_per_unit_time", "must be >= 1");
    }
  } else if (!std::holds_alternative<PdeSystemSpec>(cfg.system)) {
    throw ConfigError("steps_per_unit_time", "missing required key (non-PDE systems)");
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s, "solver", {"max_iters", "tolerance", "restarts"});
    if (s.contains("max_iters")) {
      cfg.solver.max_iters = as_int(s.at("max_iters"), "solver.max_iters");
      if (cfg.solver.max_iters < 1) throw ConfigError("solver.max_iters", "must be >= 1");
    }
    if (s.contains("tolerance"))
      cfg.solver.tolerance = as_positive(s.at("tolerance"), "solver.tolerance");
    if (s.contains("restarts")) {
      cfg.solver.restarts = as_int(s.at("restarts"), "solver.restarts");
      if (cfg.solver.restarts < 1) throw ConfigError("solver.restarts", "must be >= 1");
    }
  }

  if (j.contains("diagnostics")) {
    const json& d = j.at("diagnostics");
    check_keys(d, "diagnostics", {"boundary_width", "margin", "tau", "steering_horizon"});
    if (d.contains("boundary_width"))
      cfg.diagnostics.boundary_width = as_positive(d.at("boundary_width"),
                                                   "diagnostics.boundary_width");
    if (d.contains("margin"))
      cfg.diagnostics.margin = as_positive(d.at("margin"), "diagnostics.margin");
    if (d.contains("tau")) cfg.diagnostics.tau = as_positive(d.at("tau"), "diagnostics.tau");
    if (d.contains("steering_horizon"))
      cfg.diagnostics.steering_horizon =
          as_positive(d.at("steering_horizon"), "diagnostics.steering_horizon");
  }

  if (j.contains("probe")) {
    const json& p = j.at("probe");
    check_keys(p, "probe", {"radius", "samples", "steering_horizon", "steps"});
    if (p.contains("radius")) {
      cfg.probe.radius = as_number(p.at("radius"), "probe.radius");
      if (cfg.probe.radius < 0.0) throw ConfigError("probe.radius", "must be >= 0");
    }
    if (p.contains("samples")) {
      cfg.probe.samples = as_int(p.at("samples"), "probe.samples");
      if (cfg.probe.samples < 1) throw ConfigError("probe.samples", "must be >= 1");
    }
    if (p.contains("steering_horizon"))
      cfg.probe.steering_horizon = as_positive(p.at("steering_horizon"), "probe.steering_horizon");
    if (p.contains("steps")) {
      cfg.probe.steps = as_int(p.at("steps"), "probe.steps");
      if (cfg.probe.steps < 1) throw ConfigError("probe.steps", "must be >= 1");
    }
  }

  if (j.contains("strict")) {
    if (!j.at("strict").is_boolean()) throw ConfigError("strict", "expected a boolean");
    cfg.strict = j.at("strict").get<bool>();
  }

  cfg.raw = nlohmann::ordered_json(j);
  return cfg;
}

ClassifyFileConfig parse_classify_config(const json& j) {
  check_keys(j, "$", {"schema_version", "seed", "output_dir", "task", "points", "n_points",
                      "labels", "sigma", "horizon", "projection", "regularization",
                      "steps_per_unit_time", "solver"});
  const int version = as_int(require(j, "$", "schema_version"), "schema_version");
  if (version != kConfigSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version));
  if (require(j, "$", "task").get<std::string>() != "classify")
    throw ConfigError("task", "expected \"classify\"");

  ClassifyFileConfig cfg;
  if (!j.contains("seed")) throw ConfigError("seed", "missing required key (seed is mandatory)");
  cfg.seed = j.at("seed").get<unsigned long>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  ClassifyProblem& prob = cfg.problem;
  const json& points = require(j, "$", "points");
  if (points.is_string()) {
    if (points.get<std::string>() != "two_moons")
      throw ConfigError("points", "expected an array of [x,y] or \"two_moons\"");
    const int n = j.contains("n_points") ? as_int(j.at("n_points"), "n_points") : 20;
    if (n < 2) throw ConfigError("n_points", "must be >= 2");
    // interleaved crescents, labels +1 (upper) / -1 (lower), jittered by the seed
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, 0.03);
    prob.points.resize(n, 2);
    prob.labels.resize(n);
    for (int i = 0; i < n; ++i) {
      const bool upper = i % 2 == 0;
      const double frac = static_cast<double>(i / 2) / std::max(1, (n + 1) / 2 - 1);
      const double theta = M_PI * frac;
      if (upper) {
        prob.points(i, 0) = std::sin(theta) + noise(rng);
        prob.points(i, 1) = -std::cos(theta) + noise(rng);
        prob.labels[i] = 1.0;
      } else {
        prob.points(i, 0) = 0.5 - std::sin(theta) + noise(rng);
        prob.points(i, 1) = std::cos(theta) - 1.0 + noise(rng);
        prob.labels[i] = -1.0;
      }
    }
    cfg.points_generated = true;
  } else {
    prob.points = as_matrix(points, "points");
    if (prob.points.cols() != 2) throw ConfigError("points", "expected two columns");
    const json& labels = require(j, "$", "labels");
    if (!labels.is_array() || labels.size() != static_cast<size_t>(prob.points.rows()))
      throw ConfigError("labels", "expected one label per point");
    for (size_t i = 0; i < labels.size(); ++i) {
      const double v = as_number(labels.at(i), "labels[" + std::to_string(i) + "]");
      if (v != 1.0 && v != -1.0)
        throw ConfigError("labels[" + std::to_string(i) + "]", "expected +1 or -1");
      prob.labels.push_back(v);
    }
  }

  if (j.contains("sigma")) prob.sigma = parse_sigma(j.at("sigma"), "sigma");
  if (j.contains("horizon")) prob.horizon = as_positive(j.at("horizon"), "horizon");
  if (j.contains("projection")) {
    const json& p = j.at("projection");
    check_keys(p, "projection", {"linear", "offset"});
    prob.projection_linear = as_vector(require(p, "projection", "linear"), "projection.linear");
    if (prob.projection_linear.size() != 2 || prob.projection_linear.norm() == 0.0)
      throw ConfigError("projection.linear", "expected a nonzero 2-vector");
    if (p.contains("offset"))
      prob.projection_offset = as_number(p.at("offset"), "projection.offset");
  } else {
    prob.projection_linear = Vector::Zero(2);
    prob.projection_linear(0) = 1.0;
  }
  if (j.contains("regularization"))
    prob.regularization = as_positive(j.at("regularization"), "regularization");
  if (j.contains("steps_per_unit_time")) {
    prob.steps_per_unit_time = as_int(j.at("steps_per_unit_time"), "steps_per_unit_time");
    if (prob.steps_per_unit_time < 1) throw ConfigError("steps_per_unit_time", "must be >= 1");
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s, "solver", {"max_iters", "tolerance", "restarts"});
    if (s.contains("max_iters")) cfg.solver.max_iters = as_int(s.at("max_iters"), "solver.max_iters");
    if (s.contains("tolerance"))
      cfg.solver.tolerance = as_positive(s.at("tolerance"), "solver.tolerance");
    if (s.contains("restarts")) cfg.solver.restarts = as_int(s.at("restarts"), "solver.restarts");
  }

  cfg.raw = nlohmann::ordered_json(j);
  return cfg;
}

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("JSON parse error: ") + e.what());
  }
  return j;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_json_file(path));
}

ClassifyFileConfig load_classify_config(const std::string& path) {
  return parse_classify_config(load_json_file(path));
}

}  // namespace turnpike
