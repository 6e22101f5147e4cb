#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "turnpike/experiment.hpp"

using namespace turnpike;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

json minimal_lq_config() {
  return json{{"schema_version", 1},
              {"seed", 42},
              {"system",
               {{"type", "linear"},
                {"A", {{0.0}}},
                {"B", {{1.0}}},
                {"initial_state", {1.0}}}},
              {"cost", {{"y_bar", {0.0}}}},
              {"horizons", {6.0}},
              {"steps_per_unit_time", 100},
              {"solver", {{"max_iters", 600}, {"tolerance", 1e-7}, {"restarts", 1}}},
              {"diagnostics", {{"steering_horizon", 0.5}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "turnpike_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config validation: schema, unknown keys, field-naming errors") {
  CHECK_NOTHROW(parse_experiment_config(minimal_lq_config()));

  json unknown = minimal_lq_config();
  unknown["sytsem_typo"] = 1;
  try {
    parse_experiment_config(unknown);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sytsem_typo") != std::string::npos);
  }

  json nested_unknown = minimal_lq_config();
  nested_unknown["solver"]["step_size"] = 0.1;
  CHECK_THROWS_AS(parse_experiment_config(nested_unknown), ConfigError);

  json bad_T = minimal_lq_config();
  bad_T["horizons"] = {-3.0};
  try {
    parse_experiment_config(bad_T);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("horizons[0]") != std::string::npos);
  }

  json no_seed = minimal_lq_config();
  no_seed.erase("seed");
  CHECK_THROWS_AS(parse_experiment_config(no_seed), ConfigError);

  json bad_version = minimal_lq_config();
  bad_version["schema_version"] = 2;
  CHECK_THROWS_AS(parse_experiment_config(bad_version), ConfigError);
}

TEST_CASE("run_solve writes a report, signals and respects exit codes") {
  const fs::path dir = fresh_dir("solve");
  ExperimentConfig cfg = parse_experiment_config(minimal_lq_config());
  RunSummary summary = run_solve(cfg, dir.string());
  CHECK(summary.exit_code == ExitCode::ok);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "signals.csv"));

  const json report = json::parse(slurp(dir / "report.json"));
  CHECK(report.at("kind") == "solve_report");
  CHECK(report.at("T") == 6.0);
  CHECK(report.contains("fits"));
  CHECK(report.contains("verdicts"));
  CHECK(report.contains("thresholds"));
  CHECK(report.at("verdicts").contains("turnpike"));
  CHECK(report.at("steady_warning") == false);
  const std::string csv = slurp(dir / "signals.csv");
  CHECK(csv.rfind("t,dist,ctrl\n", 0) == 0);

  // two horizons is a config error for run_solve
  json two = minimal_lq_config();
  two["horizons"] = {6.0, 12.0};
  RunSummary bad = run_solve(parse_experiment_config(two), (dir / "bad").string());
  CHECK(bad.exit_code == ExitCode::config_error);
}

TEST_CASE("run_solve reports are byte-identical across reruns") {
  ExperimentConfig cfg = parse_experiment_config(minimal_lq_config());
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  REQUIRE(run_solve(cfg, d1.string()).exit_code == ExitCode::ok);
  REQUIRE(run_solve(cfg, d2.string()).exit_code == ExitCode::ok);
  CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
  CHECK(slurp(d1 / "signals.csv") == slurp(d2 / "signals.csv"));
}

TEST_CASE("run_sweep aggregates costs and the uniform bound") {
  json cfg_json = minimal_lq_config();
  cfg_json["horizons"] = {4.0, 8.0, 16.0};
  const fs::path dir = fresh_dir("sweep");
  RunSummary summary = run_sweep(parse_experiment_config(cfg_json), dir.string());
  CHECK(summary.exit_code == ExitCode::ok);
  CHECK(fs::exists(dir / "aggregate.json"));
  CHECK(fs::exists(dir / "T_4" / "report.json"));
  CHECK(fs::exists(dir / "T_16" / "signals.csv"));
  const json agg = json::parse(slurp(dir / "aggregate.json"));
  CHECK(agg.at("uniform_bound").at("verdict") == "pass");
  CHECK(agg.at("per_horizon").size() == 3);
  for (const auto& [key, entry] : agg.at("per_horizon").items()) {
    CHECK(entry.contains("cost_value"));
    CHECK(entry.contains("midpoint_distance"));
  }
  // single horizon rejected
  json one = minimal_lq_config();
  RunSummary bad = run_sweep(parse_experiment_config(one), (dir / "bad").string());
  CHECK(bad.exit_code == ExitCode::config_error);
}

TEST_CASE("run_probe emits ratio files and a near-unit constant") {
  json cfg_json = minimal_lq_config();
  cfg_json["probe"] = {{"radius", 0.5}, {"samples", 10}, {"steering_horizon", 1.0}, {"steps", 60}};
  const fs::path dir = fresh_dir("probe");
  RunSummary summary = run_probe(parse_experiment_config(cfg_json), dir.string());
  CHECK(summary.exit_code == ExitCode::ok);
  const json probe = json::parse(slurp(dir / "probe.json"));
  CHECK(probe.at("into_steady").at("estimated_C").get<double>() == doctest::Approx(1.0).epsilon(0.02));
  CHECK(probe.at("out_of_steady").at("estimated_C").get<double>() ==
        doctest::Approx(1.0).epsilon(0.02));
  CHECK(fs::exists(dir / "ratios.csv"));
  CHECK(fs::exists(dir / "ratio_histogram.csv"));

  // zero radius: no data, null estimate
  cfg_json["probe"]["radius"] = 0.0;
  const fs::path dir2 = fresh_dir("probe0");
  RunSummary s2 = run_probe(parse_experiment_config(cfg_json), dir2.string());
  CHECK(s2.exit_code == ExitCode::ok);
  const json p2 = json::parse(slurp(dir2 / "probe.json"));
  CHECK(p2.at("into_steady").at("estimated_C").is_null());
}

TEST_CASE("classify config: crossed pair reaches full accuracy") {
  json cfg_json = {{"schema_version", 1},
                   {"seed", 5},
                   {"task", "classify"},
                   {"points", {{1.0, 0.0}, {-1.0, 0.0}}},
                   {"labels", {-1.0, 1.0}},
                   {"sigma", "tanh"},
                   {"horizon", 15.0},
                   {"regularization", 0.001},
                   {"steps_per_unit_time", 40},
                   {"solver", {{"max_iters", 4000}, {"tolerance", 1e-6}, {"restarts", 3}}}};
  ClassifyFileConfig cfg = parse_classify_config(cfg_json);
  const fs::path dir = fresh_dir("classify");
  RunSummary summary = run_classify(cfg, dir.string());
  CHECK(summary.exit_code == ExitCode::ok);
  const json rep = json::parse(slurp(dir / "classify.json"));
  CHECK(rep.at("accuracy").get<double>() == 1.0);
  CHECK(rep.at("loss").get<double>() < 0.01 * rep.at("baseline_loss").get<double>());
  CHECK(fs::exists(dir / "trajectories.csv"));
  CHECK(fs::exists(dir / "classifier_grid.csv"));
  CHECK(fs::exists(dir / "preimage_distance.csv"));

  // single-class data is legitimate and trivially classified
  json one_class = cfg_json;
  one_class["points"] = {{0.5, 0.2}, {0.8, -0.1}};
  one_class["labels"] = {1.0, 1.0};
  one_class["solver"] = {{"max_iters", 200}, {"tolerance", 1e-5}, {"restarts", 1}};
  const fs::path dir2 = fresh_dir("classify_one");
  RunSummary s2 = run_classify(parse_classify_config(one_class), dir2.string());
  CHECK(s2.exit_code == ExitCode::ok);
  CHECK(json::parse(slurp(dir2 / "classify.json")).at("accuracy").get<double>() == 1.0);

  json bad_proj = cfg_json;
  bad_proj["projection"] = {{"linear", {0.0, 0.0}}};
  CHECK_THROWS_AS(parse_classify_config(bad_proj), ConfigError);
}

TEST_CASE("validate_config_file distinguishes tasks and reports paths") {
  const fs::path dir = fresh_dir("validate");
  const fs::path good = dir / "good.json";
  std::ofstream(good) << minimal_lq_config().dump(2);
  CHECK(validate_config_file(good.string()).exit_code == ExitCode::ok);

  const fs::path bad = dir / "bad.json";
  json j = minimal_lq_config();
  j["horizons"] = {-1.0};
  std::ofstream(bad) << j.dump(2);
  RunSummary s = validate_config_file(bad.string());
  CHECK(s.exit_code == ExitCode::config_error);
  CHECK(s.message.find("horizons[0]") != std::string::npos);

  CHECK(validate_config_file((dir / "missing.json").string()).exit_code == ExitCode::config_error);
}

TEST_CASE("strict mode turns verdict failures into exit code 1") {
  // unstable drift with near-prohibitive control cost: the distance grows,
  // every decay fit fails
  json cfg_json = minimal_lq_config();
  cfg_json["system"]["A"] = {{0.05}};
  cfg_json["cost"]["control_weight"] = 1e6;
  cfg_json["horizons"] = {12.0};
  cfg_json["solver"] = {{"max_iters", 60}, {"tolerance", 1e-4}, {"restarts", 1}};
  ExperimentConfig cfg = parse_experiment_config(cfg_json);

  const fs::path lax = fresh_dir("strict_off");
  RunSummary ok = run_solve(cfg, lax.string());
  CHECK(ok.exit_code == ExitCode::ok);
  // the state drifts away from the target, so the stabilization fit fails
  CHECK(ok.report.at("verdicts").at("stabilization") == "fail");

  cfg.strict = true;
  const fs::path dir = fresh_dir("strict_on");
  RunSummary strict = run_solve(cfg, dir.string());
  CHECK(strict.exit_code == ExitCode::verdict_failure);
}

TEST_CASE("trajectory and space-time dumps are written on request") {
  const fs::path dir = fresh_dir("dump");
  ExperimentConfig cfg = parse_experiment_config(minimal_lq_config());
  REQUIRE(run_solve(cfg, dir.string(), true).exit_code == ExitCode::ok);
  const std::string traj = slurp(dir / "trajectory.csv");
  CHECK(traj.rfind("t,y_1\n", 0) == 0);

  json pde_json = {{"schema_version", 1},
                   {"seed", 2},
                   {"system",
                    {{"type", "pde"},
                     {"kind", "heat"},
                     {"length", 1.0},
                     {"n_interior", 16},
                     {"omega", {0.3, 0.7}},
                     {"nonlinearity", "zero"},
                     {"u_bar", 1.0},
                     {"initial_state", "zero"}}},
                   {"cost", {{"y_bar", "steady_solve"}, {"final_cost", "none"}}},
                   {"horizons", {0.5}},
                   {"solver", {{"max_iters", 40}, {"tolerance", 1e-5}, {"restarts", 1}}},
                   {"diagnostics", {{"boundary_width", 0.05}, {"steering_horizon", 0.025}}}};
  const fs::path pdir = fresh_dir("dump_pde");
  REQUIRE(run_solve(parse_experiment_config(pde_json), pdir.string(), true).exit_code ==
          ExitCode::ok);
  CHECK(fs::exists(pdir / "steady_state.csv"));
  CHECK(slurp(pdir / "steady_state.csv").rfind("x,value\n", 0) == 0);
  CHECK(fs::exists(pdir / "spacetime.csv"));
  CHECK(slurp(pdir / "spacetime.csv").rfind("t,x_", 0) == 0);
}

TEST_CASE("sweep without final cost: midpoints shrink geometrically, fit improves") {
  json cfg_json = minimal_lq_config();
  cfg_json["horizons"] = {4.0, 8.0, 12.0};
  cfg_json["steps_per_unit_time"] = 200;
  cfg_json["solver"] = {{"max_iters", 3000}, {"tolerance", 1e-9}, {"restarts", 1}};
  const fs::path dir = fresh_dir("sweep_stab");
  RunSummary summary = run_sweep(parse_experiment_config(cfg_json), dir.string());
  REQUIRE(summary.exit_code == ExitCode::ok);

  std::vector<double> mids, mus, rmss;
  for (const std::string key : {"4", "8", "12"}) {
    const json rep = json::parse(slurp(dir / ("T_" + key) / "report.json"));
    mids.push_back(json::parse(slurp(dir / "aggregate.json"))
                       .at("per_horizon").at(key).at("midpoint_distance").get<double>());
    mus.push_back(rep.at("fits").at("stabilization").at("mu").get<double>());
    rmss.push_back(rep.at("fits").at("stabilization").at("rms_log_residual").get<double>());
  }
  // geometric midpoint decrease
  CHECK(mids[0] / mids[1] >= 3.0);
  CHECK(mids[1] / mids[2] >= 3.0);
  // the one-sided fit improves with the horizon: the rate estimate sharpens
  // toward the true value and the residual does not degrade
  CHECK(std::abs(mus[2] - 1.0) < std::abs(mus[0] - 1.0));
  CHECK(rmss[2] <= rmss[0] + 0.05);
}

TEST_CASE("steady-start config: negligible cost, decay verdicts pass trivially") {
  json cfg_json = minimal_lq_config();
  cfg_json["system"]["initial_state"] = {0.0};
  const fs::path dir = fresh_dir("steady_start");
  RunSummary summary = run_solve(parse_experiment_config(cfg_json), dir.string());
  REQUIRE(summary.exit_code == ExitCode::ok);
  CHECK(summary.report.at("cost_value").get<double>() <= 1e-8);
  CHECK(summary.report.at("verdicts").at("turnpike") == "pass");
  CHECK(summary.report.at("verdicts").at("stabilization") == "pass");
}
