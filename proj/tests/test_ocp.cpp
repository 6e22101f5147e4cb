#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "turnpike/ocp.hpp"

using namespace turnpike;

namespace {

OcpProblem scalar_integrator_problem(double y0, double T, int steps) {
  OcpProblem p;
  p.system = make_linear_system(Matrix::Zero(1, 1), Matrix::Ones(1, 1));
  p.initial_state = Vector::Constant(1, y0);
  p.horizon = T;
  p.steps = steps;
  p.cost.y_bar = Vector::Zero(1);
  p.cost.u_bar = Vector::Zero(1);
  p.validate();
  return p;
}

ControlAffineSystem random_smooth_system(std::mt19937_64& rng, int d, int m) {
  std::normal_distribution<double> normal(0.0, 0.6);
  auto tanh_field = [&](const std::string& name) {
    Matrix V(d, d), W(d, d);
    Vector b(d);
    for (int i = 0; i < d; ++i) {
      b(i) = normal(rng);
      for (int j = 0; j < d; ++j) {
        V(i, j) = normal(rng);
        W(i, j) = normal(rng);
      }
    }
    VectorField f;
    f.name = name;
    f.dim_in = d;
    f.dim_out = d;
    f.evaluator = [V, W, b, d](const Vector& y) {
      Vector z = W * y + b;
      for (int i = 0; i < d; ++i) z(i) = std::tanh(z(i));
      return (V * z).eval();
    };
    f.derivative = [V, W, b, d](const Vector& y) {
      Vector z = W * y + b;
      Matrix D = Matrix::Zero(d, d);
      for (int i = 0; i < d; ++i) D(i, i) = 1.0 - std::tanh(z(i)) * std::tanh(z(i));
      return (V * D * W).eval();
    };
    return f;
  };
  ControlAffineSystem sys;
  sys.state_dim = d;
  sys.control_dim = m;
  sys.form = FormTag::affine;
  sys.drift = tanh_field("drift");
  for (int j = 0; j < m; ++j) sys.control_fields.push_back(tanh_field("f" + std::to_string(j)));
  return sys;
}

double max_rel_gradient_error(const OcpProblem& problem, const ControlSignal& u) {
  const Matrix g = gradient(problem, u);
  const Matrix fd = oracles::fd_gradient(problem, u);
  return (g - fd).norm() / std::max(1e-12, fd.norm());
}

}  // namespace

TEST_CASE("evaluate_cost: steady pair, unit tracking, quadrature convention") {
  // both tracking terms vanish at the steady pair
  OcpProblem steady = scalar_integrator_problem(0.0, 2.0, 50);
  CHECK(evaluate_cost(steady, ControlSignal::zero(2.0, 50, 1)) == doctest::Approx(0.0));

  // ydot = u, y0 = 1, u = 0: state stays at 1, J = int_0^1 1 dt = 1 exactly
  OcpProblem unit = scalar_integrator_problem(1.0, 1.0, 64);
  CHECK(evaluate_cost(unit, ControlSignal::zero(1.0, 64, 1)) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(evaluate_cost(unit, ControlSignal::zero(2.0, 64, 1)), std::invalid_argument);
}

TEST_CASE("gradient: zero at the global minimum, quadratic control term") {
  OcpProblem steady = scalar_integrator_problem(0.0, 2.0, 40);
  const Matrix g0 = gradient(steady, ControlSignal::zero(2.0, 40, 1));
  CHECK(g0.norm() == doctest::Approx(0.0));

  // state_weight 0 isolates the control energy: d/du_k of u_k^2 dt = 2 c dt
  OcpProblem ctrl_only = scalar_integrator_problem(0.0, 1.0, 25);
  ctrl_only.cost.state_weight = 0.0;
  const double c = 0.37;
  const Matrix g = gradient(ctrl_only, ControlSignal::constant(1.0, 25, Vector::Constant(1, c)));
  for (int k = 0; k < 25; ++k) CHECK(g(k, 0) == doctest::Approx(2.0 * c * (1.0 / 25.0)));
}

TEST_CASE("gradient matches central finite differences on random smooth instances") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 0.4);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 4);
    const int m = 1 + static_cast<int>(rng() % 2);
    OcpProblem p;
    p.system = random_smooth_system(rng, d, m);
    p.initial_state = Vector::NullaryExpr(d, [&](Eigen::Index) { return normal(rng); });
    p.horizon = 1.5;
    p.steps = 50;
    p.scheme = trial % 2 == 0 ? Scheme::rk4 : Scheme::forward_euler;
    p.cost.y_bar = Vector::NullaryExpr(d, [&](Eigen::Index) { return normal(rng); });
    p.cost.u_bar = Vector::Zero(m);
    if (trial % 3 == 0)
      p.cost.final_cost = FinalCost::quadratic(0.8, Vector::Zero(d));

    ControlSignal u = ControlSignal::zero(1.5, 50, m);
    for (int k = 0; k < 50; ++k)
      for (int j = 0; j < m; ++j) u.values(k, j) = normal(rng);
    CHECK(max_rel_gradient_error(p, u) <= 1e-6);
  }
}

TEST_CASE("gradient handles the neural-inside kernel and the H1 penalty") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 0.3);
  OcpProblem p;
  p.system = make_neural_system(true, Sigma::tanh(), 2);
  p.initial_state = Vector::Constant(2, 0.4);
  p.horizon = 1.0;
  p.steps = 40;
  p.cost.y_bar = Vector::Zero(2);
  p.cost.u_bar = Vector::Zero(6);
  ControlSignal u = ControlSignal::zero(1.0, 40, 6);
  for (int k = 0; k < 40; ++k)
    for (int j = 0; j < 6; ++j) u.values(k, j) = normal(rng);
  CHECK(max_rel_gradient_error(p, u) <= 1e-6);

  p.cost.h1_weight = 0.05;
  CHECK(max_rel_gradient_error(p, u) <= 1e-6);
}

TEST_CASE("gradient names the field when a derivative is missing") {
  OcpProblem p = scalar_integrator_problem(1.0, 1.0, 10);
  VectorField bad;
  bad.name = "no_jacobian";
  bad.dim_in = 1;
  bad.dim_out = 1;
  bad.evaluator = [](const Vector& y) { return (0.5 * y).eval(); };
  p.system.drift = bad;
  p.system.zero_drift = false;
  try {
    gradient(p, ControlSignal::zero(1.0, 10, 1));
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("no_jacobian") != std::string::npos);
  }
}

TEST_CASE("solve: trivial optimum and monotone descent") {
  OcpProblem steady = scalar_integrator_problem(0.0, 2.0, 50);
  SolveOptions opts;
  opts.seed = 1;
  opts.restarts = 3;
  Solution sol = solve(steady, opts);
  CHECK(sol.cost_value <= 1e-8);
  CHECK(sol.control.l2_norm() <= 1e-4);
  CHECK(sol.converged);
  CHECK(sol.restarts_used == 3);

  OcpProblem lq = scalar_integrator_problem(1.0, 4.0, 200);
  Solution lq_sol = solve(lq, SolveOptions{.max_iters = 400, .tolerance = 1e-7, .restarts = 2,
                                           .seed = 9});
  for (size_t i = 1; i < lq_sol.cost_history.size(); ++i)
    CHECK(lq_sol.cost_history[i] <= lq_sol.cost_history[i - 1]);
  CHECK(std::abs(evaluate_cost(lq, lq_sol.control) - lq_sol.cost_value) <=
        1e-12 * std::max(1.0, lq_sol.cost_value));
}

TEST_CASE("solve reaches the Riccati value on the scalar integrator, T = 10") {
  const double T = 10.0;
  const int K = 4000;
  OcpProblem p = scalar_integrator_problem(1.0, T, K);
  Solution sol = solve(p, SolveOptions{.max_iters = 4000, .tolerance = 1e-7, .restarts = 1,
                                       .seed = 0});
  // dynamic-programming oracle for the same discretization
  const auto dp = oracles::lq_riccati_oracle(Matrix::Zero(1, 1), Matrix::Ones(1, 1),
                                             Vector::Ones(1), Vector::Zero(1), Vector::Zero(1),
                                             1.0, 1.0, 0.0, Vector::Zero(1), T, K, Scheme::rk4);
  CHECK(sol.cost_value == doctest::Approx(dp.cost).epsilon(1e-5));
  // continuous-horizon value: tanh(10) ~ 1.0
  CHECK(std::abs(sol.cost_value - 1.000) <= 5e-3);

  // interior decay rate ~ 1 (log-linear fit on [0.5, 7], before the noise floor)
  const Trajectory& traj = sol.trajectory;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int k = 0; k <= K; ++k) {
    const double t = traj.times(k);
    if (t < 0.5 || t > 7.0) continue;
    const double logd = std::log(std::max(std::abs(traj.states(k, 0)), 1e-14));
    sx += t;
    sy += logd;
    sxx += t * t;
    sxy += t * logd;
    ++n;
  }
  const double rate = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(rate == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("solve matches the dense DP oracle on a 2-D LQ instance") {
  const double T = 5.0;
  const int K = 250;
  OcpProblem p;
  p.system = make_linear_system(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  p.initial_state = Vector(2);
  p.initial_state << 1.0, -1.0;
  p.horizon = T;
  p.steps = K;
  p.cost.y_bar = Vector::Zero(2);
  p.cost.u_bar = Vector::Zero(2);
  p.validate();
  Solution sol = solve(p, SolveOptions{.max_iters = 2000, .tolerance = 1e-8, .restarts = 2,
                                       .seed = 4});
  const auto dp = oracles::lq_riccati_oracle(Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                                             p.initial_state, Vector::Zero(2), Vector::Zero(2),
                                             1.0, 1.0, 0.0, Vector::Zero(2), T, K, Scheme::rk4);
  CHECK(std::abs(sol.cost_value - dp.cost) / dp.cost <= 1e-4);
}

TEST_CASE("solve_fixed_endpoint: steady pair, scalar steering closed forms") {
  // steady system: x stays put, u stays at ubar, zero mismatch and cost
  OcpProblem base = scalar_integrator_problem(0.0, 1.0, 50);
  FixedEndpointOptions fopts;
  Solution stay = solve_fixed_endpoint(base.system, Vector::Zero(1), Vector::Zero(1), 0.0, 1.0,
                                       50, EndpointMode::control_norm_only, fopts);
  CHECK(stay.terminal_mismatch <= 1e-12);
  CHECK(stay.cost_value <= 1e-12);
  CHECK(stay.control.l2_norm() <= 1e-9);

  // steer 0 -> 1 on [0,1]: u == 1, |u| = 1 (Gramian closed form)
  Solution s1 = solve_fixed_endpoint(base.system, Vector::Zero(1), Vector::Ones(1), 0.0, 1.0, 100,
                                     EndpointMode::control_norm_only, fopts);
  CHECK(s1.terminal_mismatch <= 2e-6);
  CHECK(s1.control.l2_norm() == doctest::Approx(1.0).epsilon(1e-3));
  for (int k = 0; k < 100; ++k)
    CHECK(s1.control.values(k, 0) == doctest::Approx(1.0).epsilon(1e-2));

  // steer 0 -> 1 on [0,2]: u == 1/2, |u| = 1/sqrt(2)
  Solution s2 = solve_fixed_endpoint(base.system, Vector::Zero(1), Vector::Ones(1), 0.0, 2.0, 100,
                                     EndpointMode::control_norm_only, fopts);
  CHECK(s2.control.l2_norm() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));

  // penalty consistency: mismatch non-increasing along the schedule
  for (size_t i = 1; i < s1.mismatch_history.size(); ++i)
    CHECK(s1.mismatch_history[i] <= s1.mismatch_history[i - 1] * (1.0 + 1e-9));
}

TEST_CASE("solve_fixed_endpoint rejects bad windows and schedules") {
  OcpProblem base = scalar_integrator_problem(0.0, 1.0, 20);
  FixedEndpointOptions fopts;
  CHECK_THROWS_AS(solve_fixed_endpoint(base.system, Vector::Zero(1), Vector::Ones(1), 1.0, 1.0,
                                       20, EndpointMode::control_norm_only, fopts),
                  std::invalid_argument);
  fopts.penalty_schedule = {100.0, 10.0};
  CHECK_THROWS_AS(solve_fixed_endpoint(base.system, Vector::Zero(1), Vector::Ones(1), 0.0, 1.0,
                                       20, EndpointMode::control_norm_only, fopts),
                  std::invalid_argument);
}
