#include "turnpike/ocp.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace turnpike {

double FinalCost::operator()(const Vector& y_final) const {
  if (none) return 0.0;
  return 0.5 * weight * (y_final - anchor).squaredNorm();
}

Vector FinalCost::grad(const Vector& y_final) const {
  if (none) return Vector::Zero(y_final.size());
  return weight * (y_final - anchor);
}

FinalCost FinalCost::quadratic(double weight, const Vector& anchor) {
  if (weight < 0.0) throw std::invalid_argument("final cost weight must be >= 0");
  FinalCost c;
  c.none = false;
  c.weight = weight;
  c.anchor = anchor;
  return c;
}

double CostSpec::state_cost(const Vector& y) const {
  if (state_term) return state_term(y);
  return state_weight * (y - y_bar).squaredNorm();
}

Vector CostSpec::state_cost_grad(const Vector& y) const {
  if (state_term_grad) return state_term_grad(y);
  return 2.0 * state_weight * (y - y_bar);
}

void OcpProblem::validate() {
  steady_residual_value = steady_residual(system, cost.y_bar, cost.u_bar);
  steady_warning = steady_residual_value > 1e-8;
}

double evaluate_cost(const OcpProblem& problem, const ControlSignal& control) {
  if (control.steps != problem.steps || std::abs(control.horizon - problem.horizon) > 1e-12)
    throw std::invalid_argument("evaluate_cost: control grid does not match problem grid");
  const Trajectory traj = integrate(problem.system, problem.initial_state, control, problem.scheme);
  const double dt = problem.dt();
  const CostSpec& cost = problem.cost;

  double running = 0.0;
  for (int k = 0; k < problem.steps; ++k) {
    running += cost.state_cost(traj.states.row(k).transpose());
    running += cost.control_weight * (control.values.row(k).transpose() - cost.u_bar).squaredNorm();
  }
  double value = cost.final_cost(traj.final_state()) + running * dt;

  if (cost.h1_weight > 0.0) {
    double acc = 0.0;
    for (int k = 0; k + 1 < problem.steps; ++k)
      acc += (control.values.row(k + 1) - control.values.row(k)).squaredNorm();
    value += cost.h1_weight * acc / dt;
  }
  return value;
}

namespace {

// out += scale * (d rhs / d y)^T v at (y, u)
void add_state_jtv(const ControlAffineSystem& sys, const Vector& y, const Vector& u,
                   const Vector& v, double scale, Vector& out) {
  if (sys.custom_rhs) {
    if (!sys.custom_state_jacobian)
      throw std::runtime_error("gradient: system kernel provides no state Jacobian");
    out.noalias() += scale * (sys.custom_state_jacobian(y, u).transpose() * v);
    return;
  }
  if (!sys.zero_drift) {
    if (sys.drift.jacobian_transpose_apply) {
      sys.drift.jacobian_transpose_apply(y, v, scale, out);
    } else if (sys.drift.derivative) {
      out.noalias() += scale * (sys.drift.derivative(y).transpose() * v);
    } else {
      throw std::runtime_error("gradient: missing derivative on field '" + sys.drift.name + "'");
    }
  }
  for (int j = 0; j < sys.control_dim; ++j) {
    if (u(j) == 0.0) continue;
    const VectorField& f = sys.control_fields[j];
    if (f.is_constant) continue;
    if (f.jacobian_transpose_apply) {
      f.jacobian_transpose_apply(y, v, scale * u(j), out);
    } else if (f.derivative) {
      out.noalias() += (scale * u(j)) * (f.derivative(y).transpose() * v);
    } else {
      throw std::runtime_error("gradient: missing derivative on field '" + f.name + "'");
    }
  }
}

// gk += (d rhs / d u)^T v at (y, u)
void add_control_jtv(const ControlAffineSystem& sys, const Vector& y, const Vector& u,
                     const Vector& v, Vector& gk, Vector& scratch) {
  if (sys.custom_rhs) {
    if (!sys.custom_control_jacobian)
      throw std::runtime_error("gradient: system kernel provides no control Jacobian");
    gk.noalias() += sys.custom_control_jacobian(y, u).transpose() * v;
    return;
  }
  for (int j = 0; j < sys.control_dim; ++j) {
    sys.control_fields[j].eval_into(y, scratch);
    gk(j) += scratch.dot(v);
  }
}

}  // namespace

Matrix gradient(const OcpProblem& problem, const ControlSignal& control) {
  if (control.steps != problem.steps || std::abs(control.horizon - problem.horizon) > 1e-12)
    throw std::invalid_argument("gradient: control grid does not match problem grid");
  const ControlAffineSystem& sys = problem.system;
  const CostSpec& cost = problem.cost;
  const int K = problem.steps;
  const int d = sys.state_dim;
  const int m = sys.control_dim;
  const double dt = problem.dt();

  const Trajectory traj = integrate(sys, problem.initial_state, control, problem.scheme);

  Matrix g = Matrix::Zero(K, m);
  Vector lambda = cost.final_cost.grad(traj.final_state());

  Vector k1(d), k2(d), k3(d), s2(d), s3(d), s4(d), scratch(d);
  Vector nu1(d), nu2(d), nu3(d), nu4(d), gk(m);

  for (int k = K - 1; k >= 0; --k) {
    const Vector y = traj.states.row(k).transpose();
    const Vector u = control.values.row(k).transpose();

    // running control term
    gk = (2.0 * cost.control_weight * dt) * (u - cost.u_bar);

    if (problem.scheme == Scheme::forward_euler) {
      // y_{k+1} = y_k + dt f(y_k, u_k)
      nu1 = dt * lambda;
      add_control_jtv(sys, y, u, nu1, gk, scratch);
      add_state_jtv(sys, y, u, nu1, 1.0, lambda);
    } else {
      // recompute the rk4 stages of this step
      k1 = evaluate_rhs(sys, y, u);
      s2 = y + (0.5 * dt) * k1;
      k2 = evaluate_rhs(sys, s2, u);
      s3 = y + (0.5 * dt) * k2;
      k3 = evaluate_rhs(sys, s3, u);
      s4 = y + dt * k3;

      nu4 = (dt / 6.0) * lambda;
      nu3 = (dt / 3.0) * lambda;
      add_state_jtv(sys, s4, u, nu4, dt, nu3);
      nu2 = (dt / 3.0) * lambda;
      add_state_jtv(sys, s3, u, nu3, 0.5 * dt, nu2);
      nu1 = (dt / 6.0) * lambda;
      add_state_jtv(sys, s2, u, nu2, 0.5 * dt, nu1);

      add_control_jtv(sys, y, u, nu1, gk, scratch);
      add_control_jtv(sys, s2, u, nu2, gk, scratch);
      add_control_jtv(sys, s3, u, nu3, gk, scratch);
      add_control_jtv(sys, s4, u, nu4, gk, scratch);

      add_state_jtv(sys, y, u, nu1, 1.0, lambda);
      add_state_jtv(sys, s2, u, nu2, 1.0, lambda);
      add_state_jtv(sys, s3, u, nu3, 1.0, lambda);
      add_state_jtv(sys, s4, u, nu4, 1.0, lambda);
    }

    g.row(k) = gk.transpose();
    lambda.noalias() += dt * cost.state_cost_grad(y);
  }

  if (cost.h1_weight > 0.0) {
    const double w = 2.0 * cost.h1_weight / dt;
    for (int k = 0; k < K; ++k) {
      if (k > 0) g.row(k) += w * (control.values.row(k) - control.values.row(k - 1));
      if (k + 1 < K) g.row(k) -= w * (control.values.row(k + 1) - control.values.row(k));
    }
  }
  return g;
}

double gradient_l2_norm(const Matrix& g, double dt) { return g.norm() / std::sqrt(dt); }

namespace {

double cost_or_inf(const OcpProblem& problem, const ControlSignal& u) {
  try {
    return evaluate_cost(problem, u);
  } catch (const IntegrationError&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct DescentResult {
  ControlSignal control;
  double cost = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;
};

// Armijo-backtracking gradient descent from the given initialization.
DescentResult descend(const OcpProblem& problem, ControlSignal u, const SolveOptions& opts) {
  constexpr double kArmijoC = 1e-4;
  constexpr int kMaxHalvings = 60;
  const double dt = problem.dt();

  DescentResult res;
  double J = cost_or_inf(problem, u);
  if (!std::isfinite(J)) return res;  // inadmissible start
  res.cost_history.push_back(J);

  double alpha = -1.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    Matrix g;
    try {
      g = gradient(problem, u);
    } catch (const IntegrationError&) {
      break;
    }
    const double gnorm = gradient_l2_norm(g, dt);
    res.iterations = it;
    if (gnorm <= opts.tolerance) {
      res.converged = true;
      break;
    }
    const double g2 = g.squaredNorm();
    if (alpha <= 0.0) alpha = 1.0 / (1.0 + std::sqrt(g2));

    double step = 2.0 * alpha;  // allow growth between iterations
    bool accepted = false;
    ControlSignal trial = u;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      trial.values = u.values - step * g;
      const double Jt = cost_or_inf(problem, trial);
      if (Jt <= J - kArmijoC * step * g2) {
        u = trial;
        J = Jt;
        alpha = step;
        accepted = true;
        res.cost_history.push_back(J);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction found at machine scale
    res.iterations = it + 1;
  }

  res.control = std::move(u);
  res.cost = J;
  try {
    res.grad_norm = gradient_l2_norm(gradient(problem, res.control), dt);
  } catch (const IntegrationError&) {
    res.grad_norm = std::numeric_limits<double>::infinity();
  }
  if (res.grad_norm <= opts.tolerance) res.converged = true;
  return res;
}

}  // namespace

Solution solve(const OcpProblem& problem, const SolveOptions& opts) {
  if (opts.tolerance <= 0.0) throw std::invalid_argument("solve: tolerance must be positive");
  const int K = problem.steps;
  const int m = problem.system.control_dim;
  const int restarts = std::max(1, opts.restarts);

  DescentResult best;
  int total_iterations = 0;
  for (int r = 0; r < restarts; ++r) {
    ControlSignal init;
    if (r == 0 && opts.initial_control) {
      init = *opts.initial_control;
    } else if (r == 0) {
      init = ControlSignal::constant(problem.horizon, K, problem.cost.u_bar);
    } else {
      std::mt19937_64 rng(opts.seed * 1000003ULL + static_cast<unsigned long>(r));
      std::normal_distribution<double> normal(0.0, 1.0);
      init = ControlSignal::constant(problem.horizon, K, problem.cost.u_bar);
      for (int k = 0; k < K; ++k)
        for (int j = 0; j < m; ++j) init.values(k, j) += opts.init_scale * normal(rng);
    }
    DescentResult res = descend(problem, std::move(init), opts);
    total_iterations += res.iterations;
    if (res.cost < best.cost) best = std::move(res);
  }

  if (!std::isfinite(best.cost))
    throw IntegrationError(0, "solve: every restart left the admissible state range");

  Solution sol;
  sol.control = best.control;
  sol.trajectory = integrate(problem.system, problem.initial_state, sol.control, problem.scheme);
  sol.cost_value = best.cost;
  sol.grad_norm = best.grad_norm;
  sol.iterations = total_iterations;
  sol.restarts_used = restarts;
  sol.converged = best.converged;
  sol.cost_history = std::move(best.cost_history);
  return sol;
}

FixedEndpointOptions::FixedEndpointOptions() {
  penalty_schedule = {1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
}

Solution solve_fixed_endpoint(const ControlAffineSystem& system, const Vector& y_start,
                              const Vector& y_end, double t_start, double t_end, int steps,
                              EndpointMode mode, const FixedEndpointOptions& opts) {
  if (t_end <= t_start) throw std::invalid_argument("solve_fixed_endpoint: requires t_end > t_start");
  for (size_t i = 1; i < opts.penalty_schedule.size(); ++i)
    if (opts.penalty_schedule[i] <= opts.penalty_schedule[i - 1])
      throw std::invalid_argument("solve_fixed_endpoint: penalty schedule must increase");
  if (opts.penalty_schedule.empty())
    throw std::invalid_argument("solve_fixed_endpoint: empty penalty schedule");

  const int d = system.state_dim;
  const int m = system.control_dim;

  // dynamics are autonomous; work on [0, t_end - t_start]
  OcpProblem problem;
  problem.system = system;
  problem.initial_state = y_start;
  problem.horizon = t_end - t_start;
  problem.steps = steps;
  problem.cost.u_bar = opts.u_bar.size() == m ? opts.u_bar : Vector::Zero(m).eval();
  problem.cost.control_weight = opts.control_weight;
  if (mode == EndpointMode::control_norm_only) {
    problem.cost.y_bar = Vector::Zero(d);
    problem.cost.state_weight = 0.0;
  } else {
    problem.cost.y_bar = opts.y_bar.size() == d ? opts.y_bar : Vector::Zero(d).eval();
    problem.cost.state_weight = opts.state_weight;
  }

  Solution out;
  std::optional<ControlSignal> warm;
  SolveOptions stage_opts = opts.solver;
  for (size_t s = 0; s < opts.penalty_schedule.size(); ++s) {
    const double rho = opts.penalty_schedule[s];
    problem.cost.final_cost = FinalCost::quadratic(2.0 * rho, y_end);  // rho |y(T)-y_end|^2
    stage_opts.initial_control = warm;
    if (s > 0) stage_opts.restarts = 1;  // warm-started continuation
    Solution sol = solve(problem, stage_opts);
    const double mismatch = (sol.trajectory.final_state() - y_end).norm();
    out.mismatch_history.push_back(mismatch);
    warm = sol.control;
    out.control = std::move(sol.control);
    out.trajectory = std::move(sol.trajectory);
    out.grad_norm = sol.grad_norm;
    out.iterations += sol.iterations;
    out.restarts_used += sol.restarts_used;
    out.converged = sol.converged;
    out.terminal_mismatch = mismatch;
  }

  // report the mode's running cost without the penalty term
  problem.cost.final_cost = FinalCost::off();
  out.cost_value = evaluate_cost(problem, out.control);
  return out;
}

}  // namespace turnpike
