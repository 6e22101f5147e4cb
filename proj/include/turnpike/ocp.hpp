#ifndef TURNPIKE_OCP_HPP
#define TURNPIKE_OCP_HPP

#include <functional>
#include <string>
#include <vector>

#include "turnpike/dynamics.hpp"

namespace turnpike {

/// Terminal cost: either absent or quadratic (weight/2)*|y(T) - anchor|^2.
struct FinalCost {
  bool none = true;
  double weight = 0.0;
  Vector anchor;

  double operator()(const Vector& y_final) const;
  Vector grad(const Vector& y_final) const;

  static FinalCost off() { return {}; }
  static FinalCost quadratic(double weight, const Vector& anchor);
};

/// Running + terminal cost of a tracking problem. The default state term is
/// state_weight * |y - y_bar|^2; installing state_term/state_term_grad
/// replaces it (used for weighted PDE norms and projection losses).
struct CostSpec {
  Vector y_bar;
  Vector u_bar;
  FinalCost final_cost;
  double state_weight = 1.0;
  double control_weight = 1.0;
  /// Optional squared-difference penalty on consecutive control values,
  /// h1_weight * sum_k |(u_{k+1}-u_k)/dt|^2 dt.
  double h1_weight = 0.0;

  std::function<double(const Vector&)> state_term;
  std::function<Vector(const Vector&)> state_term_grad;
  std::string state_term_tag = "quadratic";

  double state_cost(const Vector& y) const;
  Vector state_cost_grad(const Vector& y) const;
};

struct OcpProblem {
  ControlAffineSystem system;
  Vector initial_state;
  double horizon = 1.0;
  int steps = 100;
  CostSpec cost;
  Scheme scheme = Scheme::rk4;

  /// ||f(y_bar, u_bar)||, recorded at construction via validate().
  double steady_residual_value = 0.0;
  /// Set when the running target fails f(y_bar,u_bar) ~ 0 (residual > 1e-8).
  bool steady_warning = false;

  double dt() const { return horizon / steps; }
  /// Computes steady_residual_value / steady_warning.
  void validate();
};

struct SolveOptions {
  int max_iters = 2000;
  double tolerance = 1e-6;  // on the L2 norm of the cost gradient
  int restarts = 5;
  unsigned long seed = 0;
  double init_scale = 0.1;
  /// Optional warm start; used as the restart-0 initialization.
  std::optional<ControlSignal> initial_control;
};

struct Solution {
  ControlSignal control;
  Trajectory trajectory;
  double cost_value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int restarts_used = 0;
  bool converged = false;

  /// Fixed-endpoint solves only: |y(t_end) - y_target| after the penalty
  /// schedule, and its per-stage history.
  double terminal_mismatch = 0.0;
  std::vector<double> mismatch_history;

  /// Accepted cost values of the winning restart, in iteration order.
  std::vector<double> cost_history;
};

/// phi(y(T)) + sum_k [state_cost(y_k) + control_weight*|u_k-u_bar|^2] dt
/// (left-endpoint quadrature on the integrated trajectory).
double evaluate_cost(const OcpProblem& problem, const ControlSignal& control);

/// Exact gradient of the discrete cost with respect to the control values,
/// by reverse accumulation through the one-step scheme. Throws
/// std::runtime_error naming the field if a needed derivative is missing.
Matrix gradient(const OcpProblem& problem, const ControlSignal& control);

/// L2 norm of a control-space gradient (the Euclidean gradient g divided by
/// dt, measured in the discrete L2 norm).
double gradient_l2_norm(const Matrix& g, double dt);

/// Gradient descent with Armijo backtracking, best of `restarts` seeded
/// initializations. Deterministic given opts.seed.
Solution solve(const OcpProblem& problem, const SolveOptions& opts);

enum class EndpointMode { control_norm_only, full_tracking };

struct FixedEndpointOptions {
  std::vector<double> penalty_schedule;  // increasing; default 10^1..10^6
  SolveOptions solver;
  Vector u_bar;                      // default zeros
  Vector y_bar;                      // tracking target for full_tracking
  double state_weight = 1.0;
  double control_weight = 1.0;

  FixedEndpointOptions();
};

/// Quadratic-penalty continuation for the endpoint-constrained problem on
/// [t_start, t_end]: minimizes the mode's running cost plus
/// rho * |y(t_end) - y_end|^2 along the increasing schedule with warm
/// starts. A terminal mismatch above the caller's threshold is reported via
/// Solution::terminal_mismatch, not an exception.
Solution solve_fixed_endpoint(const ControlAffineSystem& system, const Vector& y_start,
                              const Vector& y_end, double t_start, double t_end, int steps,
                              EndpointMode mode, const FixedEndpointOptions& opts);

}  // namespace turnpike

#endif
