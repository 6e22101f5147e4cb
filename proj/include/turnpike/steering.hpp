#ifndef TURNPIKE_STEERING_HPP
#define TURNPIKE_STEERING_HPP

#include <optional>
#include <vector>

#include "turnpike/ocp.hpp"

namespace turnpike {

/// Outcome of a point-to-point steering attempt. Failure to meet the
/// threshold is a first-class result, not an exception.
struct SteeringResult {
  ControlSignal control;
  double terminal_error = 0.0;
  double control_norm = 0.0;  // ||u - u_bar||_{L2}
  bool achieved = false;
};

struct SteerOptions {
  std::vector<double> penalty_schedule;
  SolveOptions solver;
  Vector u_bar;  // default zeros
  /// Threshold on |y(T0) - y1|; default 1e-6 * (1 + |y1|).
  std::optional<double> threshold;

  SteerOptions();
};

/// Minimal-norm steering of `system` from y0 to y1 on [0, T0] by penalty
/// continuation (control_norm_only mode of solve_fixed_endpoint).
SteeringResult steer(const ControlAffineSystem& system, const Vector& y0, const Vector& y1,
                     double T0, int steps, const SteerOptions& opts = SteerOptions());

/// Exact minimal-L2-norm steering control for ydot = A y + B u:
///   u(t) = B^T e^{A^T (T0 - t)} W^{-1} (y1 - e^{A T0} y0),
/// with the reachability Gramian W computed by midpoint quadrature on the
/// grid. Throws std::runtime_error when cond(W) > 1e12 (not controllable in
/// practice).
ControlSignal gramian_steer(const Matrix& A, const Matrix& B, const Vector& y0,
                            const Vector& y1, double T0, int steps);

enum class ProbeDirection { into_steady, out_of_steady };

/// Empirical estimate of the local steering-cost constant: ratios
/// ||u - u_bar|| / ||endpoint - y_bar|| over random endpoints in a ball.
struct CostEstimateProbe {
  double radius = 0.0;
  int samples = 0;
  std::vector<double> ratios;         // achieved, non-degenerate samples only
  std::optional<double> estimated_C;  // max ratio; empty when no data
  ProbeDirection direction = ProbeDirection::into_steady;
  int failures = 0;
  int degenerate = 0;
  bool unreliable = false;  // > 20% steering failures
};

struct ProbeOptions {
  int samples = 64;
  int steps = 100;  // steering-grid cells on [0, T0]
  SteerOptions steer;
};

/// Sample endpoints uniformly in the ball of radius r around y_bar and steer
/// into (resp. out of) the steady point; one probe per direction.
/// Requires steady_residual(system, y_bar, u_bar) <= 1e-8.
std::pair<CostEstimateProbe, CostEstimateProbe> probe_cost_estimate(
    const ControlAffineSystem& system, const Vector& y_bar, const Vector& u_bar, double radius,
    double T0, int n_samples, unsigned long seed, const ProbeOptions& opts = ProbeOptions());

/// Steer y0 -> y_bar on [0, T0], then hold u = u_bar on [T0, T]. The number
/// of steering cells is round(T0/T * steps); T0 must align with the grid.
/// Steering failure propagates as std::runtime_error.
ControlSignal steer_and_hold(const ControlAffineSystem& system, const Vector& y0,
                             const Vector& y_bar, const Vector& u_bar, double T0, double T,
                             int steps, const SteerOptions& opts = SteerOptions());

/// Steer y_a -> y_bar on [tau1, tau1+T0], hold u_bar on the middle window,
/// steer y_bar -> y_b on [tau2-T0, tau2] (time-shifted). Requires
/// tau2 - tau1 >= 2*T0.
ControlSignal steer_hold_steer(const ControlAffineSystem& system, const Vector& y_a,
                               const Vector& y_b, const Vector& y_bar, const Vector& u_bar,
                               double T0, double tau1, double tau2, int steps,
                               const SteerOptions& opts = SteerOptions());

/// u_T(t) = (T0/T) u(t*T0/T): same grid, values scaled by T0/T, horizon T.
/// For driftless systems the trajectory is the time-reparameterized original;
/// ||u_T||_{L2} = sqrt(T0/T) ||u||_{L2} exactly in the discrete norm.
ControlSignal time_rescale(const ControlSignal& control, double new_horizon);

}  // namespace turnpike

#endif
