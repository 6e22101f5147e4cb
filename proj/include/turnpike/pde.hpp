#ifndef TURNPIKE_PDE_HPP
#define TURNPIKE_PDE_HPP

#include <vector>

#include "turnpike/ocp.hpp"

namespace turnpike {

/// Uniform 1-D grid on (0, L) with homogeneous Dirichlet ends (eliminated)
/// and a distributed-control window omega = (a, b).
struct Grid1D {
  double length = 1.0;
  int n_interior = 0;
  double omega_lo = 0.0;
  double omega_hi = 0.0;

  Grid1D() = default;
  Grid1D(double L, int N, double a, double b);

  double spacing() const { return length / (n_interior + 1); }
  double node(int i) const { return spacing() * (i + 1); }  // i = 0..N-1
  /// Interior node indices strictly inside (a, b); nonempty by construction.
  std::vector<int> omega_indices() const;
  /// Smallest eigenvalue of the discrete Dirichlet Laplacian:
  /// (2/h)^2 sin^2(pi h / (2L)).
  double lambda1() const;
};

/// Interior nodal values of a Dirichlet field (boundary zeros implied).
struct Field {
  Vector values;
  double spacing = 1.0;

  double l2_norm() const;   // sqrt(h sum v_i^2)
  double h10_norm() const;  // sqrt(sum ((v_{i+1}-v_i)/h)^2 h), zeros at ends
};

/// Scalar Lipschitz nonlinearity with derivative; zero | tanh | leaky_relu.
struct ScalarNonlinearity {
  enum class Kind { zero, tanh_, leaky_relu };
  Kind kind = Kind::zero;
  double alpha = 0.0;

  double operator()(double s) const;
  double deriv(double s) const;

  static ScalarNonlinearity zero() { return {}; }
  static ScalarNonlinearity tanh() { return {Kind::tanh_, 0.0}; }
  static ScalarNonlinearity leaky_relu(double alpha);
  const char* name() const;
};

enum class PdeKind { heat, wave };

/// Semilinear heat/wave problem with distributed control on omega and a
/// steady running pair (y_bar, u_bar) satisfying the discrete elliptic
/// equation -Lap_h y_bar + f(y_bar) = u_bar 1_omega to 1e-8.
struct PdeSystem {
  PdeKind kind = PdeKind::heat;
  Grid1D grid;
  ScalarNonlinearity nonlinearity;
  Vector u_bar;  // one value per omega node
  Field y_bar;

  /// Validates the steady residual; throws std::invalid_argument above 1e-8.
  static PdeSystem create(PdeKind kind, const Grid1D& grid, ScalarNonlinearity f,
                          const Vector& u_bar_omega, const Field& y_bar);

  /// l2 norm of -Lap_h y_bar + f(y_bar) - u_bar 1_omega.
  double steady_residual() const;
};

/// Method of lines. heat: d = N, ydot = Lap_h y - f(y) + E u. wave: d = 2N,
/// (ydot, vdot) = (v, Lap_h y - f(y) + E u). E injects the |omega| control
/// channels as nodal indicators.
ControlAffineSystem semidiscretize(const PdeSystem& pde);

/// Damped Newton iteration on -Lap_h y + f(y) - u_bar 1_omega = 0 from
/// initial guess 0; converged when the l2 residual is <= 1e-10. Throws
/// std::runtime_error (with the final residual) after 100 iterations.
Field solve_steady(const Grid1D& grid, const ScalarNonlinearity& f, const Vector& u_bar_omega);

/// CostSpec for the semidiscrete system with the PDE norms folded in:
/// heat tracks the l2 norm of y - y_bar; wave tracks the h10 norm of the
/// position block plus the l2 norm of the velocity block (velocity target
/// zero). Control is measured in the l2(omega) norm.
CostSpec pde_cost_spec(const PdeSystem& pde, const FinalCost& final_cost,
                       double state_weight = 1.0, double control_weight = 1.0);

/// The state-distance metric matching pde_cost_spec (used for diagnostics
/// signals): heat -> l2 distance to y_bar; wave -> sqrt(h10^2 + l2^2) of the
/// deviation.
double pde_state_distance(const PdeSystem& pde, const Vector& state);

/// 2 * max(a, L - b): the travel-time bound used as the default steering
/// window for wave experiments (unit wave speed; zero when omega is the
/// whole domain).
double wave_min_time(const Grid1D& grid);

/// Largest stable steps-per-unit-time guidance: heat uses the explicit
/// stability limit of rk4 on the stiffest mode with a 25% margin; wave uses
/// dt <= 0.5 h.
int suggested_steps_per_unit_time(const PdeSystem& pde);

/// Stacks (position, velocity) into the semidiscrete wave state.
Vector wave_pack(const Field& position, const Field& velocity);

}  // namespace turnpike

#endif
