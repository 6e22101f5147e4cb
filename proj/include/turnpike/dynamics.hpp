#ifndef TURNPIKE_DYNAMICS_HPP
#define TURNPIKE_DYNAMICS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "turnpike/types.hpp"

namespace turnpike {

/// A Lipschitz vector field with optional analytic Jacobian.
///
/// `apply`/`jacobian_transpose_apply` are optional allocation-free fast
/// paths (used on large semidiscretized systems); when present they must
/// agree with `evaluator`/`derivative`.
struct VectorField {
  std::string name;
  int dim_in = 0;
  int dim_out = 0;
  std::function<Vector(const Vector&)> evaluator;
  std::function<Matrix(const Vector&)> derivative;  // empty when unavailable
  std::optional<double> lipschitz_bound;

  // out = evaluator(y), no allocation
  std::function<void(const Vector&, Vector&)> apply;
  // out += scale * derivative(y)^T * v, no allocation
  std::function<void(const Vector&, const Vector&, double, Vector&)> jacobian_transpose_apply;
  // constant fields have zero Jacobian; lets the adjoint skip them
  bool is_constant = false;

  bool has_derivative() const { return static_cast<bool>(derivative); }
  Vector eval(const Vector& y) const;
  void eval_into(const Vector& y, Vector& out) const;
};

/// Constant-zero field of the given dimension.
VectorField zero_field(int dim);
/// Constant field returning `c`.
VectorField constant_field(const Vector& c, const std::string& name = "const");

enum class FormTag { affine, driftless, neural_inside, neural_outside, general };

inline const char* to_string(FormTag f) {
  switch (f) {
    case FormTag::affine: return "affine";
    case FormTag::driftless: return "driftless";
    case FormTag::neural_inside: return "neural_inside";
    case FormTag::neural_outside: return "neural_outside";
    default: return "general";
  }
}

/// Scalar nonlinearity applied componentwise; all variants satisfy
/// sigma(0) = 0. leaky_relu(x) = max(alpha*x, x); its derivative at 0 is
/// taken as 1 (the upper branch), which the adjoint relies on.
struct Sigma {
  enum class Kind { tanh_, leaky_relu };
  Kind kind = Kind::tanh_;
  double alpha = 0.0;  // leaky_relu slope on the negative branch, in [0,1)

  double operator()(double x) const;
  double deriv(double x) const;

  static Sigma tanh() { return {Kind::tanh_, 0.0}; }
  static Sigma leaky_relu(double alpha);
};

/// State equation rhs f(y,u). For affine/driftless/neural_outside forms the
/// rhs is drift(y) + sum_j u_j * control_fields[j](y); neural_inside keeps a
/// non-affine kernel sigma(w y + b) with its own Jacobians.
struct ControlAffineSystem {
  int state_dim = 0;
  int control_dim = 0;
  FormTag form = FormTag::affine;
  VectorField drift;
  std::vector<VectorField> control_fields;

  // Non-affine kernel (neural_inside); when set it overrides the affine sum.
  std::function<Vector(const Vector&, const Vector&)> custom_rhs;
  std::function<Matrix(const Vector&, const Vector&)> custom_state_jacobian;    // d x d
  std::function<Matrix(const Vector&, const Vector&)> custom_control_jacobian;  // d x m

  /// True when the uncontrolled field is identically zero (driftless and
  /// neural_outside forms).
  bool zero_drift = false;

  bool is_affine() const { return !custom_rhs; }
};

/// Piecewise-constant control on a uniform grid over [0, horizon]:
/// value row k applies on [k*dt, (k+1)*dt).
struct ControlSignal {
  double horizon = 0.0;
  int steps = 0;
  Matrix values;  // steps x m

  double dt() const { return horizon / steps; }
  int channels() const { return static_cast<int>(values.cols()); }

  /// sqrt(sum_k |u_k|^2 dt)
  double l2_norm() const;
  /// sqrt(sum_k |u_k - u_ref|^2 dt)
  double l2_distance(const Vector& u_ref) const;

  static ControlSignal constant(double horizon, int steps, const Vector& value);
  static ControlSignal zero(double horizon, int steps, int channels);
};

/// Output of the integrator: states row k is the state at times[k].
struct Trajectory {
  Vector times;   // steps+1 nodes, uniform
  Matrix states;  // (steps+1) x d
  Scheme scheme_tag = Scheme::rk4;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  double dt() const { return times(1) - times(0); }
  Vector state_at(int k) const { return states.row(k).transpose(); }
  Vector final_state() const { return states.row(states.rows() - 1).transpose(); }
};

/// f(y, u); throws std::invalid_argument on dimension mismatch.
Vector evaluate_rhs(const ControlAffineSystem& system, const Vector& y, const Vector& u);

/// Integrate with the piecewise-constant control; the control grid defines
/// the trajectory grid. Deterministic for fixed inputs. Throws
/// IntegrationError (with the offending step) on blow-up.
Trajectory integrate(const ControlAffineSystem& system, const Vector& y0,
                     const ControlSignal& control, Scheme scheme = Scheme::rk4);

/// ||f(y,u)||; zero certifies (u, y) as a steady running target.
double steady_residual(const ControlAffineSystem& system, const Vector& y, const Vector& u);

/// Networks with either placement of the nonlinearity:
///   outside: xdot = w sigma(x) + b   (driftless control-affine)
///   inside:  xdot = sigma(w x + b)   (positively 1-homogeneous, tagged neural_inside)
/// Control layout: u = [w row-major (d*d entries), b (d entries)], m = d^2 + d.
ControlAffineSystem make_neural_system(bool inside, Sigma sigma, int dim);

/// Stacked copies of the outside-form network sharing one control: block i
/// of the state evolves as w sigma(x_i) + b. Used for batched training runs.
ControlAffineSystem make_batched_neural_outside(Sigma sigma, int dim, int batch);

/// Linear system ydot = A y + B u as a ControlAffineSystem (driftless when
/// A == 0).
ControlAffineSystem make_linear_system(const Matrix& A, const Matrix& B);

}  // namespace turnpike

#endif
