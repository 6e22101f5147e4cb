#include "turnpike/dynamics.hpp"

#include <cmath>

namespace turnpike {

Vector VectorField::eval(const Vector& y) const {
  if (static_cast<int>(y.size()) != dim_in)
    throw std::invalid_argument("field '" + name + "': state dimension mismatch");
  return evaluator(y);
}

void VectorField::eval_into(const Vector& y, Vector& out) const {
  if (apply) {
    apply(y, out);
  } else {
    out = evaluator(y);
  }
}

VectorField zero_field(int dim) {
  VectorField f;
  f.name = "zero";
  f.dim_in = dim;
  f.dim_out = dim;
  f.evaluator = [dim](const Vector&) { return Vector::Zero(dim).eval(); };
  f.derivative = [dim](const Vector&) { return Matrix::Zero(dim, dim).eval(); };
  f.jacobian_transpose_apply = [](const Vector&, const Vector&, double, Vector&) {};
  f.is_constant = true;
  f.lipschitz_bound = 0.0;
  return f;
}

VectorField constant_field(const Vector& c, const std::string& name) {
  VectorField f;
  f.name = name;
  f.dim_in = static_cast<int>(c.size());
  f.dim_out = f.dim_in;
  f.evaluator = [c](const Vector&) { return c; };
  const int d = f.dim_in;
  f.derivative = [d](const Vector&) { return Matrix::Zero(d, d).eval(); };
  f.jacobian_transpose_apply = [](const Vector&, const Vector&, double, Vector&) {};
  f.is_constant = true;
  f.lipschitz_bound = 0.0;
  return f;
}

double Sigma::operator()(double x) const {
  if (kind == Kind::tanh_) return std::tanh(x);
  return x >= 0.0 ? x : alpha * x;
}

double Sigma::deriv(double x) const {
  if (kind == Kind::tanh_) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  return x >= 0.0 ? 1.0 : alpha;  // derivative at 0 taken as 1
}

Sigma Sigma::leaky_relu(double alpha) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("leaky_relu slope must lie in [0,1)");
  return {Kind::leaky_relu, alpha};
}

double ControlSignal::l2_norm() const {
  return std::sqrt(values.squaredNorm() * dt());
}

double ControlSignal::l2_distance(const Vector& u_ref) const {
  double acc = 0.0;
  for (int k = 0; k < steps; ++k) acc += (values.row(k).transpose() - u_ref).squaredNorm();
  return std::sqrt(acc * dt());
}

ControlSignal ControlSignal::constant(double horizon, int steps, const Vector& value) {
  ControlSignal u;
  u.horizon = horizon;
  u.steps = steps;
  u.values = value.transpose().replicate(steps, 1);
  return u;
}

ControlSignal ControlSignal::zero(double horizon, int steps, int channels) {
  ControlSignal u;
  u.horizon = horizon;
  u.steps = steps;
  u.values = Matrix::Zero(steps, channels);
  return u;
}

Vector evaluate_rhs(const ControlAffineSystem& system, const Vector& y, const Vector& u) {
  if (static_cast<int>(y.size()) != system.state_dim)
    throw std::invalid_argument("evaluate_rhs: state dimension mismatch");
  if (static_cast<int>(u.size()) != system.control_dim)
    throw std::invalid_argument("evaluate_rhs: control dimension mismatch");
  if (system.custom_rhs) return system.custom_rhs(y, u);
  Vector out = system.drift.eval(y);
  for (int j = 0; j < system.control_dim; ++j) {
    if (u(j) != 0.0) out += u(j) * system.control_fields[j].eval(y);
  }
  return out;
}

namespace {

// rhs into `out` without the dimension checks of the public entry point
void rhs_into(const ControlAffineSystem& sys, const Vector& y, const Vector& u, Vector& out,
              Vector& scratch) {
  if (sys.custom_rhs) {
    out = sys.custom_rhs(y, u);
    return;
  }
  sys.drift.eval_into(y, out);
  for (int j = 0; j < sys.control_dim; ++j) {
    if (u(j) == 0.0) continue;
    sys.control_fields[j].eval_into(y, scratch);
    out.noalias() += u(j) * scratch;
  }
}

bool state_admissible(const Vector& y) {
  for (int i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (!std::isfinite(v) || std::abs(v) > kBlowupGuard) return false;
  }
  return true;
}

}  // namespace

Trajectory integrate(const ControlAffineSystem& system, const Vector& y0,
                     const ControlSignal& control, Scheme scheme) {
  if (static_cast<int>(y0.size()) != system.state_dim)
    throw std::invalid_argument("integrate: initial state dimension mismatch");
  if (control.channels() != system.control_dim)
    throw std::invalid_argument("integrate: control dimension mismatch");
  if (control.steps < 1) throw std::invalid_argument("integrate: empty control grid");

  const int K = control.steps;
  const int d = system.state_dim;
  const double dt = control.dt();

  Trajectory traj;
  traj.scheme_tag = scheme;
  traj.times = Vector::LinSpaced(K + 1, 0.0, control.horizon);
  traj.states.resize(K + 1, d);
  traj.states.row(0) = y0.transpose();

  Vector y = y0;
  Vector k1(d), k2(d), k3(d), k4(d), stage(d), scratch(d);
  for (int k = 0; k < K; ++k) {
    const Vector u = control.values.row(k).transpose();
    if (scheme == Scheme::forward_euler) {
      rhs_into(system, y, u, k1, scratch);
      y.noalias() += dt * k1;
    } else {
      rhs_into(system, y, u, k1, scratch);
      stage = y + (0.5 * dt) * k1;
      rhs_into(system, stage, u, k2, scratch);
      stage = y + (0.5 * dt) * k2;
      rhs_into(system, stage, u, k3, scratch);
      stage = y + dt * k3;
      rhs_into(system, stage, u, k4, scratch);
      y.noalias() += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!state_admissible(y))
      throw IntegrationError(k, "integration failure at step " + std::to_string(k) +
                                    ": state non-finite or above blow-up guard");
    traj.states.row(k + 1) = y.transpose();
  }
  return traj;
}

double steady_residual(const ControlAffineSystem& system, const Vector& y, const Vector& u) {
  return evaluate_rhs(system, y, u).norm();
}

namespace {

// w(i,j) = u[i*d + j], b(i) = u[d*d + i]
void unpack_wb(const Vector& u, int d, Matrix& w, Vector& b) {
  w.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) w(i, j) = u(i * d + j);
  b = u.segment(d * d, d);
}

}  // namespace

ControlAffineSystem make_neural_system(bool inside, Sigma sigma, int dim) {
  const int d = dim;
  const int m = d * d + d;
  ControlAffineSystem sys;
  sys.state_dim = d;
  sys.control_dim = m;

  if (!inside) {
    // xdot = w sigma(x) + b: driftless control-affine fields
    sys.form = FormTag::neural_outside;
    sys.zero_drift = true;
    sys.drift = zero_field(d);
    sys.control_fields.reserve(m);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        VectorField f;
        f.name = "w(" + std::to_string(i) + "," + std::to_string(j) + ")";
        f.dim_in = d;
        f.dim_out = d;
        f.evaluator = [d, i, j, sigma](const Vector& y) {
          Vector out = Vector::Zero(d);
          out(i) = sigma(y(j));
          return out;
        };
        f.derivative = [d, i, j, sigma](const Vector& y) {
          Matrix J = Matrix::Zero(d, d);
          J(i, j) = sigma.deriv(y(j));
          return J;
        };
        f.jacobian_transpose_apply = [i, j, sigma](const Vector& y, const Vector& v, double scale,
                                                   Vector& out) {
          out(j) += scale * sigma.deriv(y(j)) * v(i);
        };
        f.lipschitz_bound = 1.0;
        sys.control_fields.push_back(std::move(f));
      }
    }
    for (int i = 0; i < d; ++i) {
      Vector e = Vector::Zero(d);
      e(i) = 1.0;
      sys.control_fields.push_back(constant_field(e, "b(" + std::to_string(i) + ")"));
    }
    return sys;
  }

  // xdot = sigma(w x + b): not control-affine, positively 1-homogeneous fields
  sys.form = FormTag::neural_inside;
  sys.zero_drift = false;
  sys.drift = zero_field(d);
  sys.custom_rhs = [d, sigma](const Vector& y, const Vector& u) {
    Matrix w;
    Vector b;
    unpack_wb(u, d, w, b);
    Vector z = w * y + b;
    for (int i = 0; i < d; ++i) z(i) = sigma(z(i));
    return z;
  };
  sys.custom_state_jacobian = [d, sigma](const Vector& y, const Vector& u) {
    Matrix w;
    Vector b;
    unpack_wb(u, d, w, b);
    const Vector z = w * y + b;
    Matrix J(d, d);
    for (int i = 0; i < d; ++i) J.row(i) = sigma.deriv(z(i)) * w.row(i);
    return J;
  };
  sys.custom_control_jacobian = [d, m, sigma](const Vector& y, const Vector& u) {
    Matrix w;
    Vector b;
    unpack_wb(u, d, w, b);
    const Vector z = w * y + b;
    Matrix J = Matrix::Zero(d, m);
    for (int i = 0; i < d; ++i) {
      const double s = sigma.deriv(z(i));
      for (int j = 0; j < d; ++j) J(i, i * d + j) = s * y(j);
      J(i, d * d + i) = s;
    }
    return J;
  };
  return sys;
}

ControlAffineSystem make_batched_neural_outside(Sigma sigma, int dim, int batch) {
  const int d = dim;
  const int n = batch;
  const int D = d * n;
  const int m = d * d + d;
  ControlAffineSystem sys;
  sys.state_dim = D;
  sys.control_dim = m;
  sys.form = FormTag::neural_outside;
  sys.zero_drift = true;
  sys.drift = zero_field(D);
  sys.control_fields.reserve(m);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      VectorField f;
      f.name = "w(" + std::to_string(i) + "," + std::to_string(j) + ")";
      f.dim_in = D;
      f.dim_out = D;
      f.evaluator = [D, d, n, i, j, sigma](const Vector& y) {
        Vector out = Vector::Zero(D);
        for (int p = 0; p < n; ++p) out(p * d + i) = sigma(y(p * d + j));
        return out;
      };
      f.derivative = [D, d, n, i, j, sigma](const Vector& y) {
        Matrix J = Matrix::Zero(D, D);
        for (int p = 0; p < n; ++p) J(p * d + i, p * d + j) = sigma.deriv(y(p * d + j));
        return J;
      };
      f.jacobian_transpose_apply = [d, n, i, j, sigma](const Vector& y, const Vector& v,
                                                       double scale, Vector& out) {
        for (int p = 0; p < n; ++p)
          out(p * d + j) += scale * sigma.deriv(y(p * d + j)) * v(p * d + i);
      };
      f.lipschitz_bound = 1.0;
      sys.control_fields.push_back(std::move(f));
    }
  }
  for (int i = 0; i < d; ++i) {
    Vector e = Vector::Zero(D);
    for (int p = 0; p < n; ++p) e(p * d + i) = 1.0;
    sys.control_fields.push_back(constant_field(e, "b(" + std::to_string(i) + ")"));
  }
  return sys;
}

ControlAffineSystem make_linear_system(const Matrix& A, const Matrix& B) {
  const int d = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != d || B.rows() != d)
    throw std::invalid_argument("make_linear_system: inconsistent shapes");
  ControlAffineSystem sys;
  sys.state_dim = d;
  sys.control_dim = m;
  const bool zero_A = A.isZero(0.0);
  sys.form = zero_A ? FormTag::driftless : FormTag::affine;
  sys.zero_drift = zero_A;
  if (zero_A) {
    sys.drift = zero_field(d);
  } else {
    VectorField f;
    f.name = "linear_drift";
    f.dim_in = d;
    f.dim_out = d;
    f.evaluator = [A](const Vector& y) { return (A * y).eval(); };
    f.derivative = [A](const Vector&) { return A; };
    f.jacobian_transpose_apply = [A](const Vector&, const Vector& v, double scale, Vector& out) {
      out.noalias() += scale * (A.transpose() * v);
    };
    f.lipschitz_bound = A.norm();
    sys.drift = std::move(f);
  }
  for (int j = 0; j < m; ++j)
    sys.control_fields.push_back(constant_field(B.col(j), "B_col" + std::to_string(j)));
  return sys;
}

}  // namespace turnpike
