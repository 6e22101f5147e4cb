#include "turnpike/pde.hpp"

#include <cmath>

namespace turnpike {

Grid1D::Grid1D(double L, int N, double a, double b)
    : length(L), n_interior(N), omega_lo(a), omega_hi(b) {
  if (L <= 0.0 || N < 1) throw std::invalid_argument("Grid1D: requires L > 0 and N >= 1");
  if (!(0.0 <= a && a < b && b <= L))
    throw std::invalid_argument("Grid1D: requires 0 <= a < b <= L");
  if (omega_indices().empty())
    throw std::invalid_argument("Grid1D: control window contains no interior node");
}

std::vector<int> Grid1D::omega_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < n_interior; ++i) {
    const double x = node(i);
    if (x > omega_lo && x < omega_hi) idx.push_back(i);
  }
  return idx;
}

double Grid1D::lambda1() const {
  const double h = spacing();
  const double s = std::sin(M_PI * h / (2.0 * length));
  return (2.0 / h) * (2.0 / h) * s * s;
}

double Field::l2_norm() const { return std::sqrt(spacing * values.squaredNorm()); }

double Field::h10_norm() const {
  const int n = static_cast<int>(values.size());
  double acc = 0.0;
  double prev = 0.0;  // boundary zero
  for (int i = 0; i < n; ++i) {
    const double gap = values(i) - prev;
    acc += gap * gap;
    prev = values(i);
  }
  acc += prev * prev;  // gap to the right boundary zero
  return std::sqrt(acc / spacing);
}

double ScalarNonlinearity::operator()(double s) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::tanh_: return std::tanh(s);
    default: return s >= 0.0 ? s : alpha * s;
  }
}

double ScalarNonlinearity::deriv(double s) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::tanh_: {
      const double t = std::tanh(s);
      return 1.0 - t * t;
    }
    default: return s >= 0.0 ? 1.0 : alpha;
  }
}

ScalarNonlinearity ScalarNonlinearity::leaky_relu(double alpha) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("leaky_relu slope must lie in [0,1)");
  return {Kind::leaky_relu, alpha};
}

const char* ScalarNonlinearity::name() const {
  switch (kind) {
    case Kind::zero: return "zero";
    case Kind::tanh_: return "tanh";
    default: return "leaky_relu";
  }
}

namespace {

// lap_i = (v_{i-1} - 2 v_i + v_{i+1}) / h^2 with Dirichlet zeros outside
void apply_laplacian(const Vector& v, double h, Vector& out) {
  const int n = static_cast<int>(v.size());
  const double ih2 = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    const double left = i > 0 ? v(i - 1) : 0.0;
    const double right = i + 1 < n ? v(i + 1) : 0.0;
    out(i) = ih2 * (left - 2.0 * v(i) + right);
  }
}

Matrix laplacian_matrix(int n, double h) {
  Matrix L = Matrix::Zero(n, n);
  const double ih2 = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    L(i, i) = -2.0 * ih2;
    if (i > 0) L(i, i - 1) = ih2;
    if (i + 1 < n) L(i, i + 1) = ih2;
  }
  return L;
}

double lipschitz_of(const ScalarNonlinearity& f) {
  return f.kind == ScalarNonlinearity::Kind::zero ? 0.0 : 1.0;
}

}  // namespace

PdeSystem PdeSystem::create(PdeKind kind, const Grid1D& grid, ScalarNonlinearity f,
                            const Vector& u_bar_omega, const Field& y_bar) {
  PdeSystem pde;
  pde.kind = kind;
  pde.grid = grid;
  pde.nonlinearity = f;
  pde.u_bar = u_bar_omega;
  pde.y_bar = y_bar;
  const auto omega = grid.omega_indices();
  if (static_cast<int>(u_bar_omega.size()) != static_cast<int>(omega.size()))
    throw std::invalid_argument("PdeSystem: u_bar size must match the omega node count");
  if (static_cast<int>(y_bar.values.size()) != grid.n_interior)
    throw std::invalid_argument("PdeSystem: y_bar size must match the grid");
  const double res = pde.steady_residual();
  if (res > 1e-8)
    throw std::invalid_argument("PdeSystem: (y_bar, u_bar) violates the steady equation "
                                "(residual " + std::to_string(res) + ")");
  return pde;
}

double PdeSystem::steady_residual() const {
  const int n = grid.n_interior;
  const double h = grid.spacing();
  Vector lap(n);
  apply_laplacian(y_bar.values, h, lap);
  Vector r = -lap;
  for (int i = 0; i < n; ++i) r(i) += nonlinearity(y_bar.values(i));
  const auto omega = grid.omega_indices();
  for (size_t j = 0; j < omega.size(); ++j) r(omega[j]) -= u_bar(j);
  Field rf{r, h};
  return rf.l2_norm();
}

ControlAffineSystem semidiscretize(const PdeSystem& pde) {
  const int n = pde.grid.n_interior;
  const double h = pde.grid.spacing();
  const ScalarNonlinearity f = pde.nonlinearity;
  const auto omega = pde.grid.omega_indices();
  const int m = static_cast<int>(omega.size());

  ControlAffineSystem sys;
  sys.control_dim = m;
  sys.form = FormTag::affine;
  sys.zero_drift = false;

  if (pde.kind == PdeKind::heat) {
    sys.state_dim = n;
    VectorField drift;
    drift.name = "heat_drift";
    drift.dim_in = n;
    drift.dim_out = n;
    drift.apply = [n, h, f](const Vector& y, Vector& out) {
      apply_laplacian(y, h, out);
      for (int i = 0; i < n; ++i) out(i) -= f(y(i));
    };
    drift.evaluator = [n, h, f](const Vector& y) {
      Vector out(n);
      apply_laplacian(y, h, out);
      for (int i = 0; i < n; ++i) out(i) -= f(y(i));
      return out;
    };
    const Matrix lap = laplacian_matrix(n, h);
    drift.derivative = [lap, n, f](const Vector& y) {
      Matrix J = lap;
      for (int i = 0; i < n; ++i) J(i, i) -= f.deriv(y(i));
      return J;
    };
    drift.jacobian_transpose_apply = [n, h, f](const Vector& y, const Vector& v, double scale,
                                               Vector& out) {
      // symmetric operator: J^T v = Lap v - f'(y) . v
      const double ih2 = scale / (h * h);
      for (int i = 0; i < n; ++i) {
        const double left = i > 0 ? v(i - 1) : 0.0;
        const double right = i + 1 < n ? v(i + 1) : 0.0;
        out(i) += ih2 * (left - 2.0 * v(i) + right) - scale * f.deriv(y(i)) * v(i);
      }
    };
    drift.lipschitz_bound = 4.0 / (h * h) + lipschitz_of(f);
    sys.drift = std::move(drift);
    for (int j = 0; j < m; ++j) {
      Vector e = Vector::Zero(n);
      e(omega[j]) = 1.0;
      sys.control_fields.push_back(constant_field(e, "omega_node_" + std::to_string(omega[j])));
    }
    return sys;
  }

  // wave: state = [position; velocity]
  sys.state_dim = 2 * n;
  VectorField drift;
  drift.name = "wave_drift";
  drift.dim_in = 2 * n;
  drift.dim_out = 2 * n;
  drift.apply = [n, h, f](const Vector& s, Vector& out) {
    const double ih2 = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) out(i) = s(n + i);
    for (int i = 0; i < n; ++i) {
      const double left = i > 0 ? s(i - 1) : 0.0;
      const double right = i + 1 < n ? s(i + 1) : 0.0;
      out(n + i) = ih2 * (left - 2.0 * s(i) + right) - f(s(i));
    }
  };
  drift.evaluator = [n, h, f](const Vector& s) {
    Vector out(2 * n);
    const double ih2 = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) out(i) = s(n + i);
    for (int i = 0; i < n; ++i) {
      const double left = i > 0 ? s(i - 1) : 0.0;
      const double right = i + 1 < n ? s(i + 1) : 0.0;
      out(n + i) = ih2 * (left - 2.0 * s(i) + right) - f(s(i));
    }
    return out;
  };
  const Matrix lap = laplacian_matrix(n, h);
  drift.derivative = [lap, n, f](const Vector& s) {
    Matrix J = Matrix::Zero(2 * n, 2 * n);
    J.topRightCorner(n, n).setIdentity();
    J.bottomLeftCorner(n, n) = lap;
    for (int i = 0; i < n; ++i) J(n + i, i) -= f.deriv(s(i));
    return J;
  };
  drift.jacobian_transpose_apply = [n, h, f](const Vector& s, const Vector& v, double scale,
                                             Vector& out) {
    // J = [[0, I], [L(y), 0]] with symmetric L => J^T [a; b] = [L b; a]
    const double ih2 = scale / (h * h);
    for (int i = 0; i < n; ++i) {
      const double left = i > 0 ? v(n + i - 1) : 0.0;
      const double right = i + 1 < n ? v(n + i + 1) : 0.0;
      out(i) += ih2 * (left - 2.0 * v(n + i) + right) - scale * f.deriv(s(i)) * v(n + i);
      out(n + i) += scale * v(i);
    }
  };
  drift.lipschitz_bound = 4.0 / (h * h) + lipschitz_of(f) + 1.0;
  sys.drift = std::move(drift);
  for (int j = 0; j < m; ++j) {
    Vector e = Vector::Zero(2 * n);
    e(n + omega[j]) = 1.0;
    sys.control_fields.push_back(constant_field(e, "omega_node_" + std::to_string(omega[j])));
  }
  return sys;
}

Field solve_steady(const Grid1D& grid, const ScalarNonlinearity& f, const Vector& u_bar_omega) {
  const int n = grid.n_interior;
  const double h = grid.spacing();
  const auto omega = grid.omega_indices();
  if (static_cast<int>(u_bar_omega.size()) != static_cast<int>(omega.size()))
    throw std::invalid_argument("solve_steady: u_bar size must match the omega node count");

  auto residual = [&](const Vector& y) {
    Vector r(n);
    apply_laplacian(y, h, r);
    r = -r;
    for (int i = 0; i < n; ++i) r(i) += f(y(i));
    for (size_t j = 0; j < omega.size(); ++j) r(omega[j]) -= u_bar_omega(j);
    return r;
  };
  auto l2 = [&](const Vector& v) { return std::sqrt(h * v.squaredNorm()); };

  const Matrix neg_lap = -laplacian_matrix(n, h);
  Vector y = Vector::Zero(n);
  Vector r = residual(y);
  double rn = l2(r);
  for (int it = 0; it < 100; ++it) {
    if (rn <= 1e-10) return Field{y, h};
    Matrix J = neg_lap;
    for (int i = 0; i < n; ++i) J(i, i) += f.deriv(y(i));
    const Vector delta = J.partialPivLu().solve(-r);
    double step = 1.0;
    for (int halvings = 0; halvings < 30; ++halvings) {
      const Vector cand = y + step * delta;
      const Vector rc = residual(cand);
      const double rcn = l2(rc);
      if (rcn < rn) {
        y = cand;
        r = rc;
        rn = rcn;
        break;
      }
      step *= 0.5;
      if (halvings == 29) {
        y = cand;
        r = rc;
        rn = rcn;
      }
    }
  }
  if (rn <= 1e-10) return Field{y, h};
  throw std::runtime_error("solve_steady: no convergence in 100 iterations (residual " +
                           std::to_string(rn) + ")");
}

namespace {

double h10_sq(const Vector& w, double h) {
  const int n = static_cast<int>(w.size());
  double acc = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    const double gap = w(i) - prev;
    acc += gap * gap;
    prev = w(i);
  }
  acc += prev * prev;
  return acc / h;
}

// gradient of h10_sq: -2 h Lap w
void add_h10_sq_grad(const Vector& w, double h, double scale, Vector& out) {
  const int n = static_cast<int>(w.size());
  for (int i = 0; i < n; ++i) {
    const double left = i > 0 ? w(i - 1) : 0.0;
    const double right = i + 1 < n ? w(i + 1) : 0.0;
    out(i) += scale * (-2.0 / h) * (left - 2.0 * w(i) + right);
  }
}

}  // namespace

CostSpec pde_cost_spec(const PdeSystem& pde, const FinalCost& final_cost, double state_weight,
                       double control_weight) {
  const int n = pde.grid.n_interior;
  const double h = pde.grid.spacing();
  CostSpec cost;
  cost.final_cost = final_cost;
  cost.state_weight = state_weight;
  cost.control_weight = control_weight * h;  // l2(omega) norm of the control
  cost.u_bar = pde.u_bar;

  if (pde.kind == PdeKind::heat) {
    cost.y_bar = pde.y_bar.values;
    const Vector ybar = pde.y_bar.values;
    const double sw = state_weight;
    cost.state_term = [ybar, h, sw](const Vector& y) {
      return sw * h * (y - ybar).squaredNorm();
    };
    cost.state_term_grad = [ybar, h, sw](const Vector& y) {
      return (2.0 * sw * h * (y - ybar)).eval();
    };
    cost.state_term_tag = "pde_l2";
    return cost;
  }

  Vector ybar_full = Vector::Zero(2 * n);
  ybar_full.head(n) = pde.y_bar.values;
  cost.y_bar = ybar_full;
  const Vector ybar = pde.y_bar.values;
  const double sw = state_weight;
  cost.state_term = [ybar, h, n, sw](const Vector& s) {
    const Vector dy = s.head(n) - ybar;
    return sw * (h10_sq(dy, h) + h * s.tail(n).squaredNorm());
  };
  cost.state_term_grad = [ybar, h, n, sw](const Vector& s) {
    Vector g = Vector::Zero(2 * n);
    const Vector dy = s.head(n) - ybar;
    add_h10_sq_grad(dy, h, sw, g);
    g.tail(n) = 2.0 * sw * h * s.tail(n);
    return g;
  };
  cost.state_term_tag = "pde_energy";
  return cost;
}

double pde_state_distance(const PdeSystem& pde, const Vector& state) {
  const int n = pde.grid.n_interior;
  const double h = pde.grid.spacing();
  if (pde.kind == PdeKind::heat) {
    return std::sqrt(h * (state - pde.y_bar.values).squaredNorm());
  }
  const Vector dy = state.head(n) - pde.y_bar.values;
  return std::sqrt(h10_sq(dy, h) + h * state.tail(n).squaredNorm());
}

double wave_min_time(const Grid1D& grid) {
  return 2.0 * std::max(grid.omega_lo, grid.length - grid.omega_hi);
}

int suggested_steps_per_unit_time(const PdeSystem& pde) {
  const double h = pde.grid.spacing();
  if (pde.kind == PdeKind::heat) {
    // rk4 real-axis stability limit ~2.785 on the stiffest Laplacian mode
    const double lam = 4.0 / (h * h) + lipschitz_of(pde.nonlinearity);
    return static_cast<int>(std::ceil(1.25 * lam / 2.785));
  }
  return static_cast<int>(std::ceil(2.0 / h));  // dt <= 0.5 h
}

Vector wave_pack(const Field& position, const Field& velocity) {
  Vector s(position.values.size() + velocity.values.size());
  s.head(position.values.size()) = position.values;
  s.tail(velocity.values.size()) = velocity.values;
  return s;
}

}  // namespace turnpike
