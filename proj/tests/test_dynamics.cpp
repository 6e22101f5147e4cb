#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "turnpike/dynamics.hpp"

using namespace turnpike;

namespace {

// random affine system with tanh fields vanishing at the origin:
// f_j(y) = V_j tanh(W_j y), so (ybar, ubar) = (0, 0) is a steady pair
ControlAffineSystem random_tanh_system(std::mt19937_64& rng, int d, int m, bool with_drift) {
  std::normal_distribution<double> normal(0.0, 0.7);
  auto tanh_field = [&](const std::string& name) {
    Matrix V(d, d), W(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        V(i, j) = normal(rng);
        W(i, j) = normal(rng);
      }
    VectorField f;
    f.name = name;
    f.dim_in = d;
    f.dim_out = d;
    f.evaluator = [V, W, d](const Vector& y) {
      Vector z = W * y;
      for (int i = 0; i < d; ++i) z(i) = std::tanh(z(i));
      return (V * z).eval();
    };
    f.derivative = [V, W, d](const Vector& y) {
      Vector z = W * y;
      Matrix D = Matrix::Zero(d, d);
      for (int i = 0; i < d; ++i) D(i, i) = 1.0 - std::tanh(z(i)) * std::tanh(z(i));
      return (V * D * W).eval();
    };
    f.lipschitz_bound = V.norm() * W.norm();
    return f;
  };

  ControlAffineSystem sys;
  sys.state_dim = d;
  sys.control_dim = m;
  sys.form = with_drift ? FormTag::affine : FormTag::driftless;
  sys.zero_drift = !with_drift;
  sys.drift = with_drift ? tanh_field("drift") : zero_field(d);
  for (int j = 0; j < m; ++j) sys.control_fields.push_back(tanh_field("f" + std::to_string(j)));
  return sys;
}

ControlSignal random_control(std::mt19937_64& rng, double T, int steps, int m, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ControlSignal u = ControlSignal::zero(T, steps, m);
  for (int k = 0; k < steps; ++k)
    for (int j = 0; j < m; ++j) u.values(k, j) = normal(rng);
  return u;
}

}  // namespace

TEST_CASE("evaluate_rhs on the basic forms") {
  // driftless, u = 0: zero vector for any y
  ControlAffineSystem driftless = make_neural_system(false, Sigma::tanh(), 2);
  Vector y(2);
  y << 0.3, -1.2;
  CHECK(evaluate_rhs(driftless, y, Vector::Zero(6)).norm() == 0.0);

  // neural_outside with w = 0, b = (1, 0): constant field
  Vector u = Vector::Zero(6);
  u(4) = 1.0;  // b_0
  Vector rhs = evaluate_rhs(driftless, y, u);
  CHECK(rhs(0) == doctest::Approx(1.0));
  CHECK(rhs(1) == doctest::Approx(0.0));

  // f0(y) = -y, one additive channel: f(2, 0.5) = -2 + 0.5 = -1.5
  Matrix A = -Matrix::Identity(1, 1);
  Matrix B = Matrix::Ones(1, 1);
  ControlAffineSystem scalar = make_linear_system(A, B);
  Vector y1(1), u1(1);
  y1 << 2.0;
  u1 << 0.5;
  CHECK(evaluate_rhs(scalar, y1, u1)(0) == doctest::Approx(-1.5));

  CHECK_THROWS_AS(evaluate_rhs(scalar, y, u1), std::invalid_argument);
}

TEST_CASE("integrate: exact cases and failure modes") {
  // zero field: constant trajectory
  ControlAffineSystem zero_sys = make_linear_system(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  Vector p(2);
  p << 0.7, -0.4;
  Trajectory traj = integrate(zero_sys, p, ControlSignal::zero(1.0, 10, 2));
  for (int k = 0; k <= 10; ++k) CHECK((traj.state_at(k) - p).norm() == 0.0);
  CHECK(traj.state_at(0).isApprox(p, 0.0));

  // ydot = u, u = 1: forward Euler is exact for constant rhs
  ControlAffineSystem integrator = make_linear_system(Matrix::Zero(1, 1), Matrix::Ones(1, 1));
  Vector one = Vector::Ones(1);
  for (int K : {7, 40}) {
    Trajectory t2 = integrate(integrator, Vector::Zero(1),
                              ControlSignal::constant(1.0, K, one), Scheme::forward_euler);
    CHECK(t2.final_state()(0) == doctest::Approx(1.0).epsilon(1e-14));
  }

  // ydot = -y: rk4 at K=100 hits e^{-1} to 1e-6 (closed-form oracle)
  ControlAffineSystem decay = make_linear_system(-Matrix::Identity(1, 1), Matrix::Ones(1, 1));
  Trajectory t3 = integrate(decay, Vector::Ones(1), ControlSignal::zero(1.0, 100, 1), Scheme::rk4);
  CHECK(t3.final_state()(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  CHECK(std::abs(t3.final_state()(0) - 0.367879) < 1e-6);

  // blow-up guard reports the offending step
  ControlAffineSystem unstable = make_linear_system(50.0 * Matrix::Identity(1, 1), Matrix::Ones(1, 1));
  CHECK_THROWS_AS(integrate(unstable, Vector::Ones(1), ControlSignal::zero(20.0, 200, 1)),
                  IntegrationError);
}

TEST_CASE("integrator order: error halves (euler) / shrinks 16x (rk4) per K doubling") {
  ControlAffineSystem decay = make_linear_system(-Matrix::Identity(1, 1), Matrix::Ones(1, 1));
  const double exact = std::exp(-1.0);
  for (Scheme scheme : {Scheme::forward_euler, Scheme::rk4}) {
    std::vector<double> errors;
    for (int K : {50, 100, 200, 400}) {
      Trajectory t = integrate(decay, Vector::Ones(1), ControlSignal::zero(1.0, K, 1), scheme);
      errors.push_back(std::abs(t.final_state()(0) - exact));
    }
    for (size_t i = 0; i + 1 < errors.size(); ++i) {
      const double ratio = errors[i] / errors[i + 1];
      if (scheme == Scheme::forward_euler) {
        CHECK(ratio > 1.8);
        CHECK(ratio < 2.2);
      } else {
        CHECK(ratio > 13.0);
        CHECK(ratio < 19.0);
      }
    }
  }
}

TEST_CASE("steady_residual certifies running targets") {
  // f0(y) = -y + 1 has the uncontrolled root y = 1
  VectorField f;
  f.name = "affine_drift";
  f.dim_in = 1;
  f.dim_out = 1;
  f.evaluator = [](const Vector& y) { return Vector::Constant(1, -y(0) + 1.0); };
  f.derivative = [](const Vector&) { return (-Matrix::Identity(1, 1)).eval(); };
  ControlAffineSystem sys;
  sys.state_dim = 1;
  sys.control_dim = 1;
  sys.drift = f;
  sys.control_fields.push_back(constant_field(Vector::Ones(1)));
  CHECK(steady_residual(sys, Vector::Ones(1), Vector::Zero(1)) == doctest::Approx(0.0));

  // driftless: every point is a free steady state
  ControlAffineSystem driftless = make_neural_system(false, Sigma::tanh(), 3);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Vector any(3);
  for (int i = 0; i < 3; ++i) any(i) = normal(rng);
  CHECK(steady_residual(driftless, any, Vector::Zero(12)) == 0.0);

  // f0(y) = -y at y = 1: residual 1
  ControlAffineSystem decay = make_linear_system(-Matrix::Identity(1, 1), Matrix::Ones(1, 1));
  CHECK(steady_residual(decay, Vector::Ones(1), Vector::Zero(1)) == doctest::Approx(1.0));
}

TEST_CASE("steady point is fixed under both schemes") {
  ControlAffineSystem sys = make_linear_system(-Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  Vector ybar(2), ubar(2);
  ybar << 0.5, -1.5;
  ubar << 0.5, -1.5;  // -y + u = 0
  REQUIRE(steady_residual(sys, ybar, ubar) == doctest::Approx(0.0));
  for (Scheme scheme : {Scheme::forward_euler, Scheme::rk4}) {
    Trajectory t = integrate(sys, ybar, ControlSignal::constant(5.0, 500, ubar), scheme);
    double worst = 0.0;
    for (int k = 0; k <= 500; ++k) worst = std::max(worst, (t.state_at(k) - ybar).norm());
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("make_neural_system: componentwise forms") {
  // outside, tanh, w = 0, b = 0: rhs == 0
  ControlAffineSystem outside = make_neural_system(false, Sigma::tanh(), 2);
  Vector y(2);
  y << 0.4, 2.0;
  CHECK(evaluate_rhs(outside, y, Vector::Zero(6)).norm() == 0.0);

  // outside, leaky_relu(0), w = I, b = 0, y = (-1, 2) -> (0, 2)
  ControlAffineSystem relu = make_neural_system(false, Sigma::leaky_relu(0.0), 2);
  Vector u = Vector::Zero(6);
  u(0) = 1.0;  // w(0,0)
  u(3) = 1.0;  // w(1,1)
  Vector yy(2);
  yy << -1.0, 2.0;
  Vector rhs = evaluate_rhs(relu, yy, u);
  CHECK(rhs(0) == doctest::Approx(0.0));
  CHECK(rhs(1) == doctest::Approx(2.0));

  // inside, tanh, w = I, b = 0, y = 0 -> 0
  ControlAffineSystem inside = make_neural_system(true, Sigma::tanh(), 2);
  CHECK(inside.form == FormTag::neural_inside);
  CHECK(evaluate_rhs(inside, Vector::Zero(2), u).norm() == 0.0);

  CHECK_THROWS_AS(Sigma::leaky_relu(1.0), std::invalid_argument);
  CHECK_THROWS_AS(Sigma::leaky_relu(-0.1), std::invalid_argument);
}

TEST_CASE("field derivatives match central finite differences") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  auto check_field = [&](const VectorField& f) {
    for (int trial = 0; trial < 5; ++trial) {
      Vector y(f.dim_in);
      for (int i = 0; i < f.dim_in; ++i) y(i) = normal(rng);
      const Matrix J = f.derivative(y);
      const double eps = 1e-6;
      for (int j = 0; j < f.dim_in; ++j) {
        Vector yp = y, ym = y;
        yp(j) += eps;
        ym(j) -= eps;
        const Vector col = (f.evaluator(yp) - f.evaluator(ym)) / (2.0 * eps);
        const double denom = std::max(1.0, J.col(j).norm());
        CHECK((J.col(j) - col).norm() / denom <= 1e-5);
      }
    }
  };

  ControlAffineSystem sys = random_tanh_system(rng, 3, 2, true);
  check_field(sys.drift);
  for (const auto& f : sys.control_fields) check_field(f);
  ControlAffineSystem outside = make_neural_system(false, Sigma::tanh(), 2);
  for (const auto& f : outside.control_fields) check_field(f);
}

TEST_CASE("determinism: identical inputs give bit-identical trajectories") {
  std::mt19937_64 rng(3);
  ControlAffineSystem sys = random_tanh_system(rng, 3, 2, true);
  ControlSignal u = random_control(rng, 2.0, 150, 2, 0.5);
  Vector y0(3);
  y0 << 0.2, -0.1, 0.9;
  Trajectory a = integrate(sys, y0, u);
  Trajectory b = integrate(sys, y0, u);
  CHECK(std::memcmp(a.states.data(), b.states.data(), sizeof(double) * a.states.size()) == 0);
}

TEST_CASE("deviation ratio admits an a*exp(b*||u||) envelope on held-out systems") {
  // ratio ||y - ybar||_inf / (|y0 - ybar| + ||u||_{L2} + ||y - ybar||_{L2})
  // with (ybar, ubar) = (0, 0); fit (a, b) on half the samples, check the
  // other half against the 1.5x inflated envelope.
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  const int n_samples = 120;
  const double T = 3.0;
  const int K = 150;

  std::vector<double> unorm(n_samples), ratio(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    ControlAffineSystem sys = random_tanh_system(rng, 2, 2, true);
    // enforce f0(0) = 0 by construction (tanh fields vanish at 0)
    ControlSignal u = random_control(rng, T, K, 2, 0.4);
    Vector y0(2);
    for (int i = 0; i < 2; ++i) y0(i) = 0.5 * normal(rng);
    Trajectory traj = integrate(sys, y0, u);

    double sup = 0.0, l2sq = 0.0;
    for (int k = 0; k <= K; ++k) {
      const double dist = traj.state_at(k).norm();
      sup = std::max(sup, dist);
      if (k < K) l2sq += dist * dist * (T / K);
    }
    const double denom = y0.norm() + u.l2_norm() + std::sqrt(l2sq);
    unorm[s] = u.l2_norm();
    ratio[s] = denom > 0.0 ? sup / denom : 0.0;
  }

  // log-linear fit on the training half, then scale a to cover the train set
  const int half = n_samples / 2;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int s = 0; s < half; ++s) {
    sx += unorm[s];
    sy += std::log(ratio[s]);
    sxx += unorm[s] * unorm[s];
    sxy += unorm[s] * std::log(ratio[s]);
  }
  const double b = (half * sxy - sx * sy) / (half * sxx - sx * sx);
  double log_a = (sy - b * sx) / half;
  for (int s = 0; s < half; ++s)
    log_a = std::max(log_a, std::log(ratio[s]) - b * unorm[s]);

  for (int s = half; s < n_samples; ++s) {
    const double bound = 1.5 * std::exp(log_a + b * unorm[s]);
    CHECK(ratio[s] <= bound);
  }
}

TEST_CASE("control L2 norm vanishes exactly iff all values are zero") {
  ControlSignal zero = ControlSignal::zero(2.0, 30, 3);
  CHECK(zero.l2_norm() == 0.0);
  zero.values(17, 1) = 1e-30;
  CHECK(zero.l2_norm() > 0.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  ControlSignal u = ControlSignal::zero(2.0, 30, 3);
  for (int k = 0; k < 30; ++k)
    for (int j = 0; j < 3; ++j) u.values(k, j) = normal(rng);
  CHECK(u.l2_norm() > 0.0);
  CHECK(u.l2_norm() == doctest::Approx(std::sqrt(u.values.squaredNorm() * (2.0 / 30.0))));
}
