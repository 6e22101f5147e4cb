#include "turnpike/steering.hpp"

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

namespace turnpike {

SteerOptions::SteerOptions() {
  penalty_schedule = {1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};
  solver.max_iters = 400;
  solver.tolerance = 1e-9;
  solver.restarts = 1;
}

SteeringResult steer(const ControlAffineSystem& system, const Vector& y0, const Vector& y1,
                     double T0, int steps, const SteerOptions& opts) {
  if (T0 <= 0.0) throw std::invalid_argument("steer: T0 must be positive");
  FixedEndpointOptions fopts;
  fopts.penalty_schedule = opts.penalty_schedule;
  fopts.solver = opts.solver;
  fopts.u_bar = opts.u_bar.size() == system.control_dim ? opts.u_bar
                                                        : Vector::Zero(system.control_dim).eval();

  Solution sol = solve_fixed_endpoint(system, y0, y1, 0.0, T0, steps,
                                      EndpointMode::control_norm_only, fopts);
  const double threshold = opts.threshold ? *opts.threshold : 1e-6 * (1.0 + y1.norm());

  SteeringResult res;
  res.control = std::move(sol.control);
  res.terminal_error = sol.terminal_mismatch;
  res.control_norm = res.control.l2_distance(fopts.u_bar);
  res.achieved = res.terminal_error <= threshold;
  return res;
}

ControlSignal gramian_steer(const Matrix& A, const Matrix& B, const Vector& y0,
                            const Vector& y1, double T0, int steps) {
  const int d = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != d || B.rows() != d || y0.size() != d || y1.size() != d)
    throw std::invalid_argument("gramian_steer: inconsistent shapes");
  if (T0 <= 0.0 || steps < 1) throw std::invalid_argument("gramian_steer: bad grid");

  const double dt = T0 / steps;

  // W = sum_k Phi_k B B^T Phi_k^T dt with Phi_k = e^{A (T0 - t_mid_k)}
  Matrix W = Matrix::Zero(d, d);
  std::vector<Matrix> phiTB(steps);  // B^T Phi_k^T = (Phi_k B)^T
  for (int k = 0; k < steps; ++k) {
    const double t_mid = (k + 0.5) * dt;
    const Matrix phi = (A * (T0 - t_mid)).exp();
    const Matrix phiB = phi * B;
    W.noalias() += phiB * phiB.transpose() * dt;
    phiTB[k] = phiB.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(W);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > 1e12)
    throw std::runtime_error("gramian_steer: Gramian condition number above 1e12; "
                             "system not controllable in practice on this horizon");

  const Vector target_gap = y1 - (A * T0).exp() * y0;
  const Vector eta = es.eigenvectors() *
                     (es.eigenvalues().cwiseInverse().asDiagonal() *
                      (es.eigenvectors().transpose() * target_gap));

  ControlSignal u;
  u.horizon = T0;
  u.steps = steps;
  u.values.resize(steps, m);
  for (int k = 0; k < steps; ++k) u.values.row(k) = (phiTB[k] * eta).transpose();
  return u;
}

std::pair<CostEstimateProbe, CostEstimateProbe> probe_cost_estimate(
    const ControlAffineSystem& system, const Vector& y_bar, const Vector& u_bar, double radius,
    double T0, int n_samples, unsigned long seed, const ProbeOptions& opts) {
  if (steady_residual(system, y_bar, u_bar) > 1e-8)
    throw std::invalid_argument("probe_cost_estimate: (y_bar, u_bar) is not a steady pair");
  if (radius < 0.0 || n_samples < 1)
    throw std::invalid_argument("probe_cost_estimate: bad radius or sample count");

  const int d = system.state_dim;
  SteerOptions steer_opts = opts.steer;
  steer_opts.u_bar = u_bar;

  auto run_direction = [&](ProbeDirection dir, unsigned long dir_seed) {
    CostEstimateProbe probe;
    probe.radius = radius;
    probe.samples = n_samples;
    probe.direction = dir;
    std::mt19937_64 rng(dir_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < n_samples; ++s) {
      Vector dirv(d);
      for (int i = 0; i < d; ++i) dirv(i) = normal(rng);
      const double nrm = dirv.norm();
      const double u01 = unit(rng);
      Vector endpoint = y_bar;
      if (nrm > 0.0) endpoint += radius * std::pow(u01, 1.0 / d) * (dirv / nrm);

      const double dist = (endpoint - y_bar).norm();
      if (dist <= 1e-12) {
        ++probe.degenerate;  // 0/0 ratio excluded
        continue;
      }
      SteeringResult res = dir == ProbeDirection::into_steady
                               ? steer(system, endpoint, y_bar, T0, opts.steps, steer_opts)
                               : steer(system, y_bar, endpoint, T0, opts.steps, steer_opts);
      if (!res.achieved) {
        ++probe.failures;
        continue;
      }
      probe.ratios.push_back(res.control_norm / dist);
    }
    if (!probe.ratios.empty()) {
      double mx = 0.0;
      for (double r : probe.ratios) mx = std::max(mx, r);
      probe.estimated_C = mx;
    }
    probe.unreliable = probe.failures > 0.2 * n_samples;
    return probe;
  };

  return {run_direction(ProbeDirection::into_steady, seed),
          run_direction(ProbeDirection::out_of_steady, seed + 0x9e3779b97f4a7c15ULL)};
}

ControlSignal steer_and_hold(const ControlAffineSystem& system, const Vector& y0,
                             const Vector& y_bar, const Vector& u_bar, double T0, double T,
                             int steps, const SteerOptions& opts) {
  if (T < T0) throw std::invalid_argument("steer_and_hold: requires T >= T0");
  const double dt = T / steps;
  const int k0 = static_cast<int>(std::llround(T0 / dt));
  if (k0 < 1 || std::abs(k0 * dt - T0) > 1e-9 * std::max(1.0, T0))
    throw std::invalid_argument("steer_and_hold: T0 must align with the control grid");

  SteerOptions sopts = opts;
  sopts.u_bar = u_bar;
  SteeringResult first = steer(system, y0, y_bar, T0, k0, sopts);
  if (!first.achieved)
    throw std::runtime_error("steer_and_hold: steering to the steady state failed (terminal error " +
                             std::to_string(first.terminal_error) + ")");

  ControlSignal u = ControlSignal::constant(T, steps, u_bar);
  u.values.topRows(k0) = first.control.values;
  return u;
}

ControlSignal steer_hold_steer(const ControlAffineSystem& system, const Vector& y_a,
                               const Vector& y_b, const Vector& y_bar, const Vector& u_bar,
                               double T0, double tau1, double tau2, int steps,
                               const SteerOptions& opts) {
  if (tau2 - tau1 < 2.0 * T0)
    throw std::invalid_argument("steer_hold_steer: requires tau2 - tau1 >= 2*T0");
  const double span = tau2 - tau1;
  const double dt = span / steps;
  const int k0 = static_cast<int>(std::llround(T0 / dt));
  if (k0 < 1 || std::abs(k0 * dt - T0) > 1e-9 * std::max(1.0, T0))
    throw std::invalid_argument("steer_hold_steer: T0 must align with the control grid");

  SteerOptions sopts = opts;
  sopts.u_bar = u_bar;
  SteeringResult in = steer(system, y_a, y_bar, T0, k0, sopts);
  if (!in.achieved)
    throw std::runtime_error("steer_hold_steer: first steering failed (terminal error " +
                             std::to_string(in.terminal_error) + ")");
  SteeringResult out = steer(system, y_bar, y_b, T0, k0, sopts);
  if (!out.achieved)
    throw std::runtime_error("steer_hold_steer: second steering failed (terminal error " +
                             std::to_string(out.terminal_error) + ")");

  ControlSignal u = ControlSignal::constant(span, steps, u_bar);
  u.values.topRows(k0) = in.control.values;
  u.values.bottomRows(k0) = out.control.values;
  return u;
}

ControlSignal time_rescale(const ControlSignal& control, double new_horizon) {
  if (new_horizon <= 0.0) throw std::invalid_argument("time_rescale: horizon must be positive");
  ControlSignal out;
  out.horizon = new_horizon;
  out.steps = control.steps;
  out.values = (control.horizon / new_horizon) * control.values;
  return out;
}

}  // namespace turnpike
