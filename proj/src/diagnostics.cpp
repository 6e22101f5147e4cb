#include "turnpike/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace turnpike {

namespace {

constexpr double kLogFloor = 1e-14;

// log(e^{-mu t} + e^{-mu (T-t)}) without under/overflow
double log_two_sided_shape(double t, double T, double mu) {
  const double x1 = -mu * t;
  const double x2 = -mu * (T - t);
  const double hi = std::max(x1, x2);
  return hi + std::log1p(std::exp(std::min(x1, x2) - hi));
}

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  bool ok = false;
};

// least squares y ~ intercept + slope * x
Regression linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  Regression r;
  const size_t n = x.size();
  if (n < 2) return r;
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.ok = true;
  return r;
}

}  // namespace

double SampledSignal::l2_norm() const {
  return std::sqrt(values.squaredNorm() * dt());
}

double DecayFit::envelope(double t, double horizon) const {
  if (model == Model::two_sided)
    return C * (std::exp(-mu * t) + std::exp(-mu * (horizon - t)));
  return C * std::exp(-mu * t);
}

std::pair<double, double> small_crossing_times(const SampledSignal& signal, double tau) {
  const double T = signal.horizon;
  if (tau <= 0.0 || tau > 0.5 * T)
    throw std::invalid_argument("small_crossing_times: requires 0 < tau <= T/2");
  const double threshold = signal.l2_norm() / std::sqrt(tau);
  const double dt = signal.dt();
  const int n = signal.nodes();

  double t1 = -1.0, t2 = -1.0;
  for (int i = 0; i < n && i * dt < tau; ++i) {
    if (signal.values(i) <= threshold) {
      t1 = i * dt;
      break;
    }
  }
  for (int i = n - 1; i >= 0 && i * dt > T - tau; --i) {
    if (signal.values(i) <= threshold) {
      t2 = i * dt;
      break;
    }
  }
  if (t1 < 0.0 || t2 < 0.0)
    throw std::logic_error("small_crossing_times: no crossing found; "
                           "discrete-norm inconsistency");
  return {t1, t2};
}

DecayFit fit_turnpike_envelope(const SampledSignal& signal, double boundary_width) {
  const double T = signal.horizon;
  const double W = boundary_width;
  if (!(T > 4.0 * W)) throw std::invalid_argument("fit_turnpike_envelope: requires T > 4W");

  const double dt = signal.dt();
  std::vector<double> ts, logs;
  for (int i = 0; i < signal.nodes(); ++i) {
    const double t = i * dt;
    if (t < W - 1e-12 || t > T - W + 1e-12) continue;
    ts.push_back(t);
    logs.push_back(std::log(std::max(signal.values(i), kLogFloor)));
  }
  DecayFit fit;
  fit.model = DecayFit::Model::two_sided;
  fit.window_lo = W;
  fit.window_hi = T - W;
  if (ts.size() < 4) throw std::invalid_argument("fit_turnpike_envelope: too few window samples");

  // initialize from separate log-linear fits of the two arcs
  std::vector<double> xl, yl, xr, yr;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] <= 0.5 * T) {
      xl.push_back(ts[i]);
      yl.push_back(logs[i]);
    }
    if (ts[i] >= 0.5 * T) {
      xr.push_back(T - ts[i]);
      yr.push_back(logs[i]);
    }
  }
  const Regression left = linear_fit(xl, yl);
  const Regression right = linear_fit(xr, yr);
  double mu = 0.0;
  int used = 0;
  if (left.ok) {
    mu += -left.slope;
    ++used;
  }
  if (right.ok) {
    mu += -right.slope;
    ++used;
  }
  mu = used > 0 ? mu / used : 0.1;
  if (!std::isfinite(mu)) mu = 0.1;

  auto optimal_logC = [&](double m) {
    double acc = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) acc += logs[i] - log_two_sided_shape(ts[i], T, m);
    return acc / ts.size();
  };
  auto sse = [&](double logC, double m) {
    double acc = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
      const double r = logs[i] - logC - log_two_sided_shape(ts[i], T, m);
      acc += r * r;
    }
    return acc;
  };

  double logC = optimal_logC(mu);
  double err = sse(logC, mu);

  // Gauss-Newton on (logC, mu) with step halving
  for (int it = 0; it < 200; ++it) {
    double j11 = 0.0, j12 = 0.0, j22 = 0.0, g1 = 0.0, g2 = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
      const double t = ts[i];
      const double r = logs[i] - logC - log_two_sided_shape(t, T, mu);
      // d model / d mu = -(t p1 + (T-t) p2), p = softmax weights
      const double z = mu * (T - 2.0 * t);
      const double p1 = 1.0 / (1.0 + std::exp(-z));
      const double dmu = -(t * p1 + (T - t) * (1.0 - p1));
      // residual Jacobian: dr/dlogC = -1, dr/dmu = -dmu
      j11 += 1.0;
      j12 += dmu;
      j22 += dmu * dmu;
      g1 += -r;         // J^T r component for logC
      g2 += -dmu * r;   // and for mu (dr/dmu = -dmu)
    }
    const double det = j11 * j22 - j12 * j12;
    if (std::abs(det) < 1e-300) break;
    // solve (J^T J) delta = -J^T r
    double d1 = (-g1 * j22 + g2 * j12) / det;
    double d2 = (-g2 * j11 + g1 * j12) / det;
    bool improved = false;
    for (int h = 0; h < 25; ++h) {
      const double candC = logC + d1;
      const double candMu = mu + d2;
      const double cand_err = sse(candC, candMu);
      if (cand_err <= err) {
        logC = candC;
        mu = candMu;
        improved = cand_err < err - 1e-15 * (1.0 + err);
        err = cand_err;
        break;
      }
      d1 *= 0.5;
      d2 *= 0.5;
    }
    if (!improved) break;
  }

  fit.C = std::exp(logC);
  fit.mu = mu;
  fit.rms_log_residual = std::sqrt(err / ts.size());
  return fit;
}

DecayFit fit_stabilization(const SampledSignal& signal, double boundary_width) {
  const double T = signal.horizon;
  const double W = boundary_width;
  if (!(T > W)) throw std::invalid_argument("fit_stabilization: requires T > W");

  const double dt = signal.dt();
  std::vector<double> ts, logs;
  for (int i = 0; i < signal.nodes(); ++i) {
    const double t = i * dt;
    if (t < W - 1e-12) continue;
    ts.push_back(t);
    logs.push_back(std::log(std::max(signal.values(i), kLogFloor)));
  }
  if (ts.size() < 2) throw std::invalid_argument("fit_stabilization: too few window samples");

  const Regression reg = linear_fit(ts, logs);
  DecayFit fit;
  fit.model = DecayFit::Model::one_sided;
  fit.window_lo = W;
  fit.window_hi = T;
  fit.mu = reg.ok ? -reg.slope : 0.0;
  fit.C = std::exp(reg.intercept);
  double acc = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    const double r = logs[i] - (reg.intercept + reg.slope * ts[i]);
    acc += r * r;
  }
  fit.rms_log_residual = std::sqrt(acc / ts.size());
  return fit;
}

namespace {

bool envelope_dominates(const SampledSignal& signal, const DecayFit& fit, double margin) {
  const double dt = signal.dt();
  for (int i = 0; i < signal.nodes(); ++i) {
    const double t = i * dt;
    if (t < fit.window_lo - 1e-12 || t > fit.window_hi + 1e-12) continue;
    if (signal.values(i) > margin * fit.envelope(t, signal.horizon)) return false;
  }
  return true;
}

}  // namespace

Verdict check_control_decay(const SampledSignal& control_signal, const DecayFit& fit,
                            double margin, bool driftless) {
  if (!driftless) return Verdict::not_applicable;
  if (control_signal.values.maxCoeff() <= kLogFloor) return Verdict::pass;  // no control at all
  if (fit.mu <= 0.0) return Verdict::fail;
  return envelope_dominates(control_signal, fit, margin) ? Verdict::pass : Verdict::fail;
}

Verdict check_uniform_bound(const std::map<double, double>& costs, double T_threshold,
                            double rel_tol) {
  std::vector<double> vals;
  for (const auto& [T, J] : costs)
    if (T >= T_threshold) vals.push_back(J);
  if (vals.size() < 2) return Verdict::not_applicable;
  const double lo = *std::min_element(vals.begin(), vals.end());
  const double hi = *std::max_element(vals.begin(), vals.end());
  if (hi == 0.0) return Verdict::pass;
  if (lo <= 0.0) return Verdict::fail;
  return hi / lo <= 1.0 + rel_tol ? Verdict::pass : Verdict::fail;
}

BootstrapCertificate bootstrap_certificate(const SampledSignal& distance_signal, double tau,
                                           double T0, double C2_hat, double kappa_hat) {
  BootstrapCertificate cert;
  cert.note = "empirical constants (probe estimates), not proof constants";
  const double T = distance_signal.horizon;
  if (tau <= 16.0 * std::pow(C2_hat, 4.0)) {
    cert.overall = Verdict::not_applicable;
    cert.note = "tau <= 16*C2^4: shrink factor not contractive with the probed constant; " +
                cert.note;
    return cert;
  }
  const int n_max = static_cast<int>(std::floor((0.5 * T - T0) / tau));
  if (n_max < 1) {
    cert.overall = Verdict::not_applicable;
    cert.note = "horizon too short for one admissible window level; " + cert.note;
    return cert;
  }
  const double factor = 4.0 * C2_hat * C2_hat / std::sqrt(tau);
  const double dt = distance_signal.dt();
  bool all_pass = true;
  for (int n = 1; n <= n_max; ++n) {
    BootstrapCertificate::Level level;
    level.n = n;
    level.bound = 0.5 * kappa_hat * std::pow(factor, n);
    double mx = 0.0;
    for (int i = 0; i < distance_signal.nodes(); ++i) {
      const double t = i * dt;
      if (t < n * tau - 1e-12 || t > T - n * tau + 1e-12) continue;
      mx = std::max(mx, distance_signal.values(i));
    }
    level.observed_max = mx;
    level.pass = mx <= level.bound;
    all_pass = all_pass && level.pass;
    cert.levels.push_back(level);
  }
  cert.overall = all_pass ? Verdict::pass : Verdict::fail;
  return cert;
}

TurnpikeReport make_report(const SampledSignal& distance, const SampledSignal& control,
                           double cost_value, double boundary_width, bool has_final_cost,
                           bool driftless, const VerdictThresholds& thresholds) {
  TurnpikeReport report;
  report.horizon = distance.horizon;
  report.dt = distance.dt();
  report.distance = distance;
  report.control = control;
  report.cost_value = cost_value;
  report.thresholds = thresholds;

  const double T = distance.horizon;
  const double W = boundary_width;

  // a trajectory that never leaves the target (up to the steady-point
  // tolerance) has nothing left to decay
  const bool at_target = distance.values.maxCoeff() <= 1e-10;

  if (T > 4.0 * W) {
    const DecayFit fit = fit_turnpike_envelope(distance, W);
    report.fits["turnpike"] = fit;
    const bool ok = at_target ||
                    (fit.mu > thresholds.mu_min && fit.rms_log_residual <= thresholds.rms_max &&
                     envelope_dominates(distance, fit, thresholds.margin));
    report.verdicts["turnpike"] = ok ? Verdict::pass : Verdict::fail;
  } else {
    report.verdicts["turnpike"] = Verdict::not_applicable;
  }

  const DecayFit stab = fit_stabilization(distance, W);
  report.fits["stabilization"] = stab;
  if (has_final_cost) {
    report.verdicts["stabilization"] = Verdict::not_applicable;
  } else {
    const bool ok = at_target ||
                    (stab.mu > thresholds.mu_min && stab.rms_log_residual <= thresholds.rms_max &&
                     envelope_dominates(distance, stab, thresholds.margin));
    report.verdicts["stabilization"] = ok ? Verdict::pass : Verdict::fail;
  }

  DecayFit ctrl_fit;
  if (has_final_cost && T > 4.0 * W) {
    ctrl_fit = fit_turnpike_envelope(control, W);
  } else {
    ctrl_fit = fit_stabilization(control, W);
  }
  report.fits["control"] = ctrl_fit;
  report.verdicts["control_decay"] =
      check_control_decay(control, ctrl_fit, thresholds.margin, driftless);

  report.verdicts["uniform_bound"] = Verdict::not_applicable;  // sweep-level check
  return report;
}

namespace {

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector from_std(const std::vector<double>& v) {
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  return Verdict::not_applicable;
}

}  // namespace

nlohmann::ordered_json to_json(const DecayFit& fit) {
  nlohmann::ordered_json j;
  j["model"] = fit.model == DecayFit::Model::two_sided ? "two_sided" : "one_sided";
  j["C"] = fit.C;
  j["mu"] = fit.mu;
  j["window"] = {fit.window_lo, fit.window_hi};
  j["rms_log_residual"] = fit.rms_log_residual;
  return j;
}

DecayFit decay_fit_from_json(const nlohmann::json& j) {
  DecayFit fit;
  fit.model = j.at("model").get<std::string>() == "two_sided" ? DecayFit::Model::two_sided
                                                              : DecayFit::Model::one_sided;
  fit.C = j.at("C").get<double>();
  fit.mu = j.at("mu").get<double>();
  fit.window_lo = j.at("window").at(0).get<double>();
  fit.window_hi = j.at("window").at(1).get<double>();
  fit.rms_log_residual = j.at("rms_log_residual").get<double>();
  return fit;
}

nlohmann::ordered_json to_json(const TurnpikeReport& report) {
  nlohmann::ordered_json j;
  j["T"] = report.horizon;
  j["dt"] = report.dt;
  j["cost_value"] = report.cost_value;
  j["distance"] = to_std(report.distance.values);
  j["control"] = to_std(report.control.values);
  nlohmann::ordered_json fits;
  for (const auto& [name, fit] : report.fits) fits[name] = to_json(fit);
  j["fits"] = std::move(fits);
  nlohmann::ordered_json verdicts;
  for (const auto& [name, v] : report.verdicts) verdicts[name] = to_string(v);
  j["verdicts"] = std::move(verdicts);
  j["thresholds"] = {{"mu_min", report.thresholds.mu_min},
                     {"rms_max", report.thresholds.rms_max},
                     {"margin", report.thresholds.margin}};
  return j;
}

TurnpikeReport report_from_json(const nlohmann::json& j) {
  TurnpikeReport report;
  report.horizon = j.at("T").get<double>();
  report.dt = j.at("dt").get<double>();
  report.cost_value = j.at("cost_value").get<double>();
  report.distance.horizon = report.horizon;
  report.distance.values = from_std(j.at("distance").get<std::vector<double>>());
  report.control.horizon = report.horizon;
  report.control.values = from_std(j.at("control").get<std::vector<double>>());
  for (const auto& [name, fit] : j.at("fits").items())
    report.fits[name] = decay_fit_from_json(fit);
  for (const auto& [name, v] : j.at("verdicts").items())
    report.verdicts[name] = verdict_from_string(v.get<std::string>());
  report.thresholds.mu_min = j.at("thresholds").at("mu_min").get<double>();
  report.thresholds.rms_max = j.at("thresholds").at("rms_max").get<double>();
  report.thresholds.margin = j.at("thresholds").at("margin").get<double>();
  return report;
}

}  // namespace turnpike
