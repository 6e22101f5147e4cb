#ifndef TURNPIKE_DIAGNOSTICS_HPP
#define TURNPIKE_DIAGNOSTICS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "turnpike/types.hpp"

#include <json.hpp>

namespace turnpike {

/// A nonnegative scalar signal sampled on the uniform grid of [0, T]
/// (steps+1 nodes).
struct SampledSignal {
  double horizon = 0.0;
  Vector values;  // steps+1 nodes

  int nodes() const { return static_cast<int>(values.size()); }
  double dt() const { return horizon / (nodes() - 1); }
  double time_at(int i) const { return dt() * i; }

  /// Nodal discrete L2 norm: sqrt(sum_i values_i^2 * dt) over all nodes.
  /// Full weight at every node keeps the crossing-time bound below exact on
  /// both end windows.
  double l2_norm() const;
};

/// Fitted exponential envelope. two_sided: C (e^{-mu t} + e^{-mu (T-t)});
/// one_sided: C e^{-mu t}. mu <= 0 encodes a non-decaying signal.
struct DecayFit {
  enum class Model { two_sided, one_sided };
  Model model = Model::two_sided;
  double C = 0.0;
  double mu = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double rms_log_residual = 0.0;

  double envelope(double t, double horizon) const;
};

/// Earliest grid time t1 in [0, tau) and latest grid time t2 in (T-tau, T]
/// with signal(t_i) <= ||signal||_{L2} / sqrt(tau) (nodal discrete norms).
/// Existence is guaranteed for tau <= T/2; a miss indicates a quadrature
/// inconsistency and throws std::logic_error.
std::pair<double, double> small_crossing_times(const SampledSignal& signal, double tau);

/// Nonlinear least squares on log(signal) over [W, T-W] against the
/// two-sided model, initialized from separate log-linear fits of the left
/// and right arcs. Signal is floored at 1e-14 before taking logs.
/// Requires T > 4W.
DecayFit fit_turnpike_envelope(const SampledSignal& signal, double boundary_width);

/// Log-linear least squares of the one-sided model over [W, T] (no right
/// boundary layer).
DecayFit fit_stabilization(const SampledSignal& signal, double boundary_width);

/// Pass iff the system is driftless, mu > 0 and margin * envelope dominates
/// the control magnitude signal pointwise on the fit window.
Verdict check_control_decay(const SampledSignal& control_signal, const DecayFit& fit,
                            double margin, bool driftless);

/// Pass iff max/min of the costs over horizons >= T_threshold is
/// <= 1 + rel_tol; not_applicable with fewer than two such horizons.
Verdict check_uniform_bound(const std::map<double, double>& costs, double T_threshold,
                            double rel_tol);

/// Per-window-shrink-level certificate: for each admissible n the max of the
/// signal over [n tau, T - n tau] is checked against
/// (kappa/2) (4 C2^2 / sqrt(tau))^n. The constants are empirical stand-ins
/// (probe estimates), so this is a numerical certificate, not a proof.
struct BootstrapCertificate {
  struct Level {
    int n = 0;
    double bound = 0.0;
    double observed_max = 0.0;
    bool pass = false;
  };
  std::vector<Level> levels;
  Verdict overall = Verdict::not_applicable;
  std::string note;
};

BootstrapCertificate bootstrap_certificate(const SampledSignal& distance_signal, double tau,
                                           double T0, double C2_hat, double kappa_hat);

/// Thresholds recorded alongside every verdict for auditability.
struct VerdictThresholds {
  double mu_min = 0.0;
  double rms_max = 0.5;
  double margin = 2.0;
};

/// Signals, fits and verdicts of one solved problem.
struct TurnpikeReport {
  double horizon = 0.0;
  double dt = 0.0;
  SampledSignal distance;  // ||y_T(t) - y_bar|| in the problem's state metric
  SampledSignal control;   // ||u_T(t) - u_bar||
  std::map<std::string, DecayFit> fits;
  double cost_value = 0.0;
  std::map<std::string, Verdict> verdicts;
  VerdictThresholds thresholds;
};

/// Builds fits and verdicts from the two signals. `has_final_cost` controls
/// the stabilization verdict's applicability and which model the control fit
/// uses; `driftless` gates the control-decay verdict.
TurnpikeReport make_report(const SampledSignal& distance, const SampledSignal& control,
                           double cost_value, double boundary_width, bool has_final_cost,
                           bool driftless, const VerdictThresholds& thresholds = {});

nlohmann::ordered_json to_json(const DecayFit& fit);
DecayFit decay_fit_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TurnpikeReport& report);
TurnpikeReport report_from_json(const nlohmann::json& j);

}  // namespace turnpike

#endif
