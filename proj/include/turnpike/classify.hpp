#ifndef TURNPIKE_CLASSIFY_HPP
#define TURNPIKE_CLASSIFY_HPP

#include <vector>

#include "turnpike/dynamics.hpp"
#include "turnpike/ocp.hpp"

namespace turnpike {

/// Binary classification by a shared-control flow: all points evolve under
/// xdot_i = w(t) sigma(x_i) + b(t) and the loss integrates the projected
/// tracking error sum_i |P x_i(t) - label_i|^2 plus the control energy.
struct ClassifyProblem {
  Matrix points;               // n x 2
  std::vector<double> labels;  // +1 / -1
  Sigma sigma = Sigma::tanh();
  double horizon = 15.0;
  Vector projection_linear;  // nonzero (P surjective)
  double projection_offset = 0.0;
  double regularization = 1.0;  // weight on the control energy
  int steps_per_unit_time = 40;
};

struct ClassifyOutcome {
  Solution solution;           // over the stacked 2n-dimensional system
  std::vector<double> margins; // sign(P x_i(T)) * label_i
  double accuracy = 0.0;
  double loss = 0.0;           // cost at the optimum
  double baseline_loss = 0.0;  // cost of u == 0
  /// Mean over points of the distance to the label's preimage hyperplane,
  /// sampled on the trajectory grid.
  Vector preimage_distance;
  /// max |slope| of the smoothed distance over the final third, relative to
  /// the early-phase max |slope|; flat when < 0.1.
  double late_slope_ratio = 0.0;
  bool flattened = false;
};

/// Minimizes the shared-control functional over all trajectories
/// simultaneously. A non-separated outcome is reported via accuracy < 1,
/// not an exception. Requires n >= 2.
ClassifyOutcome run_classification(const ClassifyProblem& problem, const SolveOptions& opts);

/// sign(P x(T)) sampled on a uniform grid over [-2,2]^2 by flowing each grid
/// point through the trained control; rows are grid rows (y fixed).
Matrix classifier_grid(const ClassifyProblem& problem, const ControlSignal& control,
                       int resolution);

}  // namespace turnpike

#endif
