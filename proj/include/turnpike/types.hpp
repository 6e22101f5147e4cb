#ifndef TURNPIKE_TYPES_HPP
#define TURNPIKE_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace turnpike {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Pass/fail outcome of a diagnostic check; not_applicable when the
/// check's hypotheses are not met by the run (e.g. control decay on a
/// system with drift).
enum class Verdict { pass, fail, not_applicable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "not_applicable";
  }
}

/// Time-stepping scheme used by the integrator.
enum class Scheme { forward_euler, rk4 };

inline const char* to_string(Scheme s) {
  return s == Scheme::forward_euler ? "forward_euler" : "rk4";
}

/// Thrown when a trajectory leaves the admissible range (non-finite entry
/// or magnitude above the blow-up guard).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(int step, std::string msg)
      : std::runtime_error(std::move(msg)), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Maximum admissible |state entry| during integration.
inline constexpr double kBlowupGuard = 1e12;

}  // namespace turnpike

#endif
