#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mlci {

using StateVector = Eigen::VectorXd;
using ControlVector = Eigen::VectorXd;

enum class VectorField { kPendulum, kTip };

struct StateDim {
  std::string label;
  double lower = 0.0;
  double upper = 0.0;
  bool periodic = false;
  std::string unit;

  double span() const { return upper - lower; }
};

struct ControlDim {
  std::string label;
  double lower = 0.0;
  double upper = 0.0;
  std::string unit;
};

/// Declarative description of a continuous system xdot = h(x, u).
struct SystemSpec {
  std::string name;
  std::vector<StateDim> state_dims;
  std::vector<ControlDim> control_dims;
  std::map<std::string, double> params;
  VectorField field = VectorField::kPendulum;

  std::size_t state_size() const { return state_dims.size(); }
  std::size_t control_size() const { return control_dims.size(); }
  double param(const std::string& key) const;
  std::size_t state_index(std::string_view label) const;

  // Throws ContractViolation on inconsistent bounds or a dimension count
  // that does not match the vector field.
  void validate() const;
};

// theta in [0, 2pi) periodic, theta_dot in [-6, 6], u in [-2, 2].
SystemSpec pendulum_system(double g = 1.0, double l = 1.0);

// Telescoping inverted pendulum: (theta, theta_dot, l, l_dot), controls
// (u1 torque, u2 length force). Bounds are project defaults.
SystemSpec tip_system(double g = 1.0);

SystemSpec system_by_name(std::string_view name);

struct ContinuousTrajectory {
  double dt_sim = 0.0;
  std::vector<StateVector> states;
  std::vector<ControlVector> controls;  // states.size() - 1 entries

  void validate() const;
};

/// Target for a fixed-endpoint task. Free dimensions (e.g. velocities of a
/// goal box) are ignored by goal errors and goal-cell sets.
struct Goal {
  StateVector target;
  std::vector<bool> free;

  static Goal point(StateVector target);
  bool is_free(std::size_t d) const { return !free.empty() && free[d]; }
};

StateVector deriv(const SystemSpec& system, const StateVector& x, const ControlVector& u);

// One classical RK4 step; periodic dims are left unwrapped.
StateVector rk4_step(const SystemSpec& system, const StateVector& x, const ControlVector& u, double h);

StateVector canonicalize(const SystemSpec& system, StateVector x);

// Difference a - b with periodic dims mapped into [-period/2, period/2).
StateVector state_difference(const SystemSpec& system, const StateVector& a, const StateVector& b);

// Euclidean distance with each dim divided by its bound span.
double normalized_goal_error(const SystemSpec& system, const StateVector& x, const Goal& goal);

// substeps + 1 samples at spacing duration / substeps, starting at x0.
std::vector<StateVector> integrate_segment(const SystemSpec& system, const StateVector& x0,
                                           const ControlVector& u, double duration,
                                           std::size_t substeps);

ContinuousTrajectory rollout(const SystemSpec& system, const StateVector& x0,
                             std::span<const ControlVector> controls, double step,
                             std::size_t substeps);

}  // namespace mlci
