#include "mlci/dynamics.hpp"

#include <cmath>
#include <numbers>

#include "mlci/errors.hpp"

namespace mlci {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_finite(const StateVector& x, const char* where) {
  if (!x.allFinite()) throw IntegrationDiverged(std::string(where) + ": non-finite state");
}

double wrap_into(double v, double lower, double upper) {
  const double period = upper - lower;
  double r = std::fmod(v - lower, period);
  if (r < 0) r += period;
  double out = lower + r;
  if (out >= upper) out = lower;
  return out;
}

}  // namespace

double SystemSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ContractViolation("system '" + name + "' has no parameter '" + key + "'");
  return it->second;
}

std::size_t SystemSpec::state_index(std::string_view label) const {
  for (std::size_t d = 0; d < state_dims.size(); ++d)
    if (state_dims[d].label == label) return d;
  throw ContractViolation("system '" + name + "' has no state dimension '" + std::string(label) + "'");
}

void SystemSpec::validate() const {
  const std::size_t expected_state = field == VectorField::kPendulum ? 2 : 4;
  const std::size_t expected_control = field == VectorField::kPendulum ? 1 : 2;
  require(state_dims.size() == expected_state, name + ": wrong number of state dimensions");
  require(control_dims.size() == expected_control, name + ": wrong number of control dimensions");
  for (const auto& d : state_dims) {
    require(d.lower < d.upper, name + ": state dim '" + d.label + "' needs lower < upper");
    if (d.periodic)
      require(std::abs(d.span() - kTwoPi) < 1e-9,
              name + ": periodic dim '" + d.label + "' must span 2*pi");
  }
  for (const auto& d : control_dims)
    require(d.lower < d.upper, name + ": control dim '" + d.label + "' needs lower < upper");
  require(param("g") > 0, name + ": g must be positive");
  if (field == VectorField::kPendulum) {
    require(param("l") > 0, name + ": l must be positive");
  } else {
    const auto& len = state_dims[2];
    require(len.lower > 0, name + ": length lower bound must be positive");
  }
}

SystemSpec pendulum_system(double g, double l) {
  SystemSpec s;
  s.name = "pendulum";
  s.field = VectorField::kPendulum;
  s.state_dims = {{"theta", 0.0, kTwoPi, true, "rad"}, {"theta_dot", -6.0, 6.0, false, "rad/s"}};
  s.control_dims = {{"u", -2.0, 2.0, "rad/s^2"}};
  s.params = {{"g", g}, {"l", l}};
  return s;
}

SystemSpec tip_system(double g) {
  SystemSpec s;
  s.name = "tip";
  s.field = VectorField::kTip;
  s.state_dims = {{"theta", -0.6, 0.6, false, "rad"},
                  {"theta_dot", -1.5, 1.5, false, "rad/s"},
                  {"l", 0.4, 1.6, false, "m"},
                  {"l_dot", -0.75, 0.75, false, "m/s"}};
  s.control_dims = {{"u1", -2.0, 2.0, "rad/s^2"}, {"u2", -1.0, 1.0, "m/s^2"}};
  s.params = {{"g", g}};
  return s;
}

SystemSpec system_by_name(std::string_view name) {
  if (name == "pendulum") return pendulum_system();
  if (name == "tip") return tip_system();
  throw ContractViolation("unknown system '" + std::string(name) + "' (expected pendulum or tip)");
}

void ContinuousTrajectory::validate() const {
  require(dt_sim > 0, "trajectory: dt_sim must be positive");
  require(!states.empty(), "trajectory: no states");
  require(states.size() == controls.size() + 1, "trajectory: need one more state than controls");
}

Goal Goal::point(StateVector target) {
  Goal g;
  g.free.assign(static_cast<std::size_t>(target.size()), false);
  g.target = std::move(target);
  return g;
}

StateVector deriv(const SystemSpec& system, const StateVector& x, const ControlVector& u) {
  if (static_cast<std::size_t>(x.size()) != system.state_size() ||
      static_cast<std::size_t>(u.size()) != system.control_size())
    throw ContractViolation("deriv: dimension mismatch for system '" + system.name + "'");
  StateVector dx(x.size());
  switch (system.field) {
    case VectorField::kPendulum: {
      const double ratio = system.param("g") / system.param("l");
      dx[0] = x[1];
      dx[1] = ratio * std::sin(x[0]) + u[0];
      break;
    }
    case VectorField::kTip: {
      const double len = x[2];
      if (!(len > 0)) throw IntegrationDiverged("tip: pendulum length reached " + std::to_string(len));
      // Cross-coupling between angular acceleration and length rate is omitted.
      dx[0] = x[1];
      dx[1] = system.param("g") / len * std::sin(x[0]) + u[0];
      dx[2] = x[3];
      dx[3] = u[1];
      break;
    }
  }
  return dx;
}

StateVector rk4_step(const SystemSpec& system, const StateVector& x, const ControlVector& u, double h) {
  const StateVector k1 = deriv(system, x, u);
  const StateVector k2 = deriv(system, x + 0.5 * h * k1, u);
  const StateVector k3 = deriv(system, x + 0.5 * h * k2, u);
  const StateVector k4 = deriv(system, x + h * k3, u);
  StateVector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_finite(next, "rk4_step");
  return next;
}

StateVector canonicalize(const SystemSpec& system, StateVector x) {
  for (std::size_t d = 0; d < system.state_size(); ++d) {
    const auto& dim = system.state_dims[d];
    if (dim.periodic) x[d] = wrap_into(x[d], dim.lower, dim.upper);
  }
  return x;
}

StateVector state_difference(const SystemSpec& system, const StateVector& a, const StateVector& b) {
  StateVector diff = a - b;
  for (std::size_t d = 0; d < system.state_size(); ++d) {
    const auto& dim = system.state_dims[d];
    if (dim.periodic) {
      const double half = 0.5 * dim.span();
      diff[d] = wrap_into(diff[d], -half, half);
    }
  }
  return diff;
}

double normalized_goal_error(const SystemSpec& system, const StateVector& x, const Goal& goal) {
  const StateVector diff = state_difference(system, x, goal.target);
  double sum = 0.0;
  for (std::size_t d = 0; d < system.state_size(); ++d) {
    if (goal.is_free(d)) continue;
    const double scaled = diff[d] / system.state_dims[d].span();
    sum += scaled * scaled;
  }
  return std::sqrt(sum);
}

std::vector<StateVector> integrate_segment(const SystemSpec& system, const StateVector& x0,
                                           const ControlVector& u, double duration,
                                           std::size_t substeps) {
  require(duration > 0, "integrate_segment: duration must be positive");
  require(substeps >= 1, "integrate_segment: need at least one substep");
  check_finite(x0, "integrate_segment");
  const double h = duration / static_cast<double>(substeps);
  std::vector<StateVector> samples;
  samples.reserve(substeps + 1);
  StateVector x = x0;
  samples.push_back(canonicalize(system, x));
  for (std::size_t k = 0; k < substeps; ++k) {
    x = rk4_step(system, x, u, h);
    samples.push_back(canonicalize(system, x));
  }
  return samples;
}

ContinuousTrajectory rollout(const SystemSpec& system, const StateVector& x0,
                             std::span<const ControlVector> controls, double step,
                             std::size_t substeps) {
  require(!controls.empty(), "rollout: no controls");
  ContinuousTrajectory traj;
  traj.dt_sim = step / static_cast<double>(substeps);
  traj.states.push_back(canonicalize(system, x0));
  StateVector x = x0;
  for (const auto& u : controls) {
    auto seg = integrate_segment(system, x, u, step, substeps);
    for (std::size_t k = 1; k < seg.size(); ++k) {
      traj.states.push_back(seg[k]);
      traj.controls.push_back(u);
    }
    x = seg.back();
  }
  return traj;
}

}  // namespace mlci
