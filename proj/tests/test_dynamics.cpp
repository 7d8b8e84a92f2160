#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mlci/dynamics.hpp"
#include "mlci/errors.hpp"

using namespace mlci;

namespace {

constexpr double kPi = std::numbers::pi;

StateVector vec(std::initializer_list<double> v) {
  StateVector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x[k++] = e;
  return x;
}

}  // namespace

TEST_CASE("vector fields") {
  const auto pend = pendulum_system();
  const auto tip = tip_system();
  CHECK((deriv(pend, vec({kPi, 0}), vec({0})) - vec({0, 0})).norm() < 1e-15);
  CHECK((deriv(pend, vec({kPi / 2, 0}), vec({0})) - vec({0, 1})).norm() == 0.0);
  CHECK((deriv(tip, vec({0, 0, 1, 0.5}), vec({0, -0.2})) - vec({0, 0, 0.5, -0.2})).norm() == 0.0);
  CHECK(deriv(pend, vec({0.3, -0.2}), vec({0.7})) == deriv(pend, vec({0.3, -0.2}), vec({0.7})));
  SUBCASE("gravity and length scale the angular term") {
    const auto p = pendulum_system(9.81, 2.0);
    CHECK(deriv(p, vec({kPi / 2, 0}), vec({0}))[1] == doctest::Approx(9.81 / 2.0));
    CHECK(deriv(tip, vec({kPi / 2, 0, 0.5, 0}), vec({0, 0}))[1] == doctest::Approx(2.0));
  }
}

TEST_CASE("vector field contracts") {
  const auto pend = pendulum_system();
  CHECK_THROWS_AS(deriv(pend, vec({0, 0, 0}), vec({0})), ContractViolation);
  CHECK_THROWS_AS(deriv(pend, vec({0, 0}), vec({0, 1})), ContractViolation);
  CHECK_THROWS_AS(deriv(tip_system(), vec({0, 0, -0.1, 0}), vec({0, 0})), IntegrationDiverged);
  CHECK_THROWS_AS(system_by_name("cartpole"), ContractViolation);
  CHECK_NOTHROW(pendulum_system().validate());
  CHECK_NOTHROW(tip_system().validate());
  auto bad = tip_system();
  bad.state_dims[2].lower = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("integrate_segment") {
  const auto pend = pendulum_system();
  SUBCASE("equilibrium stays put") {
    for (const auto& x : integrate_segment(pend, vec({0, 0}), vec({0}), 3.0, 30)) CHECK(x.norm() == 0.0);
  }
  SUBCASE("sample count and spacing") {
    CHECK(integrate_segment(pend, vec({1, 0}), vec({0}), 0.5, 7).size() == 8);
  }
  SUBCASE("small-angle motion follows cosh") {
    const auto s = integrate_segment(pend, vec({0.01, 0}), vec({0}), 0.5, 50);
    const double expected = 0.01 * std::cosh(0.5);
    CHECK(std::abs(s.back()[0] - expected) / expected < 1e-4);
  }
  SUBCASE("telescoping length is a double integrator") {
    const auto s = integrate_segment(tip_system(), vec({0, 0, 1, 0}), vec({0, 0.4}), 1.0, 10);
    CHECK(std::abs(s.back()[2] - 1.2) < 1e-12);
    CHECK(std::abs(s.back()[3] - 0.4) < 1e-12);
  }
  SUBCASE("angles are wrapped into [0, 2pi)") {
    for (const auto& x : integrate_segment(pend, vec({6.0, 4.0}), vec({1.0}), 3.0, 300)) {
      CHECK(x[0] >= 0.0);
      CHECK(x[0] < 2 * kPi);
    }
    for (const auto& x : integrate_segment(pend, vec({0.2, -4.0}), vec({-1.0}), 3.0, 300)) {
      CHECK(x[0] >= 0.0);
      CHECK(x[0] < 2 * kPi);
    }
  }
  SUBCASE("contracts") {
    CHECK_THROWS_AS(integrate_segment(pend, vec({0, 0}), vec({0}), 0.0, 10), ContractViolation);
    CHECK_THROWS_AS(integrate_segment(pend, vec({0, 0}), vec({0}), 1.0, 0), ContractViolation);
    CHECK_THROWS_AS(integrate_segment(pend, vec({NAN, 0}), vec({0}), 1.0, 1), IntegrationDiverged);
    CHECK_THROWS_AS(integrate_segment(tip_system(), vec({0, 0, 0.1, -1}), vec({0, 0}), 1.0, 10),
                    IntegrationDiverged);
  }
}

TEST_CASE("rollout") {
  const auto pend = pendulum_system();
  SUBCASE("single control equals one segment") {
    const std::vector<ControlVector> u{vec({0.5})};
    const auto traj = rollout(pend, vec({1, 0.2}), u, 0.3, 12);
    const auto seg = integrate_segment(pend, vec({1, 0.2}), vec({0.5}), 0.3, 12);
    REQUIRE(traj.states.size() == seg.size());
    for (std::size_t k = 0; k < seg.size(); ++k) CHECK(traj.states[k] == seg[k]);
    CHECK(traj.controls.size() == 12);
    CHECK(traj.dt_sim == doctest::Approx(0.025));
    CHECK_NOTHROW(traj.validate());
  }
  SUBCASE("controls do not commute with the zero input") {
    const std::vector<ControlVector> pm{vec({1}), vec({-1})}, zero{vec({0}), vec({0})};
    const auto a = rollout(pend, vec({kPi, 0}), pm, 0.1, 20);
    const auto b = rollout(pend, vec({kPi, 0}), zero, 0.1, 20);
    CHECK((a.states.back() - b.states.back()).norm() > 1e-4);
    const auto fine = rollout(pend, vec({kPi, 0}), pm, 0.1, 200);
    CHECK((a.states.back() - fine.states.back()).norm() < 1e-6);
  }
  SUBCASE("time reversal mirrors the angle trace") {
    const std::vector<ControlVector> u(1, vec({0}));
    const auto fwd = rollout(pend, vec({2.0, 0.3}), u, 1.0, 2000);
    const StateVector end = fwd.states.back();
    const auto back = rollout(pend, vec({end[0], -end[1]}), u, 1.0, 2000);
    const std::size_t n = fwd.states.size();
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(fwd.states[k][0] - back.states[n - 1 - k][0]));
    CHECK(worst < 1e-8);
  }
  SUBCASE("empty controls") {
    CHECK_THROWS_AS(rollout(pend, vec({0, 0}), std::vector<ControlVector>{}, 0.1, 1), ContractViolation);
  }
}

TEST_CASE("RK4 converges at fourth order") {
  const auto pend = pendulum_system();
  const StateVector x0 = vec({1.0, 0.5});
  const auto end = [&](std::size_t n) { return integrate_segment(pend, x0, vec({0.3}), 2.0, n).back(); };
  const StateVector ref = end(1000);
  const double coarse = (end(10) - ref).norm();
  const double half = (end(20) - ref).norm();
  CHECK(coarse / half >= 8.0);
}

TEST_CASE("state helpers") {
  const auto pend = pendulum_system();
  CHECK(canonicalize(pend, vec({-0.5, 1}))[0] == doctest::Approx(2 * kPi - 0.5));
  CHECK(canonicalize(pend, vec({2 * kPi, 1}))[0] == 0.0);
  CHECK(canonicalize(pend, vec({0.5, 9}))[1] == 9.0);
  CHECK(state_difference(pend, vec({0.1, 0}), vec({2 * kPi - 0.1, 0}))[0] == doctest::Approx(0.2));
  CHECK(state_difference(pend, vec({2 * kPi - 0.1, 0}), vec({0.1, 0}))[0] == doctest::Approx(-0.2));
  SUBCASE("normalized goal error") {
    Goal g = Goal::point(vec({0.1, 0}));
    CHECK(normalized_goal_error(pend, vec({2 * kPi - 0.1, 1.2}), g) ==
          doctest::Approx(std::hypot(0.2 / (2 * kPi), 0.1)));
    g.free = {false, true};
    CHECK(normalized_goal_error(pend, vec({0.1, 5}), g) == 0.0);
  }
}
