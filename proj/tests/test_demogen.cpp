#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "mlci/demo_io.hpp"
#include "mlci/demogen.hpp"
#include "mlci/errors.hpp"

using namespace mlci;

namespace {

constexpr double kPi = std::numbers::pi;

StateVector vec(std::initializer_list<double> v) {
  StateVector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double a : v) x[k++] = a;
  return x;
}

std::vector<ControlVector> zeros(const DemoProblem& p) {
  return std::vector<ControlVector>(p.steps(), ControlVector::Zero(static_cast<Eigen::Index>(p.system.control_size())));
}

Box c1(const SystemSpec& s) { return make_box(s, {{"theta", {kPi, 1.2 * kPi}}, {"theta_dot", {0.0, 1.2}}}); }

DemoGenOptions pendulum_options(std::size_t n) {
  DemoGenOptions o;
  o.n_pairs = n;
  o.start_bounds = make_box(pendulum_system(), {{"theta", {0.0, 2 * kPi}}, {"theta_dot", {-2.0, 2.0}}});
  o.goal_bounds = o.start_bounds;
  o.seed = 7;
  return o;
}

}  // namespace

TEST_CASE("equilibrium problem needs no control") {
  DemoProblem p;
  p.system = pendulum_system();
  p.start = vec({0.0, 0.0});
  p.goal = Goal::point(vec({0.0, 0.0}));
  const auto r = ilqr_solve(p, zeros(p));
  CHECK(r.cost == doctest::Approx(0.0));
  CHECK(r.goal_error == doctest::Approx(0.0));
  for (const auto& u : r.trajectory.controls) CHECK(u.norm() == doctest::Approx(0.0));
  CHECK_FALSE(r.violated_keep_out);
  CHECK_FALSE(r.left_bounds);
}

TEST_CASE("length-only move matches the minimum-energy control cost") {
  DemoProblem p;
  p.system = tip_system();
  p.start = vec({0.0, 0.0, 1.0, 0.0});
  p.goal = Goal::point(vec({0.0, 0.0, 1.5, 0.0}));
  const auto r = ilqr_solve(p, zeros(p), 10);
  double energy = 0.0;
  for (const auto& u : r.trajectory.controls) energy += u[1] * u[1] * r.trajectory.dt_sim;
  const double d = 0.5, t = 5.0;
  CHECK(energy == doctest::Approx(12 * d * d / (t * t * t)).epsilon(0.05));
  CHECK(r.goal_error < 0.01);
}

TEST_CASE("cost history never increases") {
  DemoProblem p;
  p.system = pendulum_system();
  p.start = vec({0.5, 0.0});
  p.goal = Goal::point(vec({2.5, 0.0}));
  p.keep_out = c1(p.system);
  const auto r = ilqr_solve(p, zeros(p), 20);
  REQUIRE(r.cost_history.size() >= 2);
  for (std::size_t k = 1; k < r.cost_history.size(); ++k) CHECK(r.cost_history[k] <= r.cost_history[k - 1]);
  CHECK(r.cost == doctest::Approx(r.cost_history.back()));
}

TEST_CASE("a heavier terminal weight never worsens the goal error") {
  for (int k = 0; k < 10; ++k) {
    DemoProblem p;
    p.system = pendulum_system();
    p.start = vec({kPi + 0.1 * k - 0.5, 0.1});
    p.goal = Goal::point(vec({kPi - 0.07 * k + 0.3, -0.2}));
    const auto light = ilqr_solve(p, zeros(p));
    p.options.terminal_weight *= 2;
    const auto heavy = ilqr_solve(p, zeros(p));
    CAPTURE(k);
    CHECK(heavy.goal_error <= light.goal_error + 1e-12);
  }
}

TEST_CASE("an impassable keep-out region rejects the pair") {
  const auto sys = pendulum_system();
  const Box band = make_box(sys, {{"theta_dot", {-2.0, 2.0}}});
  DemoProblem p;
  p.system = sys;
  p.start = vec({1.0, 3.0});
  p.goal = Goal::point(vec({1.0, -3.0}));
  p.keep_out = band;
  const auto r = ilqr_solve(p, zeros(p));
  CHECK((r.violated_keep_out || r.goal_error > 0.05));

  DemoGenOptions o;
  o.n_pairs = 1;
  o.start_bounds = make_box(sys, {{"theta", {1.0, 1.001}}, {"theta_dot", {3.0, 3.001}}});
  o.goal_bounds = make_box(sys, {{"theta", {1.0, 1.001}}, {"theta_dot", {-3.001, -3.0}}});
  o.restarts = 1;
  CHECK_THROWS_AS(generate_demos(sys, band, o), EmptyDataset);
}

TEST_CASE("accepted demonstrations respect the keep-out region and tolerance") {
  const auto sys = pendulum_system();
  const Box k = c1(sys);
  const auto set = generate_demos(sys, k, pendulum_options(12));
  CHECK(set.demos.size() + set.rejections.size() == 12);
  const std::size_t dims[] = {0, 1}, counts[] = {10, 10};
  const auto hyp = build_hypotheses(sys, dims, counts);
  for (const auto& d : set.demos) {
    CHECK_FALSE(trajectory_hits(sys, k, d.trajectory));
    CHECK(normalized_goal_error(sys, d.trajectory.states.back(), d.goal) <= 0.05);
    CHECK(d.trajectory.states.front().isApprox(d.start));
    const auto v = demo_violations(d, hyp);
    for (std::size_t h = 0; h < hyp.size(); ++h)
      if (hyp.region(h).inside(k)) CHECK_FALSE(v.test(h));
  }
  for (const auto& r : set.rejections) CHECK_FALSE(r.reason.empty());
}

TEST_CASE("generation is deterministic and thread invariant") {
  const auto sys = pendulum_system();
  auto o = pendulum_options(4);
  const auto a = generate_demos(sys, c1(sys), o);
  o.threads = 3;
  const auto b = generate_demos(sys, c1(sys), o);
  REQUIRE(a.demos.size() == b.demos.size());
  for (std::size_t i = 0; i < a.demos.size(); ++i) {
    CHECK(a.demos[i].id == b.demos[i].id);
    REQUIRE(a.demos[i].trajectory.states.size() == b.demos[i].trajectory.states.size());
    for (std::size_t t = 0; t < a.demos[i].trajectory.states.size(); ++t)
      CHECK(a.demos[i].trajectory.states[t] == b.demos[i].trajectory.states[t]);
  }
  CHECK(a.rejections.size() == b.rejections.size());
}

TEST_CASE("pair sampling avoids the keep-out region") {
  const auto sys = pendulum_system();
  const auto pairs = sample_pairs(sys, c1(sys), pendulum_options(50));
  CHECK(pairs.size() == 50);
  for (const auto& [start, goal] : pairs) {
    CHECK_FALSE(c1(sys).contains(start));
    CHECK_FALSE(c1(sys).contains(goal.target));
  }
}

TEST_CASE("keep-out depth") {
  const auto sys = pendulum_system();
  const Box k = c1(sys);
  CHECK(keep_out_depth(sys, k, vec({1.1 * kPi, 0.6})) > 0);
  CHECK(keep_out_depth(sys, k, vec({0.5 * kPi, 0.6})) < 0);
  CHECK(keep_out_depth(sys, k, vec({1.1 * kPi, 1.2 + 0.12})) == doctest::Approx(-0.01));
}

TEST_CASE("solver contracts") {
  DemoProblem p;
  p.system = pendulum_system();
  p.start = vec({0.0, 0.0});
  p.goal = Goal::point(vec({1.0, 0.0}));
  CHECK_THROWS_AS(ilqr_solve(p, {}), ContractViolation);
  auto bad = zeros(p);
  bad[3][0] = std::nan("");
  CHECK_THROWS_AS(ilqr_solve(p, bad), OptimizationDiverged);
}

TEST_CASE("demonstration csv round trip") {
  const auto sys = pendulum_system();
  const auto set = generate_demos(sys, c1(sys), pendulum_options(2));
  std::stringstream buf;
  write_demos_csv(buf, sys, set.demos, "# header");
  const auto back = read_demos_csv(buf, sys);
  REQUIRE(back.size() == set.demos.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == set.demos[i].id);
    REQUIRE(back[i].trajectory.states.size() == set.demos[i].trajectory.states.size());
    for (std::size_t t = 0; t < back[i].trajectory.states.size(); ++t)
      CHECK(back[i].trajectory.states[t] == set.demos[i].trajectory.states[t]);
    CHECK(back[i].trajectory.dt_sim == doctest::Approx(set.demos[i].trajectory.dt_sim));
  }
}
