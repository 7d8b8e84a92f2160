#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mlci/errors.hpp"
#include "mlci/inference.hpp"
#include "oracle.hpp"

using namespace mlci;

namespace {

constexpr double kPi = std::numbers::pi;

HypothesisSet pendulum_hypotheses() {
  const std::size_t dims[] = {0, 1}, counts[] = {10, 10};
  return build_hypotheses(pendulum_system(), dims, counts);
}

Demonstration demo_from(std::vector<StateVector> states) {
  Demonstration d;
  d.trajectory.dt_sim = 0.01;
  d.trajectory.states = std::move(states);
  for (std::size_t k = 1; k < d.trajectory.states.size(); ++k) d.trajectory.controls.push_back(ControlVector::Zero(1));
  d.start = d.trajectory.states.front();
  d.goal = Goal::point(d.trajectory.states.back());
  return d;
}

StateVector vec(double a, double b) {
  StateVector x(2);
  x << a, b;
  return x;
}

HypothesisBits bits(std::size_t H, std::initializer_list<std::size_t> on) {
  HypothesisBits b(H);
  for (auto i : on) b.set(i);
  return b;
}

}  // namespace

TEST_CASE("demonstration violations") {
  const auto hyp = pendulum_hypotheses();
  SUBCASE("single point at a region center") {
    const auto d = demo_from({vec(kPi / 10, -5.4)});
    CHECK(demo_violations(d, hyp) == bits(100, {0}));
  }
  SUBCASE("trajectory inside one region") {
    const auto d = demo_from({vec(0.1, 0.1), vec(0.2, 0.3), vec(0.3, 0.5)});
    CHECK(demo_violations(d, hyp) == bits(100, {5}));
  }
  SUBCASE("sweep across half a turn at 0.6 rad/s") {
    std::vector<StateVector> states;
    for (double th = 0.0; th <= kPi; th += 0.006) states.push_back(vec(th, 0.6));
    const auto v = demo_violations(demo_from(states), hyp);
    CHECK(v == bits(100, {5, 15, 25, 35, 45}));
  }
}

TEST_CASE("feasible set") {
  const std::vector<HypothesisBits> clean{HypothesisBits(10), HypothesisBits(10)};
  CHECK(feasible_set(clean, 10).count() == 10);
  const std::vector<HypothesisBits> one{bits(10, {7})};
  CHECK_FALSE(feasible_set(one, 10).test(7));
  CHECK(feasible_set(one, 10).count() == 9);
  const std::vector<HypothesisBits> a{bits(10, {1, 2})}, b{bits(10, {2, 5})}, ab{bits(10, {1, 2}), bits(10, {2, 5})};
  auto both = feasible_set(a, 10);
  both &= feasible_set(b, 10);
  CHECK(feasible_set(ab, 10) == both);
  CHECK_THROWS_AS(feasible_set(std::vector<HypothesisBits>{}, 10), ContractViolation);
}

TEST_CASE("ranking") {
  SUBCASE("tie between 2 ln 2 and ln 4 goes to the lower index") {
    const std::vector<std::vector<double>> phi{{0.75, 0.5}, {0.0, 0.5}};
    HypothesisBits all(2);
    all.set(0);
    all.set(1);
    const auto r = rank_constraints(phi, all);
    CHECK(r.scores[0] == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(r.scores[1] == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
    REQUIRE(r.ranked.size() == 2);
    CHECK(r.ranked[0].hypothesis == 0);
    CHECK(r.ranked[0].rank == 1);
    CHECK(r.ranked[1].rank == 2);

    const std::vector<std::vector<double>> swapped{{0.5, 0.75}, {0.5, 0.0}};
    CHECK(rank_constraints(swapped, all).ranked[0].hypothesis == 0);
  }
  SUBCASE("single demo orders by phi") {
    const std::vector<std::vector<double>> phi{{0.1, 0.9, 0.0, 0.4}};
    const auto r = rank_constraints(phi, bits(4, {0, 1, 2, 3}));
    std::vector<std::size_t> order;
    for (const auto& c : r.ranked) order.push_back(c.hypothesis);
    CHECK(order == std::vector<std::size_t>{1, 3, 0, 2});
    CHECK(r.scores[2] == 0.0);
  }
  SUBCASE("infeasible hypotheses are dropped, ranks stay dense") {
    const std::vector<std::vector<double>> phi{{0.9, 0.5, 0.3}};
    const auto r = rank_constraints(phi, bits(3, {1, 2}));
    REQUIRE(r.ranked.size() == 2);
    CHECK(r.ranked[0].hypothesis == 1);
    CHECK_FALSE(r.rank_of(0).has_value());
    CHECK(r.rank_of(2) == 2u);
  }
  SUBCASE("phi of one is clamped and reported") {
    const std::vector<std::vector<double>> phi{{1.0, 0.2}};
    const auto r = rank_constraints(phi, bits(2, {0, 1}));
    CHECK(std::isfinite(r.scores[0]));
    CHECK(r.scores[0] == doctest::Approx(-std::log(kPhiClamp)));
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("empty feasible set warns") {
    const std::vector<std::vector<double>> phi{{0.5}};
    const auto r = rank_constraints(phi, HypothesisBits(1));
    CHECK(r.ranked.empty());
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("demo order does not matter") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> phi(5, std::vector<double>(20));
    for (auto& row : phi)
      for (auto& v : row) v = u(rng);
    HypothesisBits all(20);
    for (std::size_t i = 0; i < 20; ++i) all.set(i);
    const auto a = rank_constraints(phi, all);
    std::reverse(phi.begin(), phi.end());
    const auto b = rank_constraints(phi, all);
    for (std::size_t k = 0; k < 20; ++k) CHECK(a.ranked[k].hypothesis == b.ranked[k].hypothesis);
  }
}

TEST_CASE("posterior") {
  const std::vector<double> one{0.5}, two{0.5, 0.5}, zeros{0.0, 0.0};
  CHECK(std::abs(posterior(0.5, one) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(posterior(0.5, two) - 0.8) < 1e-12);
  CHECK(posterior(0.3, std::vector<double>{}) == 0.3);
  CHECK(std::abs(posterior(0.3, zeros) - 0.3) < 1e-12);
  CHECK(posterior(0.5, std::vector<double>{1.0}) == 1.0);
  CHECK_THROWS_AS(posterior(0.0, one), ContractViolation);
  CHECK_THROWS_AS(posterior(1.0, one), ContractViolation);
  SUBCASE("printed form does not normalize") {
    CHECK(posterior_printed_form(0.5, one) == doctest::Approx(2.0));
    CHECK(posterior_printed_form(0.5, one) > 1.0);
  }
  SUBCASE("monotone in phi and in N") {
    double last = 0.0;
    for (double phi = 0.0; phi <= 1.0; phi += 0.05) {
      const double p = posterior(0.4, std::vector<double>{phi, 0.3});
      CHECK(p >= last);
      last = p;
    }
    std::vector<double> phis;
    last = posterior(0.4, phis);
    for (int n = 0; n < 10; ++n) {
      phis.push_back(0.2);
      const double p = posterior(0.4, phis);
      CHECK(p >= last);
      last = p;
    }
  }
}

TEST_CASE("distribution distance") {
  const std::vector<std::vector<double>> phi{{0.3, 0.7}, {0.3, 0.7}};
  const std::vector<HypothesisBits> prof{bits(2, {0}), bits(2, {1})};
  CHECK(distribution_distance(phi, prof) == doctest::Approx(0.4).epsilon(1e-14));
  const std::vector<std::vector<double>> exact{{1.0, 0.0}};
  const std::vector<HypothesisBits> match{bits(2, {0})};
  CHECK(distribution_distance(exact, match) == 0.0);
  const std::vector<std::vector<double>> worst{{0.0, 0.0, 0.0}};
  const std::vector<HypothesisBits> all{bits(3, {0, 1, 2})};
  CHECK(distribution_distance(worst, all) == 3.0);
  CHECK_THROWS_AS(distribution_distance({}, std::vector<HypothesisBits>{}), ContractViolation);
}

TEST_CASE("inference on a discretized pendulum") {
  const auto sys = pendulum_system();
  const std::size_t cells[] = {10, 10}, levels[] = {9};
  const auto grid = make_grid(sys, cells);
  const auto actions = make_actions(sys, levels);
  const auto hyp = pendulum_hypotheses();
  const auto mdp = build_mdp(sys, grid, actions, 0.5, hyp);
  const std::size_t T = 10;

  // Demonstrations sampled from the MDP with region 55 forbidden.
  HypothesisBits truth(100);
  truth.set(55);
  std::vector<Demonstration> demos;
  std::mt19937_64 rng(5);
  while (demos.size() < 6) {
    const CellIndex s = rng() % 100, g = rng() % 100;
    PlanningProblem p(mdp, squared_control_reward, T, s, {g}, truth);
    try {
      const auto pi = policy_from(p, backward_pass(p));
      const auto traj = sample_trajectory(p, pi, rng());
      std::vector<StateVector> states;
      for (auto c : traj.cells) states.push_back(grid.center_of(c));
      auto d = demo_from(states);
      d.id = demos.size();
      if (demo_violations(d, hyp).test(55)) continue;
      demos.push_back(d);
    } catch (const GoalUnreachable&) {
    }
  }
  const auto report = infer_constraints(mdp, hyp, demos, squared_control_reward, T, 0.5, 5);
  REQUIRE_FALSE(report.top.empty());
  for (const auto& d : report.demos) CHECK_FALSE(d.profile.test(report.top.front()));
  CHECK(report.feasible.test(55));
  CHECK(report.top_posterior >= 0.5);
  CHECK(report.top_posterior <= 1.0);

  const auto csv = report_csv(report, "# test");
  CHECK(csv.rfind("# test\nhypothesis,feasible,score,rank,phi_demo0", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 102);
  CHECK(report_summary(report, hyp, sys).find("most likely") != std::string::npos);

  SUBCASE("unreachable demos contribute nothing") {
    auto far = demos.front();
    far.goal = Goal::point(vec(far.start[0] + kPi, 5.0));
    const auto eval = evaluate_demo(mdp, hyp, far, squared_control_reward, 1, HypothesisBits(100));
    CHECK_FALSE(eval.reachable);
    CHECK_FALSE(eval.note.empty());
    for (double phi : eval.phi) CHECK(phi == 0.0);
  }
}
