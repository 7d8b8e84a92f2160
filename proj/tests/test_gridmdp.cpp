#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mlci/errors.hpp"
#include "mlci/gridmdp.hpp"
#include "mlci/mdp_cache.hpp"

using namespace mlci;

namespace {

constexpr double kPi = std::numbers::pi;

StateVector vec(double a, double b) {
  StateVector x(2);
  x << a, b;
  return x;
}

HypothesisSet pendulum_hypotheses() {
  const std::size_t dims[] = {0, 1}, counts[] = {10, 10};
  return build_hypotheses(pendulum_system(), dims, counts);
}

GridSpec pendulum_grid(std::size_t a, std::size_t b) {
  const std::size_t c[] = {a, b};
  return make_grid(pendulum_system(), c);
}

ActionSet pendulum_actions() {
  const std::size_t levels[] = {9};
  return make_actions(pendulum_system(), levels);
}

bool subset(std::span<const Word> a, std::span<const Word> b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] & ~b[k]) return false;
  return true;
}

}  // namespace

TEST_CASE("bitset") {
  HypothesisBits b(70);
  CHECK(b.none());
  b.set(3);
  b.set(69);
  CHECK(b.count() == 2);
  CHECK(b.indices() == std::vector<std::size_t>{3, 69});
  const auto s = b.to_string();
  CHECK(s.size() == 70);
  CHECK(HypothesisBits::from_string(s) == b);
  CHECK_THROWS_AS(HypothesisBits::from_string("01x"), ContractViolation);
  HypothesisBits c(70);
  c.set(69);
  CHECK(b.intersects(c));
  c &= b;
  CHECK(c.count() == 1);
  CHECK_THROWS_AS(b.test(70), ContractViolation);
}

TEST_CASE("cell lookup on the 10 x 10 pendulum grid") {
  const auto grid = pendulum_grid(10, 10);
  CHECK(grid.state_count() == 100);
  CHECK(grid.cell_of(vec(0.1, 0.0)) == 5);
  CHECK(grid.unravel(5) == std::vector<std::size_t>{0, 5});
  CHECK(grid.cell_of(vec(2 * kPi + 0.1, 0.0)) == grid.cell_of(vec(0.1, 0.0)));
  CHECK(grid.cell_of(vec(-2 * kPi + 0.1, 0.0)) == grid.cell_of(vec(0.1, 0.0)));
  CHECK(grid.cell_of(vec(0.1, 6.0)) == 9);
  CHECK_FALSE(grid.cell_of(vec(0.1, 6.0001)).has_value());
  CHECK_FALSE(grid.cell_of(vec(0.1, -6.5)).has_value());
  CHECK(grid.cell_of(vec(0.1, -6.0)) == 0);

  const auto c00 = grid.center_of(0);
  CHECK(c00[0] == doctest::Approx(kPi / 10));
  CHECK(c00[1] == doctest::Approx(-5.4));
  const std::size_t c55[] = {5, 5};
  const auto x55 = grid.center_of(grid.ravel(c55));
  CHECK(x55[0] == doctest::Approx(11 * kPi / 10));
  CHECK(x55[1] == doctest::Approx(0.6));
  for (CellIndex c = 0; c < grid.state_count(); ++c) CHECK(grid.cell_of(grid.center_of(c)) == c);
}

TEST_CASE("actions") {
  const auto a = pendulum_actions();
  REQUIRE(a.size() == 9);
  CHECK(a.actions.front()[0] == -2.0);
  CHECK(a.actions[4][0] == 0.0);
  CHECK(a.actions.back()[0] == 2.0);
  const std::size_t levels[] = {5, 3};
  const auto t = make_actions(tip_system(), levels);
  REQUIRE(t.size() == 15);
  CHECK(t.actions[0] == (Eigen::VectorXd(2) << -2, -1).finished());
  CHECK(t.actions[1] == (Eigen::VectorXd(2) << -2, 0).finished());
  CHECK(t.actions[14] == (Eigen::VectorXd(2) << 2, 1).finished());
  const std::size_t zero[] = {0};
  CHECK_THROWS_AS(make_actions(pendulum_system(), zero), ContractViolation);
}

TEST_CASE("hypothesis grids") {
  const auto h = pendulum_hypotheses();
  REQUIRE(h.size() == 100);
  const auto& r0 = h.region(0);
  CHECK(r0.bounds[0].lower == 0.0);
  CHECK(r0.bounds[0].upper == doctest::Approx(2 * kPi / 10));
  CHECK(r0.bounds[1].lower == -6.0);
  CHECK(r0.bounds[1].upper == doctest::Approx(-4.8));

  SUBCASE("telescoping pendulum over angle and length") {
    const auto tip = tip_system();
    const std::size_t dims[] = {tip.state_index("theta"), tip.state_index("l")}, counts[] = {10, 10};
    const auto t = build_hypotheses(tip, dims, counts);
    CHECK(t.size() == 100);
    for (const auto& r : t.regions()) {
      CHECK(r.bounds[1].wildcard());
      CHECK(r.bounds[3].wildcard());
      CHECK_FALSE(r.bounds[0].wildcard());
    }
  }
  SUBCASE("universal region") {
    const std::size_t dims[] = {0, 1}, counts[] = {1, 1};
    const auto u = build_hypotheses(pendulum_system(), dims, counts);
    for (double th : {0.0, 1.0, 6.2})
      for (double v : {-6.0, 0.0, 6.0}) CHECK(u.membership(vec(th, v)).test(0));
  }
  SUBCASE("membership") {
    const auto grid = pendulum_grid(10, 10);
    for (std::size_t i = 0; i < 100; ++i) {
      const auto m = h.membership(grid.center_of(i));
      CHECK(m.count() == 1);
      CHECK(m.test(i));
    }
    // Shared edge theta_dot = -4.8 between regions 0 and 1.
    const auto edge = h.membership(vec(0.1, -6.0 + 1.2));
    CHECK(edge.test(1));
    CHECK_FALSE(edge.test(0));
    CHECK(h.membership(vec(0.1, 6.0)).test(9));
    CHECK(HypothesisSet().membership(vec(0, 0)).size() == 0);
  }
  SUBCASE("coverage of a box") {
    const auto c1 = make_box(pendulum_system(), {{"theta", {kPi, 1.2 * kPi}}, {"theta_dot", {0.0, 1.2}}});
    const auto covered = h.covered_by(c1);
    CHECK(covered.indices() == std::vector<std::size_t>{55});
  }
  SUBCASE("contracts") {
    const std::size_t dims[] = {0, 1}, zero[] = {10, 0}, repeated[] = {0, 0}, counts[] = {10, 10};
    CHECK_THROWS_AS(build_hypotheses(pendulum_system(), dims, zero), ContractViolation);
    CHECK_THROWS_AS(build_hypotheses(pendulum_system(), repeated, counts), ContractViolation);
  }
}

TEST_CASE("transition table") {
  const auto sys = pendulum_system();
  const auto hyp = pendulum_hypotheses();
  const auto actions = pendulum_actions();

  SUBCASE("cell centred at (pi, 0.6)") {
    const auto grid = pendulum_grid(9, 10);
    const std::size_t coords[] = {4, 5};
    const CellIndex s = grid.ravel(coords);
    REQUIRE(grid.center_of(s)[0] == doctest::Approx(kPi));
    REQUIRE(grid.center_of(s)[1] == doctest::Approx(0.6));
    const auto mdp = build_mdp(sys, grid, actions, 0.1, hyp);
    const std::size_t zero_action = 4;
    REQUIRE(mdp.valid(s, zero_action));
    const auto next = grid.unravel(mdp.successor(s, zero_action));
    CHECK(std::abs(static_cast<int>(next[0]) - 4) <= 1);
    CHECK(std::abs(static_cast<int>(next[1]) - 5) <= 1);
    CHECK(test_bit(mdp.violations(s, zero_action), 55));
  }

  SUBCASE("a fast transition marks the column it jumps over") {
    const auto grid = pendulum_grid(10, 10);
    const auto mdp = build_mdp(sys, grid, actions, 0.2, hyp);
    const CellIndex s = 9;  // theta cell 0, theta_dot centre 5.4
    const std::size_t brake = 0;  // u = -2
    REQUIRE(mdp.valid(s, brake));
    const auto next = grid.unravel(mdp.successor(s, brake));
    CHECK(next[0] >= 2);
    CHECK(test_bit(mdp.center_violations(s), 9));
    CHECK_FALSE(test_bit(mdp.center_violations(mdp.successor(s, brake)), 19));
    CHECK(test_bit(mdp.violations(s, brake), 19));
  }

  SUBCASE("structural properties") {
    const auto grid = pendulum_grid(10, 10);
    const double dt = 0.3;
    const auto mdp = build_mdp(sys, grid, actions, dt, hyp, 20, 1);
    CHECK(mdp.diverged_count() == 0);
    std::size_t invalid = 0;
    for (CellIndex s = 0; s < grid.state_count(); ++s) {
      for (std::size_t a = 0; a < actions.size(); ++a) {
        CHECK(test_bit(mdp.violations(s, a), s));  // hypothesis grid equals the state grid here
        const auto end = integrate_segment(sys, grid.center_of(s), actions.actions[a], dt, 20).back();
        const auto cell = grid.cell_of(end);
        CHECK(mdp.valid(s, a) == cell.has_value());
        if (!cell) {
          ++invalid;
          continue;
        }
        CHECK(mdp.successor(s, a) == *cell);
        CHECK(test_bit(mdp.violations(s, a), *cell));
      }
    }
    CHECK(invalid > 0);
    CHECK(build_mdp(sys, grid, actions, dt, hyp, 20, 3) == mdp);
    CHECK(build_mdp(sys, grid, actions, dt, hyp, 20, 1) == mdp);
  }

  SUBCASE("finer sampling only adds detections") {
    const auto grid = pendulum_grid(10, 10);
    std::vector<TabularMdp> m;
    for (std::size_t sub : {5, 10, 20, 40}) m.push_back(build_mdp(sys, grid, actions, 0.5, hyp, sub));
    for (std::size_t k = 1; k < m.size(); ++k)
      for (CellIndex s = 0; s < grid.state_count(); ++s)
        for (std::size_t a = 0; a < actions.size(); ++a)
          if (m[k - 1].valid(s, a) && m[k].valid(s, a)) CHECK(subset(m[k - 1].violations(s, a), m[k].violations(s, a)));
  }

  SUBCASE("contracts") {
    const auto grid = pendulum_grid(10, 10);
    CHECK_THROWS_AS(build_mdp(sys, grid, actions, 0.0, hyp), ContractViolation);
    CHECK_THROWS_AS(build_mdp(sys, grid, actions, 0.1, hyp, 0), ContractViolation);
  }
}

TEST_CASE("transition cache") {
  const auto sys = pendulum_system();
  const auto grid = pendulum_grid(10, 10);
  const auto hyp = pendulum_hypotheses();
  const auto actions = pendulum_actions();
  const auto dir = std::filesystem::temp_directory_path() / "mlci_test_cache";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  const auto mdp = build_mdp(sys, grid, actions, 0.2, hyp);
  const auto key = mdp_cache_key(sys, grid, actions, 0.2, hyp, 20);
  CHECK(key != mdp_cache_key(sys, grid, actions, 0.3, hyp, 20));
  CHECK(key != mdp_cache_key(sys, grid, actions, 0.2, hyp, 10));
  const auto path = dir / "t.bin";
  save_mdp(path, mdp, key);
  const auto loaded = load_mdp(path, key);
  REQUIRE(loaded.has_value());
  CHECK(*loaded == mdp);
  CHECK_FALSE(load_mdp(path, key + 1).has_value());
  CHECK_FALSE(load_mdp(dir / "missing.bin", key).has_value());
  {
    std::ofstream junk(dir / "junk.bin", std::ios::binary);
    junk << "MLCIMDP";
  }
  CHECK_FALSE(load_mdp(dir / "junk.bin", key).has_value());
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_FALSE(load_mdp(path, key).has_value());

  const auto cached_dir = dir / "store";
  const auto first = build_mdp_cached(cached_dir, sys, grid, actions, 0.2, hyp, 20, 1);
  CHECK(std::distance(std::filesystem::directory_iterator(cached_dir), std::filesystem::directory_iterator{}) == 1);
  const auto second = build_mdp_cached(cached_dir, sys, grid, actions, 0.2, hyp, 20, 1);
  CHECK(first == mdp);
  CHECK(second == mdp);
  std::filesystem::remove_all(dir);
}
