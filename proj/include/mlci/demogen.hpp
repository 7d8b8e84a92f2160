#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlci/gridmdp.hpp"
#include "mlci/inference.hpp"

namespace mlci {

struct IlqrOptions {
  std::size_t max_iters = 10;
  double terminal_weight = 2000.0;  // on the span-normalized squared goal error
  double penalty_weight = 2.0e4;    // on the squared softplus keep-out depth
  double penalty_margin = 0.02;     // normalized units outside the keep-out box
  double penalty_sharpness = 200.0;
};

struct DemoProblem {
  SystemSpec system;
  StateVector start;
  Goal goal;
  double horizon = 5.0;   // seconds
  double dt_sim = 0.01;   // seconds
  std::optional<Box> keep_out;
  IlqrOptions options;

  std::size_t steps() const;
};

struct IlqrResult {
  ContinuousTrajectory trajectory;
  double cost = 0.0;
  double goal_error = 0.0;
  bool converged = false;
  bool violated_keep_out = false;
  bool left_bounds = false;
  std::size_t iterations = 0;
  std::vector<double> cost_history;  // cost after each accepted update, starting with the initial rollout
};

// Signed depth into the box in span-normalized units: positive inside
// (distance to the nearest face), negative outside (distance to the box).
double keep_out_depth(const SystemSpec& system, const Box& box, const StateVector& x);

bool trajectory_hits(const SystemSpec& system, const Box& box, const ContinuousTrajectory& trajectory);

IlqrResult ilqr_solve(const DemoProblem& problem, std::vector<ControlVector> init_controls,
                      std::optional<std::size_t> max_iters = std::nullopt);

struct DemoGenOptions {
  std::size_t n_pairs = 100;
  Box start_bounds;  // sampling region for starts
  Box goal_bounds;   // sampling region for goals
  std::vector<bool> goal_free;
  std::uint64_t seed = 1;
  double goal_tolerance = 0.05;
  std::size_t restarts = 3;
  double init_std = 0.5;
  double horizon = 5.0;
  double dt_sim = 0.01;
  std::size_t threads = 1;
  IlqrOptions ilqr;
};

struct Rejection {
  std::size_t pair = 0;
  std::string reason;
  double goal_error = 0.0;
};

struct DemoSet {
  std::vector<Demonstration> demos;
  std::vector<Rejection> rejections;
};

// Default sampling box: every finite state bound of the system.
Box system_bounds_box(const SystemSpec& system);

// Uniform sample inside a box whose every dim is bounded.
StateVector sample_in_box(const Box& box, std::uint64_t seed, std::uint64_t stream);

std::vector<std::pair<StateVector, Goal>> sample_pairs(const SystemSpec& system, const std::optional<Box>& keep_out,
                                                       const DemoGenOptions& options);

// Throws EmptyDataset when nothing is accepted.
DemoSet generate_demos(const SystemSpec& system, const std::optional<Box>& keep_out, const DemoGenOptions& options);

}  // namespace mlci
