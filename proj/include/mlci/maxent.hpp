#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mlci/gridmdp.hpp"

namespace mlci {

// Reward rate r(x, u) per unit time.
using RewardFn = std::function<double(const StateVector&, const ControlVector&)>;

// r = -|u|^2, i.e. minimum squared control effort.
double squared_control_reward(const StateVector& x, const ControlVector& u);

/// Fixed-horizon, goal-conditioned planning problem on a tabular MDP.
///
/// A transition is usable when it is valid and neither its violation bitset
/// nor the successor cell's center touches a baseline hypothesis.
class PlanningProblem {
 public:
  PlanningProblem(const TabularMdp& mdp, const RewardFn& reward, std::size_t horizon, CellIndex start,
                  std::vector<CellIndex> goal, HypothesisBits baseline);
  PlanningProblem(const TabularMdp& mdp, const RewardFn& reward, std::size_t horizon, CellIndex start,
                  std::vector<CellIndex> goal);

  const TabularMdp& mdp() const { return *mdp_; }
  std::size_t horizon() const { return horizon_; }
  CellIndex start() const { return start_; }
  const std::vector<CellIndex>& goal() const { return goal_; }
  bool is_goal(CellIndex s) const { return goal_mask_[s] != 0; }
  const HypothesisBits& baseline() const { return baseline_; }

  // r(x_s, u_a) * dt for the cell center and action.
  double step_reward(CellIndex s, std::size_t a) const { return step_reward_[s * mdp_->action_count() + a]; }
  bool allowed(CellIndex s, std::size_t a) const { return allowed_[s * mdp_->action_count() + a] != 0; }

 private:
  const TabularMdp* mdp_;
  std::size_t horizon_;
  CellIndex start_;
  std::vector<CellIndex> goal_;
  std::vector<std::uint8_t> goal_mask_;
  HypothesisBits baseline_;
  std::vector<double> step_reward_;
  std::vector<std::uint8_t> allowed_;
};

/// Backward messages in log form: log_beta(t, s) = log sum over
/// goal-reaching continuations from (t, s) of exp(accumulated reward).
class BackwardMessages {
 public:
  BackwardMessages(std::size_t horizon, std::size_t states, std::vector<double> log_beta)
      : horizon_(horizon), states_(states), log_beta_(std::move(log_beta)) {}

  std::size_t horizon() const { return horizon_; }
  std::size_t states() const { return states_; }
  double log_beta(std::size_t t, CellIndex s) const { return log_beta_[t * states_ + s]; }
  double beta(std::size_t t, CellIndex s) const;

 private:
  std::size_t horizon_;
  std::size_t states_;
  std::vector<double> log_beta_;
};

class SoftPolicy {
 public:
  SoftPolicy(std::size_t horizon, std::size_t states, std::size_t actions, std::vector<double> probs,
             std::vector<std::uint8_t> defined)
      : horizon_(horizon), states_(states), actions_(actions), probs_(std::move(probs)), defined_(std::move(defined)) {}

  std::size_t horizon() const { return horizon_; }
  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }
  bool defined(std::size_t t, CellIndex s) const { return defined_[t * states_ + s] != 0; }
  double prob(std::size_t t, CellIndex s, std::size_t a) const { return probs_[(t * states_ + s) * actions_ + a]; }

 private:
  std::size_t horizon_;
  std::size_t states_;
  std::size_t actions_;
  std::vector<double> probs_;
  std::vector<std::uint8_t> defined_;
};

struct ForwardResult {
  std::size_t horizon = 0;
  std::size_t states = 0;
  std::size_t hypotheses = 0;
  std::vector<double> rho;  // [t][s]
  std::vector<double> phi;  // [i][t]

  double occupancy(std::size_t t, CellIndex s) const { return rho[t * states + s]; }
  double phi_at(std::size_t i, std::size_t t) const { return phi[i * (horizon + 1) + t]; }
  double phi_final(std::size_t i) const { return phi_at(i, horizon); }
  std::vector<double> phi_final_all() const;
};

// Throws GoalUnreachable when no usable trajectory reaches the goal.
BackwardMessages backward_pass(const PlanningProblem& problem);

SoftPolicy policy_from(const PlanningProblem& problem, const BackwardMessages& beta);

ForwardResult forward_phi(const PlanningProblem& problem, const SoftPolicy& pi, std::size_t threads = 1);

struct DiscreteTrajectory {
  std::vector<CellIndex> cells;      // horizon + 1 entries
  std::vector<std::size_t> actions;  // horizon entries
  HypothesisBits violations;         // transition bitsets plus visited cell centers
};

DiscreteTrajectory sample_trajectory(const PlanningProblem& problem, const SoftPolicy& pi, std::uint64_t seed);

struct MaxEntSolution {
  BackwardMessages beta;
  SoftPolicy policy;
  ForwardResult forward;
};

MaxEntSolution solve_maxent(const PlanningProblem& problem, std::size_t threads = 1);

}  // namespace mlci
