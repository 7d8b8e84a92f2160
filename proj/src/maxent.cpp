#include "mlci/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mlci/errors.hpp"
#include "mlci/parallel.hpp"

namespace mlci {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double squared_control_reward(const StateVector&, const ControlVector& u) { return -u.squaredNorm(); }

PlanningProblem::PlanningProblem(const TabularMdp& mdp, const RewardFn& reward, std::size_t horizon,
                                 CellIndex start, std::vector<CellIndex> goal)
    : PlanningProblem(mdp, reward, horizon, start, std::move(goal), HypothesisBits(mdp.hypothesis_count())) {}

PlanningProblem::PlanningProblem(const TabularMdp& mdp, const RewardFn& reward, std::size_t horizon,
                                 CellIndex start, std::vector<CellIndex> goal, HypothesisBits baseline)
    : mdp_(&mdp), horizon_(horizon), start_(start), goal_(std::move(goal)), baseline_(std::move(baseline)) {
  require(horizon_ >= 1, "PlanningProblem: horizon must be at least 1");
  require(start_ < mdp.state_count(), "PlanningProblem: start cell out of range");
  require(!goal_.empty(), "PlanningProblem: goal set is empty");
  require(baseline_.size() == mdp.hypothesis_count(), "PlanningProblem: baseline size differs from hypothesis count");
  require(static_cast<bool>(reward), "PlanningProblem: reward function is empty");
  goal_mask_.assign(mdp.state_count(), 0);
  for (auto g : goal_) {
    require(g < mdp.state_count(), "PlanningProblem: goal cell out of range");
    goal_mask_[g] = 1;
  }
  const std::size_t n_actions = mdp.action_count();
  step_reward_.resize(mdp.state_count() * n_actions);
  allowed_.assign(mdp.state_count() * n_actions, 0);
  const bool constrained = baseline_.any();
  for (CellIndex s = 0; s < mdp.state_count(); ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const std::size_t k = s * n_actions + a;
      step_reward_[k] = reward(mdp.center(s), mdp.action(a)) * mdp.dt();
      if (!mdp.valid(s, a)) continue;
      if (constrained && (baseline_.intersects(mdp.violations(s, a)) ||
                          baseline_.intersects(mdp.center_violations(mdp.successor(s, a)))))
        continue;
      allowed_[k] = 1;
    }
  }
}

double BackwardMessages::beta(std::size_t t, CellIndex s) const { return std::exp(log_beta(t, s)); }

std::vector<double> ForwardResult::phi_final_all() const {
  std::vector<double> out(hypotheses);
  for (std::size_t i = 0; i < hypotheses; ++i) out[i] = phi_final(i);
  return out;
}

BackwardMessages backward_pass(const PlanningProblem& problem) {
  const auto& mdp = problem.mdp();
  const std::size_t S = mdp.state_count();
  const std::size_t A = mdp.action_count();
  const std::size_t T = problem.horizon();
  std::vector<double> lb((T + 1) * S, kNegInf);
  for (auto g : problem.goal()) lb[T * S + g] = 0.0;

  std::vector<double> terms(A);
  for (std::size_t t = T; t-- > 0;) {
    const double* next = lb.data() + (t + 1) * S;
    double* cur = lb.data() + t * S;
    for (CellIndex s = 0; s < S; ++s) {
      double peak = kNegInf;
      for (std::size_t a = 0; a < A; ++a) {
        terms[a] = kNegInf;
        if (!problem.allowed(s, a)) continue;
        const double v = next[mdp.successor(s, a)];
        if (v == kNegInf) continue;
        terms[a] = problem.step_reward(s, a) + v;
        peak = std::max(peak, terms[a]);
      }
      if (peak == kNegInf) continue;
      double sum = 0.0;
      for (std::size_t a = 0; a < A; ++a)
        if (terms[a] != kNegInf) sum += std::exp(terms[a] - peak);
      cur[s] = peak + std::log(sum);
    }
  }
  if (lb[problem.start()] == kNegInf) {
    std::ostringstream msg;
    msg << "goal unreachable: start cell " << problem.start() << ", goal cells {";
    for (std::size_t k = 0; k < problem.goal().size() && k < 8; ++k) msg << (k ? "," : "") << problem.goal()[k];
    if (problem.goal().size() > 8) msg << ",...";
    msg << "}, horizon " << T;
    throw GoalUnreachable(msg.str());
  }
  return BackwardMessages(T, S, std::move(lb));
}

SoftPolicy policy_from(const PlanningProblem& problem, const BackwardMessages& beta) {
  const auto& mdp = problem.mdp();
  const std::size_t S = mdp.state_count();
  const std::size_t A = mdp.action_count();
  const std::size_t T = problem.horizon();
  require(beta.horizon() == T && beta.states() == S, "policy_from: messages do not match problem");
  std::vector<double> probs(T * S * A, 0.0);
  std::vector<std::uint8_t> defined(T * S, 0);
  for (std::size_t t = 0; t < T; ++t) {
    for (CellIndex s = 0; s < S; ++s) {
      const double here = beta.log_beta(t, s);
      if (here == kNegInf) continue;
      double* row = probs.data() + (t * S + s) * A;
      double sum = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        if (!problem.allowed(s, a)) continue;
        const double v = beta.log_beta(t + 1, mdp.successor(s, a));
        if (v == kNegInf) continue;
        row[a] = std::exp(problem.step_reward(s, a) + v - here);
        sum += row[a];
      }
      for (std::size_t a = 0; a < A; ++a) row[a] /= sum;
      defined[t * S + s] = 1;
    }
  }
  return SoftPolicy(T, S, A, std::move(probs), std::move(defined));
}

ForwardResult forward_phi(const PlanningProblem& problem, const SoftPolicy& pi, std::size_t threads) {
  const auto& mdp = problem.mdp();
  const std::size_t S = mdp.state_count();
  const std::size_t A = mdp.action_count();
  const std::size_t T = problem.horizon();
  const std::size_t H = mdp.hypothesis_count();
  const std::size_t W = mdp.words_per_set();
  require(pi.horizon() == T && pi.states() == S && pi.actions() == A, "forward_phi: policy does not match problem");
  require(pi.defined(0, problem.start()), "forward_phi: policy undefined at start");

  ForwardResult out;
  out.horizon = T;
  out.states = S;
  out.hypotheses = H;
  out.rho.assign((T + 1) * S, 0.0);
  out.phi.assign(H * (T + 1), 0.0);

  // Occupancy, renormalized each step.
  out.rho[problem.start()] = 1.0;
  std::vector<std::vector<CellIndex>> support(T + 1);
  support[0].push_back(problem.start());
  for (std::size_t t = 0; t < T; ++t) {
    const double* cur = out.rho.data() + t * S;
    double* next = out.rho.data() + (t + 1) * S;
    for (CellIndex s : support[t]) {
      for (std::size_t a = 0; a < A; ++a) {
        const double p = pi.prob(t, s, a);
        if (p > 0) next[mdp.successor(s, a)] += cur[s] * p;
      }
    }
    double total = 0.0;
    for (CellIndex s = 0; s < S; ++s) total += next[s];
    for (CellIndex s = 0; s < S; ++s) {
      if (next[s] > 0) {
        next[s] /= total;
        support[t + 1].push_back(s);
      }
    }
  }

  // Entering (s, a) touches the transition's swept hypotheses and the
  // successor center's hypotheses.
  std::vector<Word> entry(S * A * W, 0);
  for (CellIndex s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      if (!mdp.valid(s, a)) continue;
      const auto v = mdp.violations(s, a);
      const auto c = mdp.center_violations(mdp.successor(s, a));
      for (std::size_t k = 0; k < W; ++k) entry[(s * A + a) * W + k] = v[k] | c[k];
    }

  const auto start_center = mdp.center_violations(problem.start());
  parallel_for(H, threads, [&](std::size_t i) {
    double* phi = out.phi.data() + i * (T + 1);
    if (test_bit(start_center, i)) {
      std::fill(phi, phi + T + 1, 1.0);
      return;
    }
    std::vector<double> mass(S, 0.0), next(S, 0.0);
    mass[problem.start()] = 1.0;
    double absorbed = 0.0;
    const std::size_t word = i / 64;
    const Word bit = Word{1} << (i % 64);
    for (std::size_t t = 0; t < T; ++t) {
      for (CellIndex s : support[t]) {
        const double m = mass[s];
        if (m == 0.0) continue;
        for (std::size_t a = 0; a < A; ++a) {
          const double p = pi.prob(t, s, a);
          if (p == 0.0) continue;
          if (entry[(s * A + a) * W + word] & bit)
            absorbed += m * p;
          else
            next[mdp.successor(s, a)] += m * p;
        }
        mass[s] = 0.0;
      }
      std::swap(mass, next);
      phi[t + 1] = std::min(1.0, absorbed);
    }
  });
  return out;
}

DiscreteTrajectory sample_trajectory(const PlanningProblem& problem, const SoftPolicy& pi, std::uint64_t seed) {
  const auto& mdp = problem.mdp();
  require(pi.defined(0, problem.start()), "sample_trajectory: policy undefined at start");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  DiscreteTrajectory traj;
  traj.violations = HypothesisBits(mdp.hypothesis_count());
  traj.violations |= mdp.center_violations(problem.start());
  CellIndex s = problem.start();
  traj.cells.push_back(s);
  for (std::size_t t = 0; t < problem.horizon(); ++t) {
    const double draw = uniform(rng);
    double cumulative = 0.0;
    std::size_t chosen = mdp.action_count();
    for (std::size_t a = 0; a < mdp.action_count(); ++a) {
      const double p = pi.prob(t, s, a);
      if (p == 0.0) continue;
      chosen = a;
      cumulative += p;
      if (draw < cumulative) break;
    }
    traj.actions.push_back(chosen);
    traj.violations |= mdp.violations(s, chosen);
    s = mdp.successor(s, chosen);
    traj.violations |= mdp.center_violations(s);
    traj.cells.push_back(s);
  }
  return traj;
}

MaxEntSolution solve_maxent(const PlanningProblem& problem, std::size_t threads) {
  auto beta = backward_pass(problem);
  auto policy = policy_from(problem, beta);
  auto forward = forward_phi(problem, policy, threads);
  return {std::move(beta), std::move(policy), std::move(forward)};
}

}  // namespace mlci
