#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlci/gridmdp.hpp"
#include "mlci/maxent.hpp"

namespace mlci {

struct Demonstration {
  std::size_t id = 0;
  ContinuousTrajectory trajectory;
  StateVector start;
  Goal goal;
};

// Union of hypothesis membership over every trajectory sample.
HypothesisBits demo_violations(const Demonstration& demo, const HypothesisSet& hypotheses);

// Hypotheses that no profile touches.
HypothesisBits feasible_set(std::span<const HypothesisBits> profiles, std::size_t hypothesis_count);

inline constexpr double kPhiClamp = 1e-12;

struct RankedConstraint {
  std::size_t hypothesis = 0;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

struct Ranking {
  std::vector<RankedConstraint> ranked;  // feasible hypotheses, best first
  std::vector<double> scores;            // per hypothesis, feasible or not
  std::vector<std::string> warnings;

  std::optional<std::size_t> rank_of(std::size_t hypothesis) const;
};

/// Scores each feasible hypothesis by the dataset log-likelihood gain
/// sum_j -ln(1 - phi_j) and sorts descending, lower index first on ties.
/// phi_per_demo[j][i] is the final violation probability of hypothesis i
/// under demonstration j's own start and goal.
Ranking rank_constraints(const std::vector<std::vector<double>>& phi_per_demo, const HypothesisBits& feasible);

// P(C | no violations in N demos) = P(C) / (P(C) + (1 - P(C)) prod_j (1 - phi_j)).
double posterior(double prior, std::span<const double> phi_per_demo);

// The printed variant with a minus in the denominator. It does not
// normalize (exceeds 1 for ordinary inputs) and exists for comparison only.
double posterior_printed_form(double prior, std::span<const double> phi_per_demo);

// sum_i | mean_j phi_j[i] - mean_j D_j[i] |.
double distribution_distance(const std::vector<std::vector<double>>& phi_per_demo,
                             std::span<const HypothesisBits> profiles);

struct DemoEvaluation {
  std::size_t demo_id = 0;
  bool reachable = false;
  std::string note;
  std::vector<double> phi;  // final phi per hypothesis; zeros when unreachable
  HypothesisBits profile;
};

// Builds the demo's own planning problem (start cell, goal cells, baseline)
// on mdp and runs the max-ent passes.
DemoEvaluation evaluate_demo(const TabularMdp& mdp, const HypothesisSet& hypotheses, const Demonstration& demo,
                             const RewardFn& reward, std::size_t horizon, const HypothesisBits& baseline,
                             std::size_t threads = 1);

struct InferenceReport {
  std::size_t hypothesis_count = 0;
  std::vector<DemoEvaluation> demos;
  HypothesisBits feasible;
  Ranking ranking;
  std::vector<std::size_t> top;  // first top_k ranked hypotheses
  double prior = 0.5;
  double top_posterior = 0.0;
  std::vector<std::string> warnings;
};

InferenceReport infer_constraints(const TabularMdp& mdp, const HypothesisSet& hypotheses,
                                  std::span<const Demonstration> demos, const RewardFn& reward,
                                  std::size_t horizon, double prior = 0.5, std::size_t top_k = 5,
                                  std::size_t threads = 1);

// Flat CSV: hypothesis,feasible,score,rank,phi_<demo id>...
std::string report_csv(const InferenceReport& report, const std::string& header_comment);
std::string report_summary(const InferenceReport& report, const HypothesisSet& hypotheses, const SystemSpec& system);

}  // namespace mlci
