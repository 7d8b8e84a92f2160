#include "mlci/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "mlci/errors.hpp"

namespace mlci {

HypothesisBits demo_violations(const Demonstration& demo, const HypothesisSet& hypotheses) {
  HypothesisBits bits(hypotheses.size());
  for (const auto& x : demo.trajectory.states) hypotheses.accumulate(x, bits.words());
  return bits;
}

HypothesisBits feasible_set(std::span<const HypothesisBits> profiles, std::size_t hypothesis_count) {
  require(!profiles.empty(), "feasible_set: need at least one demonstration");
  HypothesisBits violated(hypothesis_count);
  for (const auto& p : profiles) violated |= p;
  HypothesisBits feasible(hypothesis_count);
  for (std::size_t i = 0; i < hypothesis_count; ++i) feasible.set(i, !violated.test(i));
  return feasible;
}

std::optional<std::size_t> Ranking::rank_of(std::size_t hypothesis) const {
  for (const auto& r : ranked)
    if (r.hypothesis == hypothesis) return r.rank;
  return std::nullopt;
}

Ranking rank_constraints(const std::vector<std::vector<double>>& phi_per_demo, const HypothesisBits& feasible) {
  const std::size_t H = feasible.size();
  Ranking out;
  out.scores.assign(H, 0.0);
  bool clamped = false;
  for (const auto& phis : phi_per_demo) {
    require(phis.size() == H, "rank_constraints: phi vector size differs from hypothesis count");
    for (std::size_t i = 0; i < H; ++i) {
      const double phi = std::clamp(phis[i], 0.0, 1.0);
      if (phi > 1.0 - kPhiClamp && feasible.test(i)) clamped = true;
      out.scores[i] -= std::log1p(-std::min(phi, 1.0 - kPhiClamp));
    }
  }
  for (std::size_t i = 0; i < H; ++i)
    if (feasible.test(i)) out.ranked.push_back({i, out.scores[i], 0});
  std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.hypothesis < b.hypothesis;
  });
  for (std::size_t k = 0; k < out.ranked.size(); ++k) out.ranked[k].rank = k + 1;
  if (out.ranked.empty()) out.warnings.push_back("every hypothesis is violated by some demonstration");
  if (clamped)
    out.warnings.push_back("a feasible hypothesis has phi = 1 for some demonstration (model mismatch); score clamped");
  return out;
}

double posterior(double prior, std::span<const double> phi_per_demo) {
  require(prior > 0.0 && prior < 1.0, "posterior: prior must lie in (0, 1)");
  double survive = 1.0;
  for (double phi : phi_per_demo) {
    require(phi >= 0.0 && phi <= 1.0, "posterior: phi must lie in [0, 1]");
    survive *= 1.0 - phi;
  }
  return prior / (prior + (1.0 - prior) * survive);
}

double posterior_printed_form(double prior, std::span<const double> phi_per_demo) {
  require(prior > 0.0 && prior < 1.0, "posterior: prior must lie in (0, 1)");
  double survive = 1.0;
  for (double phi : phi_per_demo) survive *= 1.0 - phi;
  return prior / (prior - (1.0 - prior) * survive);
}

double distribution_distance(const std::vector<std::vector<double>>& phi_per_demo,
                             std::span<const HypothesisBits> profiles) {
  require(!phi_per_demo.empty(), "distribution_distance: need at least one demonstration");
  require(phi_per_demo.size() == profiles.size(), "distribution_distance: phi and profile counts differ");
  const std::size_t H = phi_per_demo.front().size();
  const double n = static_cast<double>(phi_per_demo.size());
  double total = 0.0;
  for (std::size_t i = 0; i < H; ++i) {
    double model = 0.0, empirical = 0.0;
    for (std::size_t j = 0; j < phi_per_demo.size(); ++j) {
      require(phi_per_demo[j].size() == H && profiles[j].size() == H,
              "distribution_distance: hypothesis sets differ");
      model += phi_per_demo[j][i];
      empirical += profiles[j].test(i) ? 1.0 : 0.0;
    }
    total += std::abs(model / n - empirical / n);
  }
  return total;
}

DemoEvaluation evaluate_demo(const TabularMdp& mdp, const HypothesisSet& hypotheses, const Demonstration& demo,
                             const RewardFn& reward, std::size_t horizon, const HypothesisBits& baseline,
                             std::size_t threads) {
  DemoEvaluation eval;
  eval.demo_id = demo.id;
  eval.profile = demo_violations(demo, hypotheses);
  eval.phi.assign(hypotheses.size(), 0.0);
  const auto start = mdp.grid().cell_of(demo.start);
  if (!start) {
    eval.note = "start outside grid";
    return eval;
  }
  std::vector<CellIndex> goals;
  try {
    goals = goal_cells(mdp.grid(), demo.goal);
  } catch (const ContractViolation&) {
    eval.note = "goal outside grid";
    return eval;
  }
  try {
    PlanningProblem problem(mdp, reward, horizon, *start, std::move(goals), baseline);
    const auto solution = solve_maxent(problem, threads);
    eval.phi = solution.forward.phi_final_all();
    eval.reachable = true;
  } catch (const GoalUnreachable& e) {
    eval.note = e.what();
  }
  return eval;
}

InferenceReport infer_constraints(const TabularMdp& mdp, const HypothesisSet& hypotheses,
                                  std::span<const Demonstration> demos, const RewardFn& reward,
                                  std::size_t horizon, double prior, std::size_t top_k, std::size_t threads) {
  require(!demos.empty(), "infer_constraints: no demonstrations");
  require(mdp.hypothesis_count() == hypotheses.size(), "infer_constraints: MDP built for another hypothesis set");
  InferenceReport report;
  report.hypothesis_count = hypotheses.size();
  report.prior = prior;
  const HypothesisBits none(hypotheses.size());
  std::vector<std::vector<double>> phis;
  std::vector<HypothesisBits> profiles;
  for (const auto& demo : demos) {
    auto eval = evaluate_demo(mdp, hypotheses, demo, reward, horizon, none, threads);
    if (!eval.reachable)
      report.warnings.push_back("demo " + std::to_string(demo.id) + " contributes no likelihood: " + eval.note);
    phis.push_back(eval.phi);
    profiles.push_back(eval.profile);
    report.demos.push_back(std::move(eval));
  }
  report.feasible = feasible_set(profiles, hypotheses.size());
  report.ranking = rank_constraints(phis, report.feasible);
  for (const auto& w : report.ranking.warnings) report.warnings.push_back(w);
  for (std::size_t k = 0; k < report.ranking.ranked.size() && k < top_k; ++k)
    report.top.push_back(report.ranking.ranked[k].hypothesis);
  if (!report.top.empty()) {
    std::vector<double> top_phi;
    for (const auto& p : phis) top_phi.push_back(p[report.top.front()]);
    report.top_posterior = posterior(prior, top_phi);
  } else {
    report.top_posterior = prior;
  }
  return report;
}

std::string report_csv(const InferenceReport& report, const std::string& header_comment) {
  std::ostringstream out;
  out << std::setprecision(17);
  if (!header_comment.empty()) out << header_comment << '\n';
  out << "hypothesis,feasible,score,rank";
  for (const auto& d : report.demos) out << ",phi_demo" << d.demo_id;
  out << '\n';
  for (std::size_t i = 0; i < report.hypothesis_count; ++i) {
    const auto rank = report.ranking.rank_of(i);
    out << i << ',' << (report.feasible.test(i) ? 1 : 0) << ',' << report.ranking.scores[i] << ','
        << (rank ? *rank : 0);
    for (const auto& d : report.demos) out << ',' << d.phi[i];
    out << '\n';
  }
  return out.str();
}

std::string report_summary(const InferenceReport& report, const HypothesisSet& hypotheses, const SystemSpec& system) {
  std::ostringstream out;
  out << std::setprecision(6);
  std::size_t reachable = 0;
  for (const auto& d : report.demos) reachable += d.reachable;
  out << "demonstrations: " << report.demos.size() << " (" << reachable << " with a reachable goal)\n";
  out << "feasible hypotheses: " << report.feasible.count() << " of " << report.hypothesis_count << '\n';
  out << "most likely constraints:\n";
  for (std::size_t k = 0; k < report.top.size(); ++k) {
    const auto i = report.top[k];
    out << "  #" << k + 1 << " hypothesis " << i << " score " << report.ranking.scores[i] << "  ";
    const auto& box = hypotheses.region(i);
    for (std::size_t d = 0; d < box.bounds.size(); ++d) {
      if (box.bounds[d].wildcard()) continue;
      out << system.state_dims[d].label << "[" << box.bounds[d].lower << ", " << box.bounds[d].upper << ") ";
    }
    out << '\n';
  }
  out << "posterior of top constraint (prior " << report.prior << "): " << report.top_posterior << '\n';
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace mlci
