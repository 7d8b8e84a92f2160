#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlci/config.hpp"
#include "mlci/demogen.hpp"
#include "mlci/inference.hpp"

namespace mlci {

// Deterministic 64-bit seed for a stream of work under a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// "# mlci <experiment> config_hash=<hex> seed=<n> units: <units>"
std::string csv_header(const ExperimentConfig& cfg, const std::string& experiment, const std::string& units);

// Writes contents to <output_dir>/<name>, creating the directory.
std::filesystem::path write_output(const ExperimentConfig& cfg, const std::string& name, const std::string& contents);

/// Demonstrations per ground-truth constraint, generated (or ingested) once
/// and shared by every experiment of a run.
class DemoCache {
 public:
  const DemoSet& get(const ExperimentConfig& cfg, const std::string& constraint);

 private:
  std::map<std::string, DemoSet> sets_;
};

DemoSet obtain_demos(const ExperimentConfig& cfg, const std::string& constraint);

struct Model {
  GridSpec grid;
  ActionSet actions;
  HypothesisSet hypotheses;
  TabularMdp mdp;
  std::size_t horizon = 0;  // discrete steps
};

Model build_model(const ExperimentConfig& cfg, const std::vector<std::size_t>& cells, double dt);
Model build_model(const ExperimentConfig& cfg);

// Hypotheses standing for a ground-truth box: those it fully covers, or
// those it touches when it covers none.
HypothesisBits true_hypotheses(const HypothesisSet& hypotheses, const Box& truth);

struct AccuracyRow {
  std::string constraint;  // or "all"
  std::size_t cells = 0;
  double dt = 0.0;
  std::size_t pairs = 0;
  std::size_t rollouts = 0;
  std::size_t skipped = 0;  // goal-unreachable pairs
  double mean_error = 0.0;  // NaN when nothing was reachable
};

struct AccuracyResult {
  std::vector<AccuracyRow> rows;
  std::string csv;
  std::optional<double> mean_error(std::size_t cells, double dt) const;  // over all constraints
};

AccuracyResult run_accuracy_experiment(const ExperimentConfig& cfg);

struct RankingRow {
  std::string constraint;
  std::size_t cells = 0;
  double dt = 0.0;
  std::size_t shuffle = 0;
  std::size_t n = 0;
  std::optional<std::size_t> rank;  // of the true constraint, nullopt if infeasible
  std::size_t feasible = 0;
  std::optional<std::size_t> top;
  std::size_t unreachable = 0;  // demos among the first n with no usable MDP path
};

struct RankingSummary {
  std::string constraint;
  std::size_t cells = 0;
  double dt = 0.0;
  std::size_t n = 0;
  std::size_t shuffles = 0;
  double mean_rank = 0.0;  // NaN when the true constraint was never feasible
  std::size_t accepted = 0;
  std::size_t attempted = 0;
};

struct RankingResult {
  std::vector<RankingRow> rows;
  std::vector<RankingSummary> summary;  // at the largest n of each combination
  std::size_t remark_violations = 0;    // runs whose top hypothesis a demo violated
  std::size_t feasibility_breaks = 0;   // feasible set growing as demos are added
  std::size_t truth_violations = 0;     // demos touching a true hypothesis
  std::string csv;
};

RankingResult run_ranking_experiment(const ExperimentConfig& cfg, DemoCache& demos);
RankingResult run_ranking_experiment(const ExperimentConfig& cfg);

struct DistanceRow {
  std::string constraint;  // or "all"
  std::size_t cells = 0;
  double dt = 0.0;
  std::size_t trials = 0;
  std::size_t skipped = 0;
  double mean_distance = 0.0;  // NaN when nothing was reachable
};

struct DistanceResult {
  std::vector<DistanceRow> rows;
  std::string csv;
  std::optional<DistanceRow> combined(std::size_t cells, double dt) const;
};

DistanceResult run_distance_experiment(const ExperimentConfig& cfg, DemoCache& demos);
DistanceResult run_distance_experiment(const ExperimentConfig& cfg);

struct TipResult {
  InferenceReport report;
  std::vector<std::size_t> top;
  std::vector<bool> top_intersects_truth;
  bool top_violated = false;
  double inference_seconds = 0.0;  // wall clock, never written to CSV
  std::size_t states = 0;
  std::size_t actions = 0;
  std::string csv;
  std::string summary_csv;
};

TipResult run_tip_experiment(const ExperimentConfig& cfg, DemoCache& demos);
TipResult run_tip_experiment(const ExperimentConfig& cfg);

struct ConfidenceResult {
  std::size_t hypothesis = 0;
  std::vector<double> phi;        // per demo, for the top hypothesis
  std::vector<double> posterior;  // N = 0..max
  std::string csv;
};

ConfidenceResult run_confidence_report(const ExperimentConfig& cfg, DemoCache& demos);
ConfidenceResult run_confidence_report(const ExperimentConfig& cfg);

struct ComparisonResult {
  Demonstration demo;
  DiscreteTrajectory discrete;
  HypothesisBits demo_violations;
  std::string csv;
};

ComparisonResult compare_trajectories(const ExperimentConfig& cfg, std::size_t demo_id, std::uint64_t seed,
                                      DemoCache& demos);

struct InferResult {
  InferenceReport report;
  std::string csv;
  std::string summary;
};

InferResult run_inference(const ExperimentConfig& cfg, DemoCache& demos);

}  // namespace mlci
