#include "mlci/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mlci/demo_io.hpp"
#include "mlci/errors.hpp"
#include "mlci/mdp_cache.hpp"
#include "mlci/parallel.hpp"

namespace mlci {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out << std::setprecision(12) << v;
  return out.str();
}

std::string opt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

HypothesisBits bits_from(std::span<const Word> words, std::size_t size) {
  HypothesisBits bits(size);
  for (std::size_t i = 0; i < size; ++i)
    if (test_bit(words, i)) bits.set(i);
  return bits;
}

const std::string& primary_constraint(const ExperimentConfig& cfg) {
  if (cfg.true_constraints.empty()) throw ConfigError("config names no ground-truth constraint");
  return cfg.true_constraints.front();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string csv_header(const ExperimentConfig& cfg, const std::string& experiment, const std::string& units) {
  return "# mlci " + experiment + " config_hash=" + cfg.hash_hex() + " seed=" + std::to_string(cfg.seed) +
         " units: " + units;
}

std::filesystem::path write_output(const ExperimentConfig& cfg, const std::string& name, const std::string& contents) {
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  return path;
}

DemoSet obtain_demos(const ExperimentConfig& cfg, const std::string& constraint) {
  if (cfg.demo_source == "ingest") {
    std::ifstream in(cfg.demo_path);
    if (!in) throw ConfigError("cannot open demo file " + cfg.demo_path);
    DemoSet set;
    set.demos = read_demos_csv(in, cfg.system);
    if (set.demos.empty()) throw EmptyDataset("demo file " + cfg.demo_path + " holds no demonstrations");
    return set;
  }
  DemoGenOptions options = cfg.demogen;
  options.n_pairs = cfg.demo_count;
  options.seed = derive_seed(cfg.seed, fnv1a(constraint), 1);
  options.threads = cfg.threads;
  return generate_demos(cfg.system, cfg.constraint(constraint), options);
}

const DemoSet& DemoCache::get(const ExperimentConfig& cfg, const std::string& constraint) {
  auto it = sets_.find(constraint);
  if (it == sets_.end()) it = sets_.emplace(constraint, obtain_demos(cfg, constraint)).first;
  return it->second;
}

Model build_model(const ExperimentConfig& cfg, const std::vector<std::size_t>& cells, double dt) {
  Model m;
  m.grid = make_grid(cfg.system, cells);
  m.actions = make_actions(cfg.system, cfg.action_levels);
  const auto dims = cfg.hypothesis_dim_indices();
  m.hypotheses = build_hypotheses(cfg.system, dims, cfg.hypothesis_counts);
  m.mdp = build_mdp_cached(cfg.cache_dir, cfg.system, m.grid, m.actions, dt, m.hypotheses, cfg.substeps, cfg.threads);
  m.horizon = cfg.horizon_steps(dt);
  return m;
}

Model build_model(const ExperimentConfig& cfg) { return build_model(cfg, cfg.grid_cells, cfg.dt); }

HypothesisBits true_hypotheses(const HypothesisSet& hypotheses, const Box& truth) {
  HypothesisBits bits = hypotheses.covered_by(truth);
  if (bits.none())
    for (std::size_t i = 0; i < hypotheses.size(); ++i)
      if (hypotheses.region(i).intersects(truth)) bits.set(i);
  return bits;
}

// ---------------------------------------------------------------------------
// Accuracy

std::optional<double> AccuracyResult::mean_error(std::size_t cells, double dt) const {
  for (const auto& r : rows)
    if (r.constraint == "all" && r.cells == cells && r.dt == dt && r.rollouts > 0) return r.mean_error;
  return std::nullopt;
}

AccuracyResult run_accuracy_experiment(const ExperimentConfig& cfg) {
  AccuracyResult result;
  const std::size_t samples = std::max<std::size_t>(1, cfg.accuracy.samples_per_pair);

  // Benchmark pairs per constraint, shared by every (cells, dt) combination.
  std::map<std::string, std::vector<std::pair<StateVector, Goal>>> pairs;
  for (const auto& name : cfg.true_constraints) {
    DemoGenOptions options = cfg.demogen;
    options.n_pairs = cfg.accuracy.pairs;
    options.seed = derive_seed(cfg.seed, fnv1a(name), 2);
    pairs[name] = sample_pairs(cfg.system, cfg.constraint(name), options);
  }

  for (const auto& cells : cfg.accuracy.grids) {
    for (const double dt : cfg.accuracy.dts) {
      const Model model = build_model(cfg, cells, dt);
      double total = 0.0;
      AccuracyRow all{"all", product(cells), dt};
      for (const auto& name : cfg.true_constraints) {
        const HypothesisBits baseline = model.hypotheses.covered_by(cfg.constraint(name));
        const auto& set = pairs[name];
        std::vector<std::vector<double>> errors(set.size());
        parallel_for(set.size(), cfg.threads, [&](std::size_t p) {
          const auto& [start, goal] = set[p];
          const auto start_cell = model.grid.cell_of(start);
          if (!start_cell) return;
          try {
            PlanningProblem problem(model.mdp, squared_control_reward, model.horizon, *start_cell,
                                    goal_cells(model.grid, goal), baseline);
            const auto beta = backward_pass(problem);
            const auto pi = policy_from(problem, beta);
            for (std::size_t k = 0; k < samples; ++k) {
              const auto discrete = sample_trajectory(problem, pi, derive_seed(cfg.seed, fnv1a(name) + p, k + 3));
              std::vector<ControlVector> controls;
              for (const auto a : discrete.actions) controls.push_back(model.mdp.action(a));
              const auto traj = rollout(cfg.system, start, controls, dt, cfg.substeps);
              errors[p].push_back(normalized_goal_error(cfg.system, traj.states.back(), goal));
            }
          } catch (const GoalUnreachable&) {
          }
        });
        AccuracyRow row{name, product(cells), dt, set.size()};
        double sum = 0.0;
        for (const auto& e : errors) {
          if (e.empty()) ++row.skipped;
          for (const double v : e) sum += v;
          row.rollouts += e.size();
        }
        row.mean_error = row.rollouts ? sum / static_cast<double>(row.rollouts) : kNaN;
        all.pairs += row.pairs;
        all.skipped += row.skipped;
        all.rollouts += row.rollouts;
        total += sum;
        result.rows.push_back(row);
      }
      all.mean_error = all.rollouts ? total / static_cast<double>(all.rollouts) : kNaN;
      result.rows.push_back(all);
    }
  }

  std::ostringstream out;
  out << csv_header(cfg, "accuracy", "dt=s mean_error=normalized state distance") << '\n';
  out << "constraint,cells,dt,pairs,rollouts,skipped_unreachable,mean_error\n";
  for (const auto& r : result.rows) {
    out << r.constraint;
    out << ',' << r.cells << ',' << fmt(r.dt) << ',' << r.pairs << ',' << r.rollouts << ',' << r.skipped << ','
        << fmt(r.mean_error) << '\n';
  }
  result.csv = out.str();
  return result;
}

// ---------------------------------------------------------------------------
// Ranking

RankingResult run_ranking_experiment(const ExperimentConfig& cfg) {
  DemoCache cache;
  return run_ranking_experiment(cfg, cache);
}

RankingResult run_ranking_experiment(const ExperimentConfig& cfg, DemoCache& demos) {
  RankingResult result;
  std::ostringstream comments;
  for (const auto& name : cfg.true_constraints) {
    const DemoSet& set = demos.get(cfg, name);
    comments << "# demos " << name << ": accepted=" << set.demos.size()
             << " rejected=" << set.rejections.size() << '\n';
  }

  for (const auto& cells : cfg.ranking.grids) {
    for (const double dt : cfg.ranking.dts) {
      const Model model = build_model(cfg, cells, dt);
      const std::size_t H = model.hypotheses.size();
      const HypothesisBits none(H);
      for (const auto& name : cfg.true_constraints) {
        const DemoSet& set = demos.get(cfg, name);
        const HypothesisBits truth = true_hypotheses(model.hypotheses, cfg.constraint(name));
        std::vector<DemoEvaluation> evals(set.demos.size());
        parallel_for(set.demos.size(), cfg.threads, [&](std::size_t j) {
          evals[j] = evaluate_demo(model.mdp, model.hypotheses, set.demos[j], squared_control_reward, model.horizon,
                                   none);
        });
        for (const auto& e : evals)
          if (e.profile.intersects(truth)) ++result.truth_violations;

        const std::size_t n_max = std::min(cfg.ranking.max_demos, evals.size());
        double rank_sum = 0.0;
        std::size_t rank_count = 0;
        for (std::size_t k = 0; k < cfg.ranking.shuffles; ++k) {
          std::vector<std::size_t> order(evals.size());
          std::iota(order.begin(), order.end(), 0);
          std::mt19937_64 rng(derive_seed(cfg.seed, fnv1a(name), 100 + k));
          for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

          std::vector<std::vector<double>> phis;
          std::vector<HypothesisBits> profiles;
          std::optional<HypothesisBits> previous;
          std::size_t unreachable = 0;
          for (std::size_t n = 1; n <= n_max; ++n) {
            const auto& e = evals[order[n - 1]];
            phis.push_back(e.phi);
            profiles.push_back(e.profile);
            unreachable += e.reachable ? 0 : 1;
            RankingRow row;
            row.constraint = name;
            row.cells = product(cells);
            row.dt = dt;
            row.shuffle = k;
            row.n = n;
            row.unreachable = unreachable;
            const HypothesisBits feasible = feasible_set(profiles, H);
            if (previous) {
              HypothesisBits grown = feasible;
              grown &= *previous;
              if (!(grown == feasible)) ++result.feasibility_breaks;
            }
            previous = feasible;
            row.feasible = feasible.count();
            if (feasible.any()) {
              const Ranking ranking = rank_constraints(phis, feasible);
              row.top = ranking.ranked.front().hypothesis;
              for (const auto& p : profiles)
                if (p.test(*row.top)) ++result.remark_violations;
              for (const auto i : truth.indices()) {
                const auto r = ranking.rank_of(i);
                if (r && (!row.rank || *r < *row.rank)) row.rank = r;
              }
            }
            if (n == n_max && row.rank) {
              rank_sum += static_cast<double>(*row.rank);
              ++rank_count;
            }
            result.rows.push_back(row);
          }
        }
        RankingSummary s{name, product(cells), dt, n_max, cfg.ranking.shuffles};
        s.mean_rank = rank_count == cfg.ranking.shuffles && rank_count > 0 ? rank_sum / static_cast<double>(rank_count)
                                                                            : kNaN;
        s.accepted = set.demos.size();
        s.attempted = set.demos.size() + set.rejections.size();
        result.summary.push_back(s);
      }
    }
  }

  std::ostringstream out;
  out << csv_header(cfg, "ranking", "dt=s rank=1-based position among feasible hypotheses") << '\n';
  out << comments.str();
  for (const auto& s : result.summary)
    out << "# mean_rank " << s.constraint << " cells=" << s.cells << " dt=" << fmt(s.dt) << " n=" << s.n
        << " shuffles=" << s.shuffles << " value=" << fmt(s.mean_rank) << '\n';
  out << "constraint,cells,dt,shuffle,n,rank,feasible,top,unreachable\n";
  for (const auto& r : result.rows)
    out << r.constraint << ',' << r.cells << ',' << fmt(r.dt) << ',' << r.shuffle << ',' << r.n << ','
        << opt(r.rank) << ',' << r.feasible << ',' << opt(r.top) << ',' << r.unreachable << '\n';
  result.csv = out.str();
  return result;
}

// ---------------------------------------------------------------------------
// Distance

std::optional<DistanceRow> DistanceResult::combined(std::size_t cells, double dt) const {
  for (const auto& r : rows)
    if (r.constraint == "all" && r.cells == cells && r.dt == dt) return r;
  return std::nullopt;
}

DistanceResult run_distance_experiment(const ExperimentConfig& cfg) {
  DemoCache cache;
  return run_distance_experiment(cfg, cache);
}

DistanceResult run_distance_experiment(const ExperimentConfig& cfg, DemoCache& demos) {
  DistanceResult result;
  for (const auto& cells : cfg.distance.grids) {
    for (const double dt : cfg.distance.dts) {
      const Model model = build_model(cfg, cells, dt);
      DistanceRow all{"all", product(cells), dt};
      double total = 0.0;
      for (const auto& name : cfg.true_constraints) {
        const DemoSet& set = demos.get(cfg, name);
        const HypothesisBits baseline = model.hypotheses.covered_by(cfg.constraint(name));
        const std::size_t n = std::min(cfg.distance.trials, set.demos.size());
        std::vector<std::optional<double>> d(n);
        parallel_for(n, cfg.threads, [&](std::size_t j) {
          const auto e = evaluate_demo(model.mdp, model.hypotheses, set.demos[j], squared_control_reward,
                                       model.horizon, baseline);
          if (!e.reachable) return;
          const std::vector<HypothesisBits> profile{e.profile};
          d[j] = distribution_distance({e.phi}, profile);
        });
        DistanceRow row{name, product(cells), dt};
        double sum = 0.0;
        for (const auto& v : d) {
          if (!v) {
            ++row.skipped;
            continue;
          }
          sum += *v;
          ++row.trials;
        }
        row.mean_distance = row.trials ? sum / static_cast<double>(row.trials) : kNaN;
        all.trials += row.trials;
        all.skipped += row.skipped;
        total += sum;
        result.rows.push_back(row);
      }
      all.mean_distance = all.trials ? total / static_cast<double>(all.trials) : kNaN;
      result.rows.push_back(all);
    }
  }
  std::ostringstream out;
  out << csv_header(cfg, "distance", "dt=s distance=sum over hypotheses of |phi - indicator|") << '\n';
  out << "constraint,cells,dt,trials,skipped_unreachable,mean_distance\n";
  for (const auto& r : result.rows)
    out << r.constraint << ',' << r.cells << ',' << fmt(r.dt) << ',' << r.trials << ',' << r.skipped << ','
        << fmt(r.mean_distance) << '\n';
  result.csv = out.str();
  return result;
}

// ---------------------------------------------------------------------------
// Telescoping pendulum

TipResult run_tip_experiment(const ExperimentConfig& cfg) {
  DemoCache cache;
  return run_tip_experiment(cfg, cache);
}

TipResult run_tip_experiment(const ExperimentConfig& cfg, DemoCache& demos) {
  TipResult result;
  const std::string& name = primary_constraint(cfg);
  const Box& truth = cfg.constraint(name);
  const DemoSet& set = demos.get(cfg, name);
  if (set.demos.size() < cfg.tip_demos)
    throw EmptyDataset("only " + std::to_string(set.demos.size()) + " demonstrations accepted, " +
                       std::to_string(cfg.tip_demos) + " required");
  const std::vector<Demonstration> used(set.demos.begin(), set.demos.begin() + static_cast<long>(cfg.tip_demos));
  const Model model = build_model(cfg);
  result.states = model.mdp.state_count();
  result.actions = model.mdp.action_count();

  const auto t0 = std::chrono::steady_clock::now();
  result.report = infer_constraints(model.mdp, model.hypotheses, used, squared_control_reward, model.horizon,
                                    cfg.prior, std::max<std::size_t>(cfg.top_k, 2), cfg.threads);
  result.inference_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (std::size_t k = 0; k < 2 && k < result.report.top.size(); ++k) {
    const std::size_t i = result.report.top[k];
    result.top.push_back(i);
    result.top_intersects_truth.push_back(model.hypotheses.region(i).intersects(truth));
    for (const auto& d : result.report.demos)
      if (d.profile.test(i)) result.top_violated = true;
  }

  const std::string header = csv_header(cfg, "tip", "phi=probability score=nats");
  result.csv = report_csv(result.report, header);

  std::ostringstream out;
  out << header << '\n';
  out << "# states=" << result.states << " actions=" << result.actions << " demos=" << used.size() << '\n';
  out << "place,hypothesis,score";
  for (const auto d : cfg.hypothesis_dim_indices())
    out << ',' << cfg.system.state_dims[d].label << "_lower," << cfg.system.state_dims[d].label << "_upper";
  out << ",intersects_truth\n";
  for (std::size_t k = 0; k < result.top.size(); ++k) {
    const std::size_t i = result.top[k];
    out << k + 1 << ',' << i << ',' << fmt(result.report.ranking.scores[i]);
    for (const auto d : cfg.hypothesis_dim_indices()) {
      const auto& b = model.hypotheses.region(i).bounds[d];
      out << ',' << fmt(b.lower) << ',' << fmt(b.upper);
    }
    out << ',' << (result.top_intersects_truth[k] ? 1 : 0) << '\n';
  }
  result.summary_csv = out.str();
  return result;
}

// ---------------------------------------------------------------------------
// Confidence

ConfidenceResult run_confidence_report(const ExperimentConfig& cfg) {
  DemoCache cache;
  return run_confidence_report(cfg, cache);
}

ConfidenceResult run_confidence_report(const ExperimentConfig& cfg, DemoCache& demos) {
  ConfidenceResult result;
  const DemoSet& set = demos.get(cfg, primary_constraint(cfg));
  const std::size_t n = std::min(cfg.confidence_max_demos, set.demos.size());
  const std::vector<Demonstration> used(set.demos.begin(), set.demos.begin() + static_cast<long>(n));
  const Model model = build_model(cfg);
  const InferenceReport report = infer_constraints(model.mdp, model.hypotheses, used, squared_control_reward,
                                                   model.horizon, cfg.prior, 1, cfg.threads);
  if (report.top.empty()) throw EmptyDataset("no feasible hypothesis to report on");
  result.hypothesis = report.top.front();
  for (const auto& d : report.demos) result.phi.push_back(d.phi[result.hypothesis]);
  for (std::size_t k = 0; k <= n; ++k)
    result.posterior.push_back(posterior(cfg.prior, std::span<const double>(result.phi.data(), k)));

  std::ostringstream out;
  out << csv_header(cfg, "confidence", "phi=probability posterior=probability") << '\n';
  out << "# hypothesis=" << result.hypothesis << " prior=" << fmt(cfg.prior) << '\n';
  out << "n,demo_id,phi,posterior\n";
  out << 0 << ",," << ',' << fmt(result.posterior[0]) << '\n';
  for (std::size_t k = 1; k <= n; ++k)
    out << k << ',' << report.demos[k - 1].demo_id << ',' << fmt(result.phi[k - 1]) << ','
        << fmt(result.posterior[k]) << '\n';
  result.csv = out.str();
  return result;
}

// ---------------------------------------------------------------------------
// Side-by-side comparison

ComparisonResult compare_trajectories(const ExperimentConfig& cfg, std::size_t demo_id, std::uint64_t seed,
                                      DemoCache& demos) {
  ComparisonResult result;
  const std::string& name = primary_constraint(cfg);
  const DemoSet& set = demos.get(cfg, name);
  const auto it = std::find_if(set.demos.begin(), set.demos.end(), [&](const auto& d) { return d.id == demo_id; });
  if (it == set.demos.end()) throw ConfigError("no accepted demonstration with id " + std::to_string(demo_id));
  result.demo = *it;
  const Model model = build_model(cfg);
  const HypothesisBits baseline = model.hypotheses.covered_by(cfg.constraint(name));
  const auto start = model.grid.cell_of(result.demo.start);
  if (!start) throw ContractViolation("demonstration starts outside the grid");
  PlanningProblem problem(model.mdp, squared_control_reward, model.horizon, *start,
                          goal_cells(model.grid, result.demo.goal), baseline);
  const auto solution = solve_maxent(problem, cfg.threads);
  result.discrete = sample_trajectory(problem, solution.policy, seed);
  result.demo_violations = demo_violations(result.demo, model.hypotheses);

  const auto& sys = cfg.system;
  std::ostringstream out;
  out << csv_header(cfg, "compare", units_fragment(sys)) << '\n';
  out << "# demo=" << demo_id << " sample_seed=" << seed << '\n';
  out << "# demo_violations=" << result.demo_violations.to_string() << '\n';
  out << "# discrete_violations=" << result.discrete.violations.to_string() << '\n';
  out << "source,step,t,cell";
  for (const auto& d : sys.state_dims) out << ',' << d.label;
  out << ",violations\n";
  const auto& traj = result.demo.trajectory;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto cell = model.grid.cell_of(traj.states[k]);
    out << "continuous," << k << ',' << fmt(static_cast<double>(k) * traj.dt_sim) << ',' << opt(cell);
    for (Eigen::Index d = 0; d < traj.states[k].size(); ++d) out << ',' << fmt(traj.states[k][d]);
    out << ',' << model.hypotheses.membership(traj.states[k]).to_string() << '\n';
  }
  const std::size_t H = model.hypotheses.size();
  for (std::size_t k = 0; k < result.discrete.cells.size(); ++k) {
    const CellIndex c = result.discrete.cells[k];
    out << "discrete," << k << ',' << fmt(static_cast<double>(k) * model.mdp.dt()) << ',' << c;
    const auto& x = model.mdp.center(c);
    for (Eigen::Index d = 0; d < x.size(); ++d) out << ',' << fmt(x[d]);
    HypothesisBits bits = bits_from(model.mdp.center_violations(c), H);
    if (k > 0) bits |= bits_from(model.mdp.violations(result.discrete.cells[k - 1], result.discrete.actions[k - 1]), H);
    out << ',' << bits.to_string() << '\n';
  }
  result.csv = out.str();
  return result;
}

// ---------------------------------------------------------------------------
// Plain inference

InferResult run_inference(const ExperimentConfig& cfg, DemoCache& demos) {
  InferResult result;
  const DemoSet& set = demos.get(cfg, cfg.demo_source == "ingest" ? std::string("ingest") : primary_constraint(cfg));
  const Model model = build_model(cfg);
  result.report = infer_constraints(model.mdp, model.hypotheses, set.demos, squared_control_reward, model.horizon,
                                    cfg.prior, cfg.top_k, cfg.threads);
  result.csv = report_csv(result.report, csv_header(cfg, "infer", "phi=probability score=nats"));
  result.summary = report_summary(result.report, model.hypotheses, cfg.system);
  return result;
}

}  // namespace mlci
