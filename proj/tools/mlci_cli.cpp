#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mlci/config.hpp"
#include "mlci/demo_io.hpp"
#include "mlci/errors.hpp"
#include "mlci/experiments.hpp"
#include "mlci/mdp_cache.hpp"

using namespace mlci;

namespace {

struct Options {
  std::string config = "pendulum";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<std::string> cache;
  std::optional<std::size_t> demo;
  std::uint64_t sample_seed = 0;
};

ExperimentConfig load(const Options& o) {
  if (!std::filesystem::exists(o.config) && o.config != "pendulum" && o.config != "tip")
    throw ConfigError("no config file or built-in system named '" + o.config + "'");
  ExperimentConfig cfg = std::filesystem::exists(o.config) ? load_config(o.config) : default_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  if (o.cache) cfg.cache_dir = *o.cache;
  return cfg;
}

void report(const std::filesystem::path& path) { std::cout << "wrote " << path.string() << '\n'; }

int build_mdp_cmd(const ExperimentConfig& cfg) {
  const Model m = build_model(cfg);
  std::cout << "states " << m.mdp.state_count() << ", actions " << m.mdp.action_count() << ", hypotheses "
            << m.mdp.hypothesis_count() << ", dt " << m.mdp.dt() << '\n';
  std::size_t invalid = 0;
  for (const auto s : m.mdp.successor_table()) invalid += s == TabularMdp::kInvalid;
  std::cout << "invalid transitions " << invalid << " (" << m.mdp.diverged_count() << " diverged)\n";
  if (cfg.cache_dir.empty()) {
    const auto key = mdp_cache_key(cfg.system, m.grid, m.actions, cfg.dt, m.hypotheses, cfg.substeps);
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "mdp.bin";
    save_mdp(path, m.mdp, key);
    report(path);
  } else {
    std::cout << "cached in " << cfg.cache_dir << '\n';
  }
  return 0;
}

int gen_demos_cmd(const ExperimentConfig& cfg) {
  DemoCache cache;
  for (const auto& name : cfg.true_constraints) {
    const DemoSet& set = cache.get(cfg, name);
    std::ostringstream csv;
    write_demos_csv(csv, cfg.system, set.demos,
                    csv_header(cfg, "demos constraint=" + name, units_fragment(cfg.system)));
    report(write_output(cfg, "demos_" + name + ".csv", csv.str()));
    std::ostringstream rej;
    rej << csv_header(cfg, "rejections constraint=" + name, "goal_error=normalized state distance") << '\n';
    rej << "pair,reason,goal_error\n";
    for (const auto& r : set.rejections) rej << r.pair << ',' << r.reason << ',' << r.goal_error << '\n';
    report(write_output(cfg, "rejections_" + name + ".csv", rej.str()));
    std::cout << name << ": accepted " << set.demos.size() << " of "
              << set.demos.size() + set.rejections.size() << " pairs\n";
  }
  return 0;
}

int infer_cmd(const ExperimentConfig& cfg) {
  DemoCache cache;
  const auto r = run_inference(cfg, cache);
  report(write_output(cfg, "inference.csv", r.csv));
  std::cout << r.summary;
  return 0;
}

int accuracy_cmd(const ExperimentConfig& cfg) {
  const auto r = run_accuracy_experiment(cfg);
  report(write_output(cfg, "accuracy.csv", r.csv));
  return 0;
}

int ranking_cmd(const ExperimentConfig& cfg) {
  const auto r = run_ranking_experiment(cfg);
  report(write_output(cfg, "ranking.csv", r.csv));
  for (const auto& s : r.summary)
    std::cout << s.constraint << " cells=" << s.cells << " dt=" << s.dt << ": mean rank at N=" << s.n << " is "
              << s.mean_rank << '\n';
  if (r.remark_violations) std::cout << "top-ranked hypothesis violated by a demo in " << r.remark_violations << " runs\n";
  return 0;
}

int distance_cmd(const ExperimentConfig& cfg) {
  const auto r = run_distance_experiment(cfg);
  report(write_output(cfg, "distance.csv", r.csv));
  return 0;
}

int tip_cmd(const ExperimentConfig& cfg) {
  const auto r = run_tip_experiment(cfg);
  report(write_output(cfg, "tip_inference.csv", r.csv));
  report(write_output(cfg, "tip_top.csv", r.summary_csv));
  std::cout << r.states << " states, " << r.actions << " actions, inference took " << r.inference_seconds << " s\n";
  for (std::size_t k = 0; k < r.top.size(); ++k)
    std::cout << "top " << k + 1 << ": hypothesis " << r.top[k]
              << (r.top_intersects_truth[k] ? " intersects" : " misses") << " the true constraint\n";
  return 0;
}

int confidence_cmd(const ExperimentConfig& cfg) {
  const auto r = run_confidence_report(cfg);
  report(write_output(cfg, "confidence.csv", r.csv));
  return 0;
}

int compare_cmd(const ExperimentConfig& cfg, const Options& o) {
  DemoCache cache;
  const std::size_t id = o.demo.value_or(cfg.compare_demo);
  const auto r = compare_trajectories(cfg, id, o.sample_seed ? o.sample_seed : derive_seed(cfg.seed, id), cache);
  report(write_output(cfg, "compare_demo" + std::to_string(id) + ".csv", r.csv));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum likelihood constraint inference on discretized continuous dynamics"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "config file, or a built-in name (pendulum, tip)");
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--cache", o.cache, "MDP cache directory");
  };

  struct Verb {
    const char* name;
    const char* help;
  };
  const Verb verbs[] = {
      {"build-mdp", "build the tabular MDP and store it"},
      {"gen-demos", "generate demonstrations for each ground-truth constraint"},
      {"infer", "rank constraints from demonstrations"},
      {"accuracy", "discrete policy rollouts under the continuous dynamics"},
      {"ranking", "rank of the true constraint as demonstrations accumulate"},
      {"distance", "model vs demonstration violation distance"},
      {"tip", "telescoping pendulum inference"},
      {"confidence", "posterior of the top constraint as demonstrations accumulate"},
      {"compare", "continuous demonstration next to a sampled discrete trajectory"},
  };
  std::map<std::string, CLI::App*> cmds;
  for (const auto& v : verbs) {
    auto* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd);
    cmds[v.name] = cmd;
  }
  cmds["compare"]->add_option("--demo", o.demo, "demonstration id");
  cmds["compare"]->add_option("--sample-seed", o.sample_seed, "seed for the discrete sample");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = load(o);
    if (cmds["build-mdp"]->parsed()) return build_mdp_cmd(cfg);
    if (cmds["gen-demos"]->parsed()) return gen_demos_cmd(cfg);
    if (cmds["infer"]->parsed()) return infer_cmd(cfg);
    if (cmds["accuracy"]->parsed()) return accuracy_cmd(cfg);
    if (cmds["ranking"]->parsed()) return ranking_cmd(cfg);
    if (cmds["distance"]->parsed()) return distance_cmd(cfg);
    if (cmds["tip"]->parsed()) return tip_cmd(cfg);
    if (cmds["confidence"]->parsed()) return confidence_cmd(cfg);
    if (cmds["compare"]->parsed()) return compare_cmd(cfg, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
